#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semcom/kernels.hpp"
#include "semcom/parameter.hpp"
#include "semcom/tensor.hpp"

namespace semcom::tensor {

class Tape;

/// Handle to a tensor recorded on a Tape. Only the owning tape can resolve it.
class Value {
 public:
  Value() = default;

  [[nodiscard]] std::size_t index() const { return index_; }
  [[nodiscard]] bool valid() const { return tape_id_ != 0; }

 private:
  friend class Tape;
  Value(std::uint64_t tape_id, std::size_t index) : tape_id_(tape_id), index_(index) {}

  std::uint64_t tape_id_ = 0;
  std::size_t index_ = 0;
};

/// Reverse-mode recorder.
///
/// Every differentiable op appends one record; backward() replays the records
/// in exact reverse order and accumulates into the Parameters registered with
/// parameter(). The tape holds Parameter pointers, so registered parameters
/// must outlive the backward call.
class Tape {
 public:
  /// What a recorded op sees during backward(): the gradient of its output
  /// plus the forward values of its inputs and output.
  struct BackwardContext {
    const Tensor& grad_output;
    std::span<const Tensor* const> inputs;
    const Tensor& output;
  };

  /// Returns one gradient per input, in the order passed to record(). An empty
  /// optional means "no gradient for this input".
  using BackwardFn = std::function<std::vector<std::optional<Tensor>>(const BackwardContext&)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  /// Leaf that never receives a gradient.
  Value constant(Tensor value);
  /// Leaf whose gradient flows into `param.grad` on backward().
  Value parameter(Parameter& param);

  Value conv2d(Value input, Value weight, Value bias, ConvGeometry geometry);
  Value conv_transpose2d(Value input, Value weight, Value bias, ConvGeometry geometry);
  Value activation(Value input, Activation activation);
  /// Scalar [1,1,1,1] mean squared error.
  Value mse_loss(Value pred, Value target);

  /// Records a user-defined differentiable op whose forward result is `output`.
  Value record(std::string name, std::span<const Value> inputs, Tensor output, BackwardFn backward);
  Value record(std::string name, std::initializer_list<Value> inputs, Tensor output,
               BackwardFn backward) {
    return record(std::move(name), std::span<const Value>(inputs.begin(), inputs.size()),
                  std::move(output), std::move(backward));
  }

  [[nodiscard]] const Tensor& value(Value v) const;

  /// Populates gradients for everything upstream of `loss`. Throws GraphError
  /// unless `loss` is a scalar produced by an op on this tape.
  void backward(Value loss);

  [[nodiscard]] std::size_t op_count() const { return ops_.size(); }
  [[nodiscard]] const std::string& op_name(std::size_t op) const { return ops_.at(op).name; }
  /// Op indices in the order the last backward() visited them.
  [[nodiscard]] std::span<const std::size_t> last_backward_order() const { return visited_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::optional<std::size_t> producer;
    Parameter* param = nullptr;
  };

  struct Op {
    std::string name;
    std::vector<std::size_t> inputs;
    std::size_t output = 0;
    BackwardFn backward;
  };

  std::size_t resolve(Value v) const;
  Value push_node(Node node);
  void accumulate(std::size_t node, const Tensor& grad);

  std::uint64_t id_ = 0;
  std::vector<Node> nodes_;
  std::vector<Op> ops_;
  std::vector<std::size_t> visited_;
};

}  // namespace semcom::tensor
