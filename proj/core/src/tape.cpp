#include "semcom/tape.hpp"

#include <atomic>
#include <utility>

#include "semcom/errors.hpp"

namespace semcom::tensor {

namespace {

std::uint64_t next_tape_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  const auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] += s[i];
  }
}

}  // namespace

Tape::Tape() : id_(next_tape_id()) {}

std::size_t Tape::resolve(Value v) const {
  if (v.tape_id_ != id_ || v.index_ >= nodes_.size()) {
    throw GraphError("value does not belong to this tape");
  }
  return v.index_;
}

Value Tape::push_node(Node node) {
  nodes_.push_back(std::move(node));
  return Value(id_, nodes_.size() - 1);
}

const Tensor& Tape::value(Value v) const { return nodes_[resolve(v)].value; }

Value Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return push_node(std::move(node));
}

Value Tape::parameter(Parameter& param) {
  Node node;
  node.value = param.value;
  node.requires_grad = true;
  node.param = &param;
  return push_node(std::move(node));
}

Value Tape::record(std::string name, std::span<const Value> inputs, Tensor output,
                   BackwardFn backward) {
  Op op;
  op.name = std::move(name);
  bool requires_grad = false;
  for (const Value& in : inputs) {
    const std::size_t idx = resolve(in);
    op.inputs.push_back(idx);
    requires_grad = requires_grad || nodes_[idx].requires_grad;
  }
  Node node;
  node.value = std::move(output);
  node.requires_grad = requires_grad;
  node.producer = ops_.size();
  const Value out = push_node(std::move(node));
  op.output = out.index_;
  op.backward = std::move(backward);
  ops_.push_back(std::move(op));
  return out;
}

Value Tape::conv2d(Value input, Value weight, Value bias, ConvGeometry geometry) {
  Tensor out = tensor::conv2d(value(input), value(weight), value(bias), geometry);
  return record("conv2d", {input, weight, bias}, std::move(out),
                [geometry](const BackwardContext& ctx) -> std::vector<std::optional<Tensor>> {
                  ConvGradients g = conv2d_backward(*ctx.inputs[0], *ctx.inputs[1], ctx.grad_output, geometry);
                  return {std::move(g.input), std::move(g.weight), std::move(g.bias)};
                });
}

Value Tape::conv_transpose2d(Value input, Value weight, Value bias, ConvGeometry geometry) {
  Tensor out = tensor::conv_transpose2d(value(input), value(weight), value(bias), geometry);
  return record("conv_transpose2d", {input, weight, bias}, std::move(out),
                [geometry](const BackwardContext& ctx) -> std::vector<std::optional<Tensor>> {
                  ConvGradients g =
                      conv_transpose2d_backward(*ctx.inputs[0], *ctx.inputs[1], ctx.grad_output, geometry);
                  return {std::move(g.input), std::move(g.weight), std::move(g.bias)};
                });
}

Value Tape::activation(Value input, Activation activation) {
  Tensor out = activate(value(input), activation);
  return record("activation", {input}, std::move(out),
                [activation](const BackwardContext& ctx) -> std::vector<std::optional<Tensor>> {
                  return {activate_backward(*ctx.inputs[0], ctx.output, ctx.grad_output, activation)};
                });
}

Value Tape::mse_loss(Value pred, Value target) {
  const double loss = mse(value(pred), value(target));
  return record("mse_loss", {pred, target}, Tensor::scalar(static_cast<float>(loss)),
                [](const BackwardContext& ctx) -> std::vector<std::optional<Tensor>> {
                  const Tensor& p = *ctx.inputs[0];
                  const Tensor& t = *ctx.inputs[1];
                  const double scale = 2.0 * ctx.grad_output.item_value() / static_cast<double>(p.numel());
                  Tensor dp(p.shape());
                  Tensor dt(p.shape());
                  for (std::size_t i = 0; i < p.numel(); ++i) {
                    const double d = (static_cast<double>(p[i]) - static_cast<double>(t[i])) * scale;
                    dp[i] = static_cast<float>(d);
                    dt[i] = static_cast<float>(-d);
                  }
                  return {std::move(dp), std::move(dt)};
                });
}

void Tape::accumulate(std::size_t node, const Tensor& grad) {
  Node& n = nodes_[node];
  if (!n.requires_grad) {
    return;
  }
  require_same_shape(n.value.shape(), grad.shape(), "gradient accumulation");
  if (!n.has_grad) {
    n.grad = grad;
    n.has_grad = true;
  } else {
    add_into(n.grad, grad);
  }
}

void Tape::backward(Value loss) {
  const std::size_t root = resolve(loss);
  if (!nodes_[root].producer) {
    throw GraphError("backward() root is a leaf, not the output of a recorded op");
  }
  if (nodes_[root].value.numel() != 1) {
    throw GraphError("backward() root must be a scalar, got shape " +
                     nodes_[root].value.shape().to_string());
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  visited_.clear();

  nodes_[root].grad = Tensor::scalar(1.0f);
  nodes_[root].has_grad = nodes_[root].requires_grad;
  const std::size_t last_op = *nodes_[root].producer;

  for (std::size_t k = last_op + 1; k-- > 0;) {
    const Op& op = ops_[k];
    Node& out = nodes_[op.output];
    if (!out.has_grad) {
      continue;
    }
    visited_.push_back(k);
    std::vector<const Tensor*> inputs;
    inputs.reserve(op.inputs.size());
    for (std::size_t idx : op.inputs) {
      inputs.push_back(&nodes_[idx].value);
    }
    std::vector<std::optional<Tensor>> grads =
        op.backward(BackwardContext{out.grad, inputs, out.value});
    if (grads.size() != op.inputs.size()) {
      throw GraphError("op '" + op.name + "' returned " + std::to_string(grads.size()) +
                       " gradients for " + std::to_string(op.inputs.size()) + " inputs");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (grads[i]) {
        accumulate(op.inputs[i], *grads[i]);
      }
    }
  }

  for (Node& n : nodes_) {
    if (n.param != nullptr && n.has_grad) {
      add_into(n.param->grad, n.grad);
    }
  }
}

}  // namespace semcom::tensor
