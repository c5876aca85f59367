#include "semcom/adam.hpp"

#include <cmath>

#include "semcom/errors.hpp"

namespace semcom::tensor {

void adam_step(std::span<Parameter> params, AdamState& state) {
  if (state.first_moment.empty() && state.step == 0) {
    for (const Parameter& p : params) {
      state.first_moment.emplace_back(p.value.shape());
      state.second_moment.emplace_back(p.value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ConfigError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                      " parameters, got " + std::to_string(params.size()));
  }

  state.step += 1;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    require_same_shape(m.shape(), p.value.shape(), "adam_step moment");
    auto value = p.value.data();
    const auto grad = p.grad.data();
    auto m1 = m.data();
    auto m2 = v.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      const double mi = o.beta1 * m1[i] + (1.0 - o.beta1) * g;
      const double vi = o.beta2 * m2[i] + (1.0 - o.beta2) * g * g;
      m1[i] = static_cast<float>(mi);
      m2[i] = static_cast<float>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      value[i] = static_cast<float>(value[i] - o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon));
    }
    p.zero_grad();
  }
}

}  // namespace semcom::tensor
