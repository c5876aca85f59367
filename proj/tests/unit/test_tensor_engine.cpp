#include <doctest.h>

#include <cmath>
#include <cstring>

#include "gradcheck.hpp"
#include "random_tensor.hpp"
#include "reference_ops.hpp"
#include "semcom/adam.hpp"
#include "semcom/errors.hpp"
#include "semcom/kernels.hpp"
#include "semcom/tape.hpp"

using namespace semcom;
using namespace semcom::tensor;
using semcom::testing::random_tensor;
using semcom::testing::RefTensor;

namespace {

Tensor zero_bias(std::size_t channels) { return Tensor(Shape{1, channels, 1, 1}); }

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("tensor construction enforces the shape/data invariant") {
  CHECK(Tensor(Shape{2, 3, 4, 5}).numel() == 120);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{1, 0, 2, 2}), ShapeError);
  CHECK_THROWS_AS((void)Tensor(Shape{1, 1, 2, 2}).item_value(), ShapeError);

  const Tensor t = random_tensor({3, 2, 2, 2}, 1);
  const Tensor mid = t.slice_batch(1, 1);
  CHECK(mid.shape() == Shape{1, 2, 2, 2});
  CHECK(mid[0] == t[8]);
  const Tensor parts[] = {t.slice_batch(0, 1), t.slice_batch(1, 2)};
  CHECK(concat_batch(parts) == t);
}

TEST_CASE("conv2d examples") {
  SUBCASE("identity kernel") {
    const Tensor out = conv2d(Tensor(Shape{}, 2.0f), Tensor(Shape{}, 1.0f), zero_bias(1), {});
    CHECK(out.shape() == Shape{});
    CHECK(out[0] == 2.0f);
  }
  SUBCASE("zero input passes only the bias") {
    const Tensor out = conv2d(Tensor(Shape{1, 1, 4, 4}), random_tensor({1, 1, 3, 3}, 2),
                              Tensor(Shape{1, 1, 1, 1}, 0.5f), {1, 1});
    CHECK(out.shape() == Shape{1, 1, 4, 4});
    for (float v : out.data()) CHECK(v == 0.5f);
  }
  SUBCASE("3x3 ramp against an all-ones kernel sums to 45") {
    const Tensor in(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor out = conv2d(in, Tensor(Shape{1, 1, 3, 3}, 1.0f), zero_bias(1), {});
    CHECK(out.shape() == Shape{});
    CHECK(out[0] == 45.0f);
    const RefTensor ref = testing::ref_conv2d(RefTensor(in), RefTensor(Tensor(Shape{1, 1, 3, 3}, 1.0f)),
                                              RefTensor(zero_bias(1)), 1, 0);
    CHECK(ref.v[0] == 45.0);
  }
}

TEST_CASE("conv2d matches the naive reference on random strided/padded inputs") {
  const struct {
    Shape in;
    Shape w;
    ConvGeometry g;
  } configs[] = {{{2, 3, 7, 6}, {4, 3, 3, 3}, {1, 1}}, {{1, 2, 8, 8}, {5, 2, 4, 4}, {2, 1}},
                 {{3, 1, 5, 5}, {2, 1, 2, 2}, {3, 0}}, {{1, 4, 6, 6}, {3, 4, 1, 1}, {1, 2}}};
  std::uint64_t seed = 10;
  for (const auto& c : configs) {
    const Tensor x = random_tensor(c.in, seed++);
    const Tensor w = random_tensor(c.w, seed++);
    const Tensor b = random_tensor({1, c.w.n, 1, 1}, seed++);
    const Tensor out = conv2d(x, w, b, c.g);
    const RefTensor ref = testing::ref_conv2d(RefTensor(x), RefTensor(w), RefTensor(b), c.g.stride, c.g.padding);
    REQUIRE(out.shape() == Shape{ref.n, ref.c, ref.h, ref.w});
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == doctest::Approx(ref.v[i]).epsilon(1e-5));
  }
}

TEST_CASE("conv2d rejects bad configurations") {
  CHECK_THROWS_AS(conv2d(Tensor(Shape{1, 2, 4, 4}), Tensor(Shape{1, 3, 3, 3}), zero_bias(1), {}), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor(Shape{1, 1, 2, 2}), Tensor(Shape{1, 1, 3, 3}), zero_bias(1), {}), ConfigError);
  CHECK_THROWS_AS(conv2d(Tensor(Shape{1, 1, 4, 4}), Tensor(Shape{1, 1, 3, 3}), zero_bias(1), {0, 0}), ConfigError);
  CHECK_THROWS_AS(conv2d(Tensor(Shape{1, 1, 4, 4}), Tensor(Shape{1, 1, 3, 3}), zero_bias(2), {}), ShapeError);
}

TEST_CASE("conv_transpose2d examples") {
  SUBCASE("single element broadcast through the kernel") {
    const Tensor out = conv_transpose2d(Tensor(Shape{}, 3.0f), Tensor(Shape{1, 1, 2, 2}, 1.0f), zero_bias(1), {2, 0});
    CHECK(out.shape() == Shape{1, 1, 2, 2});
    for (float v : out.data()) CHECK(v == 3.0f);
  }
  SUBCASE("stride-2 K4 P1 pair restores the spatial extent") {
    const Tensor x = random_tensor({1, 3, 32, 32}, 3);
    const Tensor down = conv2d(x, random_tensor({8, 3, 4, 4}, 4), zero_bias(8), {2, 1});
    CHECK(down.shape() == Shape{1, 8, 16, 16});
    const Tensor up = conv_transpose2d(down, random_tensor({8, 5, 4, 4}, 5), zero_bias(5), {2, 1});
    CHECK(up.shape() == Shape{1, 5, 32, 32});
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(conv_transpose2d(Tensor(Shape{1, 2, 3, 3}), Tensor(Shape{3, 1, 2, 2}), zero_bias(1), {1, 0}),
                    ShapeError);
  }
}

TEST_CASE("conv_transpose2d equals the input-adjoint of conv2d") {
  // <conv2d(u, W), x> == <conv_transpose2d(x, W), u> for every u; checking
  // against the naive scatter reference covers the elementwise claim.
  const Tensor x = random_tensor({1, 2, 5, 5}, 20);
  const Tensor w = random_tensor({2, 3, 3, 3}, 21);  // [Cin_t, Cout_t, K, K]
  const Tensor b = zero_bias(3);
  const ConvGeometry g{2, 1};
  const Tensor out = conv_transpose2d(x, w, b, g);
  const RefTensor ref = testing::ref_conv_transpose2d(RefTensor(x), RefTensor(w), RefTensor(b), 2, 1);
  REQUIRE(out.shape() == Shape{1, 3, 9, 9});
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(std::abs(out[i] - ref.v[i]) < 1e-5);

  const Tensor u = random_tensor(out.shape(), 22);
  const RefTensor cu = testing::ref_conv2d(RefTensor(u), RefTensor(w), RefTensor(zero_bias(2)), 2, 1);
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) lhs += cu.v[i] * x[i];
  for (std::size_t i = 0; i < u.numel(); ++i) rhs += ref.v[i] * u[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("activation examples") {
  const Tensor in(Shape{1, 1, 1, 3}, {-1.0f, 2.5f, 0.0f});
  const Tensor r = activate(in, Activation::relu());
  CHECK(r[0] == 0.0f);
  CHECK(r[1] == 2.5f);
  CHECK(activate(Tensor::scalar(0.0f), Activation::sigmoid())[0] == 0.5f);
  CHECK(activate(Tensor::scalar(-2.0f), Activation::leaky_relu(0.2f))[0] == doctest::Approx(-0.4));

  const Tensor extremes(Shape{1, 1, 1, 4}, {-1000.0f, -50.0f, 50.0f, 1000.0f});
  const Tensor squashed = activate(extremes, Activation::sigmoid());
  for (float v : squashed.data()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("mse examples and symmetry") {
  const Tensor ones(Shape{1, 2, 3, 3}, 1.0f);
  CHECK(mse(ones, ones) == 0.0);
  CHECK(std::isfinite(mse(ones, ones)));
  CHECK(mse(ones, Tensor(Shape{1, 2, 3, 3})) == 1.0);
  CHECK(mse(Tensor(Shape{1, 1, 1, 2}, {1, 2}), Tensor(Shape{1, 1, 1, 2})) == 2.5);
  CHECK_THROWS_AS(mse(ones, Tensor(Shape{1, 2, 3, 4})), ShapeError);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = random_tensor({2, 3, 4, 4}, seed);
    const Tensor b = random_tensor({2, 3, 4, 4}, seed + 100);
    CHECK(mse(a, b) == mse(b, a));
    CHECK(mse(a, b) > 0.0);
  }
}

TEST_CASE("conv2d is linear in its input when the bias is zero") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor x = random_tensor({1, 3, 8, 8}, seed);
    const Tensor w = random_tensor({4, 3, 3, 3}, seed + 50);
    const float alpha = static_cast<float>(0.25 + 0.5 * static_cast<double>(seed));
    Tensor scaled = x;
    for (float& v : scaled.data()) v *= alpha;
    const Tensor a = conv2d(scaled, w, zero_bias(4), {1, 1});
    const Tensor b = conv2d(x, w, zero_bias(4), {1, 1});
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - alpha * b[i]) <= 1e-5 * std::max(1.0f, std::abs(a[i])));
  }
}

TEST_CASE("backward examples") {
  SUBCASE("chain rule through a scalar product") {
    Parameter w("w", Tensor::scalar(1.0f));
    Tape tape;
    const Value y = tape.conv2d(tape.constant(Tensor::scalar(2.0f)), tape.parameter(w), tape.constant(zero_bias(1)), {});
    tape.backward(tape.mse_loss(y, tape.constant(Tensor::scalar(0.0f))));
    CHECK(w.grad[0] == doctest::Approx(8.0));
  }
  SUBCASE("unused parameter keeps a zero gradient") {
    Parameter used("used", Tensor::scalar(1.0f));
    Parameter unused("unused", Tensor::scalar(1.0f));
    Tape tape;
    tape.parameter(unused);
    const Value a = tape.activation(tape.parameter(used), Activation::sigmoid());
    tape.backward(tape.mse_loss(a, tape.constant(Tensor::scalar(0.0f))));
    CHECK(unused.grad[0] == 0.0f);
    CHECK(used.grad[0] != 0.0f);
  }
  SUBCASE("gradients from repeated uses add up") {
    // L = (2w - w)^2 = w^2: the branches contribute 4w and -2w.
    Parameter w("w", Tensor::scalar(1.5f));
    Tape tape;
    const Value doubled = tape.conv2d(tape.constant(Tensor::scalar(2.0f)), tape.parameter(w),
                                      tape.constant(zero_bias(1)), {});
    tape.backward(tape.mse_loss(doubled, tape.parameter(w)));
    CHECK(w.grad[0] == doctest::Approx(3.0));
  }
  SUBCASE("accumulates across backward calls until zeroed") {
    Parameter w("w", Tensor::scalar(2.0f));
    for (int i = 0; i < 3; ++i) {
      Tape tape;
      tape.backward(tape.mse_loss(tape.parameter(w), tape.constant(Tensor::scalar(0.0f))));
    }
    CHECK(w.grad[0] == doctest::Approx(12.0));
  }
}

TEST_CASE("shared parameter used in two branches sums both contributions") {
  // L = mse(relu(w), 0) + ... expressed as mse over a two-branch graph: the
  // same parameter feeds both operands of an mse.
  Parameter p("p", Tensor(Shape{1, 1, 1, 2}, {0.5f, -0.25f}));
  Tape tape;
  const Value left = tape.activation(tape.parameter(p), Activation::leaky_relu(0.5f));
  const Value right = tape.parameter(p);
  tape.backward(tape.mse_loss(left, right));
  // L = mean((f(p) - p)^2); f(p) = p for p > 0, 0.5 p otherwise.
  // p0 = 0.5: f - p = 0 -> grad 0. p1 = -0.25: d = f - p = 0.125, dL/dp = 2 d (0.5 - 1) / 2.
  CHECK(p.grad[0] == doctest::Approx(0.0));
  CHECK(p.grad[1] == doctest::Approx(2.0 * 0.125 * (0.5 - 1.0) / 2.0));
}

TEST_CASE("backward visits ops in exact reverse order") {
  Parameter w("w", random_tensor({2, 1, 3, 3}, 7));
  Parameter b("b", zero_bias(2));
  Tape tape;
  Value x = tape.constant(random_tensor({1, 1, 6, 6}, 8));
  x = tape.conv2d(x, tape.parameter(w), tape.parameter(b), {1, 1});
  x = tape.activation(x, Activation::relu());
  x = tape.activation(x, Activation::sigmoid());
  const Value loss = tape.mse_loss(x, tape.constant(Tensor(Shape{1, 2, 6, 6})));
  tape.backward(loss);
  const std::vector<std::size_t> expected{3, 2, 1, 0};
  const auto order = tape.last_backward_order();
  CHECK(std::vector<std::size_t>(order.begin(), order.end()) == expected);
  CHECK(tape.op_name(0) == "conv2d");
  CHECK(tape.op_name(3) == "mse_loss");
}

TEST_CASE("backward graph errors") {
  Tape tape;
  Parameter w("w", Tensor::scalar(1.0f));
  const Value leaf = tape.parameter(w);
  CHECK_THROWS_AS(tape.backward(leaf), GraphError);
  const Value non_scalar = tape.activation(tape.constant(Tensor(Shape{1, 1, 2, 2})), Activation::relu());
  CHECK_THROWS_AS(tape.backward(non_scalar), GraphError);

  Tape other;
  const Value foreign = other.mse_loss(other.constant(Tensor::scalar(1.0f)), other.constant(Tensor::scalar(0.0f)));
  CHECK_THROWS_AS(tape.backward(foreign), GraphError);
  CHECK_THROWS_AS(tape.backward(Value{}), GraphError);
}

TEST_CASE("every layer passes a central finite-difference check") {
  for (const auto& gc : testing::layer_grad_cases(99)) {
    const testing::GradReport r = testing::run_gradcheck(gc, 400, 5);
    CHECK(r.checked >= 200);
    INFO(gc.name << " worst analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("the finite-difference check still catches small backward errors") {
  // power_normalize with a hand-written backward that is either scaled by
  // 1.001 or missing the projection term; both must be flagged.
  const Tensor x = testing::uniform_tensor({1, 4, 6, 6}, 21, 0.5, 1.0);
  const Tensor y0 = semcom::codec::power_normalize(x);
  const Tensor target = testing::shifted_target(y0, testing::offsets(y0.shape(), 22, false));
  for (bool drop_projection : {false, true}) {
    testing::GradCase gc{"broken_pn", {x}, nullptr, nullptr};
    gc.taped_loss = [=](Tape& t, std::span<const Value> v) {
      const Tensor xin = t.value(v[0]);
      const Value out = t.record("broken_pn", {v[0]}, semcom::codec::power_normalize(xin),
                                 [=](const Tape::BackwardContext& ctx) {
        const double s = static_cast<double>(ctx.output[0]) / xin[0];
        double gx = 0.0;
        double xx = 0.0;
        for (std::size_t i = 0; i < xin.numel(); ++i) {
          gx += static_cast<double>(ctx.grad_output[i]) * xin[i];
          xx += static_cast<double>(xin[i]) * xin[i];
        }
        Tensor g = ctx.grad_output;
        for (std::size_t i = 0; i < xin.numel(); ++i) {
          const double projection = drop_projection ? 0.0 : s * gx / xx * xin[i];
          const double exact = s * ctx.grad_output[i] - projection;
          g[i] = static_cast<float>(drop_projection ? exact : exact * 1.001);
        }
        return std::vector<std::optional<Tensor>>{g};
      });
      return t.mse_loss(out, t.constant(target));
    };
    gc.reference_loss = [=, ref_target = testing::RefTensor(target)](std::span<const testing::RefTensor> r) {
      return testing::ref_mse(testing::ref_power_normalize(r[0]), ref_target);
    };
    const testing::GradReport r = testing::run_gradcheck(gc, 144, 5);
    INFO((drop_projection ? "projection dropped" : "scaled by 1.001") << ": " << r.max_relative_error);
    CHECK(r.max_relative_error > 1e-4);
  }
}

TEST_CASE("forward and backward are bit-identical across runs") {
  const auto run = [] {
    Parameter w("w", random_tensor({4, 3, 4, 4}, 31));
    Parameter b("b", random_tensor({1, 4, 1, 1}, 32));
    Tape tape;
    const Value y = tape.activation(
        tape.conv2d(tape.constant(random_tensor({2, 3, 16, 16}, 33)), tape.parameter(w), tape.parameter(b), {2, 1}),
        Activation::leaky_relu(0.2f));
    const Value loss = tape.mse_loss(y, tape.constant(Tensor(Shape{2, 4, 8, 8})));
    tape.backward(loss);
    return std::pair{tape.value(y), w.grad};
  };
  const auto [y1, g1] = run();
  const auto [y2, g2] = run();
  CHECK(bit_identical(y1, y2));
  CHECK(bit_identical(g1, g2));
}

TEST_CASE("adam examples") {
  SUBCASE("first step moves by lr * g / (|g| + eps)") {
    std::vector<Parameter> params{Parameter("w", Tensor::scalar(0.0f))};
    params[0].grad[0] = 1.0f;
    AdamState state;
    adam_step(params, state);
    CHECK(std::abs(params[0].value[0] - (-1e-3 * 1.0 / (1.0 + 1e-8))) < 1e-6);
    CHECK(params[0].grad[0] == 0.0f);
    CHECK(state.step == 1);
  }
  SUBCASE("zero gradient leaves the parameter in place but advances t") {
    std::vector<Parameter> params{Parameter("w", Tensor::scalar(0.75f))};
    AdamState state;
    adam_step(params, state);
    adam_step(params, state);
    CHECK(params[0].value[0] == 0.75f);
    CHECK(state.step == 2);
  }
  SUBCASE("100 steps on (w - 3)^2 from 0 with lr 0.1") {
    std::vector<Parameter> params{Parameter("w", Tensor::scalar(0.0f))};
    AdamState state;
    state.options.learning_rate = 0.1;
    testing::RefAdam ref{0.1};
    double w_ref = 0.0;
    for (int i = 0; i < 100; ++i) {
      params[0].grad[0] = 2.0f * (params[0].value[0] - 3.0f);
      w_ref = ref.step(w_ref, 2.0 * (w_ref - 3.0));
      adam_step(params, state);
      for (const Tensor& v : state.second_moment) CHECK(v[0] >= 0.0f);
    }
    CHECK(std::abs(params[0].value[0] - 3.0) < 0.5);
    CHECK(params[0].value[0] == doctest::Approx(w_ref).epsilon(1e-4));
    CHECK(state.step == 100);
  }
  SUBCASE("parameter list must not change size") {
    std::vector<Parameter> params{Parameter("w", Tensor::scalar(0.0f))};
    AdamState state;
    adam_step(params, state);
    params.emplace_back("extra", Tensor::scalar(0.0f));
    CHECK_THROWS_AS(adam_step(params, state), ConfigError);
  }
}
