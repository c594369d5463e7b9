#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "stargan/autodiff.hpp"
#include "stargan/rng.hpp"

using namespace stargan;
using namespace stargan::ad;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, RngStream& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Central finite differences of a scalar-valued function of one leaf.
Tensor fd_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
               double h = 1e-6) {
  Tensor g(x.shape());
  Tensor xp = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    double orig = xp[i];
    xp[i] = orig + h;
    double fp = f(xp);
    xp[i] = orig - h;
    double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

void check_close(const Tensor& a, const Tensor& b, double rel_tol) {
  REQUIRE(a.numel() == b.numel());
  for (int64_t i = 0; i < a.numel(); ++i) {
    double scale = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-3});
    CHECK(std::fabs(a[i] - b[i]) / scale < rel_tol);
  }
}

}  // namespace

TEST_CASE("elementwise forward values") {
  auto a = leaf(Tensor({2}, {1.0, -2.0}));
  auto b = leaf(Tensor({2}, {3.0, 5.0}));
  CHECK(add(a, b)->value[0] == 4.0);
  CHECK(sub(a, b)->value[1] == -7.0);
  CHECK(mul(a, b)->value[1] == -10.0);
  CHECK(relu(a)->value[1] == 0.0);
  CHECK(leaky_relu(a, 0.01)->value[1] == doctest::Approx(-0.02));
  CHECK(sum(a)->value.item() == -1.0);
  CHECK(mean(b)->value.item() == 4.0);
}

TEST_CASE("gradient check: smooth elementwise chain") {
  RngStream rng(7);
  Tensor x0 = random_tensor({3, 4}, rng, 0.2, 1.5);
  auto f = [](const Tensor& xt) {
    auto x = leaf(xt);
    auto y = mean(mul(tanh_(x), add_scalar(sigmoid(square(x)), 0.5)));
    return y->value.item();
  };
  auto x = leaf(x0);
  auto y = mean(mul(tanh_(x), add_scalar(sigmoid(square(x)), 0.5)));
  auto g = grad(y, {x});
  check_close(g[0]->value, fd_grad(f, x0), 1e-5);
}

TEST_CASE("gradient check: log / sqrt / abs") {
  RngStream rng(9);
  Tensor x0 = random_tensor({6}, rng, 0.3, 2.0);
  auto f = [](const Tensor& xt) {
    auto x = leaf(xt);
    return sum(add(log_(x), sqrt_(x)))->value.item();
  };
  auto x = leaf(x0);
  auto g = grad(sum(add(log_(x), sqrt_(x))), {x});
  check_close(g[0]->value, fd_grad(f, x0), 1e-5);
}

TEST_CASE("gradient check: reductions and broadcasts") {
  RngStream rng(11);
  Tensor x0 = random_tensor({2, 3, 2, 2}, rng);
  auto build = [](const Tensor& xt) {
    auto x = leaf(xt);
    auto per = sum_samples(square(x));          // (N)
    auto y = mean(square(add_scalar(sqrt_(add_scalar(per, 1.0)), -1.0)));
    return std::pair{x, y};
  };
  auto [x, y] = build(x0);
  auto g = grad(y, {x});
  auto f = [&](const Tensor& xt) { return build(xt).second->value.item(); };
  check_close(g[0]->value, fd_grad(f, x0), 1e-5);
}

TEST_CASE("gradient check: conv2d wrt input and weight") {
  RngStream rng(13);
  Tensor x0 = random_tensor({2, 3, 5, 5}, rng);
  Tensor w0 = random_tensor({4, 3, 3, 3}, rng);
  auto build = [](const Tensor& xt, const Tensor& wt) {
    auto x = leaf(xt);
    auto w = leaf(wt);
    auto y = mean(square(conv2d(x, w, 2, 1)));
    return std::tuple{x, w, y};
  };
  auto [x, w, y] = build(x0, w0);
  auto g = grad(y, {x, w});
  check_close(g[0]->value,
              fd_grad([&](const Tensor& t) { return std::get<2>(build(t, w0))->value.item(); }, x0),
              1e-4);
  check_close(g[1]->value,
              fd_grad([&](const Tensor& t) { return std::get<2>(build(x0, t))->value.item(); }, w0),
              1e-4);
}

TEST_CASE("gradient check: conv_transpose2d wrt input and weight") {
  RngStream rng(17);
  Tensor x0 = random_tensor({2, 4, 3, 3}, rng);
  Tensor w0 = random_tensor({4, 2, 4, 4}, rng);  // (Cin, Cout, K, K)
  auto build = [](const Tensor& xt, const Tensor& wt) {
    auto x = leaf(xt);
    auto w = leaf(wt);
    auto y = mean(square(conv_transpose2d(x, w, 2, 1)));
    return std::tuple{x, w, y};
  };
  auto [x, w, y] = build(x0, w0);
  CHECK(std::get<2>(build(x0, w0))->value.numel() == 1);
  // output spatial size: (3-1)*2 - 2 + 4 = 6
  auto up = conv_transpose2d(leaf(x0), leaf(w0), 2, 1);
  CHECK(up->value.dim(2) == 6);
  CHECK(up->value.dim(1) == 2);
  auto g = grad(y, {x, w});
  check_close(g[0]->value,
              fd_grad([&](const Tensor& t) { return std::get<2>(build(t, w0))->value.item(); }, x0),
              1e-4);
  check_close(g[1]->value,
              fd_grad([&](const Tensor& t) { return std::get<2>(build(x0, t))->value.item(); }, w0),
              1e-4);
}

TEST_CASE("conv2d and conv_transpose2d are mutual adjoints") {
  RngStream rng(19);
  Tensor x0 = random_tensor({1, 3, 6, 6}, rng);
  Tensor y0 = random_tensor({1, 5, 3, 3}, rng);
  Tensor w0 = random_tensor({5, 3, 4, 4}, rng);
  // <conv(x), y> == <x, adjoint(y)>
  Tensor cx = kernels::conv_fwd(x0, w0, 2, 1);
  double lhs = 0.0;
  for (int64_t i = 0; i < cx.numel(); ++i) lhs += cx[i] * y0[i];
  Tensor ay = kernels::conv_igrad(y0, w0, 2, 1, 6, 6);
  double rhs = 0.0;
  for (int64_t i = 0; i < ay.numel(); ++i) rhs += ay[i] * x0[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("gradient check: instance_norm wrt input and affine") {
  RngStream rng(23);
  Tensor x0 = random_tensor({2, 3, 4, 4}, rng);
  Tensor g0 = random_tensor({3}, rng, 0.5, 1.5);
  Tensor b0 = random_tensor({3}, rng);
  auto build = [](const Tensor& xt, const Tensor& gt, const Tensor& bt) {
    auto x = leaf(xt);
    auto g = leaf(gt);
    auto b = leaf(bt);
    auto y = mean(square(instance_norm(x, g, b)));
    return std::tuple{x, g, b, y};
  };
  auto [x, g, b, y] = build(x0, g0, b0);
  auto gr = grad(y, {x, g, b});
  check_close(gr[0]->value,
              fd_grad([&](const Tensor& t) { return std::get<3>(build(t, g0, b0))->value.item(); }, x0, 1e-5),
              2e-4);
  check_close(gr[1]->value,
              fd_grad([&](const Tensor& t) { return std::get<3>(build(x0, t, b0))->value.item(); }, g0),
              1e-4);
  check_close(gr[2]->value,
              fd_grad([&](const Tensor& t) { return std::get<3>(build(x0, g0, t))->value.item(); }, b0),
              1e-4);
}

TEST_CASE("gradient check: softmax_ce and sigmoid_bce") {
  RngStream rng(29);
  Tensor z0 = random_tensor({4, 5}, rng, -2.0, 2.0);
  Tensor t({4, 5});
  for (int64_t i = 0; i < 4; ++i) t[i * 5 + (i % 5)] = 1.0;
  {
    auto z = leaf(z0);
    auto g = grad(softmax_ce(z, t), {z});
    check_close(g[0]->value,
                fd_grad([&](const Tensor& zt) { return softmax_ce(leaf(zt), t)->value.item(); }, z0),
                1e-5);
  }
  {
    Tensor tb({4, 5});
    for (int64_t i = 0; i < 20; ++i) tb[i] = (i % 3 == 0) ? 1.0 : 0.0;
    auto z = leaf(z0);
    auto g = grad(sigmoid_bce(z, tb), {z});
    check_close(g[0]->value,
                fd_grad([&](const Tensor& zt) { return sigmoid_bce(leaf(zt), tb)->value.item(); }, z0),
                1e-5);
  }
}

TEST_CASE("gradient check: slice / concat channels") {
  RngStream rng(31);
  Tensor a0 = random_tensor({2, 3, 2, 2}, rng);
  Tensor b0 = random_tensor({2, 2, 2, 2}, rng);
  auto build = [](const Tensor& at, const Tensor& bt) {
    auto a = leaf(at);
    auto b = leaf(bt);
    auto cat = concat_channels(a, b);
    auto y = mean(square(slice_channels(cat, 1, 4)));
    return std::tuple{a, b, y};
  };
  auto [a, b, y] = build(a0, b0);
  auto g = grad(y, {a, b});
  check_close(g[0]->value,
              fd_grad([&](const Tensor& t) { return std::get<2>(build(t, b0))->value.item(); }, a0),
              1e-5);
  check_close(g[1]->value,
              fd_grad([&](const Tensor& t) { return std::get<2>(build(a0, t))->value.item(); }, b0),
              1e-5);
}

// Double backprop: d/dW of || d/dx <linear net> || terms must match finite
// differences over W.
TEST_CASE("second-order: gradient-of-gradient through conv stack") {
  RngStream rng(37);
  Tensor x0 = random_tensor({2, 2, 4, 4}, rng);
  Tensor w0 = random_tensor({3, 2, 3, 3}, rng, -0.4, 0.4);
  Tensor w1 = random_tensor({1, 3, 3, 3}, rng, -0.4, 0.4);

  auto penalty_of = [&](const Tensor& w0t, const Tensor& w1t) {
    auto x = leaf(x0);
    auto wa = leaf(w0t);
    auto wb = leaf(w1t);
    auto h = leaky_relu(conv2d(x, wa, 1, 1), 0.01);
    auto s = sum(conv2d(h, wb, 1, 1));
    auto g = grad(s, {x})[0];
    auto norms = sqrt_(add_scalar(sum_samples(square(g)), 1e-12));
    auto pen = mean(square(add_scalar(norms, -1.0)));
    return std::tuple{wa, wb, pen};
  };

  auto [wa, wb, pen] = penalty_of(w0, w1);
  auto gw = grad(pen, {wa, wb});
  check_close(gw[0]->value,
              fd_grad([&](const Tensor& t) { return std::get<2>(penalty_of(t, w1))->value.item(); }, w0, 1e-5),
              2e-4);
  check_close(gw[1]->value,
              fd_grad([&](const Tensor& t) { return std::get<2>(penalty_of(w0, t))->value.item(); }, w1, 1e-5),
              2e-4);
}

TEST_CASE("grad of unrelated input is zero") {
  auto x = leaf(Tensor({2}, {1.0, 2.0}));
  auto z = leaf(Tensor({2}, {5.0, 6.0}));
  auto y = sum(square(x));
  auto g = grad(y, {z});
  CHECK(g[0]->value[0] == 0.0);
  CHECK(g[0]->value[1] == 0.0);
}
