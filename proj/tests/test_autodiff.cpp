// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "doctest.h"
#include "styledraw/autodiff.hpp"
#include "styledraw/rng.hpp"
#include "support/oracles.hpp"

namespace ad = styledraw::ad;
using styledraw::Mat3;
using styledraw::Rng;
using styledraw::Tensor;
using styledraw::Vec2;

namespace {

std::vector<double> rand_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& e : v) e = rng.uniform(lo, hi);
  return v;
}

// Checks d(build(leaf))/d(leaf) against central differences. `build` gets a
// fresh leaf per evaluation and must return a scalar graph.
template <typename Build>
void check_leaf_grad(const std::vector<int>& shape, const std::vector<double>& x,
                     Build&& build, double tol = 1e-6, double step = 1e-5) {
  ad::Var leaf = ad::Var::leaf(Tensor(shape, x));
  ad::Var loss = build(leaf);
  REQUIRE(loss.value().size() == 1);
  loss.backward();
  const Tensor g = leaf.grad_or_zero();

  auto f = [&](const std::vector<double>& p) {
    return build(ad::Var::leaf(Tensor(shape, p))).value().scalar_value();
  };
  const auto rep = oracles::compare_gradients(f, x, g.vec(), step);
  CHECK(rep.checked > 0);
  CHECK(rep.max_rel < tol);
}

// Scalar-izes a multi-output op with a fixed random probe so gradient mixups
// across elements do not cancel out.
ad::Var probe_sum(const ad::Var& v, const std::vector<double>& probe) {
  return ad::sum(ad::mul(v, ad::Var::constant(Tensor(v.value().shape(), probe))));
}

}  // namespace

TEST_CASE("autodiff: elementwise ops match finite differences") {
  Rng rng(11);
  const std::vector<int> shape = {3, 4};
  const auto x = rand_vec(12, rng);
  const auto y = rand_vec(12, rng);
  const auto probe = rand_vec(12, rng);
  const Tensor yc(shape, y);

  check_leaf_grad(shape, x, [&](ad::Var v) {
    return probe_sum(ad::add(v, ad::Var::constant(yc)), probe);
  });
  check_leaf_grad(shape, x, [&](ad::Var v) {
    return probe_sum(ad::sub(ad::Var::constant(yc), v), probe);
  });
  check_leaf_grad(shape, x, [&](ad::Var v) {
    return probe_sum(ad::mul(v, ad::Var::constant(yc)), probe);
  });
  check_leaf_grad(shape, x, [&](ad::Var v) {
    return probe_sum(ad::scale(v, -2.75), probe);
  });
  check_leaf_grad(shape, x, [&](ad::Var v) {
    return probe_sum(ad::add_scalar(v, 0.31), probe);
  });
  check_leaf_grad(shape, x, [&](ad::Var v) { return ad::sum(v); });
  check_leaf_grad(shape, x, [&](ad::Var v) { return ad::mean(v); });
  check_leaf_grad(shape, x, [&](ad::Var v) { return probe_sum(ad::relu(v), probe); });
  check_leaf_grad(shape, x, [&](ad::Var v) {
    return ad::sum(ad::mul(v, ad::mul(v, v)));
  });
}

TEST_CASE("autodiff: matmul gradients for both operands") {
  Rng rng(12);
  const auto a = rand_vec(6, rng);
  const auto b = rand_vec(8, rng);
  const auto probe = rand_vec(6, rng);
  const Tensor ac({3, 2}, a), bc({2, 4}, b);
  const std::vector<double> probe_out = rand_vec(12, rng);

  check_leaf_grad({3, 2}, a, [&](ad::Var v) {
    return probe_sum(ad::matmul(v, ad::Var::constant(bc)), probe_out);
  });
  check_leaf_grad({2, 4}, b, [&](ad::Var v) {
    return probe_sum(ad::matmul(ad::Var::constant(ac), v), probe_out);
  });
  CHECK_THROWS_AS(ad::matmul(ad::Var::constant(ac), ad::Var::constant(ac)),
                  std::invalid_argument);
}

TEST_CASE("autodiff: row normalization") {
  Rng rng(13);
  const auto x = rand_vec(10, rng, 0.2, 1.0);
  const auto probe = rand_vec(10, rng);

  check_leaf_grad({2, 5}, x, [&](ad::Var v) {
    return probe_sum(ad::l2_normalize_rows(v), probe);
  });

  ad::Var out = ad::l2_normalize_rows(ad::Var::constant(Tensor({2, 5}, x)));
  for (int r = 0; r < 2; ++r) {
    double ss = 0.0;
    for (int j = 0; j < 5; ++j) ss += out.value().at(r, j) * out.value().at(r, j);
    CHECK(std::fabs(ss - 1.0) < 1e-12);
  }

  ad::Var zero = ad::l2_normalize_rows(ad::Var::constant(Tensor::zeros({1, 4})));
  for (std::int64_t i = 0; i < 4; ++i) CHECK(zero.value()[i] == 0.0);
}

TEST_CASE("autodiff: cosine distance on unit vectors") {
  Rng rng(14);
  const auto a = rand_vec(6, rng, -1.0, 1.0);
  const auto b = rand_vec(6, rng, -1.0, 1.0);

  // Identical unit vectors must give exactly zero, opposite exactly two.
  ad::Var ua = ad::l2_normalize_rows(ad::Var::constant(Tensor({6}, a)));
  CHECK(ad::unit_cosine_distance(ua, ua).value().scalar_value() == 0.0);
  ad::Var na = ad::scale(ua, -1.0);
  CHECK(ad::unit_cosine_distance(ua, na).value().scalar_value() == 2.0);

  const Tensor bc({6}, b);
  check_leaf_grad({6}, a, [&](ad::Var v) {
    return ad::unit_cosine_distance(ad::l2_normalize_rows(v),
                                    ad::l2_normalize_rows(ad::Var::constant(bc)));
  });
}

TEST_CASE("autodiff: 3x3 convolution matches finite differences") {
  Rng rng(15);
  const std::vector<int> ishape = {5, 4, 2}, wshape = {3, 3, 2, 3}, bshape = {3};
  const auto img = rand_vec(40, rng);
  const auto w = rand_vec(54, rng, -0.5, 0.5);
  const auto b = rand_vec(3, rng);
  const auto probe = rand_vec(60, rng);
  const Tensor ic(ishape, img), wc(wshape, w), bc(bshape, b);

  check_leaf_grad(ishape, img, [&](ad::Var v) {
    return probe_sum(ad::conv2d_3x3(v, ad::Var::constant(wc), ad::Var::constant(bc)), probe);
  }, 1e-7);
  check_leaf_grad(wshape, w, [&](ad::Var v) {
    return probe_sum(ad::conv2d_3x3(ad::Var::constant(ic), v, ad::Var::constant(bc)), probe);
  }, 1e-7);
  check_leaf_grad(bshape, b, [&](ad::Var v) {
    return probe_sum(ad::conv2d_3x3(ad::Var::constant(ic), ad::Var::constant(wc), v), probe);
  }, 1e-7);
}

TEST_CASE("autodiff: pooling") {
  Rng rng(16);
  const auto img = rand_vec(48, rng);
  const auto probe12 = rand_vec(12, rng);

  check_leaf_grad({4, 6, 2}, img, [&](ad::Var v) {
    return probe_sum(ad::maxpool2(v), probe12);
  }, 1e-7);
  check_leaf_grad({4, 6, 2}, img, [&](ad::Var v) {
    return probe_sum(ad::avgpool2(v), probe12);
  }, 1e-7);

  const auto img2 = rand_vec(36, rng);
  const auto probe4 = rand_vec(4, rng);
  check_leaf_grad({6, 6, 1}, img2, [&](ad::Var v) {
    return probe_sum(ad::avgpool_blocks(v, 3), probe4);
  }, 1e-7);

  ad::Var bad = ad::Var::constant(Tensor::zeros({3, 4, 1}));
  CHECK_THROWS_AS(ad::maxpool2(bad), std::invalid_argument);
}

TEST_CASE("autodiff: projective resampling is identity at equal size") {
  Rng rng(17);
  const auto img = rand_vec(90, rng);
  ad::Var v = ad::Var::constant(Tensor({6, 5, 3}, img));
  ad::Var out = ad::resample_projective(v, Mat3::identity(), 6, 5);
  for (std::int64_t i = 0; i < out.value().size(); ++i)
    CHECK(out.value()[i] == img[static_cast<std::size_t>(i)]);
}

TEST_CASE("autodiff: projective resampling gradients") {
  Rng rng(18);
  const auto img = rand_vec(90, rng);
  Mat3 h;
  h.m = {1.02, 0.03, -0.01, -0.02, 0.97, 0.015, 0.02, -0.01, 1.0};
  const auto probe = rand_vec(48, rng);
  check_leaf_grad({6, 5, 3}, img, [&](ad::Var v) {
    return probe_sum(ad::resample_projective(v, h, 4, 4), probe);
  }, 1e-7);
}

TEST_CASE("autodiff: bilinear point sampling") {
  Rng rng(19);
  const auto img = rand_vec(64, rng);
  ad::Var v = ad::Var::constant(Tensor({4, 4, 4}, img));

  // Pixel centers must read back stored values exactly.
  ad::Var got = ad::sample_bilinear(v, {{(1 + 0.5) / 4.0, (2 + 0.5) / 4.0}});
  for (int c = 0; c < 4; ++c) CHECK(got.value().at(0, c) == v.value().at(2, 1, c));

  std::vector<Vec2> coords;
  for (int i = 0; i < 7; ++i) coords.push_back({rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)});
  const auto probe = rand_vec(28, rng);
  check_leaf_grad({4, 4, 4}, img, [&](ad::Var w) {
    return probe_sum(ad::sample_bilinear(w, coords), probe);
  }, 1e-7);

  CHECK_THROWS_AS(ad::sample_bilinear(v, {{1.5, 0.5}}), std::invalid_argument);
}

TEST_CASE("autodiff: pixel gather and column concat") {
  Rng rng(20);
  const auto img = rand_vec(24, rng);
  ad::Var v = ad::Var::constant(Tensor({3, 4, 2}, img));
  ad::Var rows = ad::gather_pixels(v, {{2, 3}, {0, 0}});
  CHECK(rows.value().at(0, 0) == v.value().at(2, 3, 0));
  CHECK(rows.value().at(1, 1) == v.value().at(0, 0, 1));
  CHECK_THROWS_AS(ad::gather_pixels(v, {{3, 0}}), std::invalid_argument);

  const auto probe = rand_vec(4, rng);
  check_leaf_grad({3, 4, 2}, img, [&](ad::Var w) {
    return probe_sum(ad::gather_pixels(w, {{1, 2}, {1, 2}}), probe);
  }, 1e-8);

  const auto a = rand_vec(6, rng);
  const auto b = rand_vec(9, rng);
  const auto probe_cat = rand_vec(15, rng);
  const Tensor bc({3, 3}, b);
  check_leaf_grad({3, 2}, a, [&](ad::Var w) {
    return probe_sum(ad::concat_cols({w, ad::Var::constant(bc)}), probe_cat);
  }, 1e-8);
  check_leaf_grad({3, 3}, b, [&](ad::Var w) {
    ad::Var ac = ad::Var::constant(Tensor({3, 2}, a));
    return probe_sum(ad::concat_cols({ac, w}), probe_cat);
  }, 1e-8);
}

TEST_CASE("autodiff: reused nodes accumulate gradients") {
  const std::vector<double> x = {1.5, -2.0, 0.25};
  ad::Var v = ad::Var::leaf(Tensor({3}, x));
  ad::Var loss = ad::sum(ad::mul(v, v));
  loss.backward();
  const Tensor g = v.grad_or_zero();
  for (int i = 0; i < 3; ++i) CHECK(g[i] == 2.0 * x[static_cast<std::size_t>(i)]);

  ad::Var w = ad::Var::leaf(Tensor({3}, x));
  ad::Var loss2 = ad::sum(ad::add(w, w));
  loss2.backward();
  const Tensor g2 = w.grad_or_zero();
  for (int i = 0; i < 3; ++i) CHECK(g2[i] == 2.0);
}

TEST_CASE("autodiff: bookkeeping rules") {
  ad::Var c = ad::Var::constant(Tensor::zeros({2, 2}));
  CHECK_FALSE(c.requires_grad());
  CHECK(ad::sum(c).value().scalar_value() == 0.0);

  ad::Var leaf = ad::Var::leaf(Tensor::zeros({2, 2}));
  CHECK_THROWS_AS(ad::add(leaf, leaf).backward(), std::logic_error);

  const Tensor g = leaf.grad_or_zero();
  for (std::int64_t i = 0; i < 4; ++i) CHECK(g[i] == 0.0);

  ad::Var s = ad::sum(ad::Var::constant(Tensor::full({3}, 1.0)));
  s.backward();
  CHECK(s.value().scalar_value() == 3.0);
}
