// SPDX-License-Identifier: Apache-2.0
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "styledraw/tensor.hpp"

using styledraw::Tensor;
using styledraw::sum_sorted;

TEST_CASE("tensor: shapes, indexing, factories") {
  Tensor t({2, 3});
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  for (std::int64_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);

  t.at(1, 2) = 5.0;
  CHECK(t[5] == 5.0);

  Tensor f = Tensor::full({2, 2, 2}, 3.5);
  CHECK(f.at(1, 1, 1) == 3.5);
  CHECK(Tensor::scalar(2.0).scalar_value() == 2.0);

  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 3}).scalar_value(), std::logic_error);
}

TEST_CASE("tensor: all_finite flags NaN and infinity") {
  Tensor t({3});
  CHECK(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("sum_sorted: bitwise invariant under permutation") {
  std::vector<double> a = {1e16, 1.0, -1e16, 3.25, 0.125, 7e-3, -2.5};
  std::vector<double> b = {3.25, -2.5, 1.0, 1e16, 7e-3, -1e16, 0.125};
  std::vector<double> c = {b.rbegin(), b.rend()};
  const double sa = sum_sorted(a);
  CHECK(sa == sum_sorted(b));
  CHECK(sa == sum_sorted(c));
  CHECK(sum_sorted({}) == 0.0);
}
