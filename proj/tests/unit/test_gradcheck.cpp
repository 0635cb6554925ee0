// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gnmt/gradcheck.hpp"

namespace gnmt {
namespace {

TEST(RelativeError, UsesTheLargerMagnitudeAndFloor) {
  EXPECT_EQ(relative_error(1.0, 1.0, 1e-6), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0, 1e-6), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9, 1e-6), 1e-3);
}

TEST(CentralDifference, ExactOnQuartics) {
  double x = 0.7;
  // The five-point stencil has no truncation error up to degree four.
  const auto f = [&] { return 3 * x * x * x * x - x * x * x + 2 * x; };
  const double d = central_difference(f, x, 1e-2);
  EXPECT_NEAR(d, 12 * 0.7 * 0.7 * 0.7 - 3 * 0.7 * 0.7 + 2, 1e-10);
  EXPECT_EQ(x, 0.7);
}

TEST(GradCheck, PassesOnTheImplementation) {
  GradCheckConfig gc;
  gc.trials = 2;
  const GradCheckReport r = run_gradcheck(gc);
  ASSERT_EQ(r.trials.size(), 2u);
  EXPECT_TRUE(r.trials[1].clipped);
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
  for (const auto& t : r.trials) EXPECT_FALSE(t.tensors.empty());
  std::ostringstream out;
  r.print(out);
  EXPECT_NE(out.str().find("PASS max relative error"), std::string::npos);
}

TEST(GradCheck, DetectsACorruptedGradient) {
  GradCheckConfig gc;
  gc.trials = 1;
  gc.corrupt = true;
  const GradCheckReport r = run_gradcheck(gc);
  EXPECT_FALSE(r.passed());
  EXPECT_GT(r.max_rel_error, 1e-3);
  std::ostringstream out;
  r.print(out);
  EXPECT_NE(out.str().find("FAIL attention.v"), std::string::npos) << out.str();
}

}  // namespace
}  // namespace gnmt
