#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "vapo/errors.hpp"
#include "vapo/optim.hpp"

namespace vapo {
namespace {

TEST(Momentum, FirstStepIsPlainGradientDescent) {
  Optimizer opt(OptimizerKind::kMomentum, 0.9);
  std::vector<double> p{1.0, -2.0};
  opt.step(p, std::vector<double>{0.5, 1.0}, 0.1);
  EXPECT_DOUBLE_EQ(p[0], 0.95);
  EXPECT_DOUBLE_EQ(p[1], -2.1);
}

TEST(Momentum, VelocityAccumulates) {
  Optimizer opt(OptimizerKind::kMomentum, 0.9);
  std::vector<double> p{0.0};
  opt.step(p, std::vector<double>{1.0}, 1.0);
  opt.step(p, std::vector<double>{1.0}, 1.0);
  EXPECT_DOUBLE_EQ(p[0], -1.0 - 1.9);
  opt.reset();
  opt.step(p, std::vector<double>{1.0}, 1.0);
  EXPECT_DOUBLE_EQ(p[0], -3.9);
}

TEST(Momentum, MinimizesQuadratic) {
  Optimizer opt(OptimizerKind::kMomentum, 0.9);
  std::vector<double> p{3.0, -4.0};
  for (int i = 0; i < 500; ++i) opt.step(p, std::vector<double>{p[0], p[1]}, 0.05);
  EXPECT_NEAR(p[0], 0.0, 1e-6);
  EXPECT_NEAR(p[1], 0.0, 1e-6);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Optimizer opt(OptimizerKind::kAdam, 0.9);
  std::vector<double> p{1.0, 1.0};
  opt.step(p, std::vector<double>{3.0, -0.01}, 0.1);
  EXPECT_NEAR(p[0], 0.9, 1e-7);
  EXPECT_NEAR(p[1], 1.1, 1e-5);
}

TEST(Adam, MinimizesQuadratic) {
  Optimizer opt(OptimizerKind::kAdam, 0.9);
  std::vector<double> p{3.0};
  for (int i = 0; i < 2000; ++i) opt.step(p, std::vector<double>{p[0]}, 0.01);
  EXPECT_NEAR(p[0], 0.0, 1e-2);
}

TEST(Optimizer, ShapeMismatchIsUsageError) {
  Optimizer opt;
  std::vector<double> p{1.0};
  EXPECT_THROW(opt.step(p, std::vector<double>{1.0, 2.0}, 0.1), UsageError);
}

TEST(OptimizerKind, ParseRoundTrip) {
  for (auto k : {OptimizerKind::kMomentum, OptimizerKind::kAdam}) EXPECT_EQ(parse_optimizer_kind(to_string(k)), k);
  EXPECT_THROW(parse_optimizer_kind("adamw"), ConfigError);
}

}  // namespace
}  // namespace vapo
