#ifndef VAPO_OPTIM_HPP_
#define VAPO_OPTIM_HPP_

#include <span>
#include <string>
#include <vector>

namespace vapo {

enum class OptimizerKind { kMomentum, kAdam };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

// First-order minimizer over a flat parameter vector. Holds its own state
// (velocity or moment estimates), sized on the first step.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::kMomentum, double momentum = 0.9,
                     double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind), momentum_(momentum), beta2_(beta2), eps_(eps) {}

  // params -= lr * update(grad)
  void step(std::span<double> params, std::span<const double> grad, double lr);
  void reset();

 private:
  OptimizerKind kind_;
  double momentum_;
  double beta2_;
  double eps_;
  long steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace vapo

#endif  // VAPO_OPTIM_HPP_
