#include "vapo/optim.hpp"

#include <cmath>

#include "vapo/errors.hpp"

namespace vapo {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("train.optimizer: expected 'momentum' or 'adam', got '" + name + "'");
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "momentum";
}

void Optimizer::reset() {
  steps_ = 0;
  m_.clear();
  v_.clear();
}

void Optimizer::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size()) throw UsageError("optimizer: gradient shape mismatch");
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    if (kind_ == OptimizerKind::kAdam) v_.assign(params.size(), 0.0);
    steps_ = 0;
  }
  ++steps_;
  if (kind_ == OptimizerKind::kMomentum) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = momentum_ * m_[i] + grad[i];
      params[i] -= lr * m_[i];
    }
    return;
  }
  const double c1 = 1.0 - std::pow(momentum_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = momentum_ * m_[i] + (1.0 - momentum_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace vapo
