#include "radial/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace radial {

namespace {

void check_finite(const std::vector<Tensor>& params) {
  for (std::size_t i = 0; i < params.size(); ++i)
    for (double g : params[i].grad_view())
      if (!std::isfinite(g))
        throw NonFiniteGradient("optimizer step rejected: non-finite gradient in parameter " +
                                std::to_string(i));
}

std::vector<std::vector<double>> zeros_like(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.numel(), 0.0);
  return out;
}

void check_leaves(const std::vector<Tensor>& params) {
  for (const auto& p : params)
    if (!p.requires_grad()) throw std::invalid_argument("optimizer: parameter does not require grad");
}

}  // namespace

SgdNesterov::SgdNesterov(std::vector<Tensor> params, SgdNesterovSpec spec)
    : params_(std::move(params)), spec_(spec), lr_(spec.lr), velocity_(zeros_like(params_)) {
  check_leaves(params_);
}

void SgdNesterov::step() {
  check_finite(params_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const auto g = p.grad_view();
    if (g.empty()) continue;
    auto x = p.mutable_data();
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      v[j] = spec_.momentum * v[j] + g[j];
      x[j] -= lr_ * (g[j] + spec_.momentum * v[j]);
    }
    p.zero_grad();
  }
}

std::string SgdNesterov::describe() const {
  std::ostringstream os;
  os << "sgd_nesterov(lr=" << spec_.lr << ", momentum=" << spec_.momentum << ", decay=" << spec_.decay
     << ")";
  return os.str();
}

Amsgrad::Amsgrad(std::vector<Tensor> params, AmsgradSpec spec)
    : params_(std::move(params)),
      spec_(spec),
      m_(zeros_like(params_)),
      v_(zeros_like(params_)),
      v_max_(zeros_like(params_)) {
  check_leaves(params_);
}

void Amsgrad::step() {
  check_finite(params_);
  ++t_;
  const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const auto g_view = p.grad_view();
    auto x = p.mutable_data();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double g = g_view.empty() ? 0.0 : g_view[j];
      m_[i][j] = spec_.beta1 * m_[i][j] + (1.0 - spec_.beta1) * g;
      v_[i][j] = spec_.beta2 * v_[i][j] + (1.0 - spec_.beta2) * g * g;
      v_max_[i][j] = std::max(v_max_[i][j], v_[i][j]);
      const double denom = std::sqrt(v_max_[i][j] / bc2) + spec_.eps;
      x[j] -= spec_.lr * (m_[i][j] / bc1) / denom;
    }
    p.zero_grad();
  }
}

std::string Amsgrad::describe() const {
  std::ostringstream os;
  os << "amsgrad(lr=" << spec_.lr << ", beta1=" << spec_.beta1 << ", beta2=" << spec_.beta2
     << ", eps=" << spec_.eps << ")";
  return os.str();
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::amsgrad ? "amsgrad" : "sgd_nesterov";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "amsgrad") return OptimizerKind::amsgrad;
  if (name == "sgd_nesterov" || name == "sgd") return OptimizerKind::sgd_nesterov;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerSpec& spec, std::vector<Tensor> params) {
  if (!(spec.lr > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
  if (spec.kind == OptimizerKind::amsgrad)
    return std::make_unique<Amsgrad>(std::move(params),
                                     AmsgradSpec{spec.lr, spec.beta1, spec.beta2, spec.eps});
  return std::make_unique<SgdNesterov>(std::move(params),
                                       SgdNesterovSpec{spec.lr, spec.momentum, spec.decay});
}

}  // namespace radial
