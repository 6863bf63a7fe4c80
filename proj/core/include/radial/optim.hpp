#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "radial/tensor.hpp"

namespace radial {

struct SgdNesterovSpec {
  double lr = 0.01;
  double momentum = 0.9;
  double decay = 1.0;  ///< lr multiplier applied by end_epoch()
};

struct AmsgradSpec {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Thrown when a gradient contains NaN or infinity; no parameter is updated.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Updates every parameter from its accumulated gradient, then clears the
  /// gradients. Parameters without a gradient are treated as zero-gradient.
  virtual void step() = 0;
  virtual void end_epoch() {}
  virtual double learning_rate() const = 0;
  virtual std::string describe() const = 0;
};

/// v <- m v + g; x <- x - lr (g + m v).
class SgdNesterov final : public Optimizer {
 public:
  SgdNesterov(std::vector<Tensor> params, SgdNesterovSpec spec);
  void step() override;
  void end_epoch() override { lr_ *= spec_.decay; }
  double learning_rate() const override { return lr_; }
  std::string describe() const override;

 private:
  std::vector<Tensor> params_;
  SgdNesterovSpec spec_;
  double lr_;
  std::vector<std::vector<double>> velocity_;
};

/// Adam with bias correction and a running maximum of the second moment.
class Amsgrad final : public Optimizer {
 public:
  Amsgrad(std::vector<Tensor> params, AmsgradSpec spec);
  void step() override;
  double learning_rate() const override { return spec_.lr; }
  std::string describe() const override;

 private:
  std::vector<Tensor> params_;
  AmsgradSpec spec_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_, v_max_;
};

enum class OptimizerKind { sgd_nesterov, amsgrad };
std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::amsgrad;
  double lr = 0.001;
  double momentum = 0.9;
  double decay = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerSpec& spec, std::vector<Tensor> params);

}  // namespace radial
