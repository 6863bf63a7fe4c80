#include "radial/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace radial {

namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

}  // namespace

double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor leaf = Tensor::from_vector({x.data().begin(), x.data().end()}, x.shape(), true);
  std::vector<Tensor> leaves{leaf};
  return gradcheck([&] { return f(leaf); }, leaves, eps);
}

double gradcheck(const std::function<Tensor()>& f, std::span<Tensor> leaves, double eps) {
  for (auto& t : leaves) t.zero_grad();
  f().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& t : leaves) analytic.push_back(t.grad());

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto at = [&](double offset) {
        values[i] = saved + offset;
        return f().item();
      };
      // fourth-order stencil: roundoff stays well below 1e-6 relative even for
      // coordinates whose gradient is 1e-5 of the function value
      const double numeric = (8.0 * (at(eps) - at(-eps)) - (at(2 * eps) - at(-2 * eps))) / (12.0 * eps);
      values[i] = saved;
      worst = std::max(worst, relative_error(analytic[l][i], numeric));
    }
  }
  for (auto& t : leaves) t.zero_grad();
  return worst;
}

}  // namespace radial
