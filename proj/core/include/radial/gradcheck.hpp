#pragma once

#include <functional>
#include <span>

#include "radial/tensor.hpp"

namespace radial {

/// Max over coordinates of |analytic - numeric| / max(1e-12, |analytic| + |numeric|),
/// with `numeric` from a five-point central difference of step `eps`.
///
/// `x` is copied into a fresh leaf; `f` must return a scalar and be smooth at
/// `x` (kinks such as relu at exactly 0 are not supported inputs).
double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                 double eps = 1e-4);

/// Same measure over several existing leaves, perturbed in place and restored.
/// `f` rebuilds the graph from the current leaf values on every call.
/// Existing gradients on the leaves are cleared.
double gradcheck(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                 double eps = 1e-4);

}  // namespace radial
