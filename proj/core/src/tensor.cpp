#include "radial/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace radial {

namespace {

thread_local bool g_grad_enabled = true;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a) +
                   " and " + shape_to_string(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + shape_to_string(a) + " " + why);
}

// Builds a result node. The backward closure is attached only when graph
// recording is on and some input needs a gradient.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
}

template <class Fwd, class Dfdx>
Tensor unary(const Tensor& a, Fwd fwd, Dfdx dfdx) {
  const auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {a.node()}, [dfdx](Node& self) {
    Node& x = *self.parents[0];
    if (!x.requires_grad) return;
    x.ensure_grad();
    for (std::size_t i = 0; i < x.data.size(); ++i)
      x.grad[i] += self.grad[i] * dfdx(x.data[i], self.data[i]);
  });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor() = default;

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_vector(std::vector<double>(n, value), std::move(shape), requires_grad);
}

Tensor Tensor::from_vector(std::vector<double> values, Shape shape, bool requires_grad) {
  if (values.size() != shape_numel(shape))
    throw ShapeError("from_vector: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_to_string(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_vector({value}, {}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("Tensor: use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("size: axis out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return defined() ? node_->data.size() : 0; }

std::span<const double> Tensor::data() const {
  if (!node_) throw std::logic_error("Tensor: use of undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw std::logic_error("Tensor: use of undefined tensor");
  if (!node_->is_leaf()) throw std::logic_error("Tensor: cannot mutate a non-leaf tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_to_string(shape()) +
                                     " is not a scalar");
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

std::vector<double> Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return std::vector<double>(numel(), 0.0);
}

std::span<const double> Tensor::grad_view() const {
  if (!has_grad()) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from_vector(node_->data, node_->shape, false); }

void Tensor::backward() const {
  if (numel() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + shape_to_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; `order` ends up topologically sorted.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(0))
    shape_fail("matmul", a.shape(), b.shape());
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& x = *self.parents[0];
    Node& y = *self.parents[1];
    const double* g = self.grad.data();
    if (x.requires_grad) {
      x.ensure_grad();
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = y.data.data() + p * n;
          const double* grow = g + i * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          x.grad[i * k + p] += acc;
        }
    }
    if (y.requires_grad) {
      y.ensure_grad();
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = x.data[i * k + p];
          if (aip == 0.0) continue;
          double* dst = y.grad.data() + p * n;
          const double* grow = g + i * n;
          for (std::size_t j = 0; j < n; ++j) dst[j] += aip * grow[j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.dim() != 2) shape_fail("transpose", a.shape(), "is not a matrix");
  const std::size_t m = a.size(0), n = a.size(1);
  const auto A = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_result({n, m}, std::move(out), {a.node()}, [m, n](Node& self) {
    Node& x = *self.parents[0];
    x.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) x.grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.dim() != 2 || bias.dim() != 1 || x.size(1) != bias.size(0))
    shape_fail("add_bias", x.shape(), bias.shape());
  const std::size_t m = x.size(0), n = x.size(1);
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  return make_result(x.shape(), std::move(out), {x.node(), bias.node()}, [m, n](Node& self) {
    Node& xn = *self.parents[0];
    Node& bn = *self.parents[1];
    if (xn.requires_grad) {
      xn.ensure_grad();
      for (std::size_t i = 0; i < m * n; ++i) xn.grad[i] += self.grad[i];
    }
    if (bn.requires_grad) {
      bn.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) bn.grad[j] += self.grad[i * n + j];
    }
  });
}

// ---- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - B[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.parents[0];
    Node& y = *self.parents[1];
    if (x.requires_grad) {
      x.ensure_grad();
      for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] += self.grad[i];
    }
    if (y.requires_grad) {
      y.ensure_grad();
      for (std::size_t i = 0; i < y.grad.size(); ++i) y.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.parents[0];
    Node& y = *self.parents[1];
    if (x.requires_grad) {
      x.ensure_grad();
      for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] += self.grad[i] * y.data[i];
    }
    if (y.requires_grad) {
      y.ensure_grad();
      for (std::size_t i = 0; i < y.grad.size(); ++i) y.grad[i] += self.grad[i] * x.data[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] / B[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.parents[0];
    Node& y = *self.parents[1];
    if (x.requires_grad) {
      x.ensure_grad();
      for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] += self.grad[i] / y.data[i];
    }
    if (y.requires_grad) {
      y.ensure_grad();
      for (std::size_t i = 0; i < y.grad.size(); ++i)
        y.grad[i] -= self.grad[i] * self.data[i] / y.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data())
    if (!(v > 0.0)) throw std::domain_error("sqrt: non-positive input " + std::to_string(v));
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.data())
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(v));
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, [](double x) { return softplus(x); },
               [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// ---- reductions --------------------------------------------------------------

Tensor norm(const Tensor& a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size()) shape_fail("norm", s, "has no axis " + std::to_string(axis));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  const auto A = a.data();
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) {
        const double v = A[(o * len + l) * inner + i];
        out[o * inner + i] += v * v;
      }
  for (double& v : out) v = std::sqrt(v);
  return make_result(std::move(out_shape), std::move(out), {a.node()},
                     [outer, inner, len](Node& self) {
                       Node& x = *self.parents[0];
                       x.ensure_grad();
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t i = 0; i < inner; ++i) {
                           const double r = self.data[o * inner + i];
                           if (r == 0.0) continue;  // subgradient 0 at the origin
                           const double g = self.grad[o * inner + i] / r;
                           for (std::size_t l = 0; l < len; ++l) {
                             const std::size_t idx = (o * len + l) * inner + i;
                             x.grad[idx] += g * x.data[idx];
                           }
                         }
                     });
}

Tensor sum(const Tensor& a) {
  const auto A = a.data();
  const double total = std::accumulate(A.begin(), A.end(), 0.0);
  return make_result({}, {total}, {a.node()}, [](Node& self) {
    Node& x = *self.parents[0];
    x.ensure_grad();
    for (double& g : x.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor log_softmax(const Tensor& a) {
  if (a.dim() == 0) shape_fail("log_softmax", a.shape(), "has no last axis");
  const std::size_t k = a.shape().back();
  if (k == 0) shape_fail("log_softmax", a.shape(), "has empty last axis");
  const std::size_t rows = a.numel() / k;
  const auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = A.data() + r * k;
    const double mx = *std::max_element(x, x + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(x[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = x[j] - lse;
  }
  return make_result(a.shape(), std::move(out), {a.node()}, [rows, k](Node& self) {
    Node& x = *self.parents[0];
    x.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < k; ++j) gsum += self.grad[r * k + j];
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = r * k + j;
        x.grad[idx] += self.grad[idx] - std::exp(self.data[idx]) * gsum;
      }
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  if (a.dim() == 0) shape_fail("gather_rows", a.shape(), "has no rows");
  const std::size_t m = a.size(0);
  const std::size_t width = a.numel() / std::max<std::size_t>(m, 1);
  for (std::size_t r : rows)
    if (r >= m)
      shape_fail("gather_rows", a.shape(), "has no row " + std::to_string(r));
  Shape out_shape = a.shape();
  out_shape[0] = rows.size();
  const auto A = a.data();
  std::vector<double> out(rows.size() * width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(A.begin() + static_cast<std::ptrdiff_t>(rows[i] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return make_result(std::move(out_shape), std::move(out), {a.node()},
                     [index = std::move(index), width](Node& self) {
                       Node& x = *self.parents[0];
                       x.ensure_grad();
                       for (std::size_t i = 0; i < index.size(); ++i)
                         for (std::size_t j = 0; j < width; ++j)
                           x.grad[index[i] * width + j] += self.grad[i * width + j];
                     });
}

// ---- structural --------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    shape_fail("reshape", a.shape(), "cannot become " + shape_to_string(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a.node()}, [](Node& self) {
    Node& x = *self.parents[0];
    x.ensure_grad();
    for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] += self.grad[i];
  });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack: no tensors");
  const Shape& s0 = parts[0].shape();
  for (const auto& p : parts)
    if (p.shape() != s0) shape_fail("stack", s0, p.shape());
  const std::size_t width = parts[0].numel();
  Shape out_shape{parts.size()};
  out_shape.insert(out_shape.end(), s0.begin(), s0.end());
  std::vector<double> out;
  out.reserve(parts.size() * width);
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    parents.push_back(p.node());
  }
  return make_result(std::move(out_shape), std::move(out), std::move(parents),
                     [width](Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         Node& p = *self.parents[k];
                         if (!p.requires_grad) continue;
                         p.ensure_grad();
                         for (std::size_t i = 0; i < width; ++i)
                           p.grad[i] += self.grad[k * width + i];
                       }
                     });
}

}  // namespace radial
