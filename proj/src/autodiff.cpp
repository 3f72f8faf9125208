#include "gce/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gce/errors.hpp"

namespace gce::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap view(const Node& n) {
  return ConstMatMap(n.value.data(), static_cast<Eigen::Index>(n.shape.rows),
                     static_cast<Eigen::Index>(n.shape.cols));
}

MatMap view_mut(Node& n) {
  return MatMap(n.value.data(), static_cast<Eigen::Index>(n.shape.rows),
                static_cast<Eigen::Index>(n.shape.cols));
}

ConstMatMap grad_view(const Node& n) {
  return ConstMatMap(n.grad.data(), static_cast<Eigen::Index>(n.shape.rows),
                     static_cast<Eigen::Index>(n.shape.cols));
}

MatMap grad_mut(Node& n) {
  return MatMap(n.grad_data(), static_cast<Eigen::Index>(n.shape.rows),
                static_cast<Eigen::Index>(n.shape.cols));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
}

enum class Broadcast { kSame, kScalar, kRow };

Broadcast broadcast_kind(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kSame;
  if (b.rows == 1 && b.cols == 1) return Broadcast::kScalar;
  if (b.rows == 1 && b.cols == a.cols) return Broadcast::kRow;
  shape_fail(op, a, b);
}

// Index into b for element (r, c) of a under the given broadcast.
inline std::size_t bidx(Broadcast kind, std::size_t r, std::size_t c, std::size_t cols) {
  switch (kind) {
    case Broadcast::kSame: return r * cols + c;
    case Broadcast::kScalar: return 0;
    case Broadcast::kRow: return c;
  }
  return 0;
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kProbFloor = 1e-12;

// Vectorized activations. exp overflow saturates to the correct limit.
template <typename A>
auto sigmoid_array(const A& x) {
  return 1.0 / (1.0 + (-x).exp());
}

template <typename A>
auto tanh_array(const A& x) {
  return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << rows << 'x' << cols << ']';
  return os.str();
}

double* Node::grad_data() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape.rows == 0 || shape.cols == 0) throw ShapeError("tensor extents must be positive");
  if (values.size() != shape.size()) {
    throw ShapeError("tensor " + shape.str() + " given " + std::to_string(values.size()) +
                     " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(shape, std::move(values));
  t.set_requires_grad(true);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Tensor t = constant(shape, std::vector<double>(shape.size(), 0.0));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return constant({1, n}, std::move(values));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  node_->grad_data();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Graph::make(Shape shape, std::vector<std::shared_ptr<Node>> inputs) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value.assign(shape.size(), 0.0);
  if (mode_ == GradMode::kRecord) {
    node->requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                      [](const auto& n) { return n->requires_grad; });
  }
  if (node->requires_grad) node->inputs = std::move(inputs);
  return Tensor(std::move(node));
}

void Graph::record(Tensor& out, std::function<void(Node&)> rule) {
  Node* n = out.node();
  if (!n->requires_grad) return;
  n->backward = std::move(rule);
  n->id = tape_.size();
  tape_.push_back(out.node_ptr());
}

namespace {

enum class Trans { kNN, kNT, kTN };

Shape product_shape(const char* op, Trans t, const Shape& a, const Shape& b) {
  switch (t) {
    case Trans::kNN:
      if (a.cols != b.rows) shape_fail(op, a, b);
      return {a.rows, b.cols};
    case Trans::kNT:
      if (a.cols != b.cols) shape_fail(op, a, b);
      return {a.rows, b.rows};
    case Trans::kTN:
      if (a.rows != b.rows) shape_fail(op, a, b);
      return {a.cols, b.cols};
  }
  return {};
}

}  // namespace

#define GCE_PRODUCT_OP(NAME, TRANS, FORWARD, GRAD_A, GRAD_B)              \
  Tensor Graph::NAME(const Tensor& a, const Tensor& b) {                  \
    Tensor out = make(product_shape(#NAME, TRANS, a.shape(), b.shape()),  \
                      {a.node_ptr(), b.node_ptr()});                      \
    {                                                                     \
      auto A = view(*a.node());                                           \
      auto B = view(*b.node());                                           \
      view_mut(*out.node()).noalias() = FORWARD;                          \
    }                                                                     \
    record(out, [](Node& self) {                                          \
      Node& na = *self.inputs[0];                                         \
      Node& nb = *self.inputs[1];                                         \
      auto dC = grad_view(self);                                          \
      auto A = view(na);                                                  \
      auto B = view(nb);                                                  \
      if (na.requires_grad) grad_mut(na).noalias() += GRAD_A;             \
      if (nb.requires_grad) grad_mut(nb).noalias() += GRAD_B;             \
    });                                                                   \
    return out;                                                           \
  }

GCE_PRODUCT_OP(matmul, Trans::kNN, A * B, dC * B.transpose(), A.transpose() * dC)
GCE_PRODUCT_OP(matmul_nt, Trans::kNT, A * B.transpose(), dC * B, dC.transpose() * A)
GCE_PRODUCT_OP(matmul_tn, Trans::kTN, A.transpose() * B, B * dC.transpose(), A * dC)

#undef GCE_PRODUCT_OP

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind("add", a.shape(), b.shape());
  Tensor out = make(a.shape(), {a.node_ptr(), b.node_ptr()});
  const std::size_t rows = a.rows(), cols = a.cols();
  {
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    auto& ov = out.node()->value;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        ov[r * cols + c] = av[r * cols + c] + bv[bidx(kind, r, c, cols)];
  }
  record(out, [kind, rows, cols](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      double* ga = na.grad_data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (nb.requires_grad) {
      double* gb = nb.grad_data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[bidx(kind, r, c, cols)] += g[r * cols + c];
    }
  });
  return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind("mul", a.shape(), b.shape());
  Tensor out = make(a.shape(), {a.node_ptr(), b.node_ptr()});
  const std::size_t rows = a.rows(), cols = a.cols();
  {
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    auto& ov = out.node()->value;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        ov[r * cols + c] = av[r * cols + c] * bv[bidx(kind, r, c, cols)];
  }
  record(out, [kind, rows, cols](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    const auto& av = na.value;
    const auto& bv = nb.value;
    if (na.requires_grad) {
      double* ga = na.grad_data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          ga[r * cols + c] += g[r * cols + c] * bv[bidx(kind, r, c, cols)];
    }
    if (nb.requires_grad) {
      double* gb = nb.grad_data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          gb[bidx(kind, r, c, cols)] += g[r * cols + c] * av[r * cols + c];
    }
  });
  return out;
}

Tensor Graph::affine_scalar(const Tensor& a, double alpha, double beta) {
  Tensor out = make(a.shape(), {a.node_ptr()});
  const auto& av = a.node()->value;
  auto& ov = out.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = alpha * av[i] + beta;
  record(out, [alpha](Node& self) {
    Node& na = *self.inputs[0];
    double* ga = na.grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += alpha * self.grad[i];
  });
  return out;
}

Tensor Graph::sigmoid(const Tensor& a) {
  Tensor out = make(a.shape(), {a.node_ptr()});
  const auto& av = a.node()->value;
  auto& ov = out.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = stable_sigmoid(av[i]);
  record(out, [](Node& self) {
    Node& na = *self.inputs[0];
    double* ga = na.grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      ga[i] += self.grad[i] * y * (1.0 - y);
    }
  });
  return out;
}

Tensor Graph::tanh(const Tensor& a) {
  Tensor out = make(a.shape(), {a.node_ptr()});
  const auto& av = a.node()->value;
  auto& ov = out.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = std::tanh(av[i]);
  record(out, [](Node& self) {
    Node& na = *self.inputs[0];
    double* ga = na.grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      ga[i] += self.grad[i] * (1.0 - y * y);
    }
  });
  return out;
}

Tensor Graph::softmax(const Tensor& a) {
  Tensor out = make(a.shape(), {a.node_ptr()});
  const auto& av = a.node()->value;
  auto& ov = out.node()->value;
  const double peak = *std::max_element(av.begin(), av.end());
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    ov[i] = std::exp(av[i] - peak);
    total += ov[i];
  }
  for (double& v : ov) v /= total;
  record(out, [](Node& self) {
    Node& na = *self.inputs[0];
    const auto& p = self.value;
    const auto& g = self.grad;
    double inner = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) inner += g[i] * p[i];
    double* ga = na.grad_data();
    for (std::size_t i = 0; i < p.size(); ++i) ga[i] += p[i] * (g[i] - inner);
  });
  return out;
}

Tensor Graph::sum(const Tensor& a) {
  Tensor out = make({1, 1}, {a.node_ptr()});
  double total = 0.0;
  for (double v : a.node()->value) total += v;
  out.node()->value[0] = total;
  record(out, [](Node& self) {
    Node& na = *self.inputs[0];
    double* ga = na.grad_data();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < na.value.size(); ++i) ga[i] += g;
  });
  return out;
}

Tensor Graph::concat_cols(const Tensor& a, const Tensor& b) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1;
  if (!broadcast && a.rows() != b.rows()) shape_fail("concat_cols", a.shape(), b.shape());
  const std::size_t rows = a.rows(), p = a.cols(), q = b.cols();
  Tensor out = make({rows, p + q}, {a.node_ptr(), b.node_ptr()});
  {
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    auto& ov = out.node()->value;
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(av.begin() + r * p, p, ov.begin() + r * (p + q));
      std::copy_n(bv.begin() + (broadcast ? 0 : r * q), q, ov.begin() + r * (p + q) + p);
    }
  }
  record(out, [broadcast, rows, p, q](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      double* ga = na.grad_data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < p; ++c) ga[r * p + c] += g[r * (p + q) + c];
    }
    if (nb.requires_grad) {
      double* gb = nb.grad_data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < q; ++c)
          gb[(broadcast ? 0 : r * q) + c] += g[r * (p + q) + p + c];
    }
  });
  return out;
}

Tensor Graph::concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  inputs.reserve(parts.size());
  for (const auto& t : parts) {
    if (t.cols() != cols) shape_fail("concat_rows", parts.front().shape(), t.shape());
    rows += t.rows();
    inputs.push_back(t.node_ptr());
  }
  Tensor out = make({rows, cols}, inputs);
  auto& ov = out.node()->value;
  std::size_t offset = 0;
  for (const auto& t : parts) {
    std::copy(t.values().begin(), t.values().end(), ov.begin() + offset);
    offset += t.size();
  }
  record(out, [](Node& self) {
    std::size_t off = 0;
    for (auto& in : self.inputs) {
      const std::size_t n = in->value.size();
      if (in->requires_grad) {
        double* gi = in->grad_data();
        for (std::size_t i = 0; i < n; ++i) gi[i] += self.grad[off + i];
      }
      off += n;
    }
  });
  return out;
}

Tensor Graph::gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  const std::size_t cols = a.cols();
  for (std::size_t r : rows) {
    if (r >= a.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " +
                       a.shape().str());
    }
  }
  Tensor out = make({rows.size(), cols}, {a.node_ptr()});
  const auto& av = a.node()->value;
  auto& ov = out.node()->value;
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(av.begin() + rows[i] * cols, cols, ov.begin() + i * cols);
  record(out, [idx = std::vector<std::size_t>(rows.begin(), rows.end()), cols](Node& self) {
    Node& na = *self.inputs[0];
    double* ga = na.grad_data();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) ga[idx[i] * cols + c] += self.grad[i * cols + c];
  });
  return out;
}

Tensor Graph::slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.cols()) {
    throw ShapeError("slice_cols: bad range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") of " + a.shape().str());
  }
  const std::size_t rows = a.rows(), cols = a.cols(), w = end - begin;
  Tensor out = make({rows, w}, {a.node_ptr()});
  const auto& av = a.node()->value;
  auto& ov = out.node()->value;
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(av.begin() + r * cols + begin, w, ov.begin() + r * w);
  record(out, [rows, cols, begin, w](Node& self) {
    Node& na = *self.inputs[0];
    double* ga = na.grad_data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) ga[r * cols + begin + c] += self.grad[r * w + c];
  });
  return out;
}

Tensor Graph::grid_add(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) shape_fail("grid_add", a.shape(), b.shape());
  const std::size_t n = a.rows(), k = b.rows(), cols = a.cols();
  Tensor out = make({n * k, cols}, {a.node_ptr(), b.node_ptr()});
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  auto& ov = out.node()->value;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t c = 0; c < cols; ++c)
        ov[(t * k + j) * cols + c] = av[t * cols + c] + bv[j * cols + c];
  record(out, [n, k, cols](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      double* ga = na.grad_data();
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < k; ++j)
          for (std::size_t c = 0; c < cols; ++c) ga[t * cols + c] += g[(t * k + j) * cols + c];
    }
    if (nb.requires_grad) {
      double* gb = nb.grad_data();
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < k; ++j)
          for (std::size_t c = 0; c < cols; ++c) gb[j * cols + c] += g[(t * k + j) * cols + c];
    }
  });
  return out;
}

Tensor Graph::lstm_scan(const Tensor& z, const Tensor& u, std::size_t batch, bool reverse) {
  const std::size_t h = u.cols();
  if (u.rows() != 4 * h) throw ShapeError("lstm_scan: recurrent weights must be [4h x h], got " +
                                          u.shape().str());
  if (z.cols() != 4 * h || batch == 0 || z.rows() % batch != 0) {
    throw ShapeError("lstm_scan: projections " + z.shape().str() + " do not match weights " +
                     u.shape().str() + " with batch " + std::to_string(batch));
  }
  const std::size_t steps = z.rows() / batch;
  const auto B = static_cast<Eigen::Index>(batch);
  const auto H = static_cast<Eigen::Index>(h);

  Tensor out = make({z.rows(), h}, {z.node_ptr(), u.node_ptr()});
  // Activated gates [(n*batch) x 4h], cell states and tanh of the cell
  // states [(n*batch) x h].
  std::vector<double> gates(z.size());
  std::vector<double> cells(z.rows() * h);
  std::vector<double> cell_tanh(z.rows() * h);

  const auto& zv = z.node()->value;
  auto& hv = out.node()->value;
  ConstMatMap U = view(*u.node());
  RowMat pre(B, 4 * H);
  std::vector<double> zero_state(batch * h, 0.0);

  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const double* h_prev = zero_state.data();
    const double* c_prev = zero_state.data();
    if (s > 0) {
      const std::size_t tp = reverse ? t + 1 : t - 1;
      h_prev = hv.data() + tp * batch * h;
      c_prev = cells.data() + tp * batch * h;
    }
    pre = ConstMatMap(zv.data() + t * batch * 4 * h, B, 4 * H);
    pre.noalias() += ConstMatMap(h_prev, B, H) * U.transpose();
    const std::size_t off = t * batch * h;
    MatMap g(gates.data() + 4 * off, B, 4 * H);
    MatMap c(cells.data() + off, B, H);
    MatMap tc(cell_tanh.data() + off, B, H);
    g.leftCols(3 * H) = sigmoid_array(pre.leftCols(3 * H).array());
    g.rightCols(H) = tanh_array(pre.rightCols(H).array());
    c.array() = g.middleCols(H, H).array() * ConstMatMap(c_prev, B, H).array() +
                g.leftCols(H).array() * g.rightCols(H).array();
    tc = tanh_array(c.array());
    MatMap(hv.data() + off, B, H).array() = g.middleCols(2 * H, H).array() * tc.array();
  }

  if (out.requires_grad()) {
    record(out, [gates = std::move(gates), cells = std::move(cells),
                 cell_tanh = std::move(cell_tanh), steps, batch, h,
                 reverse](Node& self) {
      Node& nz = *self.inputs[0];
      Node& nu = *self.inputs[1];
      const auto B = static_cast<Eigen::Index>(batch);
      const auto H = static_cast<Eigen::Index>(h);
      ConstMatMap U = view(nu);
      const auto& hv = self.value;
      const auto& dH = self.grad;
      RowMat dh_next = RowMat::Zero(B, H);
      RowMat dc_next = RowMat::Zero(B, H);
      RowMat dgates(B, 4 * H);
      double* dz = nz.requires_grad ? nz.grad_data() : nullptr;
      double* du = nu.requires_grad ? nu.grad_data() : nullptr;
      std::vector<double> zero_state(batch * h, 0.0);

      for (std::size_t s = steps; s-- > 0;) {
        const std::size_t t = reverse ? steps - 1 - s : s;
        const double* h_prev = zero_state.data();
        const double* c_prev = zero_state.data();
        if (s > 0) {
          const std::size_t tp = reverse ? t + 1 : t - 1;
          h_prev = hv.data() + tp * batch * h;
          c_prev = cells.data() + tp * batch * h;
        }
        const std::size_t off = t * batch * h;
        ConstMatMap g(gates.data() + 4 * off, B, 4 * H);
        const auto ig = g.leftCols(H).array(), fg = g.middleCols(H, H).array(),
                   og = g.middleCols(2 * H, H).array(), cg = g.rightCols(H).array();
        const auto tc = ConstMatMap(cell_tanh.data() + off, B, H).array();
        const RowMat dh = ConstMatMap(dH.data() + off, B, H) + dh_next;
        const RowMat dc = (dh.array() * og * (1.0 - tc * tc)).matrix() + dc_next;
        const auto dca = dc.array();
        dgates.leftCols(H).array() = dca * cg * ig * (1.0 - ig);
        dgates.middleCols(H, H).array() = dca * ConstMatMap(c_prev, B, H).array() * fg * (1.0 - fg);
        dgates.middleCols(2 * H, H).array() = dh.array() * tc * og * (1.0 - og);
        dgates.rightCols(H).array() = dca * ig * (1.0 - cg * cg);
        dc_next.array() = dca * fg;
        if (dz) MatMap(dz + t * batch * 4 * h, B, 4 * H) += dgates;
        if (du) MatMap(du, 4 * H, H).noalias() += dgates.transpose() * ConstMatMap(h_prev, B, H);
        dh_next.noalias() = dgates * U;
      }
    });
  }
  return out;
}

Tensor Graph::bce(const Tensor& y, double label) {
  if (y.size() != 1) throw ShapeError("bce: expected scalar probability, got " + y.shape().str());
  Tensor out = make({1, 1}, {y.node_ptr()});
  const double p = std::clamp(y.item(), kProbFloor, 1.0 - kProbFloor);
  out.node()->value[0] = -label * std::log(p) - (1.0 - label) * std::log(1.0 - p);
  record(out, [p, label](Node& self) {
    Node& ny = *self.inputs[0];
    ny.grad_data()[0] += self.grad[0] * (-label / p + (1.0 - label) / (1.0 - p));
  });
  return out;
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.defined() ? loss.shape().str() : std::string("undefined")));
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;
  const bool on_tape = root->id < tape_.size() && tape_[root->id].get() == root;
  if (!on_tape) {
    if (!root->backward) {
      // A leaf parameter used directly as the loss.
      root->grad_data()[0] += 1.0;
      return;
    }
    throw ShapeError("backward: loss was not produced by this graph");
  }
  for (std::size_t i = 0; i <= root->id; ++i) tape_[i]->grad.clear();
  root->grad_data()[0] = 1.0;
  for (std::size_t i = root->id + 1; i-- > 0;) {
    Node& n = *tape_[i];
    if (n.grad.empty()) continue;
    n.backward(n);
  }
}

}  // namespace gce::ad
