#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every value is a 2-D array of doubles; vectors are 1 x d rows and scalars
// are 1 x 1. A Graph records operations in creation order (a dynamic tape)
// and replays their backward rules in reverse. Parameters are leaf tensors
// that live outside any graph and accumulate gradient across backward calls
// until zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gce::ad {

struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  std::size_t id = 0;        // position on the owning graph's tape
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  double* grad_data();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v) { return constant({1, 1}, {v}); }
  static Tensor row(std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->shape.size(); }

  std::span<const double> values() const { return node_->value; }
  // Direct write access for optimizers and checkpoint loading. Must not be
  // used while a graph that reads this tensor is awaiting backward().
  std::span<double> mutable_values() { return node_->value; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zeros when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

enum class GradMode { kRecord, kNoGrad };

class Graph {
 public:
  explicit Graph(GradMode mode = GradMode::kRecord) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  GradMode mode() const { return mode_; }
  std::size_t size() const { return tape_.size(); }

  // a[m x k] * b[k x n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  // a[m x k] * b[n x k]^T
  Tensor matmul_nt(const Tensor& a, const Tensor& b);
  // a[k x m]^T * b[k x n]
  Tensor matmul_tn(const Tensor& a, const Tensor& b);

  // Elementwise; b may also be a 1 x 1 scalar or a 1 x cols row broadcast
  // over the rows of a.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  // alpha * a + beta
  Tensor affine_scalar(const Tensor& a, double alpha, double beta);
  Tensor sigmoid(const Tensor& a);
  Tensor tanh(const Tensor& a);

  // Softmax over all entries; intended for n x 1 or 1 x n inputs.
  Tensor softmax(const Tensor& a);
  Tensor sum(const Tensor& a);

  // [a_i ; b_i] per row. A 1-row b is broadcast to a's row count.
  Tensor concat_cols(const Tensor& a, const Tensor& b);
  Tensor concat_rows(std::span<const Tensor> parts);
  Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
  Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
  // Row t*K + k of the result is a_t + b_k, for a[n x c], b[K x c].
  Tensor grid_add(const Tensor& a, const Tensor& b);

  // LSTM recurrence over precomputed input projections.
  //   z: [(n*batch) x 4h], row t*batch + j holds step t of sequence j.
  //   u: [4h x h] recurrent weights. Gate order: input, forget, output, cell.
  // Returns [(n*batch) x h] hidden states with zero initial state. When
  // reverse is set, steps run from t = n-1 down to 0.
  Tensor lstm_scan(const Tensor& z, const Tensor& u, std::size_t batch, bool reverse);

  // Binary cross-entropy of a probability y (1 x 1) against label in {0,1};
  // y is clamped to [1e-12, 1 - 1e-12].
  Tensor bce(const Tensor& y, double label);

  // Populates gradients of every tensor reachable from the scalar loss.
  // Intermediate gradients are reset on each call; leaf gradients accumulate.
  void backward(const Tensor& loss);

 private:
  Tensor make(Shape shape, std::vector<std::shared_ptr<Node>> inputs);
  void record(Tensor& out, std::function<void(Node&)> rule);

  GradMode mode_;
  std::vector<std::shared_ptr<Node>> tape_;
};

}  // namespace gce::ad
