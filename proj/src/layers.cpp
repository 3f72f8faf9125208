#include "gce/layers.hpp"

#include <algorithm>
#include <cmath>

#include "gce/errors.hpp"

namespace gce {

ad::Tensor ModelParams::add(std::string name, ad::Shape shape, std::vector<double> values,
                            bool trainable) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  ad::Tensor t = ad::Tensor::constant(shape, std::move(values));
  t.set_requires_grad(trainable);
  entries_.push_back({std::move(name), t, trainable});
  return t;
}

const ad::Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw std::out_of_range("no parameter named " + std::string(name));
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

std::size_t ModelParams::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.tensor.size();
  return n;
}

std::vector<ad::NamedTensor> ModelParams::trainable() const {
  std::vector<ad::NamedTensor> out;
  for (const auto& e : entries_)
    if (e.trainable) out.push_back({e.name, e.tensor});
  return out;
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<double> ParamInit::uniform(std::size_t n, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng_);
  return v;
}

std::vector<double> ParamInit::fan_in(std::size_t n, std::size_t fan_in) {
  return uniform(n, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

Affine Affine::create(ModelParams& params, ParamInit& init, const std::string& name,
                      std::size_t in, std::size_t out) {
  Affine a;
  a.weight = params.add(name + ".weight", {out, in}, init.fan_in(out * in, in));
  a.bias = params.add(name + ".bias", {1, out}, init.fan_in(out, in));
  return a;
}

ad::Tensor Affine::apply(ad::Graph& g, const ad::Tensor& x) const {
  return g.add(g.matmul_nt(x, weight), bias);
}

namespace {

LstmDirection make_direction(ModelParams& params, ParamInit& init, const std::string& name,
                             std::size_t in, std::size_t h) {
  LstmDirection d;
  d.w = params.add(name + ".w", {4 * h, in}, init.fan_in(4 * h * in, in));
  d.u = params.add(name + ".u", {4 * h, h}, init.fan_in(4 * h * h, h));
  std::vector<double> bias = init.fan_in(4 * h, h);
  std::fill(bias.begin() + h, bias.begin() + 2 * h, 1.0);  // forget gate
  d.b = params.add(name + ".b", {1, 4 * h}, std::move(bias));
  return d;
}

}  // namespace

BiLstm BiLstm::create(ModelParams& params, ParamInit& init, const std::string& name,
                      std::size_t input_dim, std::size_t output_dim) {
  if (output_dim == 0 || output_dim % 2 != 0) {
    throw std::invalid_argument("biLSTM output dim must be positive and even, got " +
                                std::to_string(output_dim));
  }
  const std::size_t h = output_dim / 2;
  BiLstm l;
  l.fwd = make_direction(params, init, name + ".fwd", input_dim, h);
  l.bwd = make_direction(params, init, name + ".bwd", input_dim, h);
  return l;
}

std::size_t BiLstm::param_count() const {
  return 2 * (fwd.w.size() + fwd.u.size() + fwd.b.size());
}

ad::Tensor BiLstm::forward(ad::Graph& g, const ad::Tensor& x) const {
  if (x.cols() != input_dim()) {
    throw ShapeError("biLSTM expects input width " + std::to_string(input_dim()) + ", got " +
                     x.shape().str());
  }
  const ad::Tensor zf = g.add(g.matmul_nt(x, fwd.w), fwd.b);
  const ad::Tensor zb = g.add(g.matmul_nt(x, bwd.w), bwd.b);
  return scan(g, zf, zb, 1);
}

ad::Tensor BiLstm::scan(ad::Graph& g, const ad::Tensor& z_fwd, const ad::Tensor& z_bwd,
                        std::size_t batch) const {
  const ad::Tensor hf = g.lstm_scan(z_fwd, fwd.u, batch, false);
  const ad::Tensor hb = g.lstm_scan(z_bwd, bwd.u, batch, true);
  return g.concat_cols(hf, hb);
}

SelfAttention SelfAttention::create(ModelParams& params, ParamInit& init,
                                    const std::string& name, std::size_t dim) {
  return SelfAttention{Affine::create(params, init, name, dim, 1)};
}

ad::Tensor SelfAttention::forward(ad::Graph& g, const ad::Tensor& hidden) const {
  return attend(g, scorer.apply(g, hidden), hidden);
}

ad::Tensor attend(ad::Graph& g, const ad::Tensor& scores, const ad::Tensor& hidden) {
  if (scores.rows() != hidden.rows() || scores.cols() != 1) {
    throw ShapeError("attend: scores " + scores.shape().str() + " vs hidden " +
                     hidden.shape().str());
  }
  return g.matmul_tn(g.softmax(scores), hidden);
}

ad::Tensor EmbeddingTable::lookup(ad::Graph& g, std::span<const std::size_t> ids) const {
  if (ids.empty()) throw DataError("embedding lookup of an empty token sequence");
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  for (auto& r : rows)
    if (r >= vocab_size()) r = oov;
  return g.gather_rows(matrix, rows);
}

std::size_t SlotEmbedding::index_of(std::string_view slot) const {
  auto it = std::find(names.begin(), names.end(), slot);
  if (it == names.end()) throw DataError("unknown slot: " + std::string(slot));
  return static_cast<std::size_t>(it - names.begin());
}

ad::Tensor SlotEmbedding::row(ad::Graph& g, std::size_t slot) const {
  if (slot >= matrix.rows()) {
    throw std::out_of_range("slot id " + std::to_string(slot) + " out of range (K=" +
                            std::to_string(matrix.rows()) + ")");
  }
  const std::size_t idx[] = {slot};
  return g.gather_rows(matrix, idx);
}

}  // namespace gce
