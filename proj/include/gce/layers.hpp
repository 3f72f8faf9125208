#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gce/autodiff.hpp"
#include "gce/grad_check.hpp"

namespace gce {

// Every learnable array of one model, addressable by name, in registration
// order. Frozen arrays (e.g. pretrained word vectors) are stored alongside
// but excluded from trainable views and parameter counts.
class ModelParams {
 public:
  struct Entry {
    std::string name;
    ad::Tensor tensor;
    bool trainable = true;
  };

  ad::Tensor add(std::string name, ad::Shape shape, std::vector<double> values,
                 bool trainable = true);
  const ad::Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t trainable_count() const;
  std::vector<ad::NamedTensor> trainable() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

// Seeded uniform initializer.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}
  std::vector<double> uniform(std::size_t n, double bound);
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  std::vector<double> fan_in(std::size_t n, std::size_t fan_in);

 private:
  std::mt19937_64 rng_;
};

struct Affine {
  ad::Tensor weight;  // [out x in]
  ad::Tensor bias;    // [1 x out]

  static Affine create(ModelParams& params, ParamInit& init, const std::string& name,
                       std::size_t in, std::size_t out);
  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  // x [n x in] -> [n x out]
  ad::Tensor apply(ad::Graph& g, const ad::Tensor& x) const;
};

// Gates stacked as [input; forget; output; cell] along the 4h axis.
struct LstmDirection {
  ad::Tensor w;  // [4h x in]
  ad::Tensor u;  // [4h x h]
  ad::Tensor b;  // [1 x 4h]
};

struct BiLstm {
  LstmDirection fwd;
  LstmDirection bwd;

  static BiLstm create(ModelParams& params, ParamInit& init, const std::string& name,
                       std::size_t input_dim, std::size_t output_dim);

  std::size_t input_dim() const { return fwd.w.cols(); }
  std::size_t hidden_dim() const { return fwd.u.cols(); }
  std::size_t output_dim() const { return 2 * hidden_dim(); }
  std::size_t param_count() const;

  // x [n x in] -> [n x 2h]; row i is [h_fwd_i ; h_bwd_i].
  ad::Tensor forward(ad::Graph& g, const ad::Tensor& x) const;
  // Runs both directions over precomputed input projections laid out as
  // batch interleaved rows (see Graph::lstm_scan); returns [(n*batch) x 2h].
  ad::Tensor scan(ad::Graph& g, const ad::Tensor& z_fwd, const ad::Tensor& z_bwd,
                  std::size_t batch) const;
};

struct SelfAttention {
  Affine scorer;  // d_rnn -> 1

  static SelfAttention create(ModelParams& params, ParamInit& init, const std::string& name,
                              std::size_t dim);
  std::size_t param_count() const { return scorer.weight.size() + scorer.bias.size(); }
  // H [n x d] -> context [1 x d]
  ad::Tensor forward(ad::Graph& g, const ad::Tensor& hidden) const;
};

// Attention pooling: softmax(scores [n x 1]) weighted sum of hidden rows.
ad::Tensor attend(ad::Graph& g, const ad::Tensor& scores, const ad::Tensor& hidden);

struct EmbeddingTable {
  ad::Tensor matrix;  // [vocab x d_emb]
  std::size_t oov = 0;

  std::size_t vocab_size() const { return matrix.rows(); }
  std::size_t dim() const { return matrix.cols(); }
  bool trainable() const { return matrix.requires_grad(); }
  // Ids outside the table map to the OOV row.
  ad::Tensor lookup(ad::Graph& g, std::span<const std::size_t> ids) const;
};

struct SlotEmbedding {
  ad::Tensor matrix;  // [K x d_emb]
  std::vector<std::string> names;

  std::size_t index_of(std::string_view slot) const;
  ad::Tensor row(ad::Graph& g, std::size_t slot) const;
};

}  // namespace gce
