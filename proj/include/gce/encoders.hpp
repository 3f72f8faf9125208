#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gce/autodiff.hpp"
#include "gce/layers.hpp"

namespace gce {

// Slot-specific view of one input sequence.
struct Encoding {
  ad::Tensor hidden;   // H^k [n x d_rnn]
  ad::Tensor context;  // c^k [1 x d_rnn]
};

struct EncoderDims {
  std::size_t d_emb = 400;
  std::size_t d_rnn = 200;
};

class SlotEncoder {
 public:
  virtual ~SlotEncoder() = default;

  // x [n x d_emb], n >= 1. Throws std::out_of_range for an unknown slot.
  virtual Encoding encode(ad::Graph& g, const ad::Tensor& x, std::size_t slot) const = 0;
  // Encodings for slots [begin, end), in slot order.
  virtual std::vector<Encoding> encode_range(ad::Graph& g, const ad::Tensor& x,
                                             std::size_t begin, std::size_t end) const;
  std::vector<Encoding> encode_all(ad::Graph& g, const ad::Tensor& x) const {
    return encode_range(g, x, 0, slot_count());
  }

  virtual std::size_t slot_count() const = 0;
  virtual std::size_t d_emb() const = 0;
  virtual std::size_t d_rnn() const = 0;
  // Scalar learnable parameters owned by the encoder.
  virtual std::size_t param_count() const = 0;
};

// One shared biLSTM and one attention scorer, both conditioned on a learned
// slot embedding concatenated to every input row.
class GceEncoder final : public SlotEncoder {
 public:
  static std::unique_ptr<GceEncoder> create(ModelParams& params, ParamInit& init,
                                            const EncoderDims& dims,
                                            std::vector<std::string> slot_names);

  Encoding encode(ad::Graph& g, const ad::Tensor& x, std::size_t slot) const override;
  // With slot batching on, all K conditioned copies of x run through the
  // biLSTM as one stacked recurrence; the slot-independent part of the input
  // projection is computed once.
  std::vector<Encoding> encode_range(ad::Graph& g, const ad::Tensor& x, std::size_t begin,
                                     std::size_t end) const override;

  std::size_t slot_count() const override { return slots.matrix.rows(); }
  std::size_t d_emb() const override { return slots.matrix.cols(); }
  std::size_t d_rnn() const override { return lstm.output_dim(); }
  std::size_t param_count() const override;

  bool batch_slots = true;
  BiLstm lstm;        // input [x_i ; s_k], width 2 d_emb
  Affine attention;   // [H_i ; s_k] -> score, width d_rnn + d_emb
  SlotEmbedding slots;

 private:
  void check_slot(std::size_t slot) const;
};

// Global biLSTM + self-attention shared by all slots, mixed with a dedicated
// local biLSTM + self-attention per slot through sigmoid(beta_k).
class GladEncoder final : public SlotEncoder {
 public:
  static std::unique_ptr<GladEncoder> create(ModelParams& params, ParamInit& init,
                                             const EncoderDims& dims,
                                             std::vector<std::string> slot_names);

  Encoding encode(ad::Graph& g, const ad::Tensor& x, std::size_t slot) const override;
  std::vector<Encoding> encode_range(ad::Graph& g, const ad::Tensor& x, std::size_t begin,
                                     std::size_t end) const override;

  std::size_t slot_count() const override { return local.size(); }
  std::size_t d_emb() const override { return global.input_dim(); }
  std::size_t d_rnn() const override { return global.output_dim(); }
  std::size_t param_count() const override;
  // Learnable scalars added by each extra slot.
  std::size_t local_increment() const;

  BiLstm global;
  SelfAttention global_attention;
  std::vector<BiLstm> local;
  std::vector<SelfAttention> local_attention;
  std::vector<ad::Tensor> beta;  // [1 x 1] per slot
  std::vector<std::string> slot_names;

 private:
  Encoding mix(ad::Graph& g, const ad::Tensor& global_hidden, std::size_t slot,
               const ad::Tensor& x) const;
};

}  // namespace gce
