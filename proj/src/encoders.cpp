#include "gce/encoders.hpp"

#include <numeric>

#include "gce/errors.hpp"

namespace gce {

namespace {

void check_range(std::size_t begin, std::size_t end, std::size_t slots) {
  if (begin >= end || end > slots) {
    throw std::out_of_range("slot range [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") invalid for K=" + std::to_string(slots));
  }
}

}  // namespace

std::vector<Encoding> SlotEncoder::encode_range(ad::Graph& g, const ad::Tensor& x,
                                                std::size_t begin, std::size_t end) const {
  check_range(begin, end, slot_count());
  std::vector<Encoding> out;
  out.reserve(end - begin);
  for (std::size_t k = begin; k < end; ++k) out.push_back(encode(g, x, k));
  return out;
}

std::unique_ptr<GceEncoder> GceEncoder::create(ModelParams& params, ParamInit& init,
                                               const EncoderDims& dims,
                                               std::vector<std::string> slot_names) {
  if (slot_names.empty()) throw std::invalid_argument("GCE encoder needs at least one slot");
  auto enc = std::make_unique<GceEncoder>();
  const std::size_t k = slot_names.size();
  enc->slots.matrix = params.add("gce.slot_emb", {k, dims.d_emb},
                                 init.fan_in(k * dims.d_emb, dims.d_emb));
  enc->slots.names = std::move(slot_names);
  enc->lstm = BiLstm::create(params, init, "gce.lstm", 2 * dims.d_emb, dims.d_rnn);
  enc->attention = Affine::create(params, init, "gce.attn", dims.d_rnn + dims.d_emb, 1);
  return enc;
}

std::size_t GceEncoder::param_count() const {
  return slots.matrix.size() + lstm.param_count() + attention.weight.size() +
         attention.bias.size();
}

void GceEncoder::check_slot(std::size_t slot) const {
  if (slot >= slot_count()) {
    throw std::out_of_range("slot id " + std::to_string(slot) + " out of range (K=" +
                            std::to_string(slot_count()) + ")");
  }
}

Encoding GceEncoder::encode(ad::Graph& g, const ad::Tensor& x, std::size_t slot) const {
  check_slot(slot);
  if (x.cols() != d_emb()) {
    throw ShapeError("GCE encoder expects rows of width " + std::to_string(d_emb()) + ", got " +
                     x.shape().str());
  }
  const ad::Tensor s = slots.row(g, slot);
  const ad::Tensor hidden = lstm.forward(g, g.concat_cols(x, s));
  const ad::Tensor scores = attention.apply(g, g.concat_cols(hidden, s));
  return {hidden, attend(g, scores, hidden)};
}

std::vector<Encoding> GceEncoder::encode_range(ad::Graph& g, const ad::Tensor& x,
                                               std::size_t begin, std::size_t end) const {
  if (!batch_slots) return SlotEncoder::encode_range(g, x, begin, end);
  check_range(begin, end, slot_count());
  if (x.cols() != d_emb()) {
    throw ShapeError("GCE encoder expects rows of width " + std::to_string(d_emb()) + ", got " +
                     x.shape().str());
  }
  const std::size_t n = x.rows(), k = end - begin, d = d_emb();
  std::vector<std::size_t> slot_rows(k);
  std::iota(slot_rows.begin(), slot_rows.end(), begin);
  const ad::Tensor s = k == slot_count() ? slots.matrix : g.gather_rows(slots.matrix, slot_rows);

  // W [x ; s] + b = W_x x + (W_s s + b): the first term is shared by all slots.
  auto project = [&](const LstmDirection& dir) {
    const ad::Tensor zx = g.matmul_nt(x, g.slice_cols(dir.w, 0, d));
    const ad::Tensor zs = g.add(g.matmul_nt(s, g.slice_cols(dir.w, d, 2 * d)), dir.b);
    return g.grid_add(zx, zs);
  };
  const ad::Tensor hidden_all = lstm.scan(g, project(lstm.fwd), project(lstm.bwd), k);

  const std::size_t r = d_rnn();
  const ad::Tensor& w = attention.weight;
  const ad::Tensor score_h = g.matmul_nt(hidden_all, g.slice_cols(w, 0, r));
  const ad::Tensor score_s = g.add(g.matmul_nt(s, g.slice_cols(w, r, r + d)), attention.bias);

  std::vector<Encoding> out;
  out.reserve(k);
  std::vector<std::size_t> rows(n);
  for (std::size_t slot = 0; slot < k; ++slot) {
    for (std::size_t t = 0; t < n; ++t) rows[t] = t * k + slot;
    const std::size_t srow[] = {slot};
    const ad::Tensor hidden = g.gather_rows(hidden_all, rows);
    const ad::Tensor scores = g.add(g.gather_rows(score_h, rows), g.gather_rows(score_s, srow));
    out.push_back({hidden, attend(g, scores, hidden)});
  }
  return out;
}

std::unique_ptr<GladEncoder> GladEncoder::create(ModelParams& params, ParamInit& init,
                                                 const EncoderDims& dims,
                                                 std::vector<std::string> slot_names) {
  if (slot_names.empty()) throw std::invalid_argument("GLAD encoder needs at least one slot");
  auto enc = std::make_unique<GladEncoder>();
  enc->global = BiLstm::create(params, init, "glad.global.lstm", dims.d_emb, dims.d_rnn);
  enc->global_attention = SelfAttention::create(params, init, "glad.global.attn", dims.d_rnn);
  for (const auto& name : slot_names) {
    const std::string prefix = "glad.local." + name;
    enc->local.push_back(BiLstm::create(params, init, prefix + ".lstm", dims.d_emb, dims.d_rnn));
    enc->local_attention.push_back(
        SelfAttention::create(params, init, prefix + ".attn", dims.d_rnn));
    enc->beta.push_back(params.add(prefix + ".beta", {1, 1}, {0.0}));
  }
  enc->slot_names = std::move(slot_names);
  return enc;
}

std::size_t GladEncoder::local_increment() const {
  return local.front().param_count() + local_attention.front().param_count() + 1;
}

std::size_t GladEncoder::param_count() const {
  return global.param_count() + global_attention.param_count() +
         slot_count() * local_increment();
}

Encoding GladEncoder::mix(ad::Graph& g, const ad::Tensor& global_hidden, std::size_t slot,
                          const ad::Tensor& x) const {
  const ad::Tensor local_hidden = local[slot].forward(g, x);
  const ad::Tensor gate = g.sigmoid(beta[slot]);
  const ad::Tensor rest = g.affine_scalar(gate, -1.0, 1.0);
  const ad::Tensor hidden = g.add(g.mul(global_hidden, gate), g.mul(local_hidden, rest));
  const ad::Tensor context =
      g.add(g.mul(global_attention.forward(g, hidden), gate),
            g.mul(local_attention[slot].forward(g, hidden), rest));
  return {hidden, context};
}

Encoding GladEncoder::encode(ad::Graph& g, const ad::Tensor& x, std::size_t slot) const {
  if (slot >= slot_count()) {
    throw std::out_of_range("slot id " + std::to_string(slot) + " out of range (K=" +
                            std::to_string(slot_count()) + ")");
  }
  return mix(g, global.forward(g, x), slot, x);
}

std::vector<Encoding> GladEncoder::encode_range(ad::Graph& g, const ad::Tensor& x,
                                                std::size_t begin, std::size_t end) const {
  check_range(begin, end, slot_count());
  const ad::Tensor global_hidden = global.forward(g, x);
  std::vector<Encoding> out;
  out.reserve(end - begin);
  for (std::size_t k = begin; k < end; ++k) out.push_back(mix(g, global_hidden, k, x));
  return out;
}

}  // namespace gce
