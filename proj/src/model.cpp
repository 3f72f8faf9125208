#include "gce/model.hpp"

#include "gce/errors.hpp"

namespace gce {

std::string to_string(Variant v) { return v == Variant::kGce ? "gce" : "glad"; }

Variant parse_variant(std::string_view name) {
  if (name == "gce") return Variant::kGce;
  if (name == "glad") return Variant::kGlad;
  throw UsageError("unknown model variant '" + std::string(name) + "' (expected gce or glad)");
}

const ad::Tensor* ValueCache::find(std::size_t slot, std::size_t value) const {
  auto it = cache_.find({slot, value});
  return it == cache_.end() ? nullptr : &it->second;
}

void ValueCache::put(std::size_t slot, std::size_t value, ad::Tensor context) {
  cache_.insert_or_assign({slot, value}, std::move(context));
}

ValueSelection all_values(const Ontology& ontology) {
  ValueSelection sel(ontology.size());
  for (std::size_t k = 0; k < ontology.size(); ++k) {
    sel[k].resize(ontology.slots()[k].values.size());
    for (std::size_t v = 0; v < sel[k].size(); ++v) sel[k][v] = v;
  }
  return sel;
}

DstModel DstModel::create(const ModelConfig& config, Ontology ontology, Vocab vocab,
                          const WordVectors& words, std::uint64_t seed) {
  if (config.dims.d_emb == 0 || config.dims.d_rnn == 0) {
    throw std::invalid_argument("model dims must be positive");
  }
  if (words.dim != config.dims.d_emb || words.rows() != vocab.size()) {
    throw DataError("word vectors are " + std::to_string(words.rows()) + "x" +
                    std::to_string(words.dim) + ", model expects " +
                    std::to_string(vocab.size()) + "x" + std::to_string(config.dims.d_emb));
  }
  if (ontology.size() == 0) throw DataError("ontology has no slots");

  DstModel m;
  m.config_ = config;
  m.ontology_ = std::move(ontology);
  m.vocab_ = std::move(vocab);
  ParamInit init(seed);
  m.words_.matrix = m.params_.add("words", {m.vocab_.size(), words.dim}, words.values,
                                  config.train_word_embeddings);
  m.words_.oov = Vocab::kOov;
  if (config.variant == Variant::kGce) {
    auto enc = GceEncoder::create(m.params_, init, config.dims, m.ontology_.slot_names());
    enc->batch_slots = config.batch_slots;
    m.encoder_ = std::move(enc);
  } else {
    m.encoder_ = GladEncoder::create(m.params_, init, config.dims, m.ontology_.slot_names());
  }
  m.scorer_ = ScorerParams::create(m.params_, init, config.dims.d_rnn);
  return m;
}

void DstModel::set_batch_slots(bool on) {
  config_.batch_slots = on;
  if (auto* gce = dynamic_cast<GceEncoder*>(encoder_.get())) gce->batch_slots = on;
}

ad::Tensor DstModel::embed(ad::Graph& g, const std::vector<std::string>& tokens) const {
  const std::vector<std::size_t> ids = vocab_.ids(tokens);
  return words_.lookup(g, ids);
}

ad::Tensor DstModel::value_context(ad::Graph& g, std::size_t slot, std::size_t value,
                                   ValueCache* cache) const {
  if (cache)
    if (const ad::Tensor* hit = cache->find(slot, value)) return *hit;
  const auto& values = ontology_.slots().at(slot).values;
  const ad::Tensor x = embed(g, tokenize(values.at(value)));
  ad::Tensor c = encoder_->encode(g, x, slot).context;
  if (cache) cache->put(slot, value, c);
  return c;
}

EncodedTurnSlice DstModel::encode_turn_inputs(ad::Graph& g, const DialogueTurn& turn,
                                              std::size_t slot) const {
  EncodedTurnSlice out;
  out.utterance = encoder_->encode(g, embed(g, turn.utterance), slot);
  for (const auto& act : turn.system_acts)
    out.action_contexts.push_back(encoder_->encode(g, embed(g, act.tokens()), slot).context);
  const std::size_t n_values = ontology_.slots().at(slot).values.size();
  for (std::size_t v = 0; v < n_values; ++v) out.value_contexts.push_back(value_context(g, slot, v));
  return out;
}

std::vector<ScoredPair> DstModel::score_turn(ad::Graph& g, const DialogueTurn& turn,
                                             const ValueSelection& selection, ValueCache& cache,
                                             std::size_t slot_begin,
                                             std::optional<std::size_t> slot_end) const {
  const std::size_t end = slot_end.value_or(ontology_.size());
  if (selection.size() != ontology_.size()) {
    throw std::invalid_argument("value selection must list every slot");
  }
  const std::vector<Encoding> utterance =
      encoder_->encode_range(g, embed(g, turn.utterance), slot_begin, end);
  std::vector<std::vector<Encoding>> actions;
  actions.reserve(turn.system_acts.size());
  for (const auto& act : turn.system_acts)
    actions.push_back(encoder_->encode_range(g, embed(g, act.tokens()), slot_begin, end));

  std::vector<ScoredPair> out;
  std::vector<ad::Tensor> pool;
  for (std::size_t k = slot_begin; k < end; ++k) {
    if (selection[k].empty()) continue;
    const Encoding& utt = utterance[k - slot_begin];
    pool.clear();
    for (const auto& a : actions) pool.push_back(a[k - slot_begin].context);
    pool.push_back(scorer_.null_action);
    const ad::Tensor action_contexts = g.concat_rows(pool);
    for (std::size_t v : selection[k]) {
      const ad::Tensor c_val = value_context(g, k, v, &cache);
      ScoredPair p{k, v, score_utterance(g, utt.hidden, c_val, scorer_.utterance),
                   score_actions(g, action_contexts, utt.context, c_val), {}};
      p.y = combine_scores(g, p.y_utt, p.y_act, scorer_.omega);
      out.push_back(std::move(p));
    }
  }
  return out;
}

SlotValueScore DstModel::score_slot_value(const DialogueTurn& turn, std::string_view slot,
                                          std::string_view value) const {
  const std::size_t k = ontology_.index_of(slot);
  const auto v = ontology_.value_index(k, value);
  if (!v) throw DataError("unknown value " + std::string(slot) + "=" + std::string(value));
  ValueSelection sel(ontology_.size());
  sel[k] = {*v};
  ad::Graph g(ad::GradMode::kNoGrad);
  ValueCache cache;
  const auto scored = score_turn(g, turn, sel, cache, k, k + 1);
  const ScoredPair& p = scored.front();
  return {std::string(slot), std::string(value), p.y_utt.item(), p.y_act.item(), p.y.item()};
}

}  // namespace gce
