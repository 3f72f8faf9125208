#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gce/autodiff.hpp"
#include "gce/corpus.hpp"
#include "gce/embeddings.hpp"
#include "gce/encoders.hpp"
#include "gce/layers.hpp"
#include "gce/scorer.hpp"

namespace gce {

enum class Variant { kGce, kGlad };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::kGce;
  EncoderDims dims;
  bool batch_slots = true;
  double threshold = 0.5;
  bool train_word_embeddings = false;
};

// Per-slot encodings of one turn: the utterance (hidden states and context)
// and the context vectors of every prior system act and every candidate.
struct EncodedTurnSlice {
  Encoding utterance;
  std::vector<ad::Tensor> action_contexts;
  std::vector<ad::Tensor> value_contexts;
};

// Context vectors of candidate values, memoized per (slot, value) for the
// lifetime of one graph.
class ValueCache {
 public:
  const ad::Tensor* find(std::size_t slot, std::size_t value) const;
  void put(std::size_t slot, std::size_t value, ad::Tensor context);
  std::size_t size() const { return cache_.size(); }

 private:
  std::map<std::pair<std::size_t, std::size_t>, ad::Tensor> cache_;
};

struct ScoredPair {
  std::size_t slot = 0;
  std::size_t value = 0;
  ad::Tensor y_utt;
  ad::Tensor y_act;
  ad::Tensor y;  // probability [1 x 1]
};

// Candidate value indices to score, one list per slot.
using ValueSelection = std::vector<std::vector<std::size_t>>;
ValueSelection all_values(const Ontology& ontology);

// A complete tracker: frozen (by default) word vectors, a slot encoder of
// either variant and the shared scorer.
class DstModel {
 public:
  static DstModel create(const ModelConfig& config, Ontology ontology, Vocab vocab,
                         const WordVectors& words, std::uint64_t seed);

  DstModel(DstModel&&) = default;
  DstModel& operator=(DstModel&&) = default;

  const ModelConfig& config() const { return config_; }
  const Ontology& ontology() const { return ontology_; }
  const Vocab& vocab() const { return vocab_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const SlotEncoder& encoder() const { return *encoder_; }
  SlotEncoder& encoder() { return *encoder_; }
  const ScorerParams& scorer() const { return scorer_; }
  const EmbeddingTable& words() const { return words_; }
  void set_batch_slots(bool on);

  ad::Tensor embed(ad::Graph& g, const std::vector<std::string>& tokens) const;
  ad::Tensor value_context(ad::Graph& g, std::size_t slot, std::size_t value,
                           ValueCache* cache = nullptr) const;

  EncodedTurnSlice encode_turn_inputs(ad::Graph& g, const DialogueTurn& turn,
                                      std::size_t slot) const;

  // Scores the selected candidates of slots [slot_begin, slot_end).
  std::vector<ScoredPair> score_turn(ad::Graph& g, const DialogueTurn& turn,
                                     const ValueSelection& selection, ValueCache& cache,
                                     std::size_t slot_begin = 0,
                                     std::optional<std::size_t> slot_end = std::nullopt) const;

  SlotValueScore score_slot_value(const DialogueTurn& turn, std::string_view slot,
                                  std::string_view value) const;

 private:
  DstModel() = default;

  ModelConfig config_;
  Ontology ontology_;
  Vocab vocab_;
  ModelParams params_;
  EmbeddingTable words_;
  std::unique_ptr<SlotEncoder> encoder_;
  ScorerParams scorer_;
};

}  // namespace gce
