#pragma once

#include <cstdint>

#include "gce/corpus.hpp"

namespace gce {

struct SyntheticSpec {
  std::size_t slots = 3;
  std::size_t values_per_slot = 5;
  std::size_t dialogues = 20;
  std::size_t turns_per_dialogue = 4;
  std::size_t vocab_size = 50;  // filler words
  std::uint64_t seed = 7;
  // Adds a request slot whose values are the informable slot names.
  bool requests = false;
};

// Deterministic learnable corpus: every gold pair's value token (and the
// name of every requested slot) is injected into the turn's utterance among
// random filler words. Slots are "slot<k>", values "s<k>v<j>".
Corpus gen_synthetic(const SyntheticSpec& spec);

}  // namespace gce
