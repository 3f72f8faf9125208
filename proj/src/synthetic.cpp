#include "gce/synthetic.hpp"

#include <algorithm>
#include <random>

namespace gce {

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

Corpus gen_synthetic(const SyntheticSpec& spec) {
  if (spec.slots == 0 || spec.values_per_slot == 0 || spec.dialogues == 0 ||
      spec.turns_per_dialogue == 0 || spec.vocab_size == 0) {
    throw std::invalid_argument("synthetic corpus counts must be positive");
  }
  std::vector<Ontology::Slot> slots;
  for (std::size_t k = 0; k < spec.slots; ++k) {
    Ontology::Slot s{"slot" + std::to_string(k), {}};
    for (std::size_t v = 0; v < spec.values_per_slot; ++v)
      s.values.push_back("s" + std::to_string(k) + "v" + std::to_string(v));
    slots.push_back(std::move(s));
  }
  if (spec.requests) {
    Ontology::Slot req{std::string(kRequestSlot), {}};
    for (std::size_t k = 0; k < spec.slots; ++k) req.values.push_back(slots[k].name);
    slots.push_back(std::move(req));
  }
  Ontology ontology(slots);

  std::mt19937_64 rng(spec.seed);
  std::vector<Dialogue> dialogues;
  for (std::size_t d = 0; d < spec.dialogues; ++d) {
    Dialogue dialogue{std::to_string(d), {}};
    for (std::size_t t = 0; t < spec.turns_per_dialogue; ++t) {
      DialogueTurn turn;
      std::vector<std::string> keywords;

      // 0, 1 or 2 informed slots.
      const std::size_t informs = std::min<std::size_t>(pick(rng, 3), spec.slots);
      std::vector<std::size_t> order(spec.slots);
      for (std::size_t k = 0; k < spec.slots; ++k) order[k] = k;
      std::shuffle(order.begin(), order.end(), rng);
      std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(informs));
      for (std::size_t i = 0; i < informs; ++i) {
        const auto& slot = slots[order[i]];
        const std::string& value = slot.values[pick(rng, slot.values.size())];
        turn.label.inform.push_back({slot.name, value});
        keywords.push_back(value);
      }
      if (spec.requests && pick(rng, 3) == 0) {
        const auto& asked = slots[pick(rng, spec.slots)].name;
        turn.label.request.push_back(asked);
        keywords.push_back(asked);
      }

      const std::size_t fillers = 2 + pick(rng, 4);
      for (std::size_t i = 0; i < fillers; ++i)
        turn.utterance.push_back("w" + std::to_string(pick(rng, spec.vocab_size)));
      for (const auto& kw : keywords) {
        const std::size_t at = pick(rng, turn.utterance.size() + 1);
        turn.utterance.insert(turn.utterance.begin() + static_cast<std::ptrdiff_t>(at), kw);
      }

      if (t > 0) {
        const std::size_t acts = pick(rng, 3);
        for (std::size_t i = 0; i < acts; ++i) {
          const auto& slot = slots[pick(rng, spec.slots)];
          if (pick(rng, 2) == 0) {
            turn.system_acts.push_back({slot.name, std::nullopt});
          } else {
            turn.system_acts.push_back({slot.name, slot.values[pick(rng, slot.values.size())]});
          }
        }
      }
      dialogue.turns.push_back(std::move(turn));
    }
    dialogues.push_back(std::move(dialogue));
  }
  Corpus c;
  c.stats = corpus_stats(dialogues);
  c.dialogues = std::move(dialogues);
  c.ontology = std::move(ontology);
  return c;
}

}  // namespace gce
