#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gce {

// Slot whose values are the names of slots the user asks about.
inline constexpr std::string_view kRequestSlot = "request";

struct SlotValue {
  std::string slot;
  std::string value;
  auto operator<=>(const SlotValue&) const = default;
};

// A bare slot is a system request ("what area?"); a slot with a value is a
// system inform or confirmation.
struct SystemAct {
  std::string slot;
  std::optional<std::string> value;

  std::vector<std::string> tokens() const;
  bool operator==(const SystemAct&) const = default;
};

struct TurnLabel {
  std::vector<SlotValue> inform;
  std::vector<std::string> request;
  bool operator==(const TurnLabel&) const = default;
};

struct DialogueTurn {
  std::vector<std::string> utterance;
  std::vector<SystemAct> system_acts;
  TurnLabel label;
  bool operator==(const DialogueTurn&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<DialogueTurn> turns;
  bool operator==(const Dialogue&) const = default;
};

class Ontology {
 public:
  struct Slot {
    std::string name;
    std::vector<std::string> values;
    bool operator==(const Slot&) const = default;
  };

  Ontology() = default;
  explicit Ontology(std::vector<Slot> slots);

  const std::vector<Slot>& slots() const { return slots_; }
  std::size_t size() const { return slots_.size(); }
  std::vector<std::string> slot_names() const;
  std::optional<std::size_t> find(std::string_view slot) const;
  std::size_t index_of(std::string_view slot) const;  // throws DataError
  std::optional<std::size_t> value_index(std::size_t slot, std::string_view value) const;
  bool contains(std::string_view slot, std::string_view value) const;
  bool is_request(std::size_t slot) const { return slots_[slot].name == kRequestSlot; }

  // Appends the slot or value if absent, keeping first-seen order.
  void add(std::string_view slot, std::string_view value);
  bool operator==(const Ontology& other) const { return slots_ == other.slots_; }

 private:
  void validate() const;
  std::vector<Slot> slots_;
};

class Vocab {
 public:
  static constexpr std::size_t kOov = 0;
  static constexpr std::string_view kOovToken = "<unk>";

  Vocab();
  explicit Vocab(const std::vector<std::string>& tokens);  // tokens[0] must be the OOV token

  std::size_t add(std::string_view token);
  std::size_t id(std::string_view token) const;
  std::vector<std::size_t> ids(const std::vector<std::string>& tokens) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Lowercases, splits punctuation off into separate tokens, splits on
// whitespace.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  std::size_t tokens = 0;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  Ontology ontology;
  CorpusStats stats;
};

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues);

// WoZ layout: an array of {"dialogue_idx", "dialogue": [turn...]} with each
// turn carrying "transcript", "system_acts" and "turn_label". Labels are
// validated against `ontology` when given; otherwise the ontology is
// collected from the labels in first-seen order.
Corpus parse_woz(std::string_view json_text, const Ontology* ontology = nullptr);
Corpus load_woz(const std::filesystem::path& path, const Ontology* ontology = nullptr);

// Same layout with domain-qualified slot names ("hotel-area"). Domains are
// dropped and identically named slots merged, values unioned in first-seen
// order.
Corpus parse_multiwoz(std::string_view json_text, const Ontology* ontology = nullptr);
Corpus load_multiwoz(const std::filesystem::path& path, const Ontology* ontology = nullptr);
std::string strip_domain(std::string_view slot);
Ontology merge_domains(const Ontology& ontology);

std::string dump_woz(const std::vector<Dialogue>& dialogues);
void save_woz(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues);

// {"slots": [names...], "values": {slot: [values...]}}
Ontology parse_ontology(std::string_view json_text);
Ontology load_ontology(const std::filesystem::path& path);
std::string dump_ontology(const Ontology& ontology);
void save_ontology(const std::filesystem::path& path, const Ontology& ontology);

// Every token of utterances, acts, slot names and values.
Vocab build_vocab(const std::vector<Dialogue>& dialogues, const Ontology& ontology);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace gce
