#include "gce/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "gce/errors.hpp"

namespace gce {

using Json = nlohmann::ordered_json;

std::vector<std::string> SystemAct::tokens() const {
  std::vector<std::string> out{value ? "inform" : "request"};
  for (auto& t : tokenize(slot)) out.push_back(std::move(t));
  if (value)
    for (auto& t : tokenize(*value)) out.push_back(std::move(t));
  return out;
}

Ontology::Ontology(std::vector<Slot> slots) : slots_(std::move(slots)) { validate(); }

void Ontology::validate() const {
  std::unordered_set<std::string> names;
  for (const auto& s : slots_) {
    if (!names.insert(s.name).second) throw DataError("ontology: duplicate slot " + s.name);
    if (s.values.empty()) throw DataError("ontology: slot " + s.name + " has no values");
    std::unordered_set<std::string> seen;
    for (const auto& v : s.values)
      if (!seen.insert(v).second) throw DataError("ontology: duplicate value " + s.name + "=" + v);
  }
}

std::vector<std::string> Ontology::slot_names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& s : slots_) out.push_back(s.name);
  return out;
}

std::optional<std::size_t> Ontology::find(std::string_view slot) const {
  for (std::size_t i = 0; i < slots_.size(); ++i)
    if (slots_[i].name == slot) return i;
  return std::nullopt;
}

std::size_t Ontology::index_of(std::string_view slot) const {
  if (auto i = find(slot)) return *i;
  throw DataError("unknown slot: " + std::string(slot));
}

std::optional<std::size_t> Ontology::value_index(std::size_t slot, std::string_view value) const {
  const auto& values = slots_.at(slot).values;
  auto it = std::find(values.begin(), values.end(), value);
  if (it == values.end()) return std::nullopt;
  return static_cast<std::size_t>(it - values.begin());
}

bool Ontology::contains(std::string_view slot, std::string_view value) const {
  auto i = find(slot);
  return i && value_index(*i, value).has_value();
}

void Ontology::add(std::string_view slot, std::string_view value) {
  auto i = find(slot);
  if (!i) {
    slots_.push_back({std::string(slot), {std::string(value)}});
    return;
  }
  if (!value_index(*i, value)) slots_[*i].values.emplace_back(value);
}

Vocab::Vocab() { add(kOovToken); }

Vocab::Vocab(const std::vector<std::string>& tokens) {
  if (tokens.empty() || tokens.front() != kOovToken) {
    throw DataError("vocabulary must start with the OOV token");
  }
  for (const auto& t : tokens) {
    if (index_.count(t)) throw DataError("vocabulary: duplicate token " + t);
    add(t);
  }
}

std::size_t Vocab::add(std::string_view token) {
  auto [it, inserted] = index_.try_emplace(std::string(token), tokens_.size());
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

std::size_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kOov : it->second;
}

std::vector<std::size_t> Vocab::ids(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues) {
  CorpusStats s;
  s.dialogues = dialogues.size();
  for (const auto& d : dialogues) {
    s.turns += d.turns.size();
    for (const auto& t : d.turns) s.tokens += t.utterance.size();
  }
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

namespace {

Json parse_json(std::string_view text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

std::string where(std::size_t dialogue, std::optional<std::size_t> turn = std::nullopt) {
  std::string s = "record " + std::to_string(dialogue);
  if (turn) s += " turn " + std::to_string(*turn);
  return s;
}

std::string as_string(const Json& j, const std::string& context) {
  if (!j.is_string()) throw DataError(context + ": expected a string, got " + j.dump());
  return j.get<std::string>();
}

SystemAct parse_act(const Json& j, const std::string& context) {
  if (j.is_string()) return {j.get<std::string>(), std::nullopt};
  if (j.is_array() && j.size() == 1) return {as_string(j[0], context), std::nullopt};
  if (j.is_array() && j.size() == 2) return {as_string(j[0], context), as_string(j[1], context)};
  throw DataError(context + ": malformed system act " + j.dump());
}

std::vector<Dialogue> parse_dialogues(std::string_view text) {
  const Json root = parse_json(text, "corpus");
  if (!root.is_array()) throw DataError("corpus: top level must be an array of dialogues");
  std::vector<Dialogue> out;
  out.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    const Json& rec = root[i];
    if (!rec.is_object() || !rec.contains("dialogue") || !rec["dialogue"].is_array()) {
      throw DataError(where(i) + ": missing \"dialogue\" array");
    }
    Dialogue d;
    if (rec.contains("dialogue_idx")) {
      const Json& id = rec["dialogue_idx"];
      d.id = id.is_string() ? id.get<std::string>() : id.dump();
    } else {
      d.id = std::to_string(i);
    }
    const Json& turns = rec["dialogue"];
    if (turns.empty()) throw DataError(where(i) + ": dialogue has no turns");
    for (std::size_t j = 0; j < turns.size(); ++j) {
      const Json& tj = turns[j];
      const std::string ctx = where(i, j);
      if (!tj.is_object() || !tj.contains("transcript") || !tj.contains("turn_label")) {
        throw DataError(ctx + ": turn needs \"transcript\" and \"turn_label\"");
      }
      DialogueTurn turn;
      turn.utterance = tokenize(as_string(tj["transcript"], ctx));
      if (turn.utterance.empty()) throw DataError(ctx + ": empty utterance");
      if (tj.contains("system_acts")) {
        if (!tj["system_acts"].is_array()) throw DataError(ctx + ": system_acts must be an array");
        for (const Json& a : tj["system_acts"]) turn.system_acts.push_back(parse_act(a, ctx));
      }
      if (!tj["turn_label"].is_array()) throw DataError(ctx + ": turn_label must be an array");
      for (const Json& pair : tj["turn_label"]) {
        if (!pair.is_array() || pair.size() != 2) {
          throw DataError(ctx + ": malformed turn_label entry " + pair.dump());
        }
        std::string slot = as_string(pair[0], ctx);
        std::string value = as_string(pair[1], ctx);
        if (slot == kRequestSlot) {
          turn.label.request.push_back(std::move(value));
        } else {
          turn.label.inform.push_back({std::move(slot), std::move(value)});
        }
      }
      d.turns.push_back(std::move(turn));
    }
    out.push_back(std::move(d));
  }
  return out;
}

Corpus finalize(std::vector<Dialogue> dialogues, const Ontology* ontology) {
  Ontology onto;
  if (ontology) {
    onto = *ontology;
  } else {
    for (const auto& d : dialogues)
      for (const auto& t : d.turns) {
        for (const auto& p : t.label.inform) onto.add(p.slot, p.value);
        for (const auto& r : t.label.request) onto.add(kRequestSlot, r);
      }
  }
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    for (std::size_t j = 0; j < dialogues[i].turns.size(); ++j) {
      const auto& label = dialogues[i].turns[j].label;
      for (const auto& p : label.inform) {
        if (p.slot == kRequestSlot || !onto.contains(p.slot, p.value)) {
          throw DataError(where(i, j) + ": label " + p.slot + "=" + p.value +
                          " is not in the ontology");
        }
      }
      for (const auto& r : label.request) {
        if (!onto.contains(kRequestSlot, r)) {
          throw DataError(where(i, j) + ": requested slot " + r + " is not in the ontology");
        }
      }
    }
  }
  Corpus c;
  c.stats = corpus_stats(dialogues);
  c.dialogues = std::move(dialogues);
  c.ontology = std::move(onto);
  return c;
}

}  // namespace

Corpus parse_woz(std::string_view json_text, const Ontology* ontology) {
  return finalize(parse_dialogues(json_text), ontology);
}

Corpus load_woz(const std::filesystem::path& path, const Ontology* ontology) {
  return parse_woz(read_file(path), ontology);
}

std::string strip_domain(std::string_view slot) {
  const auto dash = slot.find('-');
  return std::string(dash == std::string_view::npos ? slot : slot.substr(dash + 1));
}

Ontology merge_domains(const Ontology& ontology) {
  Ontology merged;
  for (const auto& s : ontology.slots()) {
    const bool request = s.name == kRequestSlot;
    const std::string name = request ? s.name : strip_domain(s.name);
    for (const auto& v : s.values) merged.add(name, request ? strip_domain(v) : v);
  }
  return merged;
}

Corpus parse_multiwoz(std::string_view json_text, const Ontology* ontology) {
  std::vector<Dialogue> dialogues = parse_dialogues(json_text);
  for (auto& d : dialogues) {
    for (auto& t : d.turns) {
      for (auto& p : t.label.inform) p.slot = strip_domain(p.slot);
      for (auto& r : t.label.request) r = strip_domain(r);
      for (auto& a : t.system_acts) a.slot = strip_domain(a.slot);
    }
  }
  if (ontology) {
    const Ontology merged = merge_domains(*ontology);
    return finalize(std::move(dialogues), &merged);
  }
  return finalize(std::move(dialogues), nullptr);
}

Corpus load_multiwoz(const std::filesystem::path& path, const Ontology* ontology) {
  return parse_multiwoz(read_file(path), ontology);
}

std::string dump_woz(const std::vector<Dialogue>& dialogues) {
  Json root = Json::array();
  for (const auto& d : dialogues) {
    Json rec;
    const bool numeric = !d.id.empty() && d.id.size() < 18 &&
                         std::all_of(d.id.begin(), d.id.end(), [](unsigned char c) {
                           return std::isdigit(c);
                         }) &&
                         (d.id == "0" || d.id.front() != '0');
    if (numeric) {
      rec["dialogue_idx"] = std::stoll(d.id);
    } else {
      rec["dialogue_idx"] = d.id;
    }
    Json turns = Json::array();
    for (std::size_t j = 0; j < d.turns.size(); ++j) {
      const auto& t = d.turns[j];
      Json acts = Json::array();
      for (const auto& a : t.system_acts) {
        if (a.value) {
          acts.push_back(Json::array({a.slot, *a.value}));
        } else {
          acts.push_back(a.slot);
        }
      }
      Json label = Json::array();
      for (const auto& p : t.label.inform) label.push_back(Json::array({p.slot, p.value}));
      for (const auto& r : t.label.request)
        label.push_back(Json::array({std::string(kRequestSlot), r}));
      Json tj;
      tj["turn_idx"] = j;
      tj["transcript"] = join_tokens(t.utterance);
      tj["system_acts"] = std::move(acts);
      tj["turn_label"] = std::move(label);
      turns.push_back(std::move(tj));
    }
    rec["dialogue"] = std::move(turns);
    root.push_back(std::move(rec));
  }
  return root.dump(1) + "\n";
}

void save_woz(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues) {
  write_file(path, dump_woz(dialogues));
}

Ontology parse_ontology(std::string_view json_text) {
  const Json root = parse_json(json_text, "ontology");
  if (!root.is_object() || !root.contains("slots") || !root.contains("values") ||
      !root["slots"].is_array() || !root["values"].is_object()) {
    throw DataError("ontology: expected {\"slots\": [...], \"values\": {...}}");
  }
  std::vector<Ontology::Slot> slots;
  for (const Json& name : root["slots"]) {
    const std::string slot = as_string(name, "ontology");
    if (!root["values"].contains(slot) || !root["values"][slot].is_array()) {
      throw DataError("ontology: no value list for slot " + slot);
    }
    Ontology::Slot s{slot, {}};
    for (const Json& v : root["values"][slot]) s.values.push_back(as_string(v, "ontology"));
    slots.push_back(std::move(s));
  }
  return Ontology(std::move(slots));
}

Ontology load_ontology(const std::filesystem::path& path) { return parse_ontology(read_file(path)); }

std::string dump_ontology(const Ontology& ontology) {
  Json root;
  root["slots"] = ontology.slot_names();
  Json values = Json::object();
  for (const auto& s : ontology.slots()) values[s.name] = s.values;
  root["values"] = std::move(values);
  return root.dump(1) + "\n";
}

void save_ontology(const std::filesystem::path& path, const Ontology& ontology) {
  write_file(path, dump_ontology(ontology));
}

Vocab build_vocab(const std::vector<Dialogue>& dialogues, const Ontology& ontology) {
  Vocab vocab;
  auto add_all = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) vocab.add(t);
  };
  for (const auto& s : ontology.slots()) {
    add_all(tokenize(s.name));
    for (const auto& v : s.values) add_all(tokenize(v));
  }
  for (const auto& d : dialogues) {
    for (const auto& t : d.turns) {
      add_all(t.utterance);
      for (const auto& a : t.system_acts) add_all(a.tokens());
    }
  }
  return vocab;
}

}  // namespace gce
