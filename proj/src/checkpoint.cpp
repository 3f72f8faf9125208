#include "gce/checkpoint.hpp"

#include <cstdio>

#include <json.hpp>

#include "gce/errors.hpp"

namespace gce {

using Json = nlohmann::ordered_json;

std::string config_hash(std::string_view resolved_config) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : resolved_config) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dump_checkpoint(const DstModel& model, const CheckpointInfo& info) {
  const ModelConfig& cfg = model.config();
  Json root;
  root["format"] = kCheckpointFormat;
  root["version"] = kCheckpointVersion;
  root["model"] = {{"variant", to_string(cfg.variant)},
                   {"d_emb", cfg.dims.d_emb},
                   {"d_rnn", cfg.dims.d_rnn},
                   {"batch_slots", cfg.batch_slots},
                   {"threshold", cfg.threshold},
                   {"train_word_embeddings", cfg.train_word_embeddings}};
  root["epoch"] = info.epoch;
  root["dev_metric"] = info.dev_metric;
  root["config_hash"] = info.config_hash;
  root["vocab"] = model.vocab().tokens();
  Json onto = Json::array();
  for (const auto& s : model.ontology().slots()) onto.push_back({{"slot", s.name}, {"values", s.values}});
  root["ontology"] = std::move(onto);
  Json params = Json::array();
  for (const auto& e : model.params().entries()) {
    Json p;
    p["name"] = e.name;
    p["shape"] = {e.tensor.rows(), e.tensor.cols()};
    p["trainable"] = e.trainable;
    p["values"] = std::vector<double>(e.tensor.values().begin(), e.tensor.values().end());
    params.push_back(std::move(p));
  }
  root["params"] = std::move(params);
  return root.dump() + "\n";
}

void save_checkpoint(const std::filesystem::path& path, const DstModel& model,
                     const CheckpointInfo& info) {
  write_file(path, dump_checkpoint(model, info));
}

DstModel parse_checkpoint(std::string_view text, CheckpointInfo* info) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (root.at("format").get<std::string>() != kCheckpointFormat) {
      throw DataError("checkpoint: unrecognized format tag");
    }
    if (root.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported version " + root["version"].dump());
    }
    const Json& m = root.at("model");
    ModelConfig cfg;
    cfg.variant = parse_variant(m.at("variant").get<std::string>());
    cfg.dims.d_emb = m.at("d_emb").get<std::size_t>();
    cfg.dims.d_rnn = m.at("d_rnn").get<std::size_t>();
    cfg.batch_slots = m.at("batch_slots").get<bool>();
    cfg.threshold = m.at("threshold").get<double>();
    cfg.train_word_embeddings = m.at("train_word_embeddings").get<bool>();

    Vocab vocab(root.at("vocab").get<std::vector<std::string>>());
    std::vector<Ontology::Slot> slots;
    for (const Json& s : root.at("ontology"))
      slots.push_back({s.at("slot").get<std::string>(), s.at("values").get<std::vector<std::string>>()});
    Ontology ontology(std::move(slots));

    const Json& params = root.at("params");
    WordVectors words;
    words.dim = cfg.dims.d_emb;
    for (const Json& p : params)
      if (p.at("name") == "words") words.values = p.at("values").get<std::vector<double>>();

    DstModel model = DstModel::create(cfg, std::move(ontology), std::move(vocab), words, 0);
    const auto& entries = model.params().entries();
    if (params.size() != entries.size()) {
      throw DataError("checkpoint: " + std::to_string(params.size()) + " arrays, model has " +
                      std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Json& p = params[i];
      ad::Tensor t = entries[i].tensor;
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      if (p.at("name").get<std::string>() != entries[i].name || shape.size() != 2 ||
          shape[0] != t.rows() || shape[1] != t.cols()) {
        throw DataError("checkpoint: array " + std::to_string(i) + " (" + p.at("name").dump() +
                        ") does not match model parameter " + entries[i].name);
      }
      const auto values = p.at("values").get<std::vector<double>>();
      if (values.size() != t.size()) throw DataError("checkpoint: wrong value count for " + entries[i].name);
      std::copy(values.begin(), values.end(), t.mutable_values().begin());
    }
    if (info) {
      info->epoch = root.at("epoch").get<std::size_t>();
      info->dev_metric = root.at("dev_metric").get<double>();
      info->config_hash = root.at("config_hash").get<std::string>();
    }
    return model;
  } catch (const Json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

DstModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  return parse_checkpoint(read_file(path), info);
}

}  // namespace gce
