#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gce/model.hpp"

namespace gce {

inline constexpr std::string_view kCheckpointFormat = "gce-dst-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  std::size_t epoch = 0;
  double dev_metric = 0.0;
  std::string config_hash;
};

// 64-bit FNV-1a, hex encoded.
std::string config_hash(std::string_view resolved_config);

// JSON container with the model config, vocabulary, ontology and every named
// parameter array (frozen word vectors included). Doubles are written in
// shortest round-trip form, so a reload reproduces the model bitwise.
std::string dump_checkpoint(const DstModel& model, const CheckpointInfo& info);
void save_checkpoint(const std::filesystem::path& path, const DstModel& model,
                     const CheckpointInfo& info);

DstModel parse_checkpoint(std::string_view text, CheckpointInfo* info = nullptr);
DstModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace gce
