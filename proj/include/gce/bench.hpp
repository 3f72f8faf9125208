#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gce/model.hpp"
#include "gce/training.hpp"

namespace gce {

enum class BenchMode { kTrain, kTest };
std::string to_string(BenchMode m);

struct BenchSpec {
  std::vector<Variant> variants = {Variant::kGlad, Variant::kGce};
  std::vector<std::size_t> slot_counts = {5, 10, 20, 40};
  std::vector<BenchMode> modes = {BenchMode::kTrain, BenchMode::kTest};
  std::size_t batch_turns = 50;
  std::size_t seq_len = 30;
  std::size_t d_emb = 400;
  std::size_t d_rnn = 64;
  std::size_t values_per_slot = 2;
  std::size_t vocab_size = 200;
  std::size_t warmup = 1;
  std::size_t iterations = 5;
  std::uint64_t seed = 1;
  bool batch_slots = true;
  // When above 1, test mode is also timed with slots split across this many
  // threads and reported under the variant name suffixed with "-mt".
  std::size_t threads = 1;

  void validate() const;
};

// Synthetic batch shared by every variant at one slot count.
struct BenchBatch {
  Ontology ontology;
  Vocab vocab;
  std::vector<DialogueTurn> turns;
  std::string checksum;  // hash of the serialized dialogue and ontology
};

BenchBatch make_bench_batch(const BenchSpec& spec, std::size_t slots);

// Wall-clock seconds of one pass over the batch. Train mode builds one graph
// with the mean BCE over every (slot, value) pair, runs backward and an Adam
// step; test mode scores every pair without recording a tape. threads > 1
// splits the slots of each turn across workers (test mode only).
double time_batch(DstModel& model, Adam& optimizer, const std::vector<DialogueTurn>& turns,
                  BenchMode mode, std::size_t threads = 1);

struct BenchRow {
  std::string variant;
  std::size_t slots = 0;
  BenchMode mode = BenchMode::kTrain;
  double median_s = 0.0;
  double iqr_s = 0.0;
  // GLAD median / this row's median at the same (slots, mode); 1 for GLAD.
  double speedup = 1.0;
  bool operator==(const BenchRow&) const = default;
};

struct BenchReport {
  BenchSpec spec;
  std::vector<BenchRow> rows;
  std::vector<std::string> checksums;  // one per slot count
};

// Median and interquartile range (linear interpolation between order
// statistics).
double median(std::vector<double> samples);
double iqr(std::vector<double> samples);

BenchReport scaling_sweep(const BenchSpec& spec);

// Relative latency reduction of `variant` against GLAD, averaged over every
// (slots, mode) pair present in the report: mean of 1 - 1/speedup.
double mean_reduction(const BenchReport& report, std::string_view variant);

const BenchRow* find_row(const BenchReport& report, std::string_view variant, std::size_t slots,
                         BenchMode mode);

std::string emit_csv(const BenchReport& report);
std::string emit_text(const BenchReport& report);
std::vector<BenchRow> parse_csv(std::string_view csv);

}  // namespace gce
