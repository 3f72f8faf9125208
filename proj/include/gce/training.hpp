#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "gce/corpus.hpp"
#include "gce/model.hpp"
#include "gce/tracker.hpp"

namespace gce {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 50;  // turns per optimizer step
  AdamConfig adam;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;  // evaluations without dev improvement
  std::uint64_t seed = 1;
  // Negatives sampled per positive (at least one positive assumed per slot);
  // 0 scores the full ontology.
  std::size_t negative_ratio = 3;
  std::size_t eval_every = 1;
};

// -label ln(y) - (1 - label) ln(1 - y), with y clamped to [1e-12, 1 - 1e-12].
double bce_loss(double y, double label);

class Adam {
 public:
  Adam(const ModelParams& params, AdamConfig config);

  // Applies one bias-corrected update to every trainable parameter and zeros
  // the gradients. A non-finite gradient skips the update (gradients are
  // still cleared) and returns false.
  bool step(ModelParams& params);

  std::size_t steps() const { return steps_; }
  std::size_t skipped() const { return skipped_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t steps_ = 0;
  std::size_t skipped_ = 0;
};

// Candidates and 0/1 targets for one turn: every gold value plus sampled
// negatives per slot.
struct TurnTargets {
  ValueSelection selection;
  std::vector<std::vector<double>> labels;  // parallel to selection
};

TurnTargets sample_targets(const Ontology& ontology, const DialogueTurn& turn,
                           std::size_t negative_ratio, std::mt19937_64& rng);

// Mean per-pair loss over one pass of shuffled batches.
double train_epoch(DstModel& model, const std::vector<Dialogue>& corpus, Adam& optimizer,
                   const TrainConfig& config, std::mt19937_64& rng);

// True once the last `patience` entries all fail to improve on the best
// value seen before them.
bool early_stop(std::span<const double> history, std::size_t patience);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<MetricsReport> dev;
};

struct FitResult {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_joint_goal = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains until max_epochs, early stopping, or a perfect dev joint goal, then
// restores the parameters of the best dev evaluation.
FitResult fit(DstModel& model, const std::vector<Dialogue>& train,
              const std::vector<Dialogue>& dev, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

// Seeded split holding out round(fraction * n) dialogues (at least one when
// fraction > 0 and n > 1).
std::pair<std::vector<Dialogue>, std::vector<Dialogue>> split_dev(
    const std::vector<Dialogue>& dialogues, double fraction, std::uint64_t seed);

}  // namespace gce
