#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gce/corpus.hpp"
#include "gce/model.hpp"

namespace gce {

struct TurnPrediction {
  std::map<std::string, std::string> inform;  // at most one value per slot
  std::set<std::string> request;
  bool operator==(const TurnPrediction&) const = default;
};

// Accumulated slot -> value assignments.
using BeliefState = std::map<std::string, std::string>;

struct MetricsReport {
  double joint_goal = 0.0;
  double turn_request = 0.0;
  double turn_inform = 0.0;
  std::size_t turns = 0;
  std::size_t dialogues = 0;
  bool operator==(const MetricsReport&) const = default;
};

// Turn probabilities to a prediction: per informable slot the most probable
// value above threshold (first in ontology order on ties); for the request
// slot every value above threshold.
TurnPrediction decide(const Ontology& ontology,
                      const std::vector<std::vector<double>>& probabilities, double threshold);

// Probability of every (slot, value) pair in the ontology, [slot][value].
std::vector<std::vector<double>> turn_probabilities(const DstModel& model,
                                                    const DialogueTurn& turn,
                                                    ValueCache* cache = nullptr);

TurnPrediction predict_turn(const DstModel& model, const DialogueTurn& turn,
                            ValueCache* cache = nullptr);

BeliefState accumulate(const BeliefState& state, const TurnPrediction& pred);

// Gold labels as a prediction, for building the reference state.
TurnPrediction gold_prediction(const TurnLabel& label);

using TurnPredictor =
    std::function<TurnPrediction(std::size_t dialogue, std::size_t turn, const DialogueTurn&)>;

MetricsReport evaluate(const std::vector<Dialogue>& dialogues, const TurnPredictor& predictor);
// Dialogues are scored across `threads` workers; results do not depend on it.
MetricsReport evaluate(const DstModel& model, const std::vector<Dialogue>& dialogues,
                       std::size_t threads = 1);

std::string to_key_value(const MetricsReport& report);
std::string to_json(const MetricsReport& report);
MetricsReport metrics_from_json(std::string_view text);
std::string to_json(const TurnPrediction& pred);

}  // namespace gce
