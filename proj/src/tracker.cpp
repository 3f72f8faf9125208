#include "gce/tracker.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gce/errors.hpp"

namespace gce {

TurnPrediction decide(const Ontology& ontology,
                      const std::vector<std::vector<double>>& probabilities, double threshold) {
  TurnPrediction pred;
  for (std::size_t k = 0; k < ontology.size(); ++k) {
    const auto& slot = ontology.slots()[k];
    const auto& probs = probabilities.at(k);
    if (ontology.is_request(k)) {
      for (std::size_t v = 0; v < probs.size(); ++v)
        if (probs[v] > threshold) pred.request.insert(slot.values[v]);
      continue;
    }
    std::optional<std::size_t> best;
    for (std::size_t v = 0; v < probs.size(); ++v)
      if (probs[v] > threshold && (!best || probs[v] > probs[*best])) best = v;
    if (best) pred.inform[slot.name] = slot.values[*best];
  }
  return pred;
}

std::vector<std::vector<double>> turn_probabilities(const DstModel& model,
                                                    const DialogueTurn& turn,
                                                    ValueCache* cache) {
  const Ontology& onto = model.ontology();
  ad::Graph g(ad::GradMode::kNoGrad);
  ValueCache local;
  const auto scored = model.score_turn(g, turn, all_values(onto), cache ? *cache : local);
  std::vector<std::vector<double>> probs(onto.size());
  for (std::size_t k = 0; k < onto.size(); ++k) probs[k].resize(onto.slots()[k].values.size());
  for (const auto& p : scored) probs[p.slot][p.value] = p.y.item();
  return probs;
}

TurnPrediction predict_turn(const DstModel& model, const DialogueTurn& turn, ValueCache* cache) {
  return decide(model.ontology(), turn_probabilities(model, turn, cache),
                model.config().threshold);
}

BeliefState accumulate(const BeliefState& state, const TurnPrediction& pred) {
  BeliefState next = state;
  for (const auto& [slot, value] : pred.inform) next[slot] = value;
  return next;
}

TurnPrediction gold_prediction(const TurnLabel& label) {
  TurnPrediction p;
  for (const auto& sv : label.inform) p.inform[sv.slot] = sv.value;
  p.request.insert(label.request.begin(), label.request.end());
  return p;
}

namespace {

struct Tally {
  std::size_t turns = 0;
  std::size_t joint = 0;
  std::size_t request = 0;
  std::size_t inform = 0;
};

Tally score_dialogue(std::size_t index, const Dialogue& d, const TurnPredictor& predictor) {
  if (d.turns.empty()) throw DataError("dialogue " + d.id + " has no labeled turns");
  Tally t;
  BeliefState predicted, gold;
  for (std::size_t j = 0; j < d.turns.size(); ++j) {
    const DialogueTurn& turn = d.turns[j];
    const TurnPrediction pred = predictor(index, j, turn);
    const TurnPrediction ref = gold_prediction(turn.label);
    predicted = accumulate(predicted, pred);
    gold = accumulate(gold, ref);

    std::set<SlotValue> pred_pairs, gold_pairs;
    for (const auto& [s, v] : pred.inform) pred_pairs.insert({s, v});
    gold_pairs.insert(turn.label.inform.begin(), turn.label.inform.end());

    ++t.turns;
    t.joint += predicted == gold;
    t.request += pred.request == ref.request;
    t.inform += pred_pairs == gold_pairs;
  }
  return t;
}

MetricsReport finish(const std::vector<Tally>& tallies) {
  Tally total;
  for (const auto& t : tallies) {
    total.turns += t.turns;
    total.joint += t.joint;
    total.request += t.request;
    total.inform += t.inform;
  }
  MetricsReport r;
  r.dialogues = tallies.size();
  r.turns = total.turns;
  const double n = static_cast<double>(total.turns);
  r.joint_goal = static_cast<double>(total.joint) / n;
  r.turn_request = static_cast<double>(total.request) / n;
  r.turn_inform = static_cast<double>(total.inform) / n;
  return r;
}

}  // namespace

MetricsReport evaluate(const std::vector<Dialogue>& dialogues, const TurnPredictor& predictor) {
  if (dialogues.empty()) throw DataError("evaluate: no dialogues");
  std::vector<Tally> tallies;
  tallies.reserve(dialogues.size());
  for (std::size_t i = 0; i < dialogues.size(); ++i)
    tallies.push_back(score_dialogue(i, dialogues[i], predictor));
  return finish(tallies);
}

MetricsReport evaluate(const DstModel& model, const std::vector<Dialogue>& dialogues,
                       std::size_t threads) {
  if (dialogues.empty()) throw DataError("evaluate: no dialogues");
  threads = std::clamp<std::size_t>(threads, 1, dialogues.size());
  std::vector<Tally> tallies(dialogues.size());
  auto worker = [&](std::size_t w) {
    ValueCache cache;
    TurnPredictor predictor = [&](std::size_t, std::size_t, const DialogueTurn& turn) {
      return predict_turn(model, turn, &cache);
    };
    for (std::size_t i = w; i < dialogues.size(); i += threads)
      tallies[i] = score_dialogue(i, dialogues[i], predictor);
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker, w);
  }
  return finish(tallies);
}

std::string to_key_value(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "joint_goal=" << r.joint_goal << '\n'
     << "turn_request=" << r.turn_request << '\n'
     << "turn_inform=" << r.turn_inform << '\n'
     << "turns=" << r.turns << '\n'
     << "dialogues=" << r.dialogues << '\n';
  return os.str();
}

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["joint_goal"] = r.joint_goal;
  j["turn_request"] = r.turn_request;
  j["turn_inform"] = r.turn_inform;
  j["turns"] = r.turns;
  j["dialogues"] = r.dialogues;
  return j.dump(2) + "\n";
}

MetricsReport metrics_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.joint_goal = j.at("joint_goal").get<double>();
  r.turn_request = j.at("turn_request").get<double>();
  r.turn_inform = j.at("turn_inform").get<double>();
  r.turns = j.at("turns").get<std::size_t>();
  r.dialogues = j.at("dialogues").get<std::size_t>();
  return r;
}

std::string to_json(const TurnPrediction& pred) {
  nlohmann::ordered_json j;
  j["inform"] = nlohmann::ordered_json::object();
  for (const auto& [s, v] : pred.inform) j["inform"][s] = v;
  j["request"] = std::vector<std::string>(pred.request.begin(), pred.request.end());
  return j.dump(2) + "\n";
}

}  // namespace gce
