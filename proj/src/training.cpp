#include "gce/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "gce/errors.hpp"

namespace gce {

double bce_loss(double y, double label) {
  const double p = std::clamp(y, 1e-12, 1.0 - 1e-12);
  return -label * std::log(p) - (1.0 - label) * std::log(1.0 - p);
}

Adam::Adam(const ModelParams& params, AdamConfig config) : config_(config) {
  for (const auto& e : params.entries()) {
    const std::size_t n = e.trainable ? e.tensor.size() : 0;
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

bool Adam::step(ModelParams& params) {
  const auto& entries = params.entries();
  if (entries.size() != m_.size()) throw std::logic_error("Adam state does not match params");

  bool finite = true;
  for (const auto& e : entries) {
    if (!e.trainable || !e.tensor.has_grad()) continue;
    ad::Tensor t = e.tensor;
    for (double g : t.mutable_grad()) finite = finite && std::isfinite(g);
  }
  if (!finite) {
    ++skipped_;
    std::cerr << "adam: non-finite gradient, step skipped (" << skipped_ << " so far)\n";
    params.zero_grad();
    return false;
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].trainable || !entries[i].tensor.has_grad()) continue;
    ad::Tensor p = entries[i].tensor;
    auto values = p.mutable_values();
    auto grad = p.mutable_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * grad[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * grad[j] * grad[j];
      values[j] -= config_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
  params.zero_grad();
  return true;
}

TurnTargets sample_targets(const Ontology& ontology, const DialogueTurn& turn,
                           std::size_t negative_ratio, std::mt19937_64& rng) {
  TurnTargets out;
  out.selection.resize(ontology.size());
  out.labels.resize(ontology.size());
  for (std::size_t k = 0; k < ontology.size(); ++k) {
    const auto& slot = ontology.slots()[k];
    std::vector<bool> gold(slot.values.size(), false);
    if (ontology.is_request(k)) {
      for (const auto& r : turn.label.request)
        if (auto v = ontology.value_index(k, r)) gold[*v] = true;
    } else {
      for (const auto& p : turn.label.inform)
        if (p.slot == slot.name)
          if (auto v = ontology.value_index(k, p.value)) gold[*v] = true;
    }
    std::vector<std::size_t> negatives;
    std::size_t positives = 0;
    for (std::size_t v = 0; v < gold.size(); ++v) {
      if (gold[v]) {
        out.selection[k].push_back(v);
        out.labels[k].push_back(1.0);
        ++positives;
      } else {
        negatives.push_back(v);
      }
    }
    std::size_t keep = negatives.size();
    if (negative_ratio > 0) {
      keep = std::min(keep, negative_ratio * std::max<std::size_t>(positives, 1));
      std::shuffle(negatives.begin(), negatives.end(), rng);
      negatives.resize(keep);
      std::sort(negatives.begin(), negatives.end());
    }
    for (std::size_t v : negatives) {
      out.selection[k].push_back(v);
      out.labels[k].push_back(0.0);
    }
  }
  return out;
}

double train_epoch(DstModel& model, const std::vector<Dialogue>& corpus, Adam& optimizer,
                   const TrainConfig& config, std::mt19937_64& rng) {
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  std::vector<const DialogueTurn*> turns;
  for (const auto& d : corpus)
    for (const auto& t : d.turns) turns.push_back(&t);
  if (turns.empty()) throw DataError("training corpus is empty");
  std::shuffle(turns.begin(), turns.end(), rng);

  double loss_sum = 0.0;
  std::size_t pair_count = 0;
  for (std::size_t start = 0; start < turns.size(); start += config.batch_size) {
    const std::size_t end = std::min(turns.size(), start + config.batch_size);
    ad::Graph g;
    ValueCache cache;
    std::vector<ad::Tensor> losses;
    for (std::size_t i = start; i < end; ++i) {
      const TurnTargets targets =
          sample_targets(model.ontology(), *turns[i], config.negative_ratio, rng);
      const auto scored = model.score_turn(g, *turns[i], targets.selection, cache);
      // score_turn emits pairs in selection order.
      std::vector<double> flat;
      for (const auto& l : targets.labels) flat.insert(flat.end(), l.begin(), l.end());
      for (std::size_t j = 0; j < scored.size(); ++j) losses.push_back(g.bce(scored[j].y, flat[j]));
    }
    if (losses.empty()) continue;
    const double n = static_cast<double>(losses.size());
    const ad::Tensor loss = g.affine_scalar(g.sum(g.concat_rows(losses)), 1.0 / n, 0.0);
    loss_sum += loss.item() * n;
    pair_count += losses.size();
    g.backward(loss);
    optimizer.step(model.params());
  }
  return pair_count ? loss_sum / static_cast<double>(pair_count) : 0.0;
}

bool early_stop(std::span<const double> history, std::size_t patience) {
  if (history.empty()) throw std::invalid_argument("early_stop: empty history");
  if (patience == 0 || history.size() <= patience) return false;
  const auto split = history.end() - static_cast<std::ptrdiff_t>(patience);
  const double best_before = *std::max_element(history.begin(), split);
  const double best_recent = *std::max_element(split, history.end());
  return best_recent <= best_before;
}

namespace {

std::vector<std::vector<double>> snapshot(const ModelParams& params) {
  std::vector<std::vector<double>> out;
  for (const auto& e : params.entries())
    out.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  return out;
}

void restore(ModelParams& params, const std::vector<std::vector<double>>& saved) {
  const auto& entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ad::Tensor t = entries[i].tensor;
    std::copy(saved[i].begin(), saved[i].end(), t.mutable_values().begin());
  }
}

}  // namespace

FitResult fit(DstModel& model, const std::vector<Dialogue>& train,
              const std::vector<Dialogue>& dev, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  std::mt19937_64 rng(config.seed);
  Adam optimizer(model.params(), config.adam);
  FitResult result;
  std::vector<double> history;
  std::vector<std::vector<double>> best;
  const std::size_t eval_every = std::max<std::size_t>(config.eval_every, 1);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec{epoch, train_epoch(model, train, optimizer, config, rng), std::nullopt};
    if (!std::isfinite(rec.loss)) throw NumericError("training loss is not finite");
    const bool evaluate_now = !dev.empty() && (epoch % eval_every == 0 || epoch == config.max_epochs);
    if (evaluate_now) {
      rec.dev = evaluate(model, dev);
      history.push_back(rec.dev->joint_goal);
      if (best.empty() || rec.dev->joint_goal > result.best_dev_joint_goal) {
        result.best_dev_joint_goal = rec.dev->joint_goal;
        result.best_epoch = epoch;
        best = snapshot(model.params());
      }
    }
    result.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (evaluate_now) {
      if (result.best_dev_joint_goal >= 1.0) break;
      if (early_stop(history, config.patience)) {
        result.stopped_early = true;
        break;
      }
    }
  }
  if (!best.empty()) {
    restore(model.params(), best);
  } else {
    result.best_epoch = result.epochs.empty() ? 0 : result.epochs.back().epoch;
  }
  return result;
}

std::pair<std::vector<Dialogue>, std::vector<Dialogue>> split_dev(
    const std::vector<Dialogue>& dialogues, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw std::invalid_argument("dev fraction must be in [0, 1)");
  std::size_t held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dialogues.size())));
  if (fraction > 0.0 && held == 0 && dialogues.size() > 1) held = 1;
  std::vector<std::size_t> order(dialogues.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_dev(dialogues.size(), false);
  for (std::size_t i = 0; i < held; ++i) is_dev[order[i]] = true;
  std::vector<Dialogue> train, dev;
  for (std::size_t i = 0; i < dialogues.size(); ++i)
    (is_dev[i] ? dev : train).push_back(dialogues[i]);
  return {std::move(train), std::move(dev)};
}

}  // namespace gce
