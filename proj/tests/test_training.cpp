#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "gce/checkpoint.hpp"
#include "gce/errors.hpp"
#include "gce/synthetic.hpp"
#include "gce/training.hpp"
#include "test_util.hpp"

using gce::ad::Graph;
using gce::ad::Tensor;

namespace {

const std::string kFixtures = GCE_FIXTURES;

struct Setup {
  gce::Corpus corpus;
  gce::Vocab vocab;
};

Setup synthetic(gce::SyntheticSpec spec = {}) {
  Setup s{gce::gen_synthetic(spec), {}};
  s.vocab = gce::build_vocab(s.corpus.dialogues, s.corpus.ontology);
  return s;
}

gce::DstModel make_model(const Setup& s, gce::Variant v, std::size_t d_emb, std::size_t d_rnn,
                         std::uint64_t seed) {
  gce::ModelConfig cfg;
  cfg.variant = v;
  cfg.dims = {d_emb, d_rnn};
  return gce::DstModel::create(cfg, s.corpus.ontology, s.vocab,
                               gce::random_embeddings(s.vocab, d_emb, seed), seed);
}

std::vector<std::vector<double>> snapshot(const gce::ModelParams& p) {
  std::vector<std::vector<double>> out;
  for (const auto& e : p.entries()) out.push_back(testutil::values(e.tensor));
  return out;
}

}  // namespace

TEST_CASE("bce_loss: values, limit and gradient") {
  CHECK(gce::bce_loss(0.5, 1) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(gce::bce_loss(0.5, 1) == std::log(2.0));
  CHECK(gce::bce_loss(1.0 - 1e-9, 1) < 1e-8);
  CHECK(gce::bce_loss(1.0, 1) < 1e-11);
  CHECK(std::isfinite(gce::bce_loss(0.0, 1)));
  CHECK(gce::bce_loss(0.0, 1) == doctest::Approx(-std::log(1e-12)));

  Tensor y = Tensor::parameter({1, 1}, {0.8});
  Graph g;
  const Tensor loss = g.bce(y, 1.0);
  CHECK(loss.item() == gce::bce_loss(0.8, 1.0));
  g.backward(loss);
  CHECK(y.grad()[0] == doctest::Approx(-1.25).epsilon(1e-14));
  gce::ad::GradCheckOptions opt;
  opt.rel_tol = 1e-8;
  CHECK(gce::ad::grad_check([&](Graph& gg) { return gg.bce(y, 1.0); }, {{"y", y}}, opt).passed);
}

TEST_CASE("adam: zero gradient, first step size, non-finite skip") {
  gce::ModelParams params;
  Tensor x = params.add("x", {1, 3}, {1.0, -2.0, 0.5});
  gce::Adam adam(params, {});
  x.mutable_grad();  // allocated, all zero
  const auto before = testutil::values(x);
  CHECK(adam.step(params));
  CHECK(testutil::values(x) == before);

  gce::ModelParams p2;
  Tensor w = p2.add("w", {1, 2}, {0.0, 0.0});
  gce::Adam a2(p2, {});
  auto g = w.mutable_grad();
  g[0] = 3.0;
  g[1] = -0.01;
  a2.step(p2);
  CHECK(w.values()[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(w.values()[1] == doctest::Approx(1e-3).epsilon(1e-4));
  CHECK(w.grad() == std::vector<double>{0.0, 0.0});

  w.mutable_grad()[0] = std::nan("");
  const auto held = testutil::values(w);
  CHECK_FALSE(a2.step(p2));
  CHECK(a2.skipped() == 1);
  CHECK(testutil::values(w) == held);
  CHECK(w.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("adam: quadratic bowl converges") {
  gce::ModelParams params;
  Tensor x = params.add("x", {1, 1}, {1.0});
  gce::AdamConfig cfg;
  cfg.lr = 1e-2;
  gce::Adam adam(params, cfg);
  std::size_t steps = 0;
  while (std::abs(x.item()) >= 1e-3 && steps < 500) {
    Graph g;
    g.backward(g.mul(x, x));
    adam.step(params);
    ++steps;
  }
  CHECK(std::abs(x.item()) < 1e-3);
  CHECK(steps <= 500);
}

TEST_CASE("early_stop: monotone, flat and a traced noisy history") {
  const std::vector<double> rising = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  for (std::size_t n = 1; n <= rising.size(); ++n)
    CHECK_FALSE(gce::early_stop(std::span(rising.data(), n), 3));

  const std::vector<double> flat(6, 0.4);
  std::vector<bool> flat_stops;
  for (std::size_t n = 1; n <= flat.size(); ++n)
    flat_stops.push_back(gce::early_stop(std::span(flat.data(), n), 3));
  CHECK(flat_stops == std::vector<bool>{false, false, false, true, true, true});

  // Best-so-far: .1 .3 .3 .35 .35 .35 .35 -> three evaluations without a new
  // best end at index 6.
  const std::vector<double> noisy = {0.1, 0.3, 0.2, 0.35, 0.3, 0.34, 0.33, 0.5, 0.4};
  std::size_t first = 0;
  for (std::size_t n = 1; n <= noisy.size() && !first; ++n)
    if (gce::early_stop(std::span(noisy.data(), n), 3)) first = n - 1;
  CHECK(first == 6);
  CHECK_THROWS(gce::early_stop({}, 3));
}

TEST_CASE("sample_targets: positives kept, negatives at ratio, full ontology at zero") {
  auto s = synthetic();
  std::mt19937_64 rng(1);
  for (const auto& d : s.corpus.dialogues)
    for (const auto& t : d.turns) {
      const auto sampled = gce::sample_targets(s.corpus.ontology, t, 3, rng);
      const auto full = gce::sample_targets(s.corpus.ontology, t, 0, rng);
      for (std::size_t k = 0; k < s.corpus.ontology.size(); ++k) {
        const double pos = std::accumulate(sampled.labels[k].begin(), sampled.labels[k].end(), 0.0);
        const std::size_t p = static_cast<std::size_t>(pos);
        CHECK(sampled.selection[k].size() == p + std::min<std::size_t>(5 - p, 3 * std::max<std::size_t>(p, 1)));
        CHECK(full.selection[k].size() == 5);
        std::set<std::size_t> unique(sampled.selection[k].begin(), sampled.selection[k].end());
        CHECK(unique.size() == sampled.selection[k].size());
      }
      std::size_t gold = 0;
      for (const auto& l : full.labels) gold += static_cast<std::size_t>(std::accumulate(l.begin(), l.end(), 0.0));
      CHECK(gold == t.label.inform.size());
    }
}

TEST_CASE("train_epoch: zero learning rate leaves parameters bitwise unchanged") {
  auto s = synthetic();
  auto model = make_model(s, gce::Variant::kGce, 8, 6, 1);
  const auto before = snapshot(model.params());
  gce::TrainConfig cfg;
  cfg.adam.lr = 0.0;
  gce::Adam adam(model.params(), cfg.adam);
  std::mt19937_64 rng(1);
  CHECK(gce::train_epoch(model, s.corpus.dialogues, adam, cfg, rng) > 0.0);
  CHECK(snapshot(model.params()) == before);
  CHECK(adam.steps() == 2);  // 80 turns in batches of 50
}

TEST_CASE("train_epoch: single-turn corpus overfits") {
  auto s = synthetic();
  std::vector<gce::Dialogue> one = {{"solo", {s.corpus.dialogues[0].turns[0]}}};
  REQUIRE_FALSE(one[0].turns[0].label.inform.empty());
  auto model = make_model(s, gce::Variant::kGce, 400, 200, 1);
  gce::TrainConfig cfg;
  gce::Adam adam(model.params(), cfg.adam);
  std::mt19937_64 rng(1);
  double loss = 1.0;
  for (int epoch = 0; epoch < 200; ++epoch) loss = gce::train_epoch(model, one, adam, cfg, rng);
  CHECK(loss < 0.05);
}

TEST_CASE("train_epoch: identical seeds give identical trajectories") {
  auto s = synthetic();
  auto run = [&] {
    auto model = make_model(s, gce::Variant::kGlad, 8, 6, 2);
    gce::TrainConfig cfg;
    gce::Adam adam(model.params(), cfg.adam);
    std::mt19937_64 rng(5);
    std::vector<double> losses;
    for (int e = 0; e < 3; ++e) losses.push_back(gce::train_epoch(model, s.corpus.dialogues, adam, cfg, rng));
    return losses;
  };
  CHECK(run() == run());
}

TEST_CASE("training lowers the loss on the synthetic corpus") {
  auto s = synthetic();
  for (std::uint64_t seed : {1, 2, 3}) {
    CAPTURE(seed);
    auto model = make_model(s, gce::Variant::kGce, 32, 32, seed);
    gce::TrainConfig cfg;
    cfg.seed = seed;
    cfg.max_epochs = 8;
    cfg.adam.lr = 5e-3;
    const auto r = gce::fit(model, s.corpus.dialogues, {}, cfg);
    CHECK(r.epochs.back().loss < r.epochs.front().loss);
  }
}

TEST_CASE("full-model gradients match finite differences") {
  gce::SyntheticSpec spec;
  spec.slots = 2;
  spec.values_per_slot = 3;
  spec.dialogues = 1;
  spec.turns_per_dialogue = 2;
  spec.requests = false;
  auto s = synthetic(spec);
  const auto& turn = s.corpus.dialogues[0].turns[1];
  for (auto v : {gce::Variant::kGce, gce::Variant::kGlad}) {
    CAPTURE(gce::to_string(v));
    auto model = make_model(s, v, 8, 6, 3);
    std::mt19937_64 rng(1);
    const auto targets = gce::sample_targets(model.ontology(), turn, 0, rng);
    auto loss = [&](Graph& g) {
      gce::ValueCache cache;
      const auto scored = model.score_turn(g, turn, targets.selection, cache);
      std::vector<Tensor> parts;
      std::size_t i = 0;
      for (const auto& l : targets.labels)
        for (double label : l) parts.push_back(g.bce(scored[i++].y, label));
      return g.sum(g.concat_rows(parts));
    };
    gce::ad::GradCheckOptions opt;
    opt.eps = 1e-5;
    opt.rel_tol = 1e-4;
    opt.abs_floor = 1e-6;
    const auto report = gce::ad::grad_check(loss, model.params().trainable(), opt);
    for (const auto& e : report.entries) {
      CAPTURE(e.name);
      CHECK(e.passed);
    }
    CHECK(report.passed);
    CHECK_FALSE(report.non_finite);
  }
}

TEST_CASE("fit: stops at a perfect dev score and restores the best epoch") {
  gce::SyntheticSpec spec;
  spec.dialogues = 4;
  auto s = synthetic(spec);
  auto model = make_model(s, gce::Variant::kGce, 32, 32, 1);
  gce::TrainConfig cfg;
  cfg.adam.lr = 1e-2;
  cfg.max_epochs = 60;
  const auto r = gce::fit(model, s.corpus.dialogues, s.corpus.dialogues, cfg);
  CHECK(r.best_dev_joint_goal == gce::evaluate(model, s.corpus.dialogues).joint_goal);
  if (r.best_dev_joint_goal == 1.0) CHECK(r.epochs.size() == r.best_epoch);
  CHECK(r.best_epoch >= 1);
}

TEST_CASE("split_dev: seeded, disjoint, sized") {
  auto s = synthetic();
  const auto [train, dev] = gce::split_dev(s.corpus.dialogues, 0.1, 4);
  CHECK(dev.size() == 2);
  CHECK(train.size() == 18);
  std::set<std::string> ids;
  for (const auto& d : train) ids.insert(d.id);
  for (const auto& d : dev) CHECK(ids.insert(d.id).second);
  CHECK(ids.size() == 20);
  CHECK(gce::split_dev(s.corpus.dialogues, 0.1, 4).second == dev);
  CHECK(gce::split_dev(s.corpus.dialogues, 0.0, 4).second.empty());
}

TEST_CASE("checkpoint: round trip reproduces outputs bitwise") {
  auto s = synthetic();
  for (auto v : {gce::Variant::kGce, gce::Variant::kGlad}) {
    auto model = make_model(s, v, 8, 6, 4);
    gce::TrainConfig cfg;
    cfg.max_epochs = 2;
    gce::fit(model, s.corpus.dialogues, {}, cfg);
    const gce::CheckpointInfo info{2, 0.25, gce::config_hash("x=1")};
    const std::string text = gce::dump_checkpoint(model, info);
    gce::CheckpointInfo back;
    const auto loaded = gce::parse_checkpoint(text, &back);
    CHECK(back.epoch == 2);
    CHECK(back.dev_metric == 0.25);
    CHECK(back.config_hash == info.config_hash);
    CHECK(gce::dump_checkpoint(loaded, info) == text);
    CHECK(snapshot(loaded.params()) == snapshot(model.params()));
    CHECK(gce::evaluate(loaded, s.corpus.dialogues) == gce::evaluate(model, s.corpus.dialogues));
    CHECK(gce::to_json(gce::evaluate(loaded, s.corpus.dialogues)) ==
          gce::to_json(gce::evaluate(model, s.corpus.dialogues)));
  }
}

TEST_CASE("checkpoint: bundled fixture loads and re-serializes identically") {
  const std::string text = gce::read_file(kFixtures + "/tiny_checkpoint.json");
  gce::CheckpointInfo info;
  const auto model = gce::parse_checkpoint(text, &info);
  CHECK(model.config().variant == gce::Variant::kGce);
  CHECK(model.config().dims.d_emb == 4);
  CHECK(model.ontology().size() == 3);
  CHECK(gce::dump_checkpoint(model, info) == text);
  gce::DialogueTurn turn;
  turn.utterance = gce::tokenize("i want thai food");
  const auto y = model.score_slot_value(turn, "food", "thai").y;
  CHECK(y > 0.0);
  CHECK(y < 1.0);
}

TEST_CASE("checkpoint: corrupt input is a data error") {
  CHECK_THROWS_AS(gce::parse_checkpoint("{"), gce::DataError);
  CHECK_THROWS_AS(gce::parse_checkpoint(R"({"format": "other", "version": 1})"), gce::DataError);
  std::string text = gce::read_file(kFixtures + "/tiny_checkpoint.json");
  text.replace(text.find("\"version\":1"), 11, "\"version\":9");
  CHECK_THROWS_AS(gce::parse_checkpoint(text), gce::DataError);
  CHECK(gce::config_hash("") == "cbf29ce484222325");
  CHECK(gce::config_hash("a") == "af63dc4c8601ec8c");
}
