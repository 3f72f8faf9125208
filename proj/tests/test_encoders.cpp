#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gce/encoders.hpp"
#include "gce/errors.hpp"
#include "gce/model.hpp"
#include "reference/reference.hpp"
#include "test_util.hpp"

using gce::ad::Graph;
using gce::ad::GradMode;
using gce::ad::Tensor;

namespace {

std::vector<std::string> slot_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back("slot" + std::to_string(i));
  return names;
}

struct GceFixture {
  gce::ModelParams params;
  std::unique_ptr<gce::GceEncoder> enc;
  GceFixture(std::size_t k, std::uint64_t seed, std::size_t d_emb = 8, std::size_t d_rnn = 6) {
    gce::ParamInit init(seed);
    enc = gce::GceEncoder::create(params, init, {d_emb, d_rnn}, slot_names(k));
  }
};

struct GladFixture {
  gce::ModelParams params;
  std::unique_ptr<gce::GladEncoder> enc;
  GladFixture(std::size_t k, std::uint64_t seed, std::size_t d_emb = 8, std::size_t d_rnn = 6) {
    gce::ParamInit init(seed);
    enc = gce::GladEncoder::create(params, init, {d_emb, d_rnn}, slot_names(k));
  }
};

std::vector<double> slot_row(const gce::GceEncoder& enc, std::size_t k) {
  const auto& m = enc.slots.matrix;
  return {m.values().begin() + static_cast<std::ptrdiff_t>(k * m.cols()),
          m.values().begin() + static_cast<std::ptrdiff_t>((k + 1) * m.cols())};
}

ref::Encoded ref_gce(const gce::GceEncoder& enc, std::size_t k, const Tensor& x) {
  return ref::gce_encode(ref::lstm_dir(enc.lstm.fwd), ref::lstm_dir(enc.lstm.bwd),
                         ref::to_vec(enc.attention.weight), enc.attention.bias.item(),
                         slot_row(enc, k), ref::to_mat(x));
}

ref::GladParts ref_glad(const gce::GladEncoder& enc, std::size_t k) {
  ref::GladParts p;
  p.global_fwd = ref::lstm_dir(enc.global.fwd);
  p.global_bwd = ref::lstm_dir(enc.global.bwd);
  p.local_fwd = ref::lstm_dir(enc.local[k].fwd);
  p.local_bwd = ref::lstm_dir(enc.local[k].bwd);
  p.global_w = ref::to_vec(enc.global_attention.scorer.weight);
  p.global_b = enc.global_attention.scorer.bias.item();
  p.local_w = ref::to_vec(enc.local_attention[k].scorer.weight);
  p.local_b = enc.local_attention[k].scorer.bias.item();
  p.beta = enc.beta[k].item();
  return p;
}

double encoded_diff(const gce::Encoding& e, const ref::Encoded& r) {
  double worst = testutil::max_abs_diff(testutil::values(e.context), r.context);
  for (std::size_t t = 0; t < r.hidden.size(); ++t)
    for (std::size_t c = 0; c < r.hidden[t].size(); ++c)
      worst = std::max(worst, std::abs(e.hidden.at(t, c) - r.hidden[t][c]));
  return worst;
}

}  // namespace

TEST_CASE("GCE encode: single token pools to its own hidden row") {
  GceFixture f(3, 1);
  std::mt19937_64 rng(2);
  Graph g(GradMode::kNoGrad);
  const auto e = f.enc->encode(g, testutil::random_const({1, 8}, rng), 1);
  CHECK(e.hidden.shape() == gce::ad::Shape{1, 6});
  CHECK(testutil::values(e.context) == testutil::values(e.hidden));
}

TEST_CASE("GCE encode: identical slot rows give identical outputs") {
  GceFixture f(2, 3);
  auto m = f.enc->slots.matrix.mutable_values();
  std::copy(m.begin(), m.begin() + 8, m.begin() + 8);
  std::mt19937_64 rng(4);
  const Tensor x = testutil::random_const({5, 8}, rng);
  Graph g(GradMode::kNoGrad);
  const auto a = f.enc->encode(g, x, 0), b = f.enc->encode(g, x, 1);
  CHECK(testutil::values(a.hidden) == testutil::values(b.hidden));
  CHECK(testutil::values(a.context) == testutil::values(b.context));
}

TEST_CASE("GCE encode: matches the straight-line reference") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GceFixture f(3, seed);
    const Tensor x = testutil::random_const({5, 8}, rng);
    Graph g(GradMode::kNoGrad);
    for (std::size_t k = 0; k < 3; ++k) CHECK(encoded_diff(f.enc->encode(g, x, k), ref_gce(*f.enc, k, x)) <= 1e-12);
  }
}

TEST_CASE("encoders reject unknown slots and wrong widths") {
  GceFixture f(2, 1);
  GladFixture h(2, 1);
  std::mt19937_64 rng(1);
  const Tensor x = testutil::random_const({3, 8}, rng);
  Graph g(GradMode::kNoGrad);
  CHECK_THROWS_AS(f.enc->encode(g, x, 2), std::out_of_range);
  CHECK_THROWS_AS(h.enc->encode(g, x, 2), std::out_of_range);
  CHECK_THROWS_AS(f.enc->encode_range(g, x, 1, 3), std::out_of_range);
  CHECK_THROWS_AS(f.enc->encode(g, testutil::random_const({3, 7}, rng), 0), gce::ShapeError);
}

TEST_CASE("GLAD encode: saturated beta is the global path") {
  GladFixture f(2, 7);
  auto b = f.enc->beta[1].mutable_values();
  b[0] = 50.0;
  std::mt19937_64 rng(8);
  const Tensor x = testutil::random_const({4, 8}, rng);
  Graph g(GradMode::kNoGrad);
  const auto e = f.enc->encode(g, x, 1);
  const Tensor hg = f.enc->global.forward(g, x);
  const Tensor cg = f.enc->global_attention.forward(g, hg);
  CHECK(testutil::max_abs_diff(testutil::values(e.hidden), testutil::values(hg)) <= 1e-9);
  CHECK(testutil::max_abs_diff(testutil::values(e.context), testutil::values(cg)) <= 1e-9);
}

TEST_CASE("GLAD encode: matches the straight-line reference") {
  std::mt19937_64 rng(15);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GladFixture f(3, seed);
    for (auto& beta : f.enc->beta) beta.mutable_values()[0] = testutil::uniform(1, rng)[0];
    const Tensor x = testutil::random_const({6, 8}, rng);
    Graph g(GradMode::kNoGrad);
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(encoded_diff(f.enc->encode(g, x, k), ref::glad_encode(ref_glad(*f.enc, k), ref::to_mat(x))) <= 1e-12);
    const auto all = f.enc->encode_all(g, x);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto one = f.enc->encode(g, x, k);
      CHECK(testutil::values(all[k].context) == testutil::values(one.context));
    }
  }
}

TEST_CASE("parameter counts follow the slot-scaling laws") {
  const std::size_t d_emb = 8, d_rnn = 6;
  GceFixture g1(1, 0);
  GladFixture h1(1, 0);
  CHECK(h1.enc->local.size() == 1);
  const std::size_t h = d_rnn / 2;
  const std::size_t bilstm = 2 * (4 * h * d_emb + 4 * h * h + 4 * h);
  const std::size_t attn = d_rnn + 1;
  CHECK(h1.enc->param_count() == 2 * (bilstm + attn) + 1);
  CHECK(h1.enc->local_increment() == bilstm + attn + 1);
  CHECK(g1.enc->param_count() == d_emb + 2 * (4 * h * 2 * d_emb + 4 * h * h + 4 * h) + d_rnn + d_emb + 1);
  for (std::size_t k : {1, 2, 5, 20}) {
    GceFixture gk(k, 0);
    GladFixture hk(k, 0);
    CHECK(gk.enc->param_count() - g1.enc->param_count() == (k - 1) * d_emb);
    CHECK(hk.enc->param_count() - h1.enc->param_count() == (k - 1) * h1.enc->local_increment());
    CHECK(gk.enc->param_count() < hk.enc->param_count());
    std::size_t registered = 0;
    for (const auto& e : gk.params.entries()) registered += e.tensor.size();
    CHECK(registered == gk.enc->param_count());
  }
}

TEST_CASE("GCE attention is a simplex point and the context its convex combination") {
  GceFixture f(2, 11);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = testutil::random_const({7, 8}, rng);
    Graph g(GradMode::kNoGrad);
    const auto e = f.enc->encode(g, x, trial % 2);
    const Tensor s = f.enc->slots.row(g, trial % 2);
    const Tensor p = g.softmax(f.enc->attention.apply(g, g.concat_cols(e.hidden, s)));
    double total = 0.0;
    for (double v : p.values()) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(testutil::values(e.context) == testutil::values(g.matmul_tn(p, e.hidden)));
  }
}

TEST_CASE("GCE slot conditioning changes the output") {
  GceFixture f(4, 13);
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = testutil::random_const({5, 8}, rng);
    Graph g(GradMode::kNoGrad);
    const auto a = f.enc->encode(g, x, 0), b = f.enc->encode(g, x, 3);
    CHECK(testutil::max_abs_diff(testutil::values(a.context), testutil::values(b.context)) > 0.0);
    CHECK(testutil::max_abs_diff(testutil::values(a.hidden), testutil::values(b.hidden)) > 0.0);
  }
}

TEST_CASE("GCE batched slots equal sequential encodes") {
  std::mt19937_64 rng(16);
  for (std::size_t k : {1, 3, 7}) {
    GceFixture f(k, 17 + k);
    for (std::size_t n : {1, 4, 9}) {
      const Tensor x = testutil::random_const({n, 8}, rng);
      Graph g(GradMode::kNoGrad);
      f.enc->batch_slots = true;
      const auto batched = f.enc->encode_all(g, x);
      const auto partial = f.enc->encode_range(g, x, k / 2, k);
      for (std::size_t s = 0; s < k; ++s) {
        const auto single = f.enc->encode(g, x, s);
        CHECK(testutil::max_abs_diff(testutil::values(batched[s].hidden), testutil::values(single.hidden)) <= 1e-12);
        CHECK(testutil::max_abs_diff(testutil::values(batched[s].context), testutil::values(single.context)) <= 1e-12);
        if (s >= k / 2)
          CHECK(testutil::max_abs_diff(testutil::values(partial[s - k / 2].context),
                                       testutil::values(single.context)) <= 1e-12);
      }
      f.enc->batch_slots = false;
      const auto sequential = f.enc->encode_all(g, x);
      for (std::size_t s = 0; s < k; ++s)
        CHECK(testutil::values(sequential[s].context) == testutil::values(f.enc->encode(g, x, s).context));
    }
  }
}

TEST_CASE("GCE batched slots: gradients agree with the sequential path") {
  GceFixture f(3, 31, 4, 4);
  std::mt19937_64 rng(32);
  const Tensor x = testutil::random_const({3, 4}, rng);
  auto loss = [&](Graph& g) {
    std::vector<Tensor> parts;
    for (const auto& e : f.enc->encode_all(g, x)) parts.push_back(g.sum(g.mul(e.context, e.context)));
    return g.sum(g.concat_rows(parts));
  };
  auto grads = [&](bool batched) {
    f.enc->batch_slots = batched;
    f.params.zero_grad();
    Graph g;
    g.backward(loss(g));
    std::vector<double> out;
    for (const auto& e : f.params.entries()) {
      const auto gr = e.tensor.grad();
      out.insert(out.end(), gr.begin(), gr.end());
    }
    return out;
  };
  CHECK(testutil::max_abs_diff(grads(true), grads(false)) <= 1e-12);
  f.enc->batch_slots = true;
  CHECK(gce::ad::grad_check(loss, f.params.trainable()).passed);
}

TEST_CASE("encode_turn_inputs: counts and composition") {
  gce::Ontology onto({{"food", {"thai", "italian"}}, {"area", {"north", "south", "centre"}}});
  gce::Vocab vocab;
  for (const char* t : {"i", "want", "thai", "food", "request", "area", "inform", "north"}) vocab.add(t);
  for (const auto& s : onto.slots())
    for (const auto& v : s.values) vocab.add(v);
  gce::ModelConfig cfg;
  cfg.dims = {8, 6};
  const auto words = gce::random_embeddings(vocab, 8, 3);
  for (auto variant : {gce::Variant::kGce, gce::Variant::kGlad}) {
    cfg.variant = variant;
    gce::DstModel model = gce::DstModel::create(cfg, onto, vocab, words, 5);
    gce::DialogueTurn turn;
    turn.utterance = {"i", "want", "thai", "food"};
    Graph g(GradMode::kNoGrad);
    auto slice = model.encode_turn_inputs(g, turn, 0);
    CHECK(slice.action_contexts.empty());
    CHECK(slice.value_contexts.size() == 2);
    CHECK(model.encode_turn_inputs(g, turn, 1).value_contexts.size() == 3);

    turn.system_acts = {{"area", std::nullopt}, {"area", "north"}};
    slice = model.encode_turn_inputs(g, turn, 1);
    REQUIRE(slice.action_contexts.size() == 2);
    const auto& enc = model.encoder();
    const auto u = enc.encode(g, model.embed(g, turn.utterance), 1);
    CHECK(testutil::values(slice.utterance.hidden) == testutil::values(u.hidden));
    CHECK(testutil::values(slice.utterance.context) == testutil::values(u.context));
    for (std::size_t j = 0; j < 2; ++j) {
      const auto a = enc.encode(g, model.embed(g, turn.system_acts[j].tokens()), 1);
      CHECK(testutil::values(slice.action_contexts[j]) == testutil::values(a.context));
    }
    for (std::size_t v = 0; v < 3; ++v) {
      const auto c = enc.encode(g, model.embed(g, {onto.slots()[1].values[v]}), 1);
      CHECK(testutil::values(slice.value_contexts[v]) == testutil::values(c.context));
      CHECK(slice.value_contexts[v].cols() == 6);
    }
  }
}
