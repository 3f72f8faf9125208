#include "gce/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gce/checkpoint.hpp"
#include "gce/errors.hpp"

namespace gce {

std::string to_string(BenchMode m) { return m == BenchMode::kTrain ? "train" : "test"; }

namespace {

BenchMode parse_mode(std::string_view s) {
  if (s == "train") return BenchMode::kTrain;
  if (s == "test") return BenchMode::kTest;
  throw DataError("unknown bench mode '" + std::string(s) + "'");
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> sorted_samples(std::vector<double> s) {
  if (s.empty()) throw std::invalid_argument("no timing samples");
  std::sort(s.begin(), s.end());
  return s;
}

void score_all(const DstModel& model, const std::vector<DialogueTurn>& turns, std::size_t begin,
               std::size_t end) {
  ad::Graph g(ad::GradMode::kNoGrad);
  ValueCache cache;
  const auto selection = all_values(model.ontology());
  for (const auto& t : turns) model.score_turn(g, t, selection, cache, begin, end);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void BenchSpec::validate() const {
  if (variants.empty() || modes.empty()) throw UsageError("bench needs at least one variant and mode");
  for (auto k : slot_counts)
    if (k == 0) throw UsageError("slot counts must be positive");
  if (batch_turns == 0 || seq_len == 0 || d_emb == 0 || d_rnn < 2 || d_rnn % 2 != 0 ||
      values_per_slot == 0 || vocab_size == 0) {
    throw UsageError("bench sizes must be positive and d_rnn even");
  }
  if (warmup < 1) throw UsageError("bench needs at least one warmup run");
  if (iterations < 5) throw UsageError("bench needs at least five timed runs");
  if (threads == 0) throw UsageError("threads must be at least 1");
}

BenchBatch make_bench_batch(const BenchSpec& spec, std::size_t slots) {
  std::vector<Ontology::Slot> onto;
  for (std::size_t k = 0; k < slots; ++k) {
    Ontology::Slot s{"slot" + std::to_string(k), {}};
    for (std::size_t v = 0; v < spec.values_per_slot; ++v)
      s.values.push_back("s" + std::to_string(k) + "v" + std::to_string(v));
    onto.push_back(std::move(s));
  }
  BenchBatch b;
  b.ontology = Ontology(onto);

  std::mt19937_64 rng(spec.seed);
  auto pick = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  Dialogue d{"bench", {}};
  for (std::size_t i = 0; i < spec.batch_turns; ++i) {
    DialogueTurn t;
    for (std::size_t j = 0; j < spec.seq_len; ++j) t.utterance.push_back("w" + std::to_string(pick(spec.vocab_size)));
    const auto& act_slot = b.ontology.slots()[pick(slots)];
    t.system_acts.push_back({act_slot.name, std::nullopt});
    const auto& slot = b.ontology.slots()[pick(slots)];
    t.label.inform.push_back({slot.name, slot.values[pick(slot.values.size())]});
    d.turns.push_back(std::move(t));
  }
  b.turns = d.turns;
  std::vector<Dialogue> all{std::move(d)};
  b.vocab = build_vocab(all, b.ontology);
  b.checksum = config_hash(dump_woz(all) + dump_ontology(b.ontology));
  return b;
}

double time_batch(DstModel& model, Adam& optimizer, const std::vector<DialogueTurn>& turns,
                  BenchMode mode, std::size_t threads) {
  const std::size_t slots = model.ontology().size();
  const auto start = std::chrono::steady_clock::now();
  if (mode == BenchMode::kTest) {
    threads = std::clamp<std::size_t>(threads, 1, slots);
    if (threads == 1) {
      score_all(model, turns, 0, slots);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < threads; ++w) {
        const std::size_t begin = slots * w / threads, end = slots * (w + 1) / threads;
        pool.emplace_back([&, begin, end] { score_all(model, turns, begin, end); });
      }
      for (auto& th : pool) th.join();
    }
  } else {
    const Ontology& onto = model.ontology();
    ad::Graph g;
    ValueCache cache;
    const auto selection = all_values(onto);
    std::vector<ad::Tensor> losses;
    for (const auto& t : turns) {
      for (const auto& p : model.score_turn(g, t, selection, cache)) {
        const auto& slot = onto.slots()[p.slot];
        double label = 0.0;
        for (const auto& sv : t.label.inform)
          if (sv.slot == slot.name && sv.value == slot.values[p.value]) label = 1.0;
        losses.push_back(g.bce(p.y, label));
      }
    }
    const ad::Tensor loss =
        g.affine_scalar(g.sum(g.concat_rows(losses)), 1.0 / static_cast<double>(losses.size()), 0.0);
    g.backward(loss);
    optimizer.step(model.params());
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> samples) { return quantile(sorted_samples(std::move(samples)), 0.5); }

double iqr(std::vector<double> samples) {
  const auto s = sorted_samples(std::move(samples));
  return quantile(s, 0.75) - quantile(s, 0.25);
}

BenchReport scaling_sweep(const BenchSpec& spec) {
  spec.validate();
  BenchReport report;
  report.spec = spec;
  for (const std::size_t k : spec.slot_counts) {
    const BenchBatch batch = make_bench_batch(spec, k);
    report.checksums.push_back(batch.checksum);
    const WordVectors words = random_embeddings(batch.vocab, spec.d_emb, spec.seed);
    const std::size_t first = report.rows.size();
    for (const Variant v : spec.variants) {
      ModelConfig cfg;
      cfg.variant = v;
      cfg.dims = {spec.d_emb, spec.d_rnn};
      cfg.batch_slots = spec.batch_slots;
      std::vector<std::pair<std::string, std::size_t>> runs{{to_string(v), 1}};
      if (spec.threads > 1) runs.emplace_back(to_string(v) + "-mt", spec.threads);
      for (const auto& [name, threads] : runs) {
        for (const BenchMode mode : spec.modes) {
          if (threads > 1 && mode == BenchMode::kTrain) continue;
          // Fresh model per cell so train-mode updates never leak across cells.
          DstModel model = DstModel::create(cfg, batch.ontology, batch.vocab, words, spec.seed);
          Adam adam(model.params(), AdamConfig{});
          for (std::size_t i = 0; i < spec.warmup; ++i) time_batch(model, adam, batch.turns, mode, threads);
          std::vector<double> samples;
          for (std::size_t i = 0; i < spec.iterations; ++i)
            samples.push_back(time_batch(model, adam, batch.turns, mode, threads));
          report.rows.push_back({name, k, mode, median(samples), iqr(samples), 1.0});
        }
      }
    }
    for (std::size_t i = first; i < report.rows.size(); ++i) {
      auto& row = report.rows[i];
      for (std::size_t j = first; j < report.rows.size(); ++j) {
        const auto& base = report.rows[j];
        if (base.variant == to_string(Variant::kGlad) && base.mode == row.mode)
          row.speedup = base.median_s / row.median_s;
      }
    }
  }
  return report;
}

double mean_reduction(const BenchReport& report, std::string_view variant) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : report.rows) {
    if (r.variant != variant) continue;
    sum += 1.0 - 1.0 / r.speedup;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

const BenchRow* find_row(const BenchReport& report, std::string_view variant, std::size_t slots,
                         BenchMode mode) {
  for (const auto& r : report.rows)
    if (r.variant == variant && r.slots == slots && r.mode == mode) return &r;
  return nullptr;
}

std::string emit_csv(const BenchReport& report) {
  std::string out = "variant,K,mode,median_s,iqr_s,speedup\n";
  for (const auto& r : report.rows) {
    out += r.variant + ',' + std::to_string(r.slots) + ',' + to_string(r.mode) + ',' + fmt(r.median_s) +
           ',' + fmt(r.iqr_s) + ',' + fmt(r.speedup) + '\n';
  }
  return out;
}

std::string emit_text(const BenchReport& report) {
  const auto& s = report.spec;
  std::ostringstream os;
  os << "batch of " << s.batch_turns << " turns, " << s.seq_len << " tokens each, " << s.values_per_slot
     << " values per slot, d_emb=" << s.d_emb << " d_rnn=" << s.d_rnn << "\n"
     << "warmup " << s.warmup << ", median and IQR over " << s.iterations << " runs, seed " << s.seed
     << ", slot batching " << (s.batch_slots ? "on" : "off") << ", threads " << s.threads << "\n";
  for (std::size_t i = 0; i < report.checksums.size(); ++i)
    os << "input checksum K=" << s.slot_counts[i] << ": " << report.checksums[i] << "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %4s %-6s %12s %12s %8s\n", "variant", "K", "mode", "median_s",
                "iqr_s", "speedup");
  os << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-10s %4zu %-6s %12.6f %12.6f %8.3f\n", r.variant.c_str(), r.slots,
                  to_string(r.mode).c_str(), r.median_s, r.iqr_s, r.speedup);
    os << line;
  }
  for (const auto& v : s.variants) {
    if (v == Variant::kGlad) continue;
    std::snprintf(line, sizeof line, "mean latency reduction of %s vs glad: %.1f%%\n", to_string(v).c_str(),
                  100.0 * mean_reduction(report, to_string(v)));
    os << line;
  }
  return os.str();
}

std::vector<BenchRow> parse_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "variant,K,mode,median_s,iqr_s,speedup")
    throw DataError("bench csv: missing header");
  std::vector<BenchRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() != 6) throw DataError("bench csv line " + std::to_string(lineno) + ": expected 6 fields");
    try {
      rows.push_back({cells[0], std::stoul(cells[1]), parse_mode(cells[2]), std::stod(cells[3]),
                      std::stod(cells[4]), std::stod(cells[5])});
    } catch (const std::logic_error&) {
      throw DataError("bench csv line " + std::to_string(lineno) + ": bad number");
    }
  }
  return rows;
}

}  // namespace gce
