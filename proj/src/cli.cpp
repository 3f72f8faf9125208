#include "gce/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "gce/bench.hpp"
#include "gce/checkpoint.hpp"
#include "gce/corpus.hpp"
#include "gce/embeddings.hpp"
#include "gce/errors.hpp"
#include "gce/synthetic.hpp"
#include "gce/tracker.hpp"
#include "gce/training.hpp"

namespace gce {

namespace fs = std::filesystem;

fs::path make_run_dir(const fs::path& root, unsigned long long seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream name;
  name << std::put_time(&tm, "%Y%m%d-%H%M%S") << "-seed" << seed;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw DataError("cannot create output root " + root.string() + ": " + ec.message());
  for (int n = 1;; ++n) {
    fs::path dir = root / (n == 1 ? name.str() : name.str() + "-" + std::to_string(n));
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw DataError("cannot create run directory " + dir.string() + ": " + ec.message());
  }
}

namespace {

std::string default_out_root() {
  const char* env = std::getenv(kOutRootEnv);
  return fs::absolute(env && *env ? env : "runs").lexically_normal().string();
}

struct Common {
  std::uint64_t seed = 1;
  std::string out = default_out_root();
};

struct TrainOpts {
  std::string variant = "gce";
  std::string data;
  std::string format = "woz";
  std::string ontology;
  std::string dev_data;
  double dev_fraction = 0.1;
  std::string embeddings;
  std::string char_embeddings;
  std::size_t d_emb = 400;
  std::size_t d_rnn = 200;
  std::size_t batch_size = 50;
  std::size_t epochs = 200;
  std::size_t patience = 20;
  std::size_t negatives = 3;
  double lr = 1e-3;
  std::string batch_slots = "on";
  double threshold = 0.5;
  bool train_embeddings = false;
};

struct EvalOpts {
  std::string checkpoint;
  std::string data;
  std::string format = "woz";
  std::size_t threads = 1;
  bool json = false;
};

struct PredictOpts {
  std::string checkpoint;
  std::string input = "-";
};

struct BenchOpts {
  std::string variant = "both";
  std::vector<std::size_t> slots = {5, 10, 20, 40};
  std::string format = "csv";
  std::string batch_slots = "on";
  BenchSpec spec;
};

struct GenOpts {
  SyntheticSpec spec;
};

// Path options are stored absolute so a resolved config replays from any
// working directory.
const CLI::Validator kAbsolutePath(
    [](std::string& p) {
      if (!p.empty() && p != "-") p = fs::absolute(p).lexically_normal().string();
      return std::string();
    },
    "", "absolute");

// CLI11 reads config files on the root app only; hoist a --config given after
// the subcommand in front of it.
std::vector<std::string> hoist_config(int argc, const char* const* argv) {
  std::vector<std::string> front, rest;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) {
      front.push_back(a);
      front.push_back(argv[++i]);
    } else if (a.rfind("--config=", 0) == 0) {
      front.push_back(a);
    } else {
      rest.push_back(a);
    }
  }
  front.insert(front.end(), rest.begin(), rest.end());
  return front;
}

Corpus load_corpus(const std::string& path, const std::string& format, const Ontology* onto) {
  return format == "multiwoz" ? load_multiwoz(path, onto) : load_woz(path, onto);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output root; runs land in timestamped subdirectories")->transform(kAbsolutePath);
}

void add_model_flags(CLI::App* sub, TrainOpts& o) {
  sub->add_option("--variant", o.variant, "encoder variant")->check(CLI::IsMember({"gce", "glad"}));
  sub->add_option("--data", o.data, "training corpus (JSON)")->required()->transform(kAbsolutePath);
  sub->add_option("--format", o.format, "corpus format")->check(CLI::IsMember({"woz", "multiwoz"}));
  sub->add_option("--ontology", o.ontology, "ontology file; induced from the labels when absent")->transform(kAbsolutePath);
  sub->add_option("--dev-data", o.dev_data, "held-out corpus for early stopping")->transform(kAbsolutePath);
  sub->add_option("--dev-fraction", o.dev_fraction, "fraction of training dialogues held out when --dev-data is absent; 0 evaluates on the training split")
      ->check(CLI::Range(0.0, 0.9));
  sub->add_option("--embeddings", o.embeddings, "word vectors (text); random when absent")->transform(kAbsolutePath);
  sub->add_option("--char-embeddings", o.char_embeddings, "extra per-token vectors concatenated to the word vectors")->transform(kAbsolutePath);
  sub->add_option("--d-emb", o.d_emb, "embedding width when no vector file is given")->check(CLI::PositiveNumber);
  sub->add_option("--d-rnn", o.d_rnn, "biLSTM output width (even)")->check(CLI::PositiveNumber);
  sub->add_option("--batch-size", o.batch_size, "turns per optimizer step")->check(CLI::PositiveNumber);
  sub->add_option("--epochs", o.epochs, "maximum epochs");
  sub->add_option("--patience", o.patience, "evaluations without improvement before stopping");
  sub->add_option("--negatives", o.negatives, "negatives per positive; 0 scores the whole ontology");
  sub->add_option("--lr", o.lr, "Adam learning rate");
  sub->add_option("--batch-slots", o.batch_slots, "run all GCE slots in one pass")->check(CLI::IsMember({"on", "off"}));
  sub->add_option("--threshold", o.threshold, "decision threshold")->check(CLI::Range(0.0, 1.0));
  sub->add_flag("--train-embeddings", o.train_embeddings, "update the word vectors too");
}

// Writes the resolved configuration of `sub` into the run directory and
// returns its hash.
std::string write_config(const CLI::App* sub, const fs::path& dir) {
  const std::string cfg = "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false);
  write_file(dir / "config.toml", cfg);
  return run_config_hash(cfg);
}

WordVectors build_words(const TrainOpts& o, const Vocab& vocab, std::uint64_t seed) {
  WordVectors words = o.embeddings.empty() ? random_embeddings(vocab, o.d_emb, seed)
                                           : load_embeddings(o.embeddings, vocab, seed);
  if (!o.char_embeddings.empty())
    words = concat_embeddings(words, load_embeddings(o.char_embeddings, vocab, seed + 1));
  return words;
}

int cmd_train(const CLI::App* sub, const Common& c, const TrainOpts& o, std::ostream& out,
              std::ostream& err) {
  if (o.d_rnn % 2 != 0) throw UsageError("--d-rnn must be even");

  std::optional<Ontology> given;
  if (!o.ontology.empty()) given = load_ontology(o.ontology);
  const Corpus corpus = load_corpus(o.data, o.format, given ? &*given : nullptr);
  std::vector<Dialogue> train = corpus.dialogues, dev;
  if (!o.dev_data.empty()) {
    dev = load_corpus(o.dev_data, o.format, &corpus.ontology).dialogues;
  } else if (o.dev_fraction > 0.0) {
    std::tie(train, dev) = split_dev(corpus.dialogues, o.dev_fraction, c.seed);
  }
  const bool dev_is_train = dev.empty();
  if (dev_is_train) dev = train;

  const fs::path dir = make_run_dir(c.out, c.seed);
  err << "run directory: " << dir.string() << "\n";
  const std::string hash = write_config(sub, dir);

  const Vocab vocab = build_vocab(train, corpus.ontology);
  const WordVectors words = build_words(o, vocab, c.seed);
  ModelConfig mc;
  mc.variant = parse_variant(o.variant);
  mc.dims = {words.dim, o.d_rnn};
  mc.batch_slots = o.batch_slots == "on";
  mc.threshold = o.threshold;
  mc.train_word_embeddings = o.train_embeddings;
  DstModel model = DstModel::create(mc, corpus.ontology, vocab, words, c.seed);

  TrainConfig tc;
  tc.batch_size = o.batch_size;
  tc.adam.lr = o.lr;
  tc.max_epochs = o.epochs;
  tc.patience = o.patience;
  tc.seed = c.seed;
  tc.negative_ratio = o.negatives;

  std::string log = "epoch,loss,dev_joint_goal\n";
  const FitResult fit_result = fit(model, train, dev, tc, [&](const EpochRecord& r) {
    std::ostringstream line;
    line << r.epoch << ',' << std::setprecision(10) << r.loss << ','
         << (r.dev ? std::to_string(r.dev->joint_goal) : "") << '\n';
    log += line.str();
    err << "epoch " << r.epoch << " loss " << r.loss;
    if (r.dev) err << " dev joint " << r.dev->joint_goal;
    err << "\n";
  });
  write_file(dir / "epochs.csv", log);
  save_checkpoint(dir / "checkpoint.json", model,
                  {fit_result.best_epoch, fit_result.best_dev_joint_goal, hash});

  const MetricsReport train_metrics = evaluate(model, train);
  nlohmann::json metrics;
  metrics["train"] = nlohmann::json::parse(to_json(train_metrics));
  out << "[train]\n" << to_key_value(train_metrics);
  if (!dev_is_train) {
    const MetricsReport dev_metrics = evaluate(model, dev);
    metrics["dev"] = nlohmann::json::parse(to_json(dev_metrics));
    out << "[dev]\n" << to_key_value(dev_metrics);
  }
  metrics["best_epoch"] = fit_result.best_epoch;
  metrics["epochs_run"] = fit_result.epochs.size();
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  return kExitOk;
}

int cmd_eval(const CLI::App* sub, const Common& c, const EvalOpts& o, std::ostream& out,
             std::ostream& err) {
  const DstModel model = load_checkpoint(o.checkpoint);
  const Corpus corpus = load_corpus(o.data, o.format, &model.ontology());
  const MetricsReport m = evaluate(model, corpus.dialogues, o.threads);
  const fs::path dir = make_run_dir(c.out, c.seed);
  err << "run directory: " << dir.string() << "\n";
  write_config(sub, dir);
  write_file(dir / "metrics.json", to_json(m) + "\n");
  out << (o.json ? to_json(m) + "\n" : to_key_value(m));
  return kExitOk;
}

int cmd_predict(const PredictOpts& o, std::ostream& out) {
  const DstModel model = load_checkpoint(o.checkpoint);
  std::string text;
  if (o.input == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    text = ss.str();
  } else {
    text = read_file(o.input);
  }
  nlohmann::json turn;
  try {
    turn = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("predict input: ") + e.what());
  }
  if (!turn.is_object()) throw DataError("predict input: expected a turn object");
  if (!turn.contains("turn_label")) turn["turn_label"] = nlohmann::json::array();
  const nlohmann::json doc = nlohmann::json::array({{{"dialogue_idx", "input"}, {"dialogue", {turn}}}});
  // Labels are ignored; parse without an ontology so unknown words pass.
  const Corpus parsed = parse_woz(doc.dump());
  out << to_json(predict_turn(model, parsed.dialogues.front().turns.front())) << "\n";
  return kExitOk;
}

int cmd_bench(const CLI::App* sub, const Common& c, BenchOpts& o, std::ostream& out,
              std::ostream& err) {
  BenchSpec spec = o.spec;
  spec.seed = c.seed;
  spec.slot_counts = o.slots;
  spec.batch_slots = o.batch_slots == "on";
  if (o.variant == "both")
    spec.variants = {Variant::kGlad, Variant::kGce};
  else
    spec.variants = {parse_variant(o.variant)};
  spec.validate();
  const fs::path dir = make_run_dir(c.out, c.seed);
  err << "run directory: " << dir.string() << "\n";
  write_config(sub, dir);
  const BenchReport report = scaling_sweep(spec);
  const std::string csv = emit_csv(report), text = emit_text(report);
  write_file(dir / "report.csv", csv);
  write_file(dir / "report.txt", text);
  out << (o.format == "csv" ? csv : text);
  return kExitOk;
}

int cmd_gen(const CLI::App* sub, const Common& c, GenOpts& o, std::ostream& out, std::ostream& err) {
  o.spec.seed = c.seed;
  const Corpus corpus = gen_synthetic(o.spec);
  const fs::path dir = make_run_dir(c.out, c.seed);
  err << "run directory: " << dir.string() << "\n";
  write_config(sub, dir);
  save_woz(dir / "corpus.json", corpus.dialogues);
  save_ontology(dir / "ontology.json", corpus.ontology);
  out << "corpus=" << (dir / "corpus.json").string() << "\n"
      << "ontology=" << (dir / "ontology.json").string() << "\n";
  return kExitOk;
}

}  // namespace

std::string run_config_hash(std::string_view config_toml) {
  std::string kept;
  std::size_t pos = 0;
  while (pos < config_toml.size()) {
    std::size_t end = config_toml.find('\n', pos);
    if (end == std::string_view::npos) end = config_toml.size();
    const std::string_view line = config_toml.substr(pos, end - pos);
    if (line.rfind("out=", 0) != 0) {
      kept.append(line);
      kept.push_back('\n');
    }
    pos = end + 1;
  }
  return config_hash(kept);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialogue state tracking with globally conditioned encoders", "gce"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Common common;
  TrainOpts train;
  EvalOpts eval;
  PredictOpts predict;
  BenchOpts bench;
  GenOpts gen;

  auto* train_cmd = app.add_subcommand("train", "fit a model and write checkpoint and metrics");
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a corpus");
  auto* predict_cmd = app.add_subcommand("predict", "predict one turn read from a file or stdin");
  auto* bench_cmd = app.add_subcommand("bench", "time GLAD and GCE over a slot-count sweep");
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic corpus and ontology");

  // Sections name the subcommand, so a run's config.toml alone replays it.
  app.set_config("--config", "", "TOML file of option values, e.g. a run's config.toml");
  app.fallthrough();
  for (auto* sub : {train_cmd, eval_cmd, predict_cmd, bench_cmd, gen_cmd}) sub->configurable();

  add_model_flags(train_cmd, train);
  add_common(train_cmd, common);

  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required()->transform(kAbsolutePath);
  eval_cmd->add_option("--data", eval.data, "corpus to score")->required()->transform(kAbsolutePath);
  eval_cmd->add_option("--format", eval.format, "corpus format")->check(CLI::IsMember({"woz", "multiwoz"}));
  eval_cmd->add_option("--threads", eval.threads, "dialogues scored concurrently")->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--json", eval.json, "print JSON instead of key=value lines");
  add_common(eval_cmd, common);

  predict_cmd->add_option("--checkpoint", predict.checkpoint, "checkpoint file")->required()->transform(kAbsolutePath);
  predict_cmd->add_option("--input", predict.input,
                          "turn JSON with \"transcript\" and optional \"system_acts\"; - reads stdin");

  bench_cmd->add_option("--variant", bench.variant, "variants to time")
      ->check(CLI::IsMember({"gce", "glad", "both"}));
  bench_cmd->add_option("--slots", bench.slots, "slot counts to sweep")->delimiter(',');
  bench_cmd->add_option("--batch-size", bench.spec.batch_turns, "turns per batch");
  bench_cmd->add_option("--seq-len", bench.spec.seq_len, "tokens per utterance");
  bench_cmd->add_option("--d-emb", bench.spec.d_emb, "embedding width");
  bench_cmd->add_option("--d-rnn", bench.spec.d_rnn, "biLSTM output width");
  bench_cmd->add_option("--values", bench.spec.values_per_slot, "candidate values per slot");
  bench_cmd->add_option("--warmup", bench.spec.warmup, "untimed runs per cell");
  bench_cmd->add_option("--iters", bench.spec.iterations, "timed runs per cell");
  bench_cmd->add_option("--threads", bench.spec.threads, "adds a per-slot threaded inference row when above 1");
  bench_cmd->add_option("--batch-slots", bench.batch_slots, "run all GCE slots in one pass")
      ->check(CLI::IsMember({"on", "off"}));
  bench_cmd->add_option("--format", bench.format, "report format")->check(CLI::IsMember({"csv", "text"}));
  add_common(bench_cmd, common);

  gen_cmd->add_option("--slots", gen.spec.slots, "informable slots")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--values", gen.spec.values_per_slot, "values per slot")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dialogues", gen.spec.dialogues, "dialogues")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--turns", gen.spec.turns_per_dialogue, "turns per dialogue")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--vocab-size", gen.spec.vocab_size, "filler words")->check(CLI::PositiveNumber);
  gen_cmd->add_flag("--requests", gen.spec.requests, "add a request slot");
  add_common(gen_cmd, common);

  try {
    std::vector<std::string> args = hoist_config(argc, argv);
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config") { ++i; continue; }
      if (args[i].rfind("--config=", 0) == 0) continue;
      if (args[i][0] != '-' && !app.get_subcommand_no_throw(args[i]))
        throw UsageError("unknown subcommand '" + args[i] + "'");
      break;
    }
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
    if (*train_cmd) return cmd_train(train_cmd, common, train, out, err);
    if (*eval_cmd) return cmd_eval(eval_cmd, common, eval, out, err);
    if (*predict_cmd) return cmd_predict(predict, out);
    if (*bench_cmd) return cmd_bench(bench_cmd, common, bench, out, err);
    if (*gen_cmd) return cmd_gen(gen_cmd, common, gen, out, err);
    return kExitUsage;
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    if (app.get_subcommands().empty()) err << "run 'gce --help' for the list of subcommands\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace gce
