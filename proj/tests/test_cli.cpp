#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gce/bench.hpp"
#include "gce/checkpoint.hpp"
#include "gce/cli.hpp"
#include "gce/corpus.hpp"
#include "gce/tracker.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = GCE_CLI_PATH;
const std::string kFixtures = GCE_FIXTURES;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gce_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs the binary with GCE_OUT_ROOT=root; `in` (if set) becomes stdin.
Result run(const fs::path& root, const std::string& args, const std::string& in = "") {
  const fs::path out = root / ".stdout", err = root / ".stderr";
  std::string cmd = "GCE_OUT_ROOT='" + root.string() + "' '" + kCli + "' " + args + " >'" +
                    out.string() + "' 2>'" + err.string() + "'";
  if (!in.empty()) cmd += " <'" + in + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = gce::read_file(out);
  r.err = gce::read_file(err);
  return r;
}

std::vector<fs::path> run_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

fs::path only_run(const fs::path& root) {
  const auto dirs = run_dirs(root);
  REQUIRE(dirs.size() == 1);
  return dirs.front();
}

std::string kv(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return "";
}

}  // namespace

TEST_CASE("usage errors exit with code 2 and say what is wrong") {
  const auto root = scratch("usage");
  auto r = run(root, "");
  CHECK(r.code == gce::kExitUsage);
  CHECK(r.err.find("subcommand is required") != std::string::npos);

  r = run(root, "frobnicate");
  CHECK(r.code == gce::kExitUsage);
  CHECK(r.err.find("unknown subcommand 'frobnicate'") != std::string::npos);

  r = run(root, "eval --data x.json");
  CHECK(r.code == gce::kExitUsage);
  CHECK(r.err.find("--checkpoint is required") != std::string::npos);

  r = run(root, "train --data x.json --variant lstm");
  CHECK(r.code == gce::kExitUsage);
  CHECK(r.err.find("--variant") != std::string::npos);

  r = run(root, "train --data x.json --d-rnn 7");
  CHECK(r.code == gce::kExitUsage);

  r = run(root, "--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("gen-data") != std::string::npos);
  CHECK(run_dirs(root).empty());
}

TEST_CASE("unreadable paths are data errors with code 3") {
  const auto root = scratch("data");
  auto r = run(root, "eval --checkpoint /nonexistent/model.json --data x.json");
  CHECK(r.code == gce::kExitData);
  CHECK(r.err.find("cannot read /nonexistent/model.json") != std::string::npos);

  r = run(root, "train --data /nonexistent/corpus.json");
  CHECK(r.code == gce::kExitData);
  CHECK(r.err.find("cannot read") != std::string::npos);

  const fs::path bad = root / "bad.json";
  std::ofstream(bad) << "[{\"dialogue\": [{\"transcript\": \"hi\"}]}]";
  r = run(root, "train --data '" + bad.string() + "'");
  CHECK(r.code == gce::kExitData);
  CHECK(r.err.find("record 0 turn 0") != std::string::npos);
}

TEST_CASE("gen-data writes a loadable corpus into a fresh run directory") {
  const auto root = scratch("gen");
  const auto r = run(root, "gen-data --slots 2 --values 3 --dialogues 4 --turns 2 --seed 5");
  REQUIRE(r.code == 0);
  const fs::path dir = only_run(root);
  CHECK(dir.filename().string().find("-seed5") != std::string::npos);
  CHECK(r.err.find("run directory: " + dir.string()) != std::string::npos);
  const auto onto = gce::load_ontology(kv(r.out, "ontology"));
  const auto corpus = gce::load_woz(kv(r.out, "corpus"), &onto);
  CHECK(corpus.dialogues.size() == 4);
  CHECK(onto.size() == 2);
  CHECK(fs::exists(dir / "config.toml"));

  // Same command again never reuses the directory.
  REQUIRE(run(root, "gen-data --slots 2 --values 3 --dialogues 4 --turns 2 --seed 5").code == 0);
  const auto dirs = run_dirs(root);
  REQUIRE(dirs.size() == 2);
  CHECK(gce::read_file(dirs[0] / "corpus.json") == gce::read_file(dirs[1] / "corpus.json"));
}

TEST_CASE("gen-data, train, eval: the tracker fits its training split") {
  const auto root = scratch("pipeline");
  const auto gen = run(root, "gen-data --slots 3 --values 5 --dialogues 20 --seed 7");
  REQUIRE(gen.code == 0);
  const std::string corpus = kv(gen.out, "corpus");

  const auto train_root = scratch("pipeline_train");
  const auto train = run(train_root, "train --dev-fraction 0 --data '" + corpus + "'");
  REQUIRE(train.code == 0);
  const fs::path dir = only_run(train_root);
  for (const char* f : {"checkpoint.json", "config.toml", "metrics.json", "epochs.csv"})
    CHECK(fs::exists(dir / f));
  CHECK(std::stod(kv(train.out, "joint_goal")) >= 0.95);
  CHECK(train.out.find("[dev]") == std::string::npos);

  const auto eval = run(train_root, "eval --checkpoint '" + (dir / "checkpoint.json").string() +
                                        "' --data '" + corpus + "'");
  REQUIRE(eval.code == 0);
  MESSAGE("eval output:\n" << eval.out);
  CHECK(std::stod(kv(eval.out, "joint_goal")) >= 0.95);
  CHECK(kv(eval.out, "turns") == "80");

  const auto json = run(train_root, "eval --json --threads 3 --checkpoint '" +
                                        (dir / "checkpoint.json").string() + "' --data '" + corpus + "'");
  REQUIRE(json.code == 0);
  CHECK(gce::metrics_from_json(json.out).joint_goal == std::stod(kv(eval.out, "joint_goal")));
}

TEST_CASE("identical train commands give identical checkpoints; config replays them") {
  const auto root = scratch("determinism");
  const std::string data = kFixtures + "/woz_small.json";
  const std::string args = "train --data '" + data + "' --d-emb 12 --d-rnn 8 --epochs 4 --seed 3";
  REQUIRE(run(root, args).code == 0);
  REQUIRE(run(root, args).code == 0);
  auto dirs = run_dirs(root);
  REQUIRE(dirs.size() == 2);
  const std::string ckpt = gce::read_file(dirs[0] / "checkpoint.json");
  CHECK(ckpt == gce::read_file(dirs[1] / "checkpoint.json"));
  CHECK(gce::read_file(dirs[0] / "metrics.json") == gce::read_file(dirs[1] / "metrics.json"));
  CHECK(gce::read_file(dirs[0] / "config.toml") == gce::read_file(dirs[1] / "config.toml"));

  // The resolved config alone, no subcommand or flags.
  REQUIRE(run(root, "--config '" + (dirs[0] / "config.toml").string() + "'").code == 0);
  // And with the subcommand named.
  REQUIRE(run(root, "train --config '" + (dirs[0] / "config.toml").string() + "'").code == 0);
  dirs = run_dirs(root);
  REQUIRE(dirs.size() == 4);
  for (const auto& d : dirs) CHECK(gce::read_file(d / "checkpoint.json") == ckpt);

  gce::CheckpointInfo info;
  const auto model = gce::load_checkpoint(dirs[0] / "checkpoint.json", &info);
  CHECK(info.config_hash == gce::run_config_hash(gce::read_file(dirs[0] / "config.toml")));
  CHECK(model.config().dims.d_emb == 12);

  // A different output root changes nothing in the checkpoint.
  const auto elsewhere = scratch("determinism_elsewhere");
  REQUIRE(run(elsewhere, args).code == 0);
  CHECK(gce::read_file(only_run(elsewhere) / "checkpoint.json") == ckpt);
}

TEST_CASE("train options: multiwoz format, vector files, held-out split") {
  const auto root = scratch("options");
  auto r = run(root, "train --format multiwoz --data '" + kFixtures + "/multiwoz_small.json" +
                         "' --d-emb 8 --d-rnn 4 --epochs 1 --variant glad");
  REQUIRE(r.code == 0);
  auto model = gce::load_checkpoint(only_run(root) / "checkpoint.json");
  CHECK(model.ontology().find("area").has_value());
  CHECK(model.config().variant == gce::Variant::kGlad);

  const auto root2 = scratch("options2");
  const std::string vec = kFixtures + "/embeddings_small.txt";
  r = run(root2, "train --data '" + kFixtures + "/woz_small.json' --embeddings '" + vec +
                     "' --char-embeddings '" + vec + "' --d-rnn 4 --epochs 1 --dev-fraction 0.34" +
                     " --batch-slots off");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("[dev]") != std::string::npos);
  model = gce::load_checkpoint(only_run(root2) / "checkpoint.json");
  CHECK(model.config().dims.d_emb == 8);
  CHECK_FALSE(model.config().batch_slots);
  const auto metrics = nlohmann::json::parse(gce::read_file(only_run(root2) / "metrics.json"));
  CHECK(metrics["train"]["dialogues"] == 2);
  CHECK(metrics["dev"]["dialogues"] == 1);

  // Without --dev-data a seeded tenth (at least one dialogue) is held out.
  const auto root3 = scratch("options3");
  const std::string gen_args = "gen-data --slots 2 --values 3 --dialogues 20 --turns 2 --seed 4";
  const auto gen = run(root3, gen_args);
  REQUIRE(gen.code == 0);
  const auto root4 = scratch("options4");
  r = run(root4, "train --data '" + kv(gen.out, "corpus") + "' --d-emb 8 --d-rnn 4 --epochs 1");
  REQUIRE(r.code == 0);
  const auto split = nlohmann::json::parse(gce::read_file(only_run(root4) / "metrics.json"));
  CHECK(split["train"]["dialogues"] == 18);
  CHECK(split["dev"]["dialogues"] == 2);
}

TEST_CASE("predict reads one turn from a file or stdin") {
  const auto root = scratch("predict");
  const std::string ckpt = kFixtures + "/tiny_checkpoint.json";
  const fs::path turn = root / "turn.json";
  std::ofstream(turn) << R"({"transcript": "I want Italian food in the north",
                            "system_acts": ["area", ["food", "thai"]]})";
  const auto a = run(root, "predict --checkpoint '" + ckpt + "' --input '" + turn.string() + "'");
  REQUIRE(a.code == 0);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j.contains("inform"));
  CHECK(j.contains("request"));

  const auto b = run(root, "predict --checkpoint '" + ckpt + "'", turn.string());
  REQUIRE(b.code == 0);
  CHECK(b.out == a.out);

  const auto model = gce::load_checkpoint(ckpt);
  gce::DialogueTurn t;
  t.utterance = gce::tokenize("I want Italian food in the north");
  t.system_acts = {{"area", std::nullopt}, {"food", "thai"}};
  CHECK(a.out == gce::to_json(gce::predict_turn(model, t)) + "\n");

  const fs::path junk = root / "junk.json";
  std::ofstream(junk) << "not json";
  CHECK(run(root, "predict --checkpoint '" + ckpt + "' --input '" + junk.string() + "'").code ==
        gce::kExitData);
}

TEST_CASE("bench: both variants over four slot counts give 16 csv rows") {
  const auto root = scratch("bench");
  const auto r = run(root,
                     "bench --variant both --slots 5,10,20,40 --batch-size 2 --seq-len 4 "
                     "--d-emb 8 --d-rnn 4");
  REQUIRE(r.code == 0);
  const auto rows = gce::parse_csv(r.out);
  CHECK(rows.size() == 16);
  const fs::path dir = only_run(root);
  CHECK(gce::read_file(dir / "report.csv") == r.out);
  CHECK(gce::read_file(dir / "report.txt").find("over 5 runs") != std::string::npos);

  const auto one = run(root, "bench --variant gce --slots 3 --batch-size 2 --seq-len 4 --d-emb 8 "
                             "--d-rnn 4 --format text");
  REQUIRE(one.code == 0);
  CHECK(one.out.find("median_s") != std::string::npos);
  CHECK(run(root, "bench --iters 2").code == gce::kExitUsage);
}
