#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sys/wait.h>

#include <json.hpp>

#include "cnenet/cnenet.h"
#include "cnenet/error.hpp"
#include "cnenet/experiment.hpp"

using namespace cne;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cnenet_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// A small incremental experiment that trains in a few seconds.
fs::path write_tiny_config(const fs::path& dir) {
  json c{{"synthetic",
          {{"generator", (fs::path(CNENET_SOURCE_DIR) / "configs" / "synthetic_generator.json").string()},
           {"train", 120},
           {"valid", 30},
           {"test", 40}}},
         {"head", "sep-sent-att"},
         {"decoder", "shared"},
         {"encoder", {{"layers", 1}, {"heads", 2}, {"hidden", 8}, {"ffn", 16}, {"max_len", 48}, {"dropout", 0.1}}},
         {"train",
          {{"learning_rate", 3e-3},
           {"warmup_ratio", 0.1},
           {"epochs", 2},
           {"dropout", 0.1},
           {"l2_lambda", 1e-4},
           {"batch_size", 16},
           {"patience", 2}}},
         {"rates", {1.0}},
         {"workflow", "incremental"},
         {"out", "run"},
         {"seed", 3},
         {"data_seed", 4}};
  const auto path = dir / "tiny.json";
  write_text_file(path, c.dump(2));
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CNENET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  cne_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("experiment config round-trips and fingerprints are stable") {
  const auto c = load_config(fs::path(CNENET_SOURCE_DIR) / "configs" / "synthetic_experiment.json");
  CHECK(c.workflow == Workflow::kIncremental);
  CHECK(c.seeds.size() == 5);
  const auto text = config_to_json(c);
  const auto back = config_from_json(text, c.base_dir);
  CHECK(config_to_json(back) == text);
  CHECK(config_fingerprint(back) == config_fingerprint(c));

  const auto patched = config_from_json(apply_overrides(text, R"({"seed": 99})"), c.base_dir);
  CHECK(patched.seed == 99);
  CHECK(patched.train.seed == 99);
  CHECK(config_fingerprint(patched) != config_fingerprint(c));

  CHECK_THROWS_AS(config_from_json(apply_overrides(text, R"({"workflow": "sideways"})"), c.base_dir), ConfigError);
  CHECK_THROWS_AS(config_from_json(apply_overrides(text, R"({"head": "type-9"})"), c.base_dir), ConfigError);
  CHECK_THROWS_AS(config_from_json(apply_overrides(text, R"({"train": {"epochs": 0}})"), c.base_dir), ConfigError);
  CHECK_THROWS_AS(config_from_json("{not json", c.base_dir), Error);
}

TEST_CASE("generate and split are deterministic and record their seeds") {
  const auto dir = temp_dir("split");
  const auto cfg = load_config(write_tiny_config(dir));
  cmd_generate(cfg);
  cmd_split(cfg);
  const auto first_manifest = read_text_file(dir / "run" / "split" / "manifest.json");
  const auto first_target = read_text_file(dir / "run" / "split" / "target_train.jsonl");
  cmd_generate(cfg);
  cmd_split(cfg);
  CHECK(read_text_file(dir / "run" / "split" / "manifest.json") == first_manifest);
  CHECK(read_text_file(dir / "run" / "split" / "target_train.jsonl") == first_target);

  const auto m = json::parse(first_manifest);
  CHECK(m.at("config_fingerprint") == config_fingerprint(cfg));
  CHECK(m.at("data_seed") == 4);
  CHECK(m.at("target_categories") == json::array({"service"}));

  const auto schema = load_schema(dir / "run" / "split" / "schema.json");
  const auto src = load_dataset(dir / "run" / "split" / "source_train.jsonl", schema.schema, schema.polarities);
  const auto tgt = load_dataset(dir / "run" / "split" / "target_train.jsonl", schema.schema, schema.polarities);
  CHECK(src.size() == 120);
  CHECK(tgt.size() == 120);
  for (const auto& s : tgt.samples) CHECK(s.labeled_count() == 1);
}

TEST_CASE("train writes checkpoints, step log and a report for every stage and group") {
  const auto dir = temp_dir("train");
  const auto cfg = load_config(write_tiny_config(dir));
  const auto summary = json::parse(cmd_train(cfg));
  CHECK(summary.contains("text"));
  const auto run = dir / "run";
  CHECK(fs::exists(run / "source.ckpt.json"));
  CHECK(fs::exists(run / "incremental.ckpt.json"));

  const auto report = json::parse(read_text_file(run / "report.json"));
  CHECK(report.at("report_version") == 1);
  CHECK(report.at("config_fingerprint") == config_fingerprint(cfg));
  const auto& metrics = report.at("runs").at(0).at("metrics");
  CHECK(metrics.size() == 6);
  std::set<std::pair<std::string, std::string>> quadrants;
  for (const auto& e : metrics) quadrants.insert({e.at("stage").get<std::string>(), e.at("group").get<std::string>()});
  CHECK(quadrants.count({"source", "source"}));
  CHECK(quadrants.count({"source", "target"}));
  CHECK(quadrants.count({"incremental", "source"}));
  CHECK(quadrants.count({"incremental", "target"}));
  const auto& ckpts = report.at("runs").at(0).at("checkpoints");
  CHECK(ckpts.at(1).at("parent_checkpoint") == ckpts.at(0).at("checkpoint_id"));

  std::ifstream steps(run / "steps.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(steps, line)) {
    const auto j = json::parse(line);
    CHECK(j.at("config_fingerprint") == config_fingerprint(cfg));
    CHECK(j.contains("loss"));
    ++n;
  }
  CHECK(n > 0);

  // Same config, second run: identical checkpoints and report.
  const auto ckpt = read_text_file(run / "incremental.ckpt.json");
  const auto rep = read_text_file(run / "report.json");
  cmd_train(cfg);
  CHECK(read_text_file(run / "incremental.ckpt.json") == ckpt);
  CHECK(read_text_file(run / "report.json") == rep);

  // eval on the target group only
  cmd_generate(cfg);
  const auto ev = json::parse(cmd_eval(run / "incremental.ckpt.json", run / "data" / "test.jsonl", "target",
                                       run / "data" / "schema.json", 0.5, dir / "eval.json"));
  const auto saved = json::parse(read_text_file(dir / "eval.json"));
  CHECK(saved.at("group") == "target");
  CHECK(saved.at("categories") == json::array({"service"}));
  CHECK(ev.contains("text"));
}

TEST_CASE("C API reports statuses and predicts distributions") {
  CHECK(std::string(cne_version()).size() > 0);
  cne_model* m = nullptr;
  CHECK(cne_model_load("/nonexistent/model.json", &m) == CNE_ERR_IO);
  CHECK(std::string(cne_last_error()).find("nonexistent") != std::string::npos);
  char* out = nullptr;
  CHECK(cne_cmd_run("dance", "/nonexistent.json", nullptr, &out) == CNE_ERR_CONFIG);
  CHECK(cne_cmd_convert("xml-ish", "/a", "/b", &out) == CNE_ERR_CONFIG);

  const auto dir = temp_dir("capi");
  const auto cfg_path = write_tiny_config(dir);
  REQUIRE(cne_cmd_run("train", cfg_path.c_str(), R"({"workflow": "plain"})", &out) == CNE_OK);
  CHECK(json::parse(take(out)).contains("text"));
  REQUIRE(cne_model_load((dir / "run" / "plain.ckpt.json").c_str(), &m) == CNE_OK);
  CHECK(cne_model_num_categories(m) == 5);
  CHECK(cne_model_num_polarities(m) == 5);
  double probs[25];
  CHECK(cne_model_predict(m, "the food was great", probs, 10) == CNE_ERR_DIMENSION);
  REQUIRE(cne_model_predict(m, "the food was great", probs, 25) == CNE_OK);
  for (int c = 0; c < 5; ++c) {
    double total = 0;
    for (int k = 0; k < 5; ++k) total += probs[c * 5 + k];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  char* info = nullptr;
  REQUIRE(cne_model_info(m, &info) == CNE_OK);
  CHECK(json::parse(take(info)).at("head") == "sep-sent-att");

  REQUIRE(cne_cmd_run("generate", cfg_path.c_str(), nullptr, &out) == CNE_OK);
  cne_string_free(out);
  cne_dataset* d = nullptr;
  REQUIRE(cne_dataset_load((dir / "run" / "data" / "test.jsonl").c_str(),
                           (dir / "run" / "data" / "schema.json").c_str(), &d) == CNE_OK);
  CHECK(cne_dataset_size(d) == 40);
  char* rep = nullptr;
  REQUIRE(cne_evaluate(m, d, "source", 0.5, &rep) == CNE_OK);
  CHECK(json::parse(take(rep)).at("group") == "source");
  CHECK(cne_evaluate(m, d, "elsewhere", 0.5, &rep) == CNE_ERR_CONFIG);

  write_text_file(dir / "broken.jsonl", "{\"id\": \"x\", \"text\": \"a\", \"labels\": {\"food\": \"angry\"}}\n");
  cne_dataset* bad = nullptr;
  CHECK(cne_dataset_load((dir / "broken.jsonl").c_str(), (dir / "run" / "data" / "schema.json").c_str(), &bad) ==
        CNE_ERR_DATA);
  cne_dataset_free(d);
  cne_model_free(m);
}

TEST_CASE("CLI exit codes follow the error taxonomy") {
  const auto dir = temp_dir("exit");
  const auto cfg = write_tiny_config(dir);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("train") == 2);
  CHECK(run_cli("train --config " + cfg.string() + " --head type-9") == 2);
  CHECK(run_cli("generate --config " + cfg.string()) == 0);
  CHECK(fs::exists(dir / "run" / "data" / "train.jsonl"));
  CHECK(run_cli("generate --config " + cfg.string() + " --out " + (dir / "other").string()) == 0);
  CHECK(fs::exists(dir / "other" / "data" / "train.jsonl"));
  write_text_file(dir / "bad.xml", "<sentences><sentence id=\"1\"><text>x</text>");
  CHECK(run_cli("convert --format semeval14 --in " + (dir / "bad.xml").string() + " --out " +
                (dir / "bad.jsonl").string()) == 3);
  write_text_file(dir / "bad_data.jsonl", "{\"id\": \"x\", \"text\": \"a\", \"labels\": {\"food\": \"angry\"}}\n");
  CHECK(run_cli("eval --checkpoint /nonexistent.ckpt.json --data " + (dir / "bad_data.jsonl").string()) == 2);
  write_text_file(dir / "bad.ckpt.json", "{\"format\": \"something-else\"}");
  CHECK(run_cli("eval --checkpoint " + (dir / "bad.ckpt.json").string() + " --data " + (dir / "bad_data.jsonl").string()) ==
        3);
}
