// Command-line front end over the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cnenet/cnenet.h"

namespace {

struct Overrides {
  std::optional<long long> seed;
  std::string out;
  std::vector<double> rates;
  std::string head;
  std::string decoder;
  std::string workflow;

  std::string to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (seed) {
      if (*seed < 0) throw CLI::ValidationError("--seed", "must be non-negative");
      j["seed"] = static_cast<unsigned long long>(*seed);
      j["seeds"] = {static_cast<unsigned long long>(*seed)};
    }
    if (!out.empty()) j["out"] = std::filesystem::absolute(out).string();
    if (!rates.empty()) j["rates"] = rates;
    if (!head.empty()) j["head"] = head;
    if (!decoder.empty()) j["decoder"] = decoder;
    if (!workflow.empty()) j["workflow"] = workflow;
    return j.dump();
  }
};

int finish(cne_status status, char* result, bool as_json) {
  if (status != CNE_OK) {
    std::cerr << "error: " << cne_last_error() << "\n";
    return static_cast<int>(status);
  }
  if (result) {
    auto j = nlohmann::ordered_json::parse(result);
    cne_string_free(result);
    if (as_json) {
      std::cout << j.dump(2) << "\n";
    } else if (j.contains("text")) {
      std::cout << j["text"].get<std::string>();
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CNE-net aspect-category sentiment toolkit"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Print the full JSON summary instead of the text rendering");
  app.set_version_flag("--version", std::string(cne_version()));

  std::string format, in_path, out_path;
  auto* convert = app.add_subcommand("convert", "Convert SemEval-14 XML or Sentihood JSON to the canonical format");
  convert->add_option("--format", format, "semeval14 | sentihood")->required()
      ->check(CLI::IsMember({"semeval14", "sentihood"}));
  convert->add_option("--in", in_path, "Input file")->required();
  convert->add_option("--out", out_path, "Output dataset (.jsonl); the schema is written next to it")->required();

  Overrides ov;
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", ov.seed, "Root seed (overrides seed and seeds)");
    sub->add_option("--out", ov.out, "Output directory");
    sub->add_option("--rate", ov.rates, "Target sampling rate (repeatable)")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--head", ov.head, "Decoder head")->check(CLI::IsMember({"sep", "cls-att", "sep-sent-att"}));
    sub->add_option("--decoder", ov.decoder, "Decoder parameter sharing")
        ->check(CLI::IsMember({"shared", "unshared"}));
    sub->add_option("--workflow", ov.workflow, "Training workflow")
        ->check(CLI::IsMember({"plain", "mix", "incremental"}));
  };
  auto* generate = app.add_subcommand("generate", "Write the synthetic corpus described by a config");
  auto* split = app.add_subcommand("split", "Write Sample-Source/Sample-Target files and sampled target sets");
  auto* trainc = app.add_subcommand("train", "Train (plain | mix | incremental) and report test metrics");
  auto* forgetting = app.add_subcommand("forgetting", "Shared vs unshared decoder forgetting comparison");
  for (auto* sub : {generate, split, trainc, forgetting}) add_common(sub);

  std::string checkpoint, data, group = "all", schema, report;
  double threshold = 0.5;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "Dataset (.jsonl)")->required()->check(CLI::ExistingFile);
  eval->add_option("--group", group, "Category group")->check(CLI::IsMember({"all", "source", "target"}));
  eval->add_option("--schema", schema, "Schema file the dataset was written with")->check(CLI::ExistingFile);
  eval->add_option("--threshold", threshold, "Extraction threshold on 1 - p(none)")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--out", report, "Write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  char* result = nullptr;
  if (*convert) {
    const auto status = cne_cmd_convert(format.c_str(), in_path.c_str(), out_path.c_str(), &result);
    return finish(status, result, as_json);
  }
  if (*eval) {
    const auto status = cne_cmd_eval(checkpoint.c_str(), data.c_str(), group.c_str(),
                                     schema.empty() ? nullptr : schema.c_str(), threshold,
                                     report.empty() ? nullptr : report.c_str(), &result);
    return finish(status, result, as_json);
  }
  std::string overrides;
  try {
    overrides = ov.to_json();
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  for (auto* sub : {generate, split, trainc, forgetting}) {
    if (*sub) {
      const auto status = cne_cmd_run(sub->get_name().c_str(), config_path.c_str(), overrides.c_str(), &result);
      return finish(status, result, as_json);
    }
  }
  return 2;
}
