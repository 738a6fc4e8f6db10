#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cnenet/data.hpp"
#include "cnenet/metrics.hpp"
#include "cnenet/training.hpp"

namespace cne {

enum class Workflow { kPlain, kMix, kIncremental };
std::string_view to_string(Workflow w);
Workflow parse_workflow(std::string_view text);

struct SyntheticSource {
  GeneratorSpec generator;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

// One JSON file drives every command. Relative paths resolve against the
// directory holding the config file.
struct ExperimentConfig {
  std::filesystem::path base_dir;

  std::string schema;  // schema file; optional when synthetic data is configured
  std::string train_path, valid_path, test_path;
  std::optional<SyntheticSource> synthetic;

  HeadKind head = HeadKind::kSepSentAtt;
  DecoderMode decoder = DecoderMode::kShared;
  EncoderConfig encoder;
  TrainConfig train;
  TrainConfig target_train;  // stage 2 of the incremental workflow
  std::vector<double> rates{1.0};
  Workflow workflow = Workflow::kPlain;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::uint64_t data_seed = 0;       // synthetic generation and target sampling
  std::vector<std::uint64_t> seeds;  // forgetting runs; empty means {seed}
  std::string f1 = "micro";          // micro | macro for forgetting deltas
  double threshold = 0.5;

  std::filesystem::path resolve(const std::string& p) const;
  std::filesystem::path out_dir() const { return resolve(out); }
  void validate() const;
};

ExperimentConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);
// Applies a JSON object of field overrides on top of a config document.
std::string apply_overrides(std::string_view config_json, std::string_view overrides_json);
std::string config_fingerprint(const ExperimentConfig& config);

struct Splits {
  Dataset train, valid, test;
};

// Full (all-category) train/valid/test sets, from files or the generator.
Splits load_splits(const ExperimentConfig& config);

// Each command writes its outputs under the configured directory and returns
// a JSON summary.
std::string cmd_convert(std::string_view format, const std::filesystem::path& in,
                        const std::filesystem::path& out);
std::string cmd_generate(const ExperimentConfig& config);
std::string cmd_split(const ExperimentConfig& config);
std::string cmd_train(const ExperimentConfig& config);
std::string cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                     std::string_view group, const std::optional<std::filesystem::path>& schema,
                     double threshold, const std::optional<std::filesystem::path>& out);
std::string cmd_forgetting(const ExperimentConfig& config);

}  // namespace cne
