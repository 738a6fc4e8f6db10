#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnenet/data.hpp"
#include "cnenet/model.hpp"

namespace cne {

struct TrainConfig {
  double learning_rate = 5e-5;
  double warmup_ratio = 0.25;
  std::size_t epochs = 10;
  double dropout = 0.1;
  double l2_lambda = 0.01;
  std::size_t batch_size = 16;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  // Stage-2 only: start finetuning with fresh optimizer moments.
  bool reset_optimizer = true;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Linear warm-up from 0 over the first warmup_ratio of total_steps, then
// linear decay towards 0 at total_steps.
double learning_rate_at(std::size_t step, std::size_t total_steps, double peak, double warmup_ratio);

// Cross-entropy of the labeled categories of one sample, summed.
Var sample_loss(Tape& t, const Model& model, const EncodedSample& sample, double dropout_rate = 0.0,
                Rng* rng = nullptr);

// (1/|batch|) sum_x sum_{labeled i} -log p_i(x) + (lambda/2) sum of squared
// non-bias parameter entries. Inference mode.
Var batch_loss(Tape& t, const Model& model, std::span<const EncodedSample> batch, double l2_lambda);

double l2_term(const Model& model, double l2_lambda);
double loss(std::span<const Sample> batch, const Model& model, double l2_lambda);
double loss(const Dataset& dataset, const Model& model, double l2_lambda);

class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}
  // Returns true when the new value is the best so far.
  bool observe(double validation_loss);
  bool should_stop() const noexcept { return bad_epochs_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t bad_epochs_ = 0;
  double best_ = 0.0;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;
};

struct StepRecord {
  std::size_t step;
  double lr;
  double loss;
};

struct EpochRecord {
  std::size_t epoch;  // 1-based
  double train_loss;
  std::optional<double> valid_loss;
  std::string checkpoint_id;
};

struct TrainOptions {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  // Adam moments to continue from (when reset_optimizer is false).
  const AdamState* resume = nullptr;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  AdamState optimizer;
};

// Mini-batch Adam over the masked multi-task loss. Decoder pairs that no
// training sample can reach (UNSHARED pairs of unlabeled categories) are
// frozen. Returns the parameters of the best-validation epoch.
TrainResult train(const Dataset& train_set, const Dataset& valid_set, Model init,
                  const TrainConfig& config, const TrainOptions& options = {});

struct IncrementalResult {
  TrainResult source;
  TrainResult incremental;
};

// Stage 1: fresh model on Sample-Source. Stage 2: continue on Sample-Target.
IncrementalResult run_incremental(const Dataset& source_train, const Dataset& source_valid,
                                  const Dataset& target_train, const Dataset& target_valid,
                                  const ModelSpec& spec, const TrainConfig& source_config,
                                  const TrainConfig& target_config,
                                  const TrainOptions& source_options = {},
                                  const TrainOptions& target_options = {});

// Plain training on Sample-Source + Sample-Target.
TrainResult run_mix(const Dataset& source_train, const Dataset& target_train, const Dataset& valid,
                    const ModelSpec& spec, const TrainConfig& config,
                    const TrainOptions& options = {});

}  // namespace cne
