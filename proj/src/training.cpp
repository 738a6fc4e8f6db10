#include "cnenet/training.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "cnenet/error.hpp"

namespace cne {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0 && learning_rate <= 1.0)) throw ConfigError("learning_rate must lie in [0, 1]");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) throw ConfigError("warmup_ratio must lie in [0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be non-negative");
  if (epochs == 0 || batch_size == 0 || patience == 0) {
    throw ConfigError("epochs, batch_size and patience must be positive");
  }
}

double learning_rate_at(std::size_t step, std::size_t total_steps, double peak, double warmup_ratio) {
  if (total_steps == 0) return 0.0;
  const auto warmup = static_cast<std::size_t>(std::floor(warmup_ratio * static_cast<double>(total_steps)));
  const double s = static_cast<double>(step);
  if (step < warmup) return peak * s / static_cast<double>(warmup);
  if (step >= total_steps) return 0.0;
  return peak * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

// ---- loss ------------------------------------------------------------------------

Var sample_loss(Tape& t, const Model& model, const EncodedSample& sample, double dropout_rate, Rng* rng) {
  if (sample.labels.empty()) throw DataError("sample \"" + sample.id + "\" has no labeled category");
  std::vector<std::size_t> cats;
  cats.reserve(sample.labels.size());
  for (const auto& [c, p] : sample.labels) cats.push_back(c);
  const auto probs = forward(t, model, sample.input, cats, dropout_rate, rng);
  std::vector<Var> terms;
  terms.reserve(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    terms.push_back(cross_entropy(t, probs[k], sample.labels[k].second));
  }
  return sum(t, terms);
}

Var batch_loss(Tape& t, const Model& model, std::span<const EncodedSample> batch, double l2_lambda) {
  if (batch.empty()) throw DataError("loss over an empty batch");
  std::vector<Var> per_sample;
  for (const auto& s : batch) per_sample.push_back(sample_loss(t, model, s));
  Var data = scale(t, sum(t, per_sample), 1.0 / static_cast<double>(batch.size()));
  if (l2_lambda == 0.0) return data;
  std::vector<Var> squares;
  for (const auto* p : model.parameters()) {
    if (!p->is_bias) squares.push_back(sum_squares(t, t.parameter(p->value)));
  }
  Var reg = scale(t, sum(t, squares), 0.5 * l2_lambda);
  std::vector<Var> both{data, reg};
  return sum(t, both);
}

double l2_term(const Model& model, double l2_lambda) {
  double total = 0.0;
  for (const auto* p : model.parameters()) {
    if (p->is_bias) continue;
    for (double v : p->value.data()) total += v * v;
  }
  return 0.5 * l2_lambda * total;
}

namespace {

double mean_data_loss(const Model& model, std::span<const EncodedSample> samples) {
  double total = 0.0;
  for (const auto& s : samples) {
    Tape t;
    total += t.value(sample_loss(t, model, s))[0];
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace

double loss(std::span<const Sample> batch, const Model& model, double l2_lambda) {
  if (batch.empty()) throw DataError("loss over an empty batch");
  std::vector<EncodedSample> enc;
  for (const auto& s : batch) enc.push_back(model.encode_sample(s));
  return mean_data_loss(model, enc) + l2_term(model, l2_lambda);
}

double loss(const Dataset& dataset, const Model& model, double l2_lambda) {
  return loss(std::span<const Sample>(dataset.samples), model, l2_lambda);
}

// ---- early stopping ---------------------------------------------------------------

bool EarlyStopper::observe(double validation_loss) {
  ++epoch_;
  if (epoch_ == 1 || validation_loss < best_) {
    best_ = validation_loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

// ---- training -----------------------------------------------------------------------

namespace {

void check_schema(const Dataset& d, const Model& m, const char* role) {
  if (d.schema.categories() != m.schema.categories() || !(d.polarities == m.polarities)) {
    throw ConfigError(std::string(role) + " dataset schema does not match the model");
  }
}

void require_labels(std::span<const EncodedSample> samples) {
  for (const auto& s : samples) {
    if (s.labels.empty()) throw DataError("sample \"" + s.id + "\" has no labeled category");
  }
}

std::vector<NdArray> snapshot(const Model& m) {
  std::vector<NdArray> out;
  for (const auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

void restore(Model& m, const std::vector<NdArray>& values) {
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

// Trainable flags aligned with Model::parameters().
std::vector<bool> trainable_mask(const Model& m, std::span<const EncodedSample> samples) {
  std::set<std::size_t> labeled;
  for (const auto& s : samples)
    for (const auto& [c, p] : s.labels) labeled.insert(c);
  std::set<std::size_t> pairs;
  for (auto c : labeled) pairs.insert(m.decoder.pair_for(c));

  const auto enc_count = m.encoder.all().size();
  std::vector<bool> mask(enc_count, true);
  for (std::size_t pair = 0; pair < m.decoder.pairs(); ++pair) {
    const bool on = pairs.count(pair) > 0;
    mask.push_back(on);  // W
    mask.push_back(on);  // b
  }
  return mask;
}

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& valid_set, Model init,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  check_schema(train_set, init, "training");
  check_schema(valid_set, init, "validation");

  TrainResult result;
  result.model = std::move(init);
  Model& model = result.model;
  model.provenance.seed = config.seed;
  model.provenance.data_fingerprints.emplace_back("train", hex64(dataset_fingerprint(train_set)));
  model.provenance.data_fingerprints.emplace_back("valid", hex64(dataset_fingerprint(valid_set)));

  const auto train_enc = model.encode_dataset(train_set);
  const auto valid_enc = model.encode_dataset(valid_set);
  require_labels(train_enc);
  require_labels(valid_enc);

  auto params = model.parameters();
  auto& opt = result.optimizer;
  if (!config.reset_optimizer && options.resume) {
    opt = *options.resume;
    if (opt.m.size() != params.size()) throw ConfigError("optimizer state does not match the model");
  } else {
    opt = AdamState{};
    for (auto* p : params) {
      opt.m.emplace_back(p->value.size(), 0.0);
      opt.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (train_enc.empty()) return result;

  const auto mask = trainable_mask(model, train_enc);
  const std::size_t n = train_enc.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total = per_epoch * config.epochs;

  EarlyStopper stopper(config.patience);
  std::vector<NdArray> best;
  std::size_t step = 0;
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(config.seed, {0xe90c, epoch}));
    shuffle_rng.shuffle(order.begin(), order.end());

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (auto* p : params) p->value.zero_grad();

      double batch_value = 0.0;
      try {
        for (std::size_t k = begin; k < end; ++k) {
          Tape t;
          Rng drop_rng(derive_seed(config.seed, {0xd809, step, order[k]}));
          Var l = sample_loss(t, model, train_enc[order[k]], config.dropout, &drop_rng);
          batch_value += t.value(l)[0] * inv;
          t.backward(l, inv);
        }
      } catch (const NumericError& e) {
        throw DivergenceError("loss became non-finite at step " + std::to_string(step) + ": " + e.what(), step);
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!mask[i] || params[i]->is_bias || config.l2_lambda == 0.0) continue;
        auto g = params[i]->value.grad();
        const auto w = params[i]->value.data();
        double sq = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
          g[j] += config.l2_lambda * w[j];
          sq += w[j] * w[j];
        }
        batch_value += 0.5 * config.l2_lambda * sq;
      }
      if (!std::isfinite(batch_value)) {
        throw DivergenceError("loss became non-finite at step " + std::to_string(step), step);
      }

      const double lr = learning_rate_at(step, total, config.learning_rate, config.warmup_ratio);
      ++opt.t;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(opt.t));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(opt.t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!mask[i]) continue;
        auto w = params[i]->value.data();
        auto g = params[i]->value.grad();
        auto& m = opt.m[i];
        auto& v = opt.v[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
          m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
          v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
          w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + kAdamEps);
        }
      }
      epoch_loss += batch_value;
      if (options.on_step) options.on_step({step, lr, batch_value});
    }

    EpochRecord rec{epoch, epoch_loss / static_cast<double>(per_epoch), std::nullopt, model.checkpoint_id()};
    bool stop = false;
    if (!valid_enc.empty()) {
      try {
        rec.valid_loss = mean_data_loss(model, valid_enc) + l2_term(model, config.l2_lambda);
      } catch (const NumericError&) {
        rec.valid_loss = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(*rec.valid_loss)) {
        throw DivergenceError("validation loss became non-finite after step " + std::to_string(step), step);
      }
      if (stopper.observe(*rec.valid_loss)) {
        best = snapshot(model);
        result.best_epoch = epoch;
      }
      stop = stopper.should_stop();
    } else {
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (stop) break;
  }
  result.steps = step;
  if (!best.empty()) restore(model, best);
  for (auto* p : params) p->value.drop_grad();
  return result;
}

IncrementalResult run_incremental(const Dataset& source_train, const Dataset& source_valid,
                                  const Dataset& target_train, const Dataset& target_valid,
                                  const ModelSpec& spec, const TrainConfig& source_config,
                                  const TrainConfig& target_config, const TrainOptions& source_options,
                                  const TrainOptions& target_options) {
  for (const auto* d : {&source_valid, &target_train, &target_valid}) {
    if (d->schema.categories() != source_train.schema.categories() ||
        !(d->polarities == source_train.polarities)) {
      throw ConfigError("incremental stages use different schemas");
    }
  }
  IncrementalResult r;
  Model fresh = Model::create(source_train, spec, source_config.seed);
  fresh.provenance.stage = "source";
  r.source = train(source_train, source_valid, std::move(fresh), source_config, source_options);

  Model stage2 = r.source.model;
  stage2.provenance.lineage = "finetuned";
  stage2.provenance.parent_checkpoint = r.source.model.checkpoint_id();
  stage2.provenance.stage = "incremental";
  TrainOptions opts = target_options;
  if (!target_config.reset_optimizer) opts.resume = &r.source.optimizer;
  r.incremental = train(target_train, target_valid, std::move(stage2), target_config, opts);
  return r;
}

TrainResult run_mix(const Dataset& source_train, const Dataset& target_train, const Dataset& valid,
                    const ModelSpec& spec, const TrainConfig& config, const TrainOptions& options) {
  Dataset mixed = concat(source_train, target_train);
  Model fresh = Model::create(mixed, spec, config.seed);
  fresh.provenance.stage = "mix";
  return train(mixed, valid, std::move(fresh), config, options);
}

}  // namespace cne
