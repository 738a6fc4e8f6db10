#include "cnenet/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cnenet/error.hpp"

namespace cne {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Workflow w) {
  switch (w) {
    case Workflow::kPlain: return "plain";
    case Workflow::kMix: return "mix";
    case Workflow::kIncremental: return "incremental";
  }
  return "plain";
}

Workflow parse_workflow(std::string_view text) {
  if (text == "plain") return Workflow::kPlain;
  if (text == "mix") return Workflow::kMix;
  if (text == "incremental") return Workflow::kIncremental;
  throw ConfigError("unknown workflow \"" + std::string(text) + "\" (expected plain | mix | incremental)");
}

// ---- config ---------------------------------------------------------------------------

std::filesystem::path ExperimentConfig::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

void ExperimentConfig::validate() const {
  encoder.validate();
  train.validate();
  target_train.validate();
  if (rates.empty()) throw ConfigError("rates must list at least one sampling rate");
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("sampling rates must lie in [0, 1]");
  }
  if (f1 != "micro" && f1 != "macro") throw ConfigError("f1 must be micro or macro");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  if (!synthetic) {
    if (schema.empty()) throw ConfigError("config needs a schema file or a synthetic block");
    for (const auto* p : {&schema, &train_path, &valid_path, &test_path}) {
      if (p->empty()) throw ConfigError("config needs data.train, data.valid and data.test");
      if (!std::filesystem::exists(resolve(*p))) {
        throw ConfigError("referenced file does not exist: " + resolve(*p).string());
      }
    }
  }
}

namespace {

ordered_json encoder_json(const EncoderConfig& e) {
  return {{"layers", e.layers}, {"heads", e.heads}, {"hidden", e.hidden},
          {"ffn", e.ffn},       {"max_len", e.max_len}, {"dropout", e.dropout}};
}

EncoderConfig encoder_from(const json& j, EncoderConfig e) {
  e.layers = j.value("layers", e.layers);
  e.heads = j.value("heads", e.heads);
  e.hidden = j.value("hidden", e.hidden);
  e.ffn = j.value("ffn", e.ffn);
  e.max_len = j.value("max_len", e.max_len);
  e.dropout = j.value("dropout", e.dropout);
  return e;
}

ordered_json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"warmup_ratio", t.warmup_ratio},
          {"epochs", t.epochs},               {"dropout", t.dropout},
          {"l2_lambda", t.l2_lambda},         {"batch_size", t.batch_size},
          {"patience", t.patience},           {"reset_optimizer", t.reset_optimizer}};
}

TrainConfig train_from(const json& j, TrainConfig t) {
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.warmup_ratio = j.value("warmup_ratio", t.warmup_ratio);
  t.epochs = j.value("epochs", t.epochs);
  t.dropout = j.value("dropout", t.dropout);
  t.l2_lambda = j.value("l2_lambda", t.l2_lambda);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.patience = j.value("patience", t.patience);
  t.reset_optimizer = j.value("reset_optimizer", t.reset_optimizer);
  return t;
}

}  // namespace

ExperimentConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    c.schema = j.value("schema", std::string());
    if (j.contains("data")) {
      const auto& d = j.at("data");
      c.train_path = d.value("train", std::string());
      c.valid_path = d.value("valid", std::string());
      c.test_path = d.value("test", std::string());
    }
    if (j.contains("synthetic") && !j.at("synthetic").is_null()) {
      const auto& s = j.at("synthetic");
      SyntheticSource src;
      const auto& g = s.at("generator");
      src.generator = g.is_string() ? generator_from_json(read_text_file(c.resolve(g.get<std::string>())))
                                    : generator_from_json(g.dump());
      src.train = s.at("train").get<std::size_t>();
      src.valid = s.at("valid").get<std::size_t>();
      src.test = s.at("test").get<std::size_t>();
      c.synthetic = std::move(src);
    }
    c.head = parse_head_kind(j.value("head", std::string(to_string(c.head))));
    c.decoder = parse_decoder_mode(j.value("decoder", std::string(to_string(c.decoder))));
    c.encoder = encoder_from(j.value("encoder", json::object()), c.encoder);
    c.train = train_from(j.value("train", json::object()), c.train);
    c.target_train = train_from(j.value("target_train", json::object()), c.train);
    if (j.contains("rates")) c.rates = j.at("rates").get<std::vector<double>>();
    c.workflow = parse_workflow(j.value("workflow", std::string("plain")));
    c.out = j.value("out", c.out);
    c.seed = j.value("seed", c.seed);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    c.f1 = j.value("f1", c.f1);
    c.threshold = j.value("threshold", c.threshold);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.train.seed = c.seed;
  c.target_train.seed = c.seed;
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["schema"] = c.schema;
  j["data"] = {{"train", c.train_path}, {"valid", c.valid_path}, {"test", c.test_path}};
  if (c.synthetic) {
    j["synthetic"] = {{"generator", ordered_json::parse(generator_to_json(c.synthetic->generator))},
                      {"train", c.synthetic->train},
                      {"valid", c.synthetic->valid},
                      {"test", c.synthetic->test}};
  } else {
    j["synthetic"] = nullptr;
  }
  j["head"] = to_string(c.head);
  j["decoder"] = to_string(c.decoder);
  j["encoder"] = encoder_json(c.encoder);
  j["train"] = train_json(c.train);
  j["target_train"] = train_json(c.target_train);
  j["rates"] = c.rates;
  j["workflow"] = to_string(c.workflow);
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["data_seed"] = c.data_seed;
  j["seeds"] = c.seeds;
  j["f1"] = c.f1;
  j["threshold"] = c.threshold;
  return j.dump(2);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return config_from_json(read_text_file(path), base);
}

std::string apply_overrides(std::string_view config_json, std::string_view overrides_json) {
  try {
    ordered_json base = ordered_json::parse(config_json);
    const ordered_json patch = ordered_json::parse(overrides_json.empty() ? "{}" : overrides_json);
    if (!base.is_object() || !patch.is_object()) throw ConfigError("config and overrides must be JSON objects");
    base.merge_patch(patch);
    return base.dump(2);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string config_fingerprint(const ExperimentConfig& c) { return hex64(fnv1a64(config_to_json(c))); }

// ---- data -----------------------------------------------------------------------------

Splits load_splits(const ExperimentConfig& c) {
  Splits s;
  if (c.synthetic) {
    auto gen = c.synthetic->generator;
    const auto prefix = gen.id_prefix;
    auto make = [&](std::size_t count, const char* role, std::uint64_t tag, SplitTag split) {
      gen.count = count;
      gen.id_prefix = prefix + "-" + role;
      Dataset d = make_synthetic(gen, derive_seed(c.data_seed, {0x5e4, tag}));
      d.split = split;
      return d;
    };
    s.train = make(c.synthetic->train, "train", 1, SplitTag::kTrain);
    s.valid = make(c.synthetic->valid, "valid", 2, SplitTag::kValidation);
    s.test = make(c.synthetic->test, "test", 3, SplitTag::kTest);
    return s;
  }
  const auto sf = load_schema(c.resolve(c.schema));
  s.train = load_dataset(c.resolve(c.train_path), sf.schema, sf.polarities, SplitTag::kTrain);
  s.valid = load_dataset(c.resolve(c.valid_path), sf.schema, sf.polarities, SplitTag::kValidation);
  s.test = load_dataset(c.resolve(c.test_path), sf.schema, sf.polarities, SplitTag::kTest);
  return s;
}

namespace {

struct IncrementalData {
  Dataset source_train, source_valid, source_test;
  Dataset target_train, target_valid, target_test;
};

std::uint64_t sampling_seed(const ExperimentConfig& c) { return derive_seed(c.data_seed, {0x5a3}); }

IncrementalData prepare(const ExperimentConfig& c, const Splits& s, double rate) {
  const auto& schema = s.train.schema;
  if (!schema.has_partition()) throw ConfigError("the schema declares no source/target categories");
  IncrementalData d;
  Dataset full_target_train;
  std::tie(d.source_train, full_target_train) = split_incremental(s.train, schema);
  std::tie(d.source_valid, d.target_valid) = split_incremental(s.valid, schema);
  std::tie(d.source_test, d.target_test) = split_incremental(s.test, schema);
  d.target_train = sample_target(full_target_train, rate, sampling_seed(c));
  return d;
}

std::string rate_tag(double rate) {
  std::ostringstream o;
  o << rate;
  return o.str();
}

ordered_json file_entry(const std::string& role, const std::filesystem::path& path, const Dataset& d) {
  return {{"role", role},
          {"path", path.filename().string()},
          {"samples", d.size()},
          {"fingerprint", hex64(dataset_fingerprint(d))}};
}

std::string summary(ordered_json j, const std::string& text) {
  j["text"] = text;
  return j.dump(2);
}

}  // namespace

// ---- convert / generate / split ---------------------------------------------------------

std::string cmd_convert(std::string_view format, const std::filesystem::path& in,
                        const std::filesystem::path& out) {
  if (format != "semeval14" && format != "sentihood") {
    throw ConfigError("unknown input format \"" + std::string(format) + "\" (expected semeval14 | sentihood)");
  }
  const std::string text = read_text_file(in);
  Dataset d;
  if (format == "semeval14") {
    d = convert_semeval14(text);
  } else {
    d = convert_sentihood(text);
  }
  d.validate();
  auto schema_path = out;
  schema_path.replace_extension(".schema.json");
  save_dataset(out, d);
  save_schema(schema_path, {d.schema, d.polarities});
  std::size_t labels = 0;
  for (const auto& s : d.samples) labels += s.labeled_count();
  ordered_json j{{"format", format},
                 {"dataset", out.string()},
                 {"schema", schema_path.string()},
                 {"samples", d.size()},
                 {"labels", labels},
                 {"fingerprint", hex64(dataset_fingerprint(d))}};
  return summary(j, "converted " + std::to_string(d.size()) + " samples, " + std::to_string(labels) +
                        " labels -> " + out.string() + "\n");
}

std::string cmd_generate(const ExperimentConfig& c) {
  if (!c.synthetic) throw ConfigError("generate needs a synthetic block in the config");
  const auto s = load_splits(c);
  const auto dir = c.out_dir() / "data";
  ordered_json files = ordered_json::array();
  for (const auto* d : {&s.train, &s.valid, &s.test}) {
    const auto path = dir / (std::string(to_string(d->split)) + ".jsonl");
    save_dataset(path, *d);
    files.push_back(file_entry(std::string(to_string(d->split)), path, *d));
  }
  save_schema(dir / "schema.json", {s.train.schema, s.train.polarities});
  ordered_json j{{"config_fingerprint", config_fingerprint(c)}, {"data_seed", c.data_seed}, {"files", files}};
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
  return summary(j, "generated " + std::to_string(s.train.size()) + "/" + std::to_string(s.valid.size()) + "/" +
                        std::to_string(s.test.size()) + " samples in " + dir.string() + "\n");
}

std::string cmd_split(const ExperimentConfig& c) {
  const auto s = load_splits(c);
  const auto dir = c.out_dir() / "split";
  const auto& schema = s.train.schema;
  if (!schema.has_partition()) throw ConfigError("the schema declares no source/target categories");
  ordered_json files = ordered_json::array();
  Dataset full_target_train;
  for (const auto* d : {&s.train, &s.valid, &s.test}) {
    auto [src, tgt] = split_incremental(*d, schema);
    const std::string tag(to_string(d->split));
    const auto sp = dir / ("source_" + tag + ".jsonl");
    const auto tp = dir / ("target_" + tag + ".jsonl");
    save_dataset(sp, src);
    save_dataset(tp, tgt);
    files.push_back(file_entry("source_" + tag, sp, src));
    files.push_back(file_entry("target_" + tag, tp, tgt));
    if (d == &s.train) full_target_train = std::move(tgt);
  }
  std::ostringstream text;
  for (double rate : c.rates) {
    const auto sampled = sample_target(full_target_train, rate, sampling_seed(c));
    const auto path = dir / ("target_train_rate" + rate_tag(rate) + ".jsonl");
    save_dataset(path, sampled);
    auto e = file_entry("target_train_sampled", path, sampled);
    e["rate"] = rate;
    files.push_back(e);
    text << "rate " << rate_tag(rate) << ": " << sampled.size() << " target training samples\n";
  }
  save_schema(dir / "schema.json", {schema, s.train.polarities});
  ordered_json j{{"format", "cnenet-split-manifest"},
                 {"version", 1},
                 {"config_fingerprint", config_fingerprint(c)},
                 {"data_seed", c.data_seed},
                 {"sampling_seed", sampling_seed(c)},
                 {"rates", c.rates},
                 {"source_categories", schema.source()},
                 {"target_categories", schema.target()},
                 {"files", files}};
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
  return summary(j, text.str());
}

// ---- train ------------------------------------------------------------------------------

namespace {

struct RunContext {
  const ExperimentConfig& config;
  std::string fingerprint;
  std::string config_json;
  std::ofstream* log = nullptr;
};

TrainOptions logging_options(const RunContext& ctx, const std::string& stage) {
  TrainOptions o;
  if (!ctx.log) return o;
  auto* log = ctx.log;
  const auto fp = ctx.fingerprint;
  o.on_step = [log, stage, fp](const StepRecord& r) {
    ordered_json j{{"stage", stage}, {"split", "train"}, {"step", r.step},
                   {"lr", r.lr},     {"loss", r.loss},   {"config_fingerprint", fp}};
    *log << j.dump() << '\n';
  };
  o.on_epoch = [log, stage, fp](const EpochRecord& r) {
    ordered_json j{{"stage", stage},
                   {"split", "valid"},
                   {"epoch", r.epoch},
                   {"train_loss", r.train_loss},
                   {"loss", r.valid_loss ? ordered_json(*r.valid_loss) : ordered_json(nullptr)},
                   {"checkpoint_id", r.checkpoint_id},
                   {"config_fingerprint", fp}};
    *log << j.dump() << '\n';
  };
  return o;
}

void stamp(Model& m, const RunContext& ctx) {
  m.provenance.config_json = ctx.config_json;
  m.provenance.config_fingerprint = ctx.fingerprint;
}

ModelSpec model_spec(const ExperimentConfig& c, DecoderMode mode) { return {c.encoder, c.head, mode}; }

MetricsReport score(const Model& m, const Dataset& test, CategoryGroup group, double threshold) {
  auto preds = predict(m, test).restricted(group_indices(m.schema, group));
  return evaluate(preds, std::string(to_string(group)), threshold);
}

double extraction_f1(const Model& m, const Dataset& test, CategoryGroup group, const ExperimentConfig& c) {
  auto preds = predict(m, test).restricted(group_indices(m.schema, group));
  const auto ex = extraction_scores(preds, c.threshold);
  return c.f1 == "macro" ? ex.macro_f1 : ex.micro_f1;
}

struct Trained {
  std::string stage;
  const TrainResult* result;
};

}  // namespace

std::string cmd_train(const ExperimentConfig& c) {
  const auto splits = load_splits(c);
  const auto out = c.out_dir();
  std::filesystem::create_directories(out);
  RunContext ctx{c, config_fingerprint(c), json::parse(config_to_json(c)).dump()};
  std::ofstream log(out / "steps.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out / "steps.jsonl").string());
  ctx.log = &log;

  const bool partitioned = splits.train.schema.has_partition();
  std::vector<CategoryGroup> groups{CategoryGroup::kAll};
  if (partitioned) {
    groups.push_back(CategoryGroup::kSource);
    groups.push_back(CategoryGroup::kTarget);
  }

  ordered_json runs = ordered_json::array();
  std::ostringstream text;
  const std::vector<double> rates =
      c.workflow == Workflow::kPlain ? std::vector<double>{1.0} : c.rates;
  for (double rate : rates) {
    const auto dir = rates.size() > 1 ? out / ("rate_" + rate_tag(rate)) : out;
    std::vector<TrainResult> results;
    std::vector<std::string> stages;
    switch (c.workflow) {
      case Workflow::kPlain: {
        Model m = Model::create(splits.train, model_spec(c, c.decoder), c.seed);
        m.provenance.stage = "plain";
        stamp(m, ctx);
        results.push_back(train(splits.train, splits.valid, std::move(m), c.train, logging_options(ctx, "plain")));
        stages.push_back("plain");
        break;
      }
      case Workflow::kMix: {
        const auto d = prepare(c, splits, rate);
        Model m = Model::create(concat(d.source_train, d.target_train), model_spec(c, c.decoder), c.seed);
        m.provenance.stage = "mix";
        stamp(m, ctx);
        results.push_back(train(concat(d.source_train, d.target_train), splits.valid, std::move(m), c.train,
                                logging_options(ctx, "mix")));
        stages.push_back("mix");
        break;
      }
      case Workflow::kIncremental: {
        const auto d = prepare(c, splits, rate);
        Model m = Model::create(d.source_train, model_spec(c, c.decoder), c.seed);
        m.provenance.stage = "source";
        stamp(m, ctx);
        results.push_back(train(d.source_train, d.source_valid, std::move(m), c.train,
                                logging_options(ctx, "source")));
        Model m2 = results[0].model;
        m2.provenance.lineage = "finetuned";
        m2.provenance.parent_checkpoint = results[0].model.checkpoint_id();
        m2.provenance.stage = "incremental";
        auto opts = logging_options(ctx, "incremental");
        if (!c.target_train.reset_optimizer) opts.resume = &results[0].optimizer;
        results.push_back(train(d.target_train, d.target_valid, std::move(m2), c.target_train, opts));
        stages = {"source", "incremental"};
        break;
      }
    }

    ordered_json checkpoints = ordered_json::array();
    ordered_json metrics = ordered_json::array();
    std::vector<MetricsReport> rows;
    for (std::size_t k = 0; k < results.size(); ++k) {
      const auto& r = results[k];
      const auto path = dir / (stages[k] + ".ckpt.json");
      save_checkpoint(path, r.model);
      checkpoints.push_back({{"stage", stages[k]},
                             {"path", std::filesystem::relative(path, out).string()},
                             {"checkpoint_id", r.model.checkpoint_id()},
                             {"lineage", r.model.provenance.lineage},
                             {"parent_checkpoint", r.model.provenance.parent_checkpoint},
                             {"best_epoch", r.best_epoch},
                             {"epochs_run", r.history.size()},
                             {"steps", r.steps}});
      for (auto g : groups) {
        auto rep = score(r.model, splits.test, g, c.threshold);
        metrics.push_back({{"stage", stages[k]}, {"group", to_string(g)}, {"report", json::parse(report_to_json(rep))}});
        rep.group = stages[k] + "/" + rep.group;
        rows.push_back(std::move(rep));
      }
    }
    if (c.workflow != Workflow::kPlain) text << "rate " << rate_tag(rate) << "\n";
    text << render_table(rows);
    runs.push_back({{"rate", rate}, {"checkpoints", checkpoints}, {"metrics", metrics}});
  }

  ordered_json report{{"report_version", kReportVersion},
                      {"kind", "train"},
                      {"config_fingerprint", ctx.fingerprint},
                      {"seed", c.seed},
                      {"workflow", to_string(c.workflow)},
                      {"head", to_string(c.head)},
                      {"decoder", to_string(c.decoder)},
                      {"data",
                       {file_entry("train", "train", splits.train), file_entry("valid", "valid", splits.valid),
                        file_entry("test", "test", splits.test)}},
                      {"runs", runs}};
  write_text_file(out / "report.json", report.dump(2) + "\n");
  write_text_file(out / "report.txt", "config " + ctx.fingerprint + "\n" + text.str());
  return summary(report, text.str());
}

// ---- eval -------------------------------------------------------------------------------

std::string cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                     std::string_view group, const std::optional<std::filesystem::path>& schema,
                     double threshold, const std::optional<std::filesystem::path>& out) {
  const Model m = load_checkpoint(checkpoint);
  if (schema) {
    const auto sf = load_schema(*schema);
    if (!(sf.schema == m.schema) || !(sf.polarities == m.polarities)) {
      throw ConfigError("dataset schema does not match the checkpoint");
    }
  }
  const Dataset d = load_dataset(dataset, m.schema, m.polarities, SplitTag::kTest);
  const auto rep = score(m, d, parse_category_group(group), threshold);
  ordered_json j = ordered_json::parse(report_to_json(rep));
  j["checkpoint_id"] = m.checkpoint_id();
  j["config_fingerprint"] = m.provenance.config_fingerprint;
  j["dataset_fingerprint"] = hex64(dataset_fingerprint(d));
  if (out) write_text_file(*out, j.dump(2) + "\n");
  const std::vector<MetricsReport> rows{rep};
  return summary(j, render_table(rows));
}

// ---- forgetting -------------------------------------------------------------------------

std::string cmd_forgetting(const ExperimentConfig& c) {
  const auto splits = load_splits(c);
  const auto out = c.out_dir();
  RunContext ctx{c, config_fingerprint(c), json::parse(config_to_json(c)).dump()};
  const auto seeds = c.seeds.empty() ? std::vector<std::uint64_t>{c.seed} : c.seeds;

  ordered_json per_rate = ordered_json::array();
  std::ostringstream text;
  text << std::fixed;
  for (double rate : c.rates) {
    const auto d = prepare(c, splits, rate);
    double before[2] = {0, 0}, after[2] = {0, 0};
    double mix_target = 0, inc_target = 0;
    ordered_json per_seed = ordered_json::array();
    for (auto seed : seeds) {
      TrainConfig src_cfg = c.train, tgt_cfg = c.target_train;
      src_cfg.seed = tgt_cfg.seed = seed;
      ordered_json entry{{"seed", seed}};
      for (int k = 0; k < 2; ++k) {
        const auto mode = k == 0 ? DecoderMode::kShared : DecoderMode::kUnshared;
        auto r = run_incremental(d.source_train, d.source_valid, d.target_train, d.target_valid,
                                 model_spec(c, mode), src_cfg, tgt_cfg);
        const double b = extraction_f1(r.source.model, splits.test, CategoryGroup::kSource, c);
        const double a = extraction_f1(r.incremental.model, splits.test, CategoryGroup::kSource, c);
        before[k] += b;
        after[k] += a;
        ordered_json row{{"source_f1_before", b},
                         {"source_f1_after", a},
                         {"delta", a - b},
                         {"source_checkpoint", r.source.model.checkpoint_id()},
                         {"incremental_checkpoint", r.incremental.model.checkpoint_id()}};
        if (mode == DecoderMode::kShared) {
          const double t = extraction_f1(r.incremental.model, splits.test, CategoryGroup::kTarget, c);
          inc_target += t;
          row["target_f1"] = t;
        }
        entry[std::string(to_string(mode))] = row;
      }
      auto mix = run_mix(d.source_train, d.target_train, splits.valid, model_spec(c, DecoderMode::kShared), src_cfg);
      const double mt = extraction_f1(mix.model, splits.test, CategoryGroup::kTarget, c);
      mix_target += mt;
      entry["mix"] = {{"target_f1", mt}, {"checkpoint", mix.model.checkpoint_id()}};
      per_seed.push_back(entry);
    }
    const double n = static_cast<double>(seeds.size());
    for (int k = 0; k < 2; ++k) {
      before[k] /= n;
      after[k] /= n;
    }
    mix_target /= n;
    inc_target /= n;
    ordered_json rows = ordered_json::array();
    for (int k = 0; k < 2; ++k) {
      const char* mode = k == 0 ? "shared" : "unshared";
      rows.push_back({{"decoder", mode}, {"phase", "before"}, {"source_f1", before[k]}});
      rows.push_back({{"decoder", mode}, {"phase", "after"}, {"source_f1", after[k]}});
    }
    per_rate.push_back({{"rate", rate},
                        {"target_train_samples", d.target_train.size()},
                        {"rows", rows},
                        {"deltas", {{"shared", after[0] - before[0]}, {"unshared", after[1] - before[1]}}},
                        {"parity",
                         {{"mix_target_f1", mix_target},
                          {"incremental_target_f1", inc_target},
                          {"abs_diff", std::abs(mix_target - inc_target)}}},
                        {"per_seed", per_seed}});

    text << std::setprecision(4) << "rate " << rate_tag(rate) << " (" << c.f1 << " extraction F1, source categories, "
         << seeds.size() << " seeds)\n"
         << "decoder   before  after   delta\n"
         << "shared    " << before[0] << "  " << after[0] << "  " << after[0] - before[0] << "\n"
         << "unshared  " << before[1] << "  " << after[1] << "  " << after[1] - before[1] << "\n"
         << "target F1: mix " << mix_target << ", incremental " << inc_target << "\n";
  }
  ordered_json report{{"report_version", kReportVersion},
                      {"kind", "forgetting"},
                      {"config_fingerprint", ctx.fingerprint},
                      {"head", to_string(c.head)},
                      {"f1", c.f1},
                      {"seeds", seeds},
                      {"data_seed", c.data_seed},
                      {"data",
                       {file_entry("train", "train", splits.train), file_entry("valid", "valid", splits.valid),
                        file_entry("test", "test", splits.test)}},
                      {"results", per_rate}};
  write_text_file(out / "forgetting.json", report.dump(2) + "\n");
  write_text_file(out / "forgetting.txt", "config " + ctx.fingerprint + "\n" + text.str());
  return summary(report, text.str());
}

}  // namespace cne
