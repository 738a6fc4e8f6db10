#include "cnenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cnenet/error.hpp"

namespace cne {

using nlohmann::json;
using nlohmann::ordered_json;

void PredictionSet::validate() const {
  for (auto c : categories) {
    if (c >= category_names.size()) throw DataError("scored category index out of range");
  }
  for (const auto& s : samples) {
    if (s.probs.size() != category_names.size() || s.gold.size() != category_names.size()) {
      throw DataError("prediction for sample \"" + s.id + "\" has the wrong number of categories");
    }
    for (const auto& row : s.probs) {
      if (row.size() != polarities.size()) {
        throw DataError("prediction for sample \"" + s.id + "\" has the wrong number of classes");
      }
      double total = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("probability outside [0, 1] in sample \"" + s.id + "\"");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-6) {
        throw DataError("probabilities of sample \"" + s.id + "\" do not sum to 1");
      }
    }
    for (const auto& g : s.gold) {
      if (g && *g >= polarities.size()) throw DataError("gold label out of range in sample \"" + s.id + "\"");
    }
  }
}

PredictionSet PredictionSet::restricted(std::vector<std::size_t> subset) const {
  PredictionSet out = *this;
  out.categories = std::move(subset);
  return out;
}

std::string_view to_string(CategoryGroup group) {
  switch (group) {
    case CategoryGroup::kAll: return "all";
    case CategoryGroup::kSource: return "source";
    case CategoryGroup::kTarget: return "target";
  }
  return "all";
}

CategoryGroup parse_category_group(std::string_view text) {
  if (text == "all") return CategoryGroup::kAll;
  if (text == "source") return CategoryGroup::kSource;
  if (text == "target") return CategoryGroup::kTarget;
  throw ConfigError("unknown category group \"" + std::string(text) + "\" (expected all | source | target)");
}

std::vector<std::size_t> group_indices(const CategorySchema& schema, CategoryGroup group) {
  switch (group) {
    case CategoryGroup::kSource:
      if (!schema.has_partition()) throw ConfigError("schema declares no source/target partition");
      return schema.source_indices();
    case CategoryGroup::kTarget:
      if (!schema.has_partition()) throw ConfigError("schema declares no source/target partition");
      return schema.target_indices();
    case CategoryGroup::kAll: break;
  }
  std::vector<std::size_t> all(schema.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

PredictionSet predict(const Model& model, const Dataset& dataset) {
  const auto encoded = model.encode_dataset(dataset);
  PredictionSet out;
  out.polarities = model.polarities;
  out.category_names = model.schema.categories();
  out.categories = group_indices(model.schema, CategoryGroup::kAll);
  out.samples.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const NdArray probs = predict_one(model, encoded[i].input);
    PredictedSample s;
    s.id = encoded[i].id;
    s.gold = dataset.samples[i].labels;
    for (std::size_t c = 0; c < probs.rows(); ++c) {
      const auto row = probs.row(c);
      s.probs.emplace_back(row.begin(), row.end());
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

// ---- extraction ---------------------------------------------------------------------

namespace {

double ratio_or(double num, double den, double fallback) { return den == 0.0 ? fallback : num / den; }

double f1_from(double tp, double fp, double fn) { return ratio_or(2.0 * tp, 2.0 * tp + fp + fn, 1.0); }

std::size_t argmax(const std::vector<double>& row, std::span<const std::size_t> classes) {
  std::size_t best = classes[0];
  for (auto k : classes) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

std::vector<std::size_t> all_classes(const PolaritySet& p) {
  std::vector<std::size_t> v(p.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

}  // namespace

ExtractionScores extraction_scores(const PredictionSet& preds, double threshold) {
  const std::size_t none = preds.polarities.none_index();
  double tp = 0, fp = 0, fn = 0;
  double macro_sum = 0.0;
  std::size_t macro_count = 0;
  for (auto c : preds.categories) {
    double ctp = 0, cfp = 0, cfn = 0;
    std::size_t scored = 0;
    for (const auto& s : preds.samples) {
      if (!s.gold[c]) continue;
      ++scored;
      const bool gold = *s.gold[c] != none;
      const bool pred = extraction_score(s.probs[c]) > threshold;
      if (gold && pred) ++ctp;
      if (!gold && pred) ++cfp;
      if (gold && !pred) ++cfn;
    }
    if (scored == 0) continue;
    tp += ctp;
    fp += cfp;
    fn += cfn;
    macro_sum += f1_from(ctp, cfp, cfn);
    ++macro_count;
  }
  if (macro_count == 0) throw DataError("extraction scores over an empty prediction set");
  ExtractionScores r;
  r.precision = ratio_or(tp, tp + fp, fn == 0.0 ? 1.0 : 0.0);
  r.recall = ratio_or(tp, tp + fn, fp == 0.0 ? 1.0 : 0.0);
  r.micro_f1 = f1_from(tp, fp, fn);
  r.macro_f1 = macro_sum / static_cast<double>(macro_count);
  return r;
}

// ---- sentiment ----------------------------------------------------------------------

std::vector<std::string> subset_labels(SentimentSubset subset) {
  switch (subset) {
    case SentimentSubset::kBinary: return {"positive", "negative"};
    case SentimentSubset::kThreeWay: return {"positive", "neutral", "negative"};
    case SentimentSubset::kFourWay: return {"positive", "neutral", "negative", "conflict"};
  }
  return {};
}

std::optional<double> sentiment_accuracy(const PredictionSet& preds, SentimentSubset subset) {
  std::vector<std::size_t> classes;
  for (const auto& name : subset_labels(subset)) {
    const auto idx = preds.polarities.index_of(name);
    if (!idx) return std::nullopt;
    classes.push_back(*idx);
  }
  std::sort(classes.begin(), classes.end());
  std::size_t total = 0, correct = 0;
  for (const auto& s : preds.samples) {
    for (auto c : preds.categories) {
      if (!s.gold[c] || !std::binary_search(classes.begin(), classes.end(), *s.gold[c])) continue;
      ++total;
      if (argmax(s.probs[c], classes) == *s.gold[c]) ++correct;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::optional<double> strict_accuracy(const PredictionSet& preds) {
  const auto classes = all_classes(preds.polarities);
  std::size_t correct = 0;
  for (const auto& s : preds.samples) {
    bool ok = true;
    for (auto c : preds.categories) {
      if (!s.gold[c]) throw DataError("strict accuracy is undefined on partially labeled sample \"" + s.id + "\"");
      ok = ok && argmax(s.probs[c], classes) == *s.gold[c];
    }
    if (ok) ++correct;
  }
  if (preds.samples.empty() || preds.categories.empty()) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(preds.samples.size());
}

std::optional<double> extraction_strict_accuracy(const PredictionSet& preds, double threshold) {
  const std::size_t none = preds.polarities.none_index();
  std::size_t correct = 0;
  for (const auto& s : preds.samples) {
    bool ok = true;
    for (auto c : preds.categories) {
      if (!s.gold[c]) throw DataError("strict accuracy is undefined on partially labeled sample \"" + s.id + "\"");
      ok = ok && ((extraction_score(s.probs[c]) > threshold) == (*s.gold[c] != none));
    }
    if (ok) ++correct;
  }
  if (preds.samples.empty() || preds.categories.empty()) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(preds.samples.size());
}

std::optional<double> pair_accuracy(const PredictionSet& preds) {
  const auto classes = all_classes(preds.polarities);
  std::size_t total = 0, correct = 0;
  for (const auto& s : preds.samples) {
    for (auto c : preds.categories) {
      if (!s.gold[c]) continue;
      ++total;
      if (argmax(s.probs[c], classes) == *s.gold[c]) ++correct;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---- AUC ------------------------------------------------------------------------------

std::optional<double> auc(std::span<const std::pair<double, bool>> scored) {
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scored[a].first < scored[b].first; });
  double pos_rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scored[order[j]].first == scored[order[i]].first) ++j;
    // Ranks i+1..j share their average.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].second) {
        pos_rank_sum += avg_rank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scored.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  const double u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

namespace {

template <typename Select>
std::optional<double> macro_auc(const PredictionSet& preds, Select select) {
  double total = 0.0;
  std::size_t count = 0;
  for (auto c : preds.categories) {
    std::vector<std::pair<double, bool>> scored;
    for (const auto& s : preds.samples) {
      if (!s.gold[c]) continue;
      if (auto item = select(s.probs[c], *s.gold[c])) scored.push_back(*item);
    }
    if (auto a = auc(scored)) {
      total += *a;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

}  // namespace

std::optional<double> extraction_auc(const PredictionSet& preds) {
  const std::size_t none = preds.polarities.none_index();
  return macro_auc(preds, [&](const std::vector<double>& p, std::size_t gold) {
    return std::optional<std::pair<double, bool>>({extraction_score(p), gold != none});
  });
}

std::optional<double> sentiment_auc(const PredictionSet& preds) {
  const auto pos = preds.polarities.index_of("positive");
  const auto neg = preds.polarities.index_of("negative");
  if (!pos || !neg) return std::nullopt;
  return macro_auc(preds, [&](const std::vector<double>& p, std::size_t gold)
                              -> std::optional<std::pair<double, bool>> {
    if (gold != *pos && gold != *neg) return std::nullopt;
    const double den = p[*pos] + p[*neg];
    const double score = den > 0.0 ? p[*pos] / den : 0.5;
    return std::pair<double, bool>{score, gold == *pos};
  });
}

// ---- report ---------------------------------------------------------------------------

MetricsReport evaluate(const PredictionSet& preds, std::string group, double threshold) {
  preds.validate();
  MetricsReport r;
  r.group = std::move(group);
  r.threshold = threshold;
  for (auto c : preds.categories) r.categories.push_back(preds.category_names[c]);
  r.samples = preds.samples.size();
  for (const auto& s : preds.samples)
    for (auto c : preds.categories) r.pairs += s.gold[c].has_value() ? 1 : 0;

  if (r.pairs > 0) {
    const auto ex = extraction_scores(preds, threshold);
    r.extraction.precision = ex.precision;
    r.extraction.recall = ex.recall;
    r.extraction.micro_f1 = ex.micro_f1;
    r.extraction.macro_f1 = ex.macro_f1;
  }
  try {
    r.extraction.strict_accuracy = extraction_strict_accuracy(preds, threshold);
    r.sentiment.strict_accuracy = strict_accuracy(preds);
  } catch (const DataError&) {
    // partial labels: strict accuracy stays absent
  }
  r.extraction.auc = extraction_auc(preds);
  r.sentiment.binary_acc = sentiment_accuracy(preds, SentimentSubset::kBinary);
  r.sentiment.three_way_acc = sentiment_accuracy(preds, SentimentSubset::kThreeWay);
  r.sentiment.four_way_acc = sentiment_accuracy(preds, SentimentSubset::kFourWay);
  r.sentiment.pair_accuracy = pair_accuracy(preds);
  r.sentiment.auc = sentiment_auc(preds);
  return r;
}

namespace {

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

std::string report_to_json(const MetricsReport& r) {
  ordered_json j;
  j["report_version"] = kReportVersion;
  j["group"] = r.group;
  j["categories"] = r.categories;
  j["samples"] = r.samples;
  j["pairs"] = r.pairs;
  j["threshold"] = r.threshold;
  j["extraction"] = {{"precision", opt_json(r.extraction.precision)},
                     {"recall", opt_json(r.extraction.recall)},
                     {"micro_f1", opt_json(r.extraction.micro_f1)},
                     {"macro_f1", opt_json(r.extraction.macro_f1)},
                     {"strict_accuracy", opt_json(r.extraction.strict_accuracy)},
                     {"auc", opt_json(r.extraction.auc)}};
  j["sentiment"] = {{"binary_acc", opt_json(r.sentiment.binary_acc)},
                    {"three_way_acc", opt_json(r.sentiment.three_way_acc)},
                    {"four_way_acc", opt_json(r.sentiment.four_way_acc)},
                    {"strict_accuracy", opt_json(r.sentiment.strict_accuracy)},
                    {"pair_accuracy", opt_json(r.sentiment.pair_accuracy)},
                    {"auc", opt_json(r.sentiment.auc)}};
  return j.dump(2);
}

MetricsReport report_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("report_version").get<int>() != kReportVersion) throw DataError("unsupported report version");
    MetricsReport r;
    r.group = j.at("group").get<std::string>();
    r.categories = j.at("categories").get<std::vector<std::string>>();
    r.samples = j.at("samples").get<std::size_t>();
    r.pairs = j.at("pairs").get<std::size_t>();
    r.threshold = j.at("threshold").get<double>();
    const auto& e = j.at("extraction");
    r.extraction.precision = opt_from(e, "precision");
    r.extraction.recall = opt_from(e, "recall");
    r.extraction.micro_f1 = opt_from(e, "micro_f1");
    r.extraction.macro_f1 = opt_from(e, "macro_f1");
    r.extraction.strict_accuracy = opt_from(e, "strict_accuracy");
    r.extraction.auc = opt_from(e, "auc");
    const auto& s = j.at("sentiment");
    r.sentiment.binary_acc = opt_from(s, "binary_acc");
    r.sentiment.three_way_acc = opt_from(s, "three_way_acc");
    r.sentiment.four_way_acc = opt_from(s, "four_way_acc");
    r.sentiment.strict_accuracy = opt_from(s, "strict_accuracy");
    r.sentiment.pair_accuracy = opt_from(s, "pair_accuracy");
    r.sentiment.auc = opt_from(s, "auc");
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

std::string render_table(std::span<const MetricsReport> reports) {
  const std::vector<std::string> header{"group", "ext.P",  "ext.R",  "ext.microF1", "ext.macroF1", "ext.strict",
                                        "ext.AUC", "sen.bin", "sen.3way",   "sen.4way",    "sen.strict",
                                        "sen.pair", "sen.AUC"};
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream o;
    o << std::fixed << std::setprecision(4) << *v;
    return o.str();
  };
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& r : reports) {
    rows.push_back({r.group, cell(r.extraction.precision), cell(r.extraction.recall),
                    cell(r.extraction.micro_f1), cell(r.extraction.macro_f1),
                    cell(r.extraction.strict_accuracy), cell(r.extraction.auc), cell(r.sentiment.binary_acc),
                    cell(r.sentiment.three_way_acc), cell(r.sentiment.four_way_acc),
                    cell(r.sentiment.strict_accuracy), cell(r.sentiment.pair_accuracy), cell(r.sentiment.auc)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "  ";
      out << (i == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[i])) << row[i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cne
