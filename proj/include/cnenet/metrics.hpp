#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cnenet/data.hpp"
#include "cnenet/model.hpp"

namespace cne {

struct PredictedSample {
  std::string id;
  // probs[c] is the polarity distribution for schema category c.
  std::vector<std::vector<double>> probs;
  LabelVector gold;
};

// Model outputs over a dataset, scored on a declared subset of categories.
struct PredictionSet {
  PolaritySet polarities;
  std::vector<std::string> category_names;
  std::vector<std::size_t> categories;  // scored subset, indices into category_names
  std::vector<PredictedSample> samples;

  // Throws DataError on shape mismatches or rows not summing to 1 (1e-6).
  void validate() const;
  PredictionSet restricted(std::vector<std::size_t> subset) const;
};

enum class CategoryGroup { kAll, kSource, kTarget };
std::string_view to_string(CategoryGroup group);
CategoryGroup parse_category_group(std::string_view text);
std::vector<std::size_t> group_indices(const CategorySchema& schema, CategoryGroup group);

PredictionSet predict(const Model& model, const Dataset& dataset);

// Probability that category c is addressed at all: 1 - p(none).
inline double extraction_score(const std::vector<double>& probs) { return 1.0 - probs.back(); }

struct ExtractionScores {
  double precision = 0.0;
  double recall = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

// Counts over labeled (sample, category) pairs; present iff score > threshold.
ExtractionScores extraction_scores(const PredictionSet& preds, double threshold = 0.5);

enum class SentimentSubset { kBinary, kThreeWay, kFourWay };
std::vector<std::string> subset_labels(SentimentSubset subset);

// Pairs whose gold lies in the subset; argmax over the subset only. Absent
// when the polarity set lacks a subset class or no pair qualifies.
std::optional<double> sentiment_accuracy(const PredictionSet& preds, SentimentSubset subset);

// Fraction of samples whose full-polarity argmax is right for every scored
// category. A sample missing gold on a scored category is a DataError.
std::optional<double> strict_accuracy(const PredictionSet& preds);
// Same all-or-nothing rule on the present/absent decision.
std::optional<double> extraction_strict_accuracy(const PredictionSet& preds, double threshold = 0.5);
// Full-polarity argmax accuracy over labeled pairs.
std::optional<double> pair_accuracy(const PredictionSet& preds);

// ROC AUC by the Mann-Whitney rank statistic; ties count 1/2. Absent when
// the gold is single-class.
std::optional<double> auc(std::span<const std::pair<double, bool>> scored);
// Per-category AUC of 1 - p(none) against "present", macro-averaged.
std::optional<double> extraction_auc(const PredictionSet& preds);
// Per-category AUC of p(pos) / (p(pos) + p(neg)) over pos/neg gold, macro-averaged.
std::optional<double> sentiment_auc(const PredictionSet& preds);

inline constexpr int kReportVersion = 1;

struct MetricsReport {
  std::string group = "all";
  std::vector<std::string> categories;
  std::size_t samples = 0;
  std::size_t pairs = 0;
  double threshold = 0.5;
  struct {
    std::optional<double> precision, recall, micro_f1, macro_f1, strict_accuracy, auc;
  } extraction;
  struct {
    std::optional<double> binary_acc, three_way_acc, four_way_acc, strict_accuracy, pair_accuracy, auc;
  } sentiment;
};

MetricsReport evaluate(const PredictionSet& preds, std::string group, double threshold = 0.5);
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(std::string_view text);
std::string render_table(std::span<const MetricsReport> reports);

}  // namespace cne
