#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cne {

// Ordered polarity labels; "none" is always present and always last.
class PolaritySet {
 public:
  PolaritySet() = default;
  explicit PolaritySet(std::vector<std::string> labels);

  // {positive, neutral, negative, conflict, none}
  static PolaritySet acsa();
  // {positive, negative, none}
  static PolaritySet tacsa();

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t none_index() const noexcept { return labels_.size() - 1; }
  std::optional<std::size_t> index_of(std::string_view label) const;
  const std::string& name(std::size_t i) const { return labels_.at(i); }

  friend bool operator==(const PolaritySet&, const PolaritySet&) = default;

 private:
  std::vector<std::string> labels_;
};

class CategorySchema {
 public:
  CategorySchema() = default;
  explicit CategorySchema(std::vector<std::string> categories,
                          std::vector<std::string> source = {},
                          std::vector<std::string> target = {});

  // food, service, price, ambience, anecdotes/miscellaneous; target = {service}.
  static CategorySchema acsa_default();
  // location-{1,2} x {general, price, transit-location, safety}; target = price pairs.
  static CategorySchema tacsa_default();

  const std::vector<std::string>& categories() const noexcept { return categories_; }
  const std::vector<std::string>& source() const noexcept { return source_; }
  const std::vector<std::string>& target() const noexcept { return target_; }
  std::size_t size() const noexcept { return categories_.size(); }
  bool has_partition() const noexcept { return !source_.empty() || !target_.empty(); }

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::size_t> source_indices() const;
  std::vector<std::size_t> target_indices() const;

  friend bool operator==(const CategorySchema&, const CategorySchema&) = default;

 private:
  std::vector<std::string> categories_;
  std::vector<std::string> source_;
  std::vector<std::string> target_;
};

// Polarity index per schema category; nullopt means unlabeled (not "none").
using LabelVector = std::vector<std::optional<std::size_t>>;

struct Sample {
  std::string id;
  std::string text;
  LabelVector labels;

  std::size_t labeled_count() const;
  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class SplitTag { kTrain, kValidation, kTest };

std::string_view to_string(SplitTag tag);

struct Dataset {
  CategorySchema schema;
  PolaritySet polarities;
  std::vector<Sample> samples;
  SplitTag split = SplitTag::kTrain;

  std::size_t size() const noexcept { return samples.size(); }
  // Throws DataError naming the first offending sample.
  void validate() const;
};

struct SchemaFile {
  CategorySchema schema;
  PolaritySet polarities;
};

SchemaFile load_schema(const std::filesystem::path& path);
void save_schema(const std::filesystem::path& path, const SchemaFile& schema);
std::string schema_to_json(const SchemaFile& schema);
SchemaFile schema_from_json(std::string_view text);

// One JSON object per line: {"id", "text", "labels": {category: polarity}}.
Dataset load_dataset(const std::filesystem::path& path, const CategorySchema& schema,
                     const PolaritySet& polarities, SplitTag split = SplitTag::kTrain);
Dataset parse_dataset(std::string_view jsonl, const CategorySchema& schema,
                      const PolaritySet& polarities, SplitTag split = SplitTag::kTrain);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
std::string dataset_to_jsonl(const Dataset& dataset);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::uint64_t dataset_fingerprint(const Dataset& dataset);

// Sample-Source / Sample-Target copies: same ids and texts, labels restricted
// to the schema's source or target categories.
std::pair<Dataset, Dataset> split_incremental(const Dataset& dataset, const CategorySchema& schema);

// floor(rate * n) samples chosen uniformly at random, kept in input order.
Dataset sample_target(const Dataset& target, double rate, std::uint64_t seed);

// Concatenation of datasets over one schema (mix-training input).
Dataset concat(const Dataset& a, const Dataset& b);

struct GeneratorSpec {
  CategorySchema schema;
  PolaritySet polarities;
  // category -> polarity -> cue phrases. Categories absent here are always "none".
  std::map<std::string, std::map<std::string, std::vector<std::string>>> cues;
  // polarity -> probability for every cued category; must sum to 1.
  std::map<std::string, double> mixture;
  std::vector<std::string> distractors;
  std::size_t count = 0;
  std::size_t min_distractors = 0;
  std::size_t max_distractors = 0;
  std::string id_prefix = "s";
};

GeneratorSpec generator_from_json(std::string_view text);
std::string generator_to_json(const GeneratorSpec& spec);

Dataset make_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

// Best-effort adapters from the published corpus formats.
Dataset convert_semeval14(std::string_view xml);
Dataset convert_sentihood(std::string_view json);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace cne
