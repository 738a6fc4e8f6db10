#include "cnenet/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "cnenet/error.hpp"
#include "cnenet/rng.hpp"

namespace cne {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

// ---- PolaritySet / CategorySchema ----------------------------------------

PolaritySet::PolaritySet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty() || labels_.back() != "none") {
    throw ConfigError("polarity set must end with \"none\"");
  }
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty() || !seen.insert(l).second) {
      throw ConfigError("polarity labels must be unique and non-empty");
    }
  }
}

PolaritySet PolaritySet::acsa() {
  return PolaritySet({"positive", "neutral", "negative", "conflict", "none"});
}

PolaritySet PolaritySet::tacsa() { return PolaritySet({"positive", "negative", "none"}); }

std::optional<std::size_t> PolaritySet::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return i;
  return std::nullopt;
}

CategorySchema::CategorySchema(std::vector<std::string> categories, std::vector<std::string> source,
                               std::vector<std::string> target)
    : categories_(std::move(categories)), source_(std::move(source)), target_(std::move(target)) {
  if (categories_.empty()) throw ConfigError("schema needs at least one category");
  std::set<std::string> all;
  for (const auto& c : categories_) {
    if (c.empty() || !all.insert(c).second) {
      throw ConfigError("category names must be unique and non-empty (\"" + c + "\")");
    }
  }
  if (!has_partition()) return;
  std::set<std::string> seen;
  for (const auto* group : {&source_, &target_}) {
    for (const auto& c : *group) {
      if (!all.count(c)) throw ConfigError("partition names unknown category \"" + c + "\"");
      if (!seen.insert(c).second) {
        throw ConfigError("category \"" + c + "\" is in both source and target");
      }
    }
  }
  if (seen.size() != all.size()) {
    throw ConfigError("source and target categories must cover the schema");
  }
}

CategorySchema CategorySchema::acsa_default() {
  return CategorySchema({"food", "service", "price", "ambience", "anecdotes/miscellaneous"},
                        {"food", "price", "ambience", "anecdotes/miscellaneous"}, {"service"});
}

CategorySchema CategorySchema::tacsa_default() {
  std::vector<std::string> all, source, target;
  for (const char* loc : {"location-1", "location-2"}) {
    for (const char* aspect : {"general", "price", "transit-location", "safety"}) {
      std::string name = std::string(loc) + " " + aspect;
      all.push_back(name);
      (std::string_view(aspect) == "price" ? target : source).push_back(name);
    }
  }
  return CategorySchema(all, source, target);
}

std::optional<std::size_t> CategorySchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < categories_.size(); ++i)
    if (categories_[i] == name) return i;
  return std::nullopt;
}

std::vector<std::size_t> CategorySchema::source_indices() const {
  std::vector<std::size_t> out;
  for (const auto& c : source_) out.push_back(*index_of(c));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> CategorySchema::target_indices() const {
  std::vector<std::size_t> out;
  for (const auto& c : target_) out.push_back(*index_of(c));
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t Sample::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); }));
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kValidation: return "validation";
    case SplitTag::kTest: return "test";
  }
  return "train";
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.id).second) throw DataError("duplicate sample id \"" + s.id + "\"");
    if (s.labels.size() != schema.size()) {
      throw DataError("sample \"" + s.id + "\" label vector does not match the schema");
    }
    for (const auto& l : s.labels) {
      if (l && *l >= polarities.size()) {
        throw DataError("sample \"" + s.id + "\" has an out-of-range polarity");
      }
    }
  }
}

// ---- schema files ----------------------------------------------------------

std::string schema_to_json(const SchemaFile& schema) {
  ordered_json j;
  j["categories"] = schema.schema.categories();
  j["source_categories"] = schema.schema.source();
  j["target_categories"] = schema.schema.target();
  j["polarities"] = schema.polarities.labels();
  return j.dump(2) + "\n";
}

SchemaFile schema_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
    auto names = [&](const char* key) {
      return j.contains(key) ? j.at(key).get<std::vector<std::string>>()
                             : std::vector<std::string>{};
    };
    return SchemaFile{
        CategorySchema(j.at("categories").get<std::vector<std::string>>(),
                       names("source_categories"), names("target_categories")),
        PolaritySet(j.at("polarities").get<std::vector<std::string>>())};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema file: ") + e.what());
  }
}

SchemaFile load_schema(const std::filesystem::path& path) {
  return schema_from_json(read_text_file(path));
}

void save_schema(const std::filesystem::path& path, const SchemaFile& schema) {
  write_text_file(path, schema_to_json(schema));
}

// ---- dataset files ---------------------------------------------------------

Dataset parse_dataset(std::string_view jsonl, const CategorySchema& schema,
                      const PolaritySet& polarities, SplitTag split) {
  Dataset d{schema, polarities, {}, split};
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    const std::string line = trim(jsonl.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    Sample s;
    try {
      s.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      s.text = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(s.id).second) throw DataError("duplicate sample id \"" + s.id + "\"");
    s.labels.assign(schema.size(), std::nullopt);
    if (j.contains("labels")) {
      if (!j.at("labels").is_object()) {
        throw DataError("sample \"" + s.id + "\": labels must be an object");
      }
      for (const auto& [cat, pol] : j.at("labels").items()) {
        auto ci = schema.index_of(cat);
        if (!ci) throw DataError("sample \"" + s.id + "\": unknown category \"" + cat + "\"");
        if (!pol.is_string()) {
          throw DataError("sample \"" + s.id + "\": polarity for \"" + cat + "\" is not a string");
        }
        auto pi = polarities.index_of(lower(pol.get<std::string>()));
        if (!pi) {
          throw DataError("sample \"" + s.id + "\": unknown polarity \"" + pol.get<std::string>() +
                          "\"");
        }
        s.labels[*ci] = *pi;
      }
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const CategorySchema& schema,
                     const PolaritySet& polarities, SplitTag split) {
  return parse_dataset(read_text_file(path), schema, polarities, split);
}

std::string dataset_to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& s : dataset.samples) {
    ordered_json j;
    j["id"] = s.id;
    j["text"] = s.text;
    ordered_json labels = ordered_json::object();
    for (std::size_t c = 0; c < s.labels.size(); ++c) {
      if (s.labels[c]) labels[dataset.schema.categories()[c]] = dataset.polarities.name(*s.labels[c]);
    }
    j["labels"] = std::move(labels);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_text_file(path, dataset_to_jsonl(dataset));
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

std::uint64_t dataset_fingerprint(const Dataset& dataset) {
  auto h = fnv1a64(schema_to_json({dataset.schema, dataset.polarities}));
  return fnv1a64(dataset_to_jsonl(dataset), h);
}

// ---- incremental split -----------------------------------------------------

std::pair<Dataset, Dataset> split_incremental(const Dataset& dataset, const CategorySchema& schema) {
  if (schema.source().empty() || schema.target().empty()) {
    throw ConfigError("incremental split needs non-empty source and target category sets");
  }
  if (schema.categories() != dataset.schema.categories()) {
    throw ConfigError("split schema does not match the dataset's categories");
  }
  std::vector<bool> is_target(schema.size(), false);
  for (auto i : schema.target_indices()) is_target[i] = true;

  Dataset source{schema, dataset.polarities, {}, dataset.split};
  Dataset target{schema, dataset.polarities, {}, dataset.split};
  source.samples.reserve(dataset.size());
  target.samples.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    if (s.labeled_count() != schema.size()) {
      throw DataError("sample \"" + s.id + "\" is not labeled for every category");
    }
    Sample src{s.id, s.text, LabelVector(schema.size())};
    Sample tgt{s.id, s.text, LabelVector(schema.size())};
    for (std::size_t c = 0; c < schema.size(); ++c) (is_target[c] ? tgt : src).labels[c] = s.labels[c];
    source.samples.push_back(std::move(src));
    target.samples.push_back(std::move(tgt));
  }
  return {std::move(source), std::move(target)};
}

Dataset sample_target(const Dataset& target, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ConfigError("sampling rate must lie in [0, 1], got " + std::to_string(rate));
  }
  const std::size_t n = target.size();
  // The epsilon keeps decimal rates such as 0.37 * 100 from flooring to 36.
  const auto k = std::min(n, static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9)));
  Dataset out{target.schema, target.polarities, {}, target.split};
  if (k == n) {
    out.samples = target.samples;
    return out;
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, {0x5a3e1e}));
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  out.samples.reserve(k);
  for (auto i : idx) out.samples.push_back(target.samples[i]);
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.schema.categories() != b.schema.categories() || !(a.polarities == b.polarities)) {
    throw ConfigError("cannot concatenate datasets with different schemas");
  }
  Dataset out = a;
  out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
  return out;
}

// ---- synthetic corpus --------------------------------------------------------

GeneratorSpec generator_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    GeneratorSpec g;
    const auto sf = schema_from_json(j.at("schema").dump());
    g.schema = sf.schema;
    g.polarities = sf.polarities;
    g.cues = j.at("cues").get<decltype(g.cues)>();
    g.mixture = j.at("mixture").get<decltype(g.mixture)>();
    g.distractors = j.value("distractors", std::vector<std::string>{});
    g.count = j.at("count").get<std::size_t>();
    g.min_distractors = j.value("min_distractors", std::size_t{0});
    g.max_distractors = j.value("max_distractors", g.min_distractors);
    g.id_prefix = j.value("id_prefix", std::string("s"));
    return g;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
}

std::string generator_to_json(const GeneratorSpec& spec) {
  ordered_json j;
  j["schema"] = ordered_json::parse(schema_to_json({spec.schema, spec.polarities}));
  j["cues"] = spec.cues;
  j["mixture"] = spec.mixture;
  j["distractors"] = spec.distractors;
  j["count"] = spec.count;
  j["min_distractors"] = spec.min_distractors;
  j["max_distractors"] = spec.max_distractors;
  j["id_prefix"] = spec.id_prefix;
  return j.dump(2);
}

Dataset make_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  const auto& pols = spec.polarities;
  std::vector<double> mix(pols.size(), 0.0);
  double total = 0.0;
  for (const auto& [name, p] : spec.mixture) {
    auto i = pols.index_of(name);
    if (!i) throw ConfigError("mixture names unknown polarity \"" + name + "\"");
    if (p < 0.0) throw ConfigError("mixture probabilities must be non-negative");
    mix[*i] = p;
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("polarity mixture must sum to 1");
  if (spec.max_distractors < spec.min_distractors) {
    throw ConfigError("max_distractors is below min_distractors");
  }
  if (spec.max_distractors > 0 && spec.distractors.empty()) {
    throw ConfigError("distractor count requested without distractor tokens");
  }

  // cue table aligned with the schema: [category][polarity] -> phrases
  const std::size_t n_cat = spec.schema.size();
  std::vector<std::vector<std::vector<std::string>>> cues(n_cat,
                                                          std::vector<std::vector<std::string>>(pols.size()));
  std::vector<bool> cued(n_cat, false);
  for (const auto& [cat, by_pol] : spec.cues) {
    auto ci = spec.schema.index_of(cat);
    if (!ci) throw ConfigError("cue table names unknown category \"" + cat + "\"");
    cued[*ci] = true;
    for (const auto& [pol, phrases] : by_pol) {
      auto pi = pols.index_of(pol);
      if (!pi) throw ConfigError("cue table names unknown polarity \"" + pol + "\"");
      cues[*ci][*pi] = phrases;
    }
  }
  for (std::size_t c = 0; c < n_cat; ++c) {
    if (!cued[c]) continue;
    for (std::size_t p = 0; p < pols.size(); ++p) {
      if (p != pols.none_index() && mix[p] > 0.0 && cues[c][p].empty()) {
        throw ConfigError("no cue phrase for (" + spec.schema.categories()[c] + ", " + pols.name(p) +
                          ")");
      }
    }
  }

  Rng rng(derive_seed(seed, {0x5e7e7a}));
  Dataset d{spec.schema, pols, {}, SplitTag::kTrain};
  d.samples.reserve(spec.count);
  for (std::size_t n = 0; n < spec.count; ++n) {
    Sample s;
    s.id = spec.id_prefix + std::to_string(n);
    s.labels.assign(n_cat, pols.none_index());
    std::vector<std::string> parts;
    for (std::size_t c = 0; c < n_cat; ++c) {
      if (!cued[c]) continue;
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t pick = pols.none_index();
      for (std::size_t p = 0; p < pols.size(); ++p) {
        acc += mix[p];
        if (mix[p] > 0.0 && u < acc) {
          pick = p;
          break;
        }
      }
      s.labels[c] = pick;
      if (pick != pols.none_index()) {
        const auto& options = cues[c][pick];
        parts.push_back(options[rng.below(options.size())]);
      }
    }
    rng.shuffle(parts.begin(), parts.end());
    std::size_t extra = spec.min_distractors;
    if (spec.max_distractors > spec.min_distractors) {
      extra += rng.below(spec.max_distractors - spec.min_distractors + 1);
    }
    // keep every sentence non-empty when filler tokens exist
    if (parts.empty() && extra == 0 && !spec.distractors.empty()) extra = 1;
    for (std::size_t k = 0; k < extra; ++k) {
      const auto& tok = spec.distractors[rng.below(spec.distractors.size())];
      parts.insert(parts.begin() + static_cast<std::ptrdiff_t>(rng.below(parts.size() + 1)), tok);
    }
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (k) s.text += ' ';
      s.text += parts[k];
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

// ---- converters --------------------------------------------------------------

Dataset convert_semeval14(std::string_view xml) {
  const auto schema = CategorySchema::acsa_default();
  const auto pols = PolaritySet::acsa();
  Dataset d{schema, pols, {}, SplitTag::kTrain};
  if (trim(xml).empty()) return d;

  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw DataError("semeval14 XML line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto root = tree.get_child_optional("sentences");
  if (!root) throw DataError("semeval14 XML: missing <sentences> root");
  std::set<std::string> ids;
  std::size_t ordinal = 0;
  for (const auto& [tag, node] : *root) {
    if (tag != "sentence") continue;
    ++ordinal;
    const auto where = "sentence #" + std::to_string(ordinal);
    Sample s;
    s.id = node.get<std::string>("<xmlattr>.id", "");
    if (s.id.empty()) throw DataError("semeval14 XML " + where + ": missing id attribute");
    if (!ids.insert(s.id).second) throw DataError("semeval14 XML: duplicate id \"" + s.id + "\"");
    auto text = node.get_optional<std::string>("text");
    if (!text) throw DataError("semeval14 XML sentence \"" + s.id + "\": missing <text>");
    s.text = trim(*text);
    s.labels.assign(schema.size(), pols.none_index());
    if (auto cats = node.get_child_optional("aspectCategories")) {
      for (const auto& [ctag, cnode] : *cats) {
        if (ctag != "aspectCategory") continue;
        const auto cat = cnode.get<std::string>("<xmlattr>.category", "");
        const auto pol = lower(cnode.get<std::string>("<xmlattr>.polarity", ""));
        auto ci = schema.index_of(cat);
        auto pi = pols.index_of(pol);
        if (!ci) throw DataError("semeval14 XML sentence \"" + s.id + "\": unknown category \"" + cat + "\"");
        if (!pi || *pi == pols.none_index()) {
          throw DataError("semeval14 XML sentence \"" + s.id + "\": unknown polarity \"" + pol + "\"");
        }
        s.labels[*ci] = *pi;
      }
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

Dataset convert_sentihood(std::string_view text) {
  const auto schema = CategorySchema::tacsa_default();
  const auto pols = PolaritySet::tacsa();
  Dataset d{schema, pols, {}, SplitTag::kTrain};
  if (trim(text).empty()) return d;

  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("sentihood JSON: ") + e.what());
  }
  if (!j.is_array()) throw DataError("sentihood JSON: expected a top-level array");

  auto entity_name = [](std::string_view e) -> std::optional<std::string> {
    const auto l = lower(e);
    if (l == "location1") return "location-1";
    if (l == "location2") return "location-2";
    return std::nullopt;
  };

  std::set<std::string> ids;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto& rec = j[r];
    const auto where = "sentihood record #" + std::to_string(r);
    try {
      Sample s;
      s.id = rec.at("id").is_string() ? rec.at("id").get<std::string>() : rec.at("id").dump();
      if (!ids.insert(s.id).second) throw DataError("sentihood JSON: duplicate id \"" + s.id + "\"");
      s.text = trim(rec.at("text").get<std::string>());
      for (const auto& [from, to] : {std::pair{"LOCATION1", "location-1"}, std::pair{"LOCATION2", "location-2"}}) {
        for (auto p = s.text.find(from); p != std::string::npos; p = s.text.find(from, p)) {
          s.text.replace(p, std::string_view(from).size(), to);
        }
      }
      s.labels.assign(schema.size(), pols.none_index());
      for (const auto& op : rec.value("opinions", json::array())) {
        auto entity = entity_name(op.at("target_entity").get<std::string>());
        if (!entity) throw DataError(where + ": unknown target entity");
        // Aspects outside the four evaluated ones are dropped.
        auto ci = schema.index_of(*entity + " " + lower(op.at("aspect").get<std::string>()));
        if (!ci) continue;
        auto pi = pols.index_of(lower(op.at("sentiment").get<std::string>()));
        if (!pi || *pi == pols.none_index()) throw DataError(where + ": unknown sentiment");
        s.labels[*ci] = *pi;
      }
      d.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return d;
}

// ---- file helpers ------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace cne
