#include "cnenet/model.hpp"

#include <cstring>

#include <json.hpp>

#include "cnenet/error.hpp"

namespace cne {

using nlohmann::json;
using nlohmann::ordered_json;

Model Model::create(const Dataset& corpus, const ModelSpec& spec, std::uint64_t seed) {
  spec.encoder.validate();
  Model m;
  m.encoder_config = spec.encoder;
  m.vocab = Vocabulary::build(corpus);
  m.schema = corpus.schema;
  m.polarities = corpus.polarities;
  m.head = spec.head;
  Rng rng(derive_seed(seed, {0x1417}));
  m.encoder = EncoderParams::init(spec.encoder, m.vocab.size(), m.schema.size(), rng);
  m.decoder = DecoderParams::init(spec.decoder, m.schema.size(), spec.encoder.hidden,
                                  m.polarities.size(), rng);
  m.provenance.seed = seed;
  return m;
}

std::vector<Parameter*> Model::parameters() {
  auto out = encoder.all();
  for (auto* p : decoder.all()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto out = encoder.all();
  for (auto* p : decoder.all()) out.push_back(p);
  return out;
}

EncodedInput Model::encode_text(std::string_view text, bool pad) const {
  const auto ids = tokenize(text, vocab);
  return assemble_input(ids, tokenize_categories(schema, vocab), encoder_config.max_len, pad);
}

EncodedSample Model::encode_sample(const Sample& sample) const {
  EncodedSample e;
  e.id = sample.id;
  e.input = encode_text(sample.text);
  for (std::size_t c = 0; c < sample.labels.size(); ++c) {
    if (sample.labels[c]) e.labels.emplace_back(c, *sample.labels[c]);
  }
  return e;
}

std::vector<EncodedSample> Model::encode_dataset(const Dataset& dataset) const {
  if (dataset.schema.categories() != schema.categories() || !(dataset.polarities == polarities)) {
    throw ConfigError("dataset schema does not match the model");
  }
  const auto cat_ids = tokenize_categories(schema, vocab);
  std::vector<EncodedSample> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    EncodedSample e;
    e.id = s.id;
    e.input = assemble_input(tokenize(s.text, vocab), cat_ids, encoder_config.max_len);
    for (std::size_t c = 0; c < s.labels.size(); ++c) {
      if (s.labels[c]) e.labels.emplace_back(c, *s.labels[c]);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string Model::checkpoint_id() const {
  std::uint64_t h = fnv1a64(to_string(head));
  for (const auto* p : parameters()) {
    h = fnv1a64(p->name, h);
    const auto bytes = p->value.data();
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                 bytes.size() * sizeof(double)),
                h);
  }
  return hex64(h);
}

std::vector<Var> forward(Tape& t, const Model& model, const EncodedInput& input,
                         std::span<const std::size_t> categories, double dropout_rate, Rng* rng) {
  EncoderConfig cfg = model.encoder_config;
  cfg.dropout = dropout_rate;
  StateVars states = encode(t, input, model.encoder, cfg, rng);
  std::vector<Var> out;
  out.reserve(categories.size());
  for (auto c : categories) out.push_back(head_probs(t, model.head, states, model.decoder, c, dropout_rate, rng));
  return out;
}

NdArray predict_one(const Model& model, const EncodedInput& input) {
  Tape t;
  std::vector<std::size_t> all(model.schema.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto probs = forward(t, model, input, all);
  NdArray out({all.size(), model.polarities.size()});
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& p = t.value(probs[i]);
    std::copy(p.data().begin(), p.data().end(), out.row(i).begin());
  }
  return out;
}

// ---- checkpoint container ---------------------------------------------------------

namespace {

ordered_json param_json(const Parameter& p) {
  ordered_json j;
  j["name"] = p.name;
  j["shape"] = p.value.shape();
  j["bias"] = p.is_bias;
  j["data"] = std::vector<double>(p.value.data().begin(), p.value.data().end());
  return j;
}

void read_param(const json& j, Parameter& p) {
  if (j.at("name").get<std::string>() != p.name) {
    throw DataError("checkpoint parameter \"" + j.at("name").get<std::string>() + "\" where \"" +
                    p.name + "\" was expected");
  }
  auto shape = j.at("shape").get<Shape>();
  if (shape != p.value.shape()) {
    throw DataError("checkpoint parameter \"" + p.name + "\" has shape " + shape_to_string(shape) +
                    ", expected " + shape_to_string(p.value.shape()));
  }
  p.value = NdArray(std::move(shape), j.at("data").get<std::vector<double>>());
  p.is_bias = j.at("bias").get<bool>();
}

}  // namespace

std::string checkpoint_to_json(const Model& m) {
  ordered_json j;
  j["format"] = "cnenet-checkpoint";
  j["version"] = kCheckpointVersion;
  j["checkpoint_id"] = m.checkpoint_id();
  j["encoder"] = {{"layers", m.encoder_config.layers},   {"heads", m.encoder_config.heads},
                  {"hidden", m.encoder_config.hidden},   {"ffn", m.encoder_config.ffn},
                  {"max_len", m.encoder_config.max_len}, {"dropout", m.encoder_config.dropout}};
  j["head"] = to_string(m.head);
  j["decoder"] = to_string(m.decoder.mode());
  j["schema"] = ordered_json::parse(schema_to_json({m.schema, m.polarities}));
  j["vocab"] = m.vocab.tokens();
  ordered_json prov;
  prov["config_fingerprint"] = m.provenance.config_fingerprint;
  prov["config"] = ordered_json::parse(m.provenance.config_json);
  prov["seed"] = m.provenance.seed;
  prov["data"] = ordered_json::array();
  for (const auto& [role, fp] : m.provenance.data_fingerprints) {
    prov["data"].push_back({{"role", role}, {"fingerprint", fp}});
  }
  prov["lineage"] = m.provenance.lineage;
  prov["parent_checkpoint"] = m.provenance.parent_checkpoint;
  prov["stage"] = m.provenance.stage;
  j["provenance"] = std::move(prov);
  ordered_json params = ordered_json::array();
  for (const auto* p : m.parameters()) params.push_back(param_json(*p));
  j["parameters"] = std::move(params);
  return j.dump() + "\n";
}

Model checkpoint_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cnenet-checkpoint") {
      throw DataError("checkpoint: unrecognized format tag");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported version " + j.at("version").dump());
    }
    Model m;
    const auto& e = j.at("encoder");
    m.encoder_config.layers = e.at("layers").get<std::size_t>();
    m.encoder_config.heads = e.at("heads").get<std::size_t>();
    m.encoder_config.hidden = e.at("hidden").get<std::size_t>();
    m.encoder_config.ffn = e.at("ffn").get<std::size_t>();
    m.encoder_config.max_len = e.at("max_len").get<std::size_t>();
    m.encoder_config.dropout = e.at("dropout").get<double>();
    m.encoder_config.validate();
    m.head = parse_head_kind(j.at("head").get<std::string>());
    const auto mode = parse_decoder_mode(j.at("decoder").get<std::string>());
    const auto sf = schema_from_json(j.at("schema").dump());
    m.schema = sf.schema;
    m.polarities = sf.polarities;
    m.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());

    // Build a correctly shaped skeleton, then overwrite every array.
    Rng rng(0);
    m.encoder = EncoderParams::init(m.encoder_config, m.vocab.size(), m.schema.size(), rng);
    m.decoder = DecoderParams::init(mode, m.schema.size(), m.encoder_config.hidden,
                                    m.polarities.size(), rng);
    const auto& params = j.at("parameters");
    auto slots = m.parameters();
    if (params.size() != slots.size()) {
      throw DataError("checkpoint: expected " + std::to_string(slots.size()) + " parameters, found " +
                      std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) read_param(params[i], *slots[i]);

    const auto& prov = j.at("provenance");
    m.provenance.config_fingerprint = prov.value("config_fingerprint", "");
    m.provenance.config_json = prov.contains("config") ? prov.at("config").dump() : "{}";
    m.provenance.seed = prov.value("seed", std::uint64_t{0});
    for (const auto& d : prov.value("data", json::array())) {
      m.provenance.data_fingerprints.emplace_back(d.at("role").get<std::string>(),
                                                  d.at("fingerprint").get<std::string>());
    }
    m.provenance.lineage = prov.value("lineage", "fresh");
    m.provenance.parent_checkpoint = prov.value("parent_checkpoint", "");
    m.provenance.stage = prov.value("stage", "");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_text_file(path, checkpoint_to_json(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

}  // namespace cne
