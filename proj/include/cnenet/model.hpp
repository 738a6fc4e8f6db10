#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cnenet/data.hpp"
#include "cnenet/encoder.hpp"
#include "cnenet/heads.hpp"

namespace cne {

inline constexpr int kCheckpointVersion = 1;

struct Provenance {
  std::string config_json = "{}";
  std::string config_fingerprint;
  std::uint64_t seed = 0;
  // (role, fingerprint) of every dataset the parameters were fit to
  std::vector<std::pair<std::string, std::string>> data_fingerprints;
  // "fresh" or "finetuned"
  std::string lineage = "fresh";
  std::string parent_checkpoint;
  std::string stage;
};

// A sample ready for the encoder: token layout plus the labeled
// (category, polarity) pairs.
struct EncodedSample {
  std::string id;
  EncodedInput input;
  std::vector<std::pair<std::size_t, std::size_t>> labels;
};

struct ModelSpec {
  EncoderConfig encoder;
  HeadKind head = HeadKind::kSepSentAtt;
  DecoderMode decoder = DecoderMode::kShared;
};

struct Model {
  EncoderConfig encoder_config;
  Vocabulary vocab;
  CategorySchema schema;
  PolaritySet polarities;
  HeadKind head = HeadKind::kSepSentAtt;
  EncoderParams encoder;
  DecoderParams decoder;
  Provenance provenance;

  // Fresh randomly initialized model; the vocabulary comes from the corpus.
  static Model create(const Dataset& corpus, const ModelSpec& spec, std::uint64_t seed);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  EncodedInput encode_text(std::string_view text, bool pad = false) const;
  EncodedSample encode_sample(const Sample& sample) const;
  std::vector<EncodedSample> encode_dataset(const Dataset& dataset) const;

  // Fingerprint of the parameter values; identifies a checkpoint.
  std::string checkpoint_id() const;
};

// Probabilities [1 x s] for the requested categories, in order. Dropout is
// applied (to encoder and head features) only when rng is set.
std::vector<Var> forward(Tape& t, const Model& model, const EncodedInput& input,
                         std::span<const std::size_t> categories, double dropout_rate = 0.0,
                         Rng* rng = nullptr);

// [n_cat x s] probabilities in inference mode.
NdArray predict_one(const Model& model, const EncodedInput& input);

// JSON container: format tag, version, configs, vocabulary, schema, head,
// decoder mode, provenance and every parameter with its shape.
std::string checkpoint_to_json(const Model& model);
Model checkpoint_from_json(std::string_view text);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace cne
