#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "cnenet/encoder.hpp"

namespace cne {

enum class HeadKind { kSep, kClsAtt, kSepSentAtt };
enum class DecoderMode { kShared, kUnshared };

std::string_view to_string(HeadKind kind);
std::string_view to_string(DecoderMode mode);
// Accepts the CLI spellings: sep | cls-att | sep-sent-att, shared | unshared.
HeadKind parse_head_kind(std::string_view text);
DecoderMode parse_decoder_mode(std::string_view text);

// The (W, b) polarity classifier. SHARED holds one pair used by every
// category; UNSHARED holds one pair per category.
class DecoderParams {
 public:
  DecoderParams() = default;
  DecoderParams(DecoderMode mode, std::size_t n_cat, std::vector<Parameter> weights,
                std::vector<Parameter> biases);

  // W ~ U(-1/sqrt(d), 1/sqrt(d)), b = 0.
  static DecoderParams init(DecoderMode mode, std::size_t n_cat, std::size_t hidden,
                            std::size_t classes, Rng& rng);

  DecoderMode mode() const noexcept { return mode_; }
  std::size_t n_cat() const noexcept { return n_cat_; }
  std::size_t pairs() const noexcept { return weights_.size(); }
  std::size_t hidden() const { return weights_.at(0).value.rows(); }
  std::size_t classes() const { return weights_.at(0).value.cols(); }

  // Index of the (W, b) pair serving category i.
  std::size_t pair_for(std::size_t category) const;
  const Parameter& weight(std::size_t pair) const { return weights_.at(pair); }
  const Parameter& bias(std::size_t pair) const { return biases_.at(pair); }
  Parameter& weight(std::size_t pair) { return weights_.at(pair); }
  Parameter& bias(std::size_t pair) { return biases_.at(pair); }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

 private:
  DecoderMode mode_ = DecoderMode::kShared;
  std::size_t n_cat_ = 0;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

// ---- tape-level building blocks ------------------------------------------------

// softmax(h W + b) for one category; h is [1 x d], result is [1 x s].
Var classify(Tape& t, Var h, const DecoderParams& dec, std::size_t category);

// Unscaled dot-product attention without projections:
// softmax(query . rows(kv)) weighted sum of the rows of kv.
Var attend(Tape& t, Var query, Var keys_values);

// Feature vector fed to the classifier for category i.
Var head_feature(Tape& t, HeadKind kind, const StateVars& states, std::size_t category);

// Probabilities [1 x s] for category i; dropout on the feature when rng is set.
Var head_probs(Tape& t, HeadKind kind, const StateVars& states, const DecoderParams& dec,
               std::size_t category, double dropout_rate = 0.0, Rng* rng = nullptr);

// ---- plain-array entry points ----------------------------------------------------

NdArray classify(const NdArray& h, const DecoderParams& dec, std::size_t category);
NdArray attend(const NdArray& query, const NdArray& keys_values);
// Attention weights over the rows of keys_values.
NdArray attention_weights(const NdArray& query, const NdArray& keys_values);

NdArray head_sep(const EncoderStates& states, const DecoderParams& dec);
NdArray head_cls_att(const EncoderStates& states, const DecoderParams& dec);
NdArray head_sep_sent_att(const EncoderStates& states, const DecoderParams& dec);
// [n_cat x s]
NdArray run_head(HeadKind kind, const EncoderStates& states, const DecoderParams& dec);

}  // namespace cne
