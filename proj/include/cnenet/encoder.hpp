#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cnenet/data.hpp"
#include "cnenet/ndarray.hpp"
#include "cnenet/rng.hpp"
#include "cnenet/tape.hpp"

namespace cne {

// A trainable array. Vector parameters (biases, layer-norm gains and
// offsets) carry is_bias and are excluded from L2.
struct Parameter {
  std::string name;
  NdArray value;
  bool is_bias = false;
};

// ---- tokenization ------------------------------------------------------------

// Lowercases, splits on whitespace, and splits punctuation into separate
// tokens. Hyphens and apostrophes between word characters stay in the word,
// so "location-1" and "it's" are single tokens.
std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kSep = 3;

  Vocabulary();
  // Tokens listed in id order; the four special tokens must come first.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Special tokens, then category-name tokens, then corpus tokens in order of
  // first appearance.
  static Vocabulary build(const Dataset& corpus);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  void add(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<std::size_t> tokenize(std::string_view text, const Vocabulary& vocab);

// ---- input assembly ------------------------------------------------------------

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin == end; }
};

// [CLS] sentence [SEP] cat1 [SEP] ... catN [SEP] [PAD]...
struct EncodedInput {
  std::vector<std::size_t> token_ids;
  // 0 for [CLS], the sentence and its [SEP]; i for category i and its trailing [SEP].
  std::vector<std::size_t> segment_ids;
  std::vector<std::uint8_t> attention_mask;
  std::size_t cls_position = 0;
  Span sentence;
  std::size_t sentence_sep = 0;
  std::vector<Span> categories;
  // [SEP-i]: separator immediately after category i.
  std::vector<std::size_t> category_seps;
  std::size_t n_cat = 0;

  std::size_t length() const noexcept { return token_ids.size(); }
  std::size_t unpadded_length() const noexcept { return category_seps.back() + 1; }
};

std::vector<std::vector<std::size_t>> tokenize_categories(const CategorySchema& schema,
                                                          const Vocabulary& vocab);

// Right-truncates the sentence so everything fits in max_len. With pad=true
// the sequence is filled with [PAD] up to max_len.
EncodedInput assemble_input(std::span<const std::size_t> sentence_ids,
                            const std::vector<std::vector<std::size_t>>& category_ids,
                            std::size_t max_len, bool pad = false);
EncodedInput assemble_input(std::span<const std::size_t> sentence_ids, const CategorySchema& schema,
                            const Vocabulary& vocab, std::size_t max_len, bool pad = false);

// ---- encoder -----------------------------------------------------------------

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t hidden = 64;
  std::size_t ffn = 256;
  std::size_t max_len = 128;
  double dropout = 0.1;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct EncoderLayer {
  // No key bias: it shifts a whole score row and cancels in the softmax.
  Parameter wq, bq, wk, wv, bv, wo, bo;
  Parameter ln1_gain, ln1_bias;
  Parameter w1, b1, w2, b2;
  Parameter ln2_gain, ln2_bias;
};

struct EncoderParams {
  Parameter token_embedding;
  Parameter position_embedding;
  Parameter segment_embedding;
  Parameter embed_ln_gain, embed_ln_bias;
  std::vector<EncoderLayer> layers;

  static EncoderParams init(const EncoderConfig& config, std::size_t vocab_size, std::size_t n_cat,
                            Rng& rng);
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
};

// Tape handles for the four state groups the decoder heads consume.
struct StateVars {
  Var h_cls;           // [1 x d]
  Var h_sent;          // [L_sent x d]; invalid when the sentence is empty
  Var h_sep;           // [n_cat x d]
  std::vector<Var> h_cat;  // [L_cat-i x d]
  std::size_t sent_len = 0;
};

struct EncoderStates {
  NdArray h_cls;
  std::optional<NdArray> h_sent;
  NdArray h_sep;
  std::vector<NdArray> h_cat;
};

// Captures intermediate values for inspection in tests.
struct EncoderTrace {
  std::vector<NdArray> attention;   // one [L x L] matrix per layer and head
  std::vector<NdArray> normalized;  // layer-norm outputs, embeddings then each sublayer
};

// Dropout is applied only when rng is non-null.
StateVars encode(Tape& tape, const EncodedInput& input, const EncoderParams& params,
                 const EncoderConfig& config, Rng* dropout_rng, EncoderTrace* trace = nullptr);

EncoderStates encode(const EncodedInput& input, const EncoderParams& params,
                     const EncoderConfig& config, EncoderTrace* trace = nullptr);

EncoderStates materialize(const Tape& tape, const StateVars& vars);

}  // namespace cne
