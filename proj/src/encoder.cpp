#include "cnenet/encoder.hpp"

#include <cctype>
#include <cmath>

#include "cnenet/error.hpp"

namespace cne {

// ---- tokenization ------------------------------------------------------------

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      word += static_cast<char>(std::tolower(c));
    } else if ((c == '-' || c == '\'') && !word.empty() && i + 1 < text.size() &&
               is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      word += static_cast<char>(c);
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  static const char* specials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  if (tokens.size() < 4) throw ConfigError("vocabulary is missing special tokens");
  for (std::size_t i = 0; i < 4; ++i) {
    if (tokens[i] != specials[i]) throw ConfigError("vocabulary special tokens out of order");
  }
  for (auto& t : tokens) {
    if (index_.count(t)) throw ConfigError("duplicate vocabulary token \"" + t + "\"");
    index_.emplace(t, tokens_.size());
    tokens_.push_back(std::move(t));
  }
}

void Vocabulary::add(const std::string& token) {
  if (index_.count(token)) return;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const Dataset& corpus) {
  Vocabulary v;
  for (const auto& name : corpus.schema.categories())
    for (auto& w : split_words(name)) v.add(w);
  for (const auto& s : corpus.samples)
    for (auto& w : split_words(s.text)) v.add(w);
  return v;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

std::vector<std::size_t> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return ids;
}

// ---- input assembly ------------------------------------------------------------

std::vector<std::vector<std::size_t>> tokenize_categories(const CategorySchema& schema,
                                                          const Vocabulary& vocab) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& name : schema.categories()) {
    out.push_back(tokenize(name, vocab));
    if (out.back().empty()) throw ConfigError("category \"" + name + "\" has no tokens");
  }
  return out;
}

EncodedInput assemble_input(std::span<const std::size_t> sentence_ids,
                            const std::vector<std::vector<std::size_t>>& category_ids,
                            std::size_t max_len, bool pad) {
  std::size_t fixed = 2;  // [CLS] and the sentence's [SEP]
  for (const auto& c : category_ids) fixed += c.size() + 1;
  if (fixed > max_len) {
    throw ConfigError("category names need " + std::to_string(fixed) +
                      " positions, more than max_len " + std::to_string(max_len));
  }
  const std::size_t sent_len = std::min(sentence_ids.size(), max_len - fixed);

  EncodedInput in;
  in.n_cat = category_ids.size();
  auto push = [&](std::size_t token, std::size_t segment) {
    in.token_ids.push_back(token);
    in.segment_ids.push_back(segment);
    in.attention_mask.push_back(1);
  };
  in.cls_position = 0;
  push(Vocabulary::kCls, 0);
  in.sentence.begin = 1;
  for (std::size_t i = 0; i < sent_len; ++i) push(sentence_ids[i], 0);
  in.sentence.end = in.token_ids.size();
  in.sentence_sep = in.token_ids.size();
  push(Vocabulary::kSep, 0);
  for (std::size_t c = 0; c < category_ids.size(); ++c) {
    Span span;
    span.begin = in.token_ids.size();
    for (auto t : category_ids[c]) push(t, c + 1);
    span.end = in.token_ids.size();
    in.categories.push_back(span);
    in.category_seps.push_back(in.token_ids.size());
    push(Vocabulary::kSep, c + 1);
  }
  if (pad) {
    while (in.token_ids.size() < max_len) {
      in.token_ids.push_back(Vocabulary::kPad);
      in.segment_ids.push_back(0);
      in.attention_mask.push_back(0);
    }
  }
  return in;
}

EncodedInput assemble_input(std::span<const std::size_t> sentence_ids, const CategorySchema& schema,
                            const Vocabulary& vocab, std::size_t max_len, bool pad) {
  return assemble_input(sentence_ids, tokenize_categories(schema, vocab), max_len, pad);
}

// ---- parameters ------------------------------------------------------------------

void EncoderConfig::validate() const {
  if (layers == 0 || heads == 0 || hidden == 0 || ffn == 0 || max_len == 0) {
    throw ConfigError("encoder sizes must be positive");
  }
  if (hidden % heads != 0) throw ConfigError("hidden size must be divisible by the head count");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder dropout must lie in [0, 1)");
}

namespace {

Parameter glorot(std::string name, std::size_t in, std::size_t out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  NdArray w({in, out});
  for (auto& v : w.data()) v = rng.uniform(-a, a);
  return {std::move(name), std::move(w), false};
}

Parameter embedding(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
  NdArray w({rows, cols});
  for (auto& v : w.data()) v = rng.normal();
  return {std::move(name), std::move(w), false};
}

Parameter filled(std::string name, std::size_t n, double value) {
  return {std::move(name), NdArray({n}, value), true};
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& config, std::size_t vocab_size,
                                  std::size_t n_cat, Rng& rng) {
  config.validate();
  const auto d = config.hidden;
  EncoderParams p;
  p.token_embedding = embedding("embed.token", vocab_size, d, rng);
  p.position_embedding = embedding("embed.position", config.max_len, d, rng);
  p.segment_embedding = embedding("embed.segment", n_cat + 1, d, rng);
  p.embed_ln_gain = filled("embed.ln.gain", d, 1.0);
  p.embed_ln_bias = filled("embed.ln.bias", d, 0.0);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const auto pre = "layer" + std::to_string(l) + ".";
    EncoderLayer L{
        glorot(pre + "attn.wq", d, d, rng), filled(pre + "attn.bq", d, 0.0),
        glorot(pre + "attn.wk", d, d, rng),
        glorot(pre + "attn.wv", d, d, rng), filled(pre + "attn.bv", d, 0.0),
        glorot(pre + "attn.wo", d, d, rng), filled(pre + "attn.bo", d, 0.0),
        filled(pre + "ln1.gain", d, 1.0),   filled(pre + "ln1.bias", d, 0.0),
        glorot(pre + "ffn.w1", d, config.ffn, rng), filled(pre + "ffn.b1", config.ffn, 0.0),
        glorot(pre + "ffn.w2", config.ffn, d, rng), filled(pre + "ffn.b2", d, 0.0),
        filled(pre + "ln2.gain", d, 1.0),   filled(pre + "ln2.bias", d, 0.0),
    };
    p.layers.push_back(std::move(L));
  }
  return p;
}

std::vector<Parameter*> EncoderParams::all() {
  std::vector<Parameter*> out{&token_embedding, &position_embedding, &segment_embedding,
                              &embed_ln_gain, &embed_ln_bias};
  for (auto& L : layers) {
    for (auto* p : {&L.wq, &L.bq, &L.wk, &L.wv, &L.bv, &L.wo, &L.bo, &L.ln1_gain,
                    &L.ln1_bias, &L.w1, &L.b1, &L.w2, &L.b2, &L.ln2_gain, &L.ln2_bias}) {
      out.push_back(p);
    }
  }
  return out;
}

std::vector<const Parameter*> EncoderParams::all() const {
  std::vector<const Parameter*> out;
  for (auto* p : const_cast<EncoderParams*>(this)->all()) out.push_back(p);
  return out;
}

// ---- forward ---------------------------------------------------------------------

StateVars encode(Tape& t, const EncodedInput& input, const EncoderParams& params,
                 const EncoderConfig& config, Rng* dropout_rng, EncoderTrace* trace) {
  const std::size_t L = input.length();
  const std::size_t d = config.hidden;
  if (L > params.position_embedding.value.rows()) {
    throw ConfigError("sequence of " + std::to_string(L) + " tokens exceeds the position table (" +
                      std::to_string(params.position_embedding.value.rows()) + ")");
  }
  if (input.n_cat + 1 > params.segment_embedding.value.rows()) {
    throw ConfigError("input has more categories than the segment table");
  }
  const double rate = dropout_rng ? config.dropout : 0.0;
  auto drop = [&](Var v) { return dropout_rng ? dropout(t, v, rate, *dropout_rng) : v; };
  auto P = [&](const Parameter& p) { return t.parameter(p.value); };
  auto record_norm = [&](Var v) {
    if (trace) trace->normalized.push_back(t.value(v));
  };

  std::vector<std::size_t> positions(L);
  for (std::size_t i = 0; i < L; ++i) positions[i] = i;

  Var x = add(t, gather_rows(t, P(params.token_embedding), input.token_ids),
              gather_rows(t, P(params.position_embedding), positions));
  x = add(t, x, gather_rows(t, P(params.segment_embedding), input.segment_ids));
  x = layer_norm(t, x, P(params.embed_ln_gain), P(params.embed_ln_bias));
  record_norm(x);
  x = drop(x);

  const std::size_t heads = config.heads;
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& layer : params.layers) {
    Var q = add_bias(t, matmul(t, x, P(layer.wq)), P(layer.bq));
    Var k = matmul(t, x, P(layer.wk));
    Var v = add_bias(t, matmul(t, x, P(layer.wv)), P(layer.bv));
    std::vector<Var> per_head;
    per_head.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      Var qh = slice_cols(t, q, h * dh, dh);
      Var kh = slice_cols(t, k, h * dh, dh);
      Var vh = slice_cols(t, v, h * dh, dh);
      Var weights = softmax_rows(t, scale(t, matmul_bt(t, qh, kh), inv_sqrt), input.attention_mask);
      if (trace) trace->attention.push_back(t.value(weights));
      weights = drop(weights);
      per_head.push_back(matmul(t, weights, vh));
    }
    Var attn = heads == 1 ? per_head[0] : concat_cols(t, per_head);
    attn = drop(add_bias(t, matmul(t, attn, P(layer.wo)), P(layer.bo)));
    x = layer_norm(t, add(t, x, attn), P(layer.ln1_gain), P(layer.ln1_bias));
    record_norm(x);

    Var ff = gelu(t, add_bias(t, matmul(t, x, P(layer.w1)), P(layer.b1)));
    ff = drop(add_bias(t, matmul(t, ff, P(layer.w2)), P(layer.b2)));
    x = layer_norm(t, add(t, x, ff), P(layer.ln2_gain), P(layer.ln2_bias));
    record_norm(x);
  }

  StateVars s;
  s.h_cls = slice_rows(t, x, input.cls_position, 1);
  s.sent_len = input.sentence.size();
  if (!input.sentence.empty()) s.h_sent = slice_rows(t, x, input.sentence.begin, input.sentence.size());
  s.h_sep = gather_rows(t, x, input.category_seps);
  for (const auto& span : input.categories) s.h_cat.push_back(slice_rows(t, x, span.begin, span.size()));
  return s;
}

EncoderStates materialize(const Tape& t, const StateVars& vars) {
  EncoderStates out;
  out.h_cls = t.value(vars.h_cls);
  if (vars.h_sent.valid()) out.h_sent = t.value(vars.h_sent);
  out.h_sep = t.value(vars.h_sep);
  for (auto v : vars.h_cat) out.h_cat.push_back(t.value(v));
  return out;
}

EncoderStates encode(const EncodedInput& input, const EncoderParams& params,
                     const EncoderConfig& config, EncoderTrace* trace) {
  Tape t;
  return materialize(t, encode(t, input, params, config, nullptr, trace));
}

}  // namespace cne
