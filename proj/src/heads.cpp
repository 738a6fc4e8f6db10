#include "cnenet/heads.hpp"

#include <cmath>

#include "cnenet/error.hpp"

namespace cne {

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kSep: return "sep";
    case HeadKind::kClsAtt: return "cls-att";
    case HeadKind::kSepSentAtt: return "sep-sent-att";
  }
  return "sep";
}

std::string_view to_string(DecoderMode mode) {
  return mode == DecoderMode::kShared ? "shared" : "unshared";
}

HeadKind parse_head_kind(std::string_view text) {
  if (text == "sep") return HeadKind::kSep;
  if (text == "cls-att") return HeadKind::kClsAtt;
  if (text == "sep-sent-att") return HeadKind::kSepSentAtt;
  throw ConfigError("unknown head kind \"" + std::string(text) + "\"");
}

DecoderMode parse_decoder_mode(std::string_view text) {
  if (text == "shared") return DecoderMode::kShared;
  if (text == "unshared") return DecoderMode::kUnshared;
  throw ConfigError("unknown decoder mode \"" + std::string(text) + "\"");
}

// ---- DecoderParams ---------------------------------------------------------------

DecoderParams::DecoderParams(DecoderMode mode, std::size_t n_cat, std::vector<Parameter> weights,
                             std::vector<Parameter> biases)
    : mode_(mode), n_cat_(n_cat), weights_(std::move(weights)), biases_(std::move(biases)) {
  const std::size_t expected = mode == DecoderMode::kShared ? 1 : n_cat;
  if (n_cat == 0 || weights_.size() != expected || biases_.size() != expected) {
    throw ConfigError("decoder needs " + std::to_string(expected) + " (W, b) pairs for mode " +
                      std::string(to_string(mode)));
  }
  for (std::size_t i = 0; i < expected; ++i) {
    const auto& w = weights_[i].value;
    const auto& b = biases_[i].value;
    if (w.rank() != 2 || b.size() != w.cols() || w.shape() != weights_[0].value.shape()) {
      throw DimensionError("decoder pair " + std::to_string(i) + " has shapes " +
                           shape_to_string(w.shape()) + " and " + shape_to_string(b.shape()));
    }
  }
}

DecoderParams DecoderParams::init(DecoderMode mode, std::size_t n_cat, std::size_t hidden,
                                  std::size_t classes, Rng& rng) {
  const std::size_t count = mode == DecoderMode::kShared ? 1 : n_cat;
  const double a = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::vector<Parameter> w, b;
  for (std::size_t i = 0; i < count; ++i) {
    const auto suffix = mode == DecoderMode::kShared ? std::string("shared") : std::to_string(i);
    NdArray wi({hidden, classes});
    for (auto& v : wi.data()) v = rng.uniform(-a, a);
    w.push_back({"decoder.w." + suffix, std::move(wi), false});
    b.push_back({"decoder.b." + suffix, NdArray({classes}, 0.0), true});
  }
  return DecoderParams(mode, n_cat, std::move(w), std::move(b));
}

std::size_t DecoderParams::pair_for(std::size_t category) const {
  if (category >= n_cat_) {
    throw DimensionError("category index " + std::to_string(category) + " outside " +
                         std::to_string(n_cat_) + " categories");
  }
  return mode_ == DecoderMode::kShared ? 0 : category;
}

std::vector<Parameter*> DecoderParams::all() {
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

std::vector<const Parameter*> DecoderParams::all() const {
  std::vector<const Parameter*> out;
  for (auto* p : const_cast<DecoderParams*>(this)->all()) out.push_back(p);
  return out;
}

// ---- tape level -------------------------------------------------------------------

Var classify(Tape& t, Var h, const DecoderParams& dec, std::size_t category) {
  const auto pair = dec.pair_for(category);
  Var logits = add_bias(t, matmul(t, h, t.parameter(dec.weight(pair).value)),
                        t.parameter(dec.bias(pair).value));
  return softmax_rows(t, logits);
}

Var attend(Tape& t, Var query, Var keys_values) {
  if (t.value(keys_values).empty()) throw DimensionError("attend: empty key/value span");
  Var weights = softmax_rows(t, matmul_bt(t, query, keys_values));
  return matmul(t, weights, keys_values);
}

Var head_feature(Tape& t, HeadKind kind, const StateVars& states, std::size_t category) {
  if (category >= states.h_cat.size()) {
    throw DimensionError("category index " + std::to_string(category) + " outside the encoded input");
  }
  switch (kind) {
    case HeadKind::kSep:
      return slice_rows(t, states.h_sep, category, 1);
    case HeadKind::kClsAtt:
      return attend(t, states.h_cls, states.h_cat[category]);
    case HeadKind::kSepSentAtt: {
      if (!states.h_sent.valid()) throw DimensionError("attend: empty sentence span");
      Var sent = attend(t, slice_rows(t, states.h_sep, category, 1), states.h_sent);
      return attend(t, sent, states.h_cat[category]);
    }
  }
  throw ConfigError("unknown head kind");
}

Var head_probs(Tape& t, HeadKind kind, const StateVars& states, const DecoderParams& dec,
               std::size_t category, double dropout_rate, Rng* rng) {
  Var h = head_feature(t, kind, states, category);
  if (rng && dropout_rate > 0.0) h = dropout(t, h, dropout_rate, *rng);
  return classify(t, h, dec, category);
}

// ---- plain arrays ------------------------------------------------------------------

NdArray classify(const NdArray& h, const DecoderParams& dec, std::size_t category) {
  Tape t;
  return t.value(classify(t, t.constant(h), dec, category));
}

NdArray attend(const NdArray& query, const NdArray& keys_values) {
  Tape t;
  return t.value(attend(t, t.constant(query), t.constant(keys_values)));
}

NdArray attention_weights(const NdArray& query, const NdArray& keys_values) {
  Tape t;
  return t.value(softmax_rows(t, matmul_bt(t, t.constant(query), t.constant(keys_values))));
}

namespace {

StateVars bind_states(Tape& t, const EncoderStates& s) {
  StateVars v;
  v.h_cls = t.constant(s.h_cls);
  if (s.h_sent) {
    v.h_sent = t.constant(*s.h_sent);
    v.sent_len = s.h_sent->rows();
  }
  v.h_sep = t.constant(s.h_sep);
  for (const auto& c : s.h_cat) v.h_cat.push_back(t.constant(c));
  return v;
}

}  // namespace

NdArray run_head(HeadKind kind, const EncoderStates& states, const DecoderParams& dec) {
  Tape t;
  StateVars v = bind_states(t, states);
  const std::size_t n_cat = states.h_cat.size();
  const std::size_t s = dec.classes();
  NdArray out({n_cat, s});
  for (std::size_t i = 0; i < n_cat; ++i) {
    const auto& p = t.value(head_probs(t, kind, v, dec, i));
    std::copy(p.data().begin(), p.data().end(), out.row(i).begin());
  }
  return out;
}

NdArray head_sep(const EncoderStates& states, const DecoderParams& dec) {
  return run_head(HeadKind::kSep, states, dec);
}

NdArray head_cls_att(const EncoderStates& states, const DecoderParams& dec) {
  return run_head(HeadKind::kClsAtt, states, dec);
}

NdArray head_sep_sent_att(const EncoderStates& states, const DecoderParams& dec) {
  return run_head(HeadKind::kSepSentAtt, states, dec);
}

}  // namespace cne
