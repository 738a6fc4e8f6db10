#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cnenet/encoder.hpp"
#include "cnenet/error.hpp"
#include "cnenet/heads.hpp"

using namespace cne;

namespace {

Dataset corpus() {
  Dataset d{CategorySchema::acsa_default(), PolaritySet::acsa(), {}, SplitTag::kTrain};
  d.samples.push_back({"a", "Food is fresh, but the service? Slow.", LabelVector(5)});
  d.samples.push_back({"b", "It's too expensive", LabelVector(5)});
  return d;
}

EncoderConfig small_config() {
  EncoderConfig c;
  c.layers = 2;
  c.heads = 2;
  c.hidden = 16;
  c.ffn = 32;
  c.max_len = 48;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST_CASE("split_words lowercases and separates punctuation") {
  CHECK(split_words("") == std::vector<std::string>{});
  CHECK(split_words("Food is  fresh") == std::vector<std::string>{"food", "is", "fresh"});
  CHECK(split_words("fresh, hot-ready. It's") ==
        std::vector<std::string>{"fresh", ",", "hot-ready", ".", "it's"});
  CHECK(split_words("location-1 general") == std::vector<std::string>{"location-1", "general"});
  CHECK(split_words("anecdotes/miscellaneous") == std::vector<std::string>{"anecdotes", "/", "miscellaneous"});
  CHECK(split_words("-x- 'y'") == std::vector<std::string>{"-", "x", "-", "'", "y", "'"});
}

TEST_CASE("vocabulary layout and tokenize") {
  const auto v = Vocabulary::build(corpus());
  CHECK(v.token(Vocabulary::kPad) == "[PAD]");
  CHECK(v.token(Vocabulary::kUnk) == "[UNK]");
  CHECK(v.token(Vocabulary::kCls) == "[CLS]");
  CHECK(v.token(Vocabulary::kSep) == "[SEP]");
  CHECK(v.token(4) == "food");  // category tokens come first
  std::set<std::string> seen(v.tokens().begin(), v.tokens().end());
  CHECK(seen.size() == v.size());

  CHECK(tokenize("", v).empty());
  const auto ids = tokenize("Food is fresh", v);
  CHECK(ids.size() == 3);
  CHECK(std::find(ids.begin(), ids.end(), Vocabulary::kUnk) == ids.end());
  const auto unk = tokenize("zqxv food", v);
  CHECK(unk == std::vector<std::size_t>{Vocabulary::kUnk, v.id("food")});
}

TEST_CASE("assemble_input layout for ACSA") {
  const auto d = corpus();
  const auto v = Vocabulary::build(d);
  const auto ids = tokenize(d.samples[0].text, v);
  const auto in = assemble_input(ids, d.schema, v, 64);
  CHECK(std::count(in.token_ids.begin(), in.token_ids.end(), Vocabulary::kSep) == 6);
  CHECK(in.token_ids[0] == Vocabulary::kCls);
  CHECK(in.sentence.begin == 1);
  CHECK(in.sentence.size() == ids.size());
  CHECK(in.token_ids[in.sentence_sep] == Vocabulary::kSep);
  CHECK(in.categories.size() == 5);
  CHECK(in.categories[4].size() == 3);  // anecdotes / miscellaneous
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(in.category_seps[i] == in.categories[i].end);
    for (auto p = in.categories[i].begin; p <= in.category_seps[i]; ++p) CHECK(in.segment_ids[p] == i + 1);
  }
  for (std::size_t p = 0; p <= in.sentence_sep; ++p) CHECK(in.segment_ids[p] == 0);
  CHECK(in.unpadded_length() == in.length());
  const auto padded = assemble_input(ids, d.schema, v, 64, true);
  CHECK(padded.length() == 64);
  CHECK(padded.attention_mask[in.length()] == 0);
  CHECK(padded.attention_mask[in.length() - 1] == 1);
}

TEST_CASE("assemble_input layout for TACSA") {
  Dataset d{CategorySchema::tacsa_default(), PolaritySet::tacsa(), {}, SplitTag::kTrain};
  d.samples.push_back({"s", "location-1 is cheap", LabelVector(8)});
  const auto v = Vocabulary::build(d);
  const auto in = assemble_input(tokenize(d.samples[0].text, v), d.schema, v, 64);
  CHECK(std::count(in.token_ids.begin(), in.token_ids.end(), Vocabulary::kSep) == 9);
  for (const auto& s : in.categories) CHECK(s.size() == 2);
}

TEST_CASE("assemble_input truncates long sentences and rejects oversized categories") {
  const auto d = corpus();
  const auto v = Vocabulary::build(d);
  std::vector<std::size_t> ids(500, v.id("food"));
  const auto in = assemble_input(ids, d.schema, v, 128);
  CHECK(in.length() == 128);
  CHECK(in.categories.size() == 5);
  CHECK_THROWS_AS(assemble_input(ids, d.schema, v, 12), ConfigError);
}

TEST_CASE("encoder config validation") {
  auto c = small_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.layers = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("encode is deterministic and respects the position table") {
  const auto d = corpus();
  const auto v = Vocabulary::build(d);
  const auto cfg = small_config();
  Rng rng(1);
  const auto params = EncoderParams::init(cfg, v.size(), 5, rng);
  const auto in = assemble_input(tokenize(d.samples[0].text, v), d.schema, v, cfg.max_len);
  const auto a = encode(in, params, cfg);
  const auto b = encode(in, params, cfg);
  CHECK(a.h_cls == b.h_cls);
  CHECK(a.h_sep == b.h_sep);
  CHECK(a.h_sep.rows() == 5);
  CHECK(a.h_cat[4].rows() == 3);
  CHECK(a.h_sent->rows() == in.sentence.size());

  const auto long_in = assemble_input(tokenize(d.samples[0].text, v), d.schema, v, 200);
  if (long_in.length() > cfg.max_len) CHECK_THROWS_AS(encode(long_in, params, cfg), ConfigError);
  std::vector<std::size_t> many(100, v.id("food"));
  CHECK_THROWS_AS(encode(assemble_input(many, d.schema, v, 120), params, cfg), ConfigError);
}

TEST_CASE("padding does not change states of real positions") {
  const auto d = corpus();
  const auto v = Vocabulary::build(d);
  const auto cfg = small_config();
  Rng rng(2);
  const auto params = EncoderParams::init(cfg, v.size(), 5, rng);
  const auto ids = tokenize(d.samples[0].text, v);
  EncoderTrace trace;
  const auto a = encode(assemble_input(ids, d.schema, v, cfg.max_len), params, cfg);
  const auto padded_in = assemble_input(ids, d.schema, v, cfg.max_len, true);
  const auto b = encode(padded_in, params, cfg, &trace);
  auto close = [](const NdArray& x, const NdArray& y) {
    REQUIRE(x.shape() == y.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) < 1e-8);
  };
  close(a.h_cls, b.h_cls);
  close(a.h_sep, b.h_sep);
  close(*a.h_sent, *b.h_sent);
  for (std::size_t i = 0; i < 5; ++i) close(a.h_cat[i], b.h_cat[i]);

  // Attention rows: zero weight on pad columns, unit mass on real columns.
  for (const auto& att : trace.attention) {
    for (std::size_t r = 0; r < att.rows(); ++r) {
      double pad = 0, real = 0;
      for (std::size_t c = 0; c < att.cols(); ++c) (padded_in.attention_mask[c] ? real : pad) += att.at(r, c);
      CHECK(pad < 1e-8);
      CHECK(std::abs(real - 1.0) < 1e-6);
    }
  }
  // Layer-norm outputs with unit gain and zero offset at initialization.
  for (const auto& n : trace.normalized) {
    for (std::size_t r = 0; r < n.rows(); ++r) {
      double mean = 0, var = 0;
      for (double e : n.row(r)) mean += e / static_cast<double>(n.cols());
      for (double e : n.row(r)) var += (e - mean) * (e - mean) / static_cast<double>(n.cols());
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-4);
    }
  }
}

TEST_CASE("grad_check through encode and the SEP head") {
  const auto d = corpus();
  const auto v = Vocabulary::build(d);
  const auto cfg = small_config();
  Rng rng(4);
  auto enc = EncoderParams::init(cfg, v.size(), 5, rng);
  auto dec = DecoderParams::init(DecoderMode::kShared, 5, cfg.hidden, 5, rng);
  const auto in = assemble_input(tokenize(d.samples[1].text, v), d.schema, v, cfg.max_len);
  auto loss = [&](Tape& t) {
    const auto st = encode(t, in, enc, cfg, nullptr);
    std::vector<Var> terms;
    for (std::size_t c = 0; c < 5; ++c) terms.push_back(cross_entropy(t, head_probs(t, HeadKind::kSep, st, dec, c), c));
    return sum(t, terms);
  };
  std::vector<NdArray*> params;
  for (auto* p : enc.all()) params.push_back(&p->value);
  for (auto* p : dec.all()) params.push_back(&p->value);
  CHECK(grad_check(loss, params).max_relative_error < 1e-3);
}
