#include <doctest.h>

#include <cmath>
#include <set>

#include <json.hpp>

#include "cnenet/error.hpp"
#include "cnenet/metrics.hpp"
#include "oracles.hpp"

using namespace cne;

namespace {

std::vector<double> random_dist(std::size_t s, Rng& rng, bool coarse) {
  std::vector<double> x(s);
  for (auto& v : x) v = coarse ? static_cast<double>(rng.below(3)) : rng.normal();
  return oracle::softmax(x);
}

// Random prediction set over the ACSA polarity set with some unlabeled pairs.
PredictionSet random_set(Rng& rng, std::size_t n, std::size_t n_cat, bool coarse, double unlabeled = 0.2) {
  PredictionSet p;
  p.polarities = PolaritySet::acsa();
  for (std::size_t c = 0; c < n_cat; ++c) p.category_names.push_back("c" + std::to_string(c));
  for (std::size_t c = 0; c < n_cat; ++c) p.categories.push_back(c);
  for (std::size_t i = 0; i < n; ++i) {
    PredictedSample s;
    s.id = std::to_string(i);
    for (std::size_t c = 0; c < n_cat; ++c) {
      s.probs.push_back(random_dist(5, rng, coarse));
      if (rng.uniform() < unlabeled) s.gold.push_back(std::nullopt);
      else s.gold.push_back(rng.below(5));
    }
    p.samples.push_back(std::move(s));
  }
  return p;
}

std::vector<oracle::Pair> pairs_of(const PredictionSet& p) {
  std::vector<oracle::Pair> out;
  for (std::size_t i = 0; i < p.samples.size(); ++i)
    for (auto c : p.categories) out.push_back({i, c, p.samples[i].probs[c], p.samples[i].gold[c]});
  return out;
}

PredictionSet fixture(std::vector<std::vector<std::vector<double>>> probs, std::vector<LabelVector> gold) {
  PredictionSet p;
  p.polarities = PolaritySet::acsa();
  const std::size_t n_cat = gold.at(0).size();
  for (std::size_t c = 0; c < n_cat; ++c) {
    p.category_names.push_back("c" + std::to_string(c));
    p.categories.push_back(c);
  }
  for (std::size_t i = 0; i < gold.size(); ++i) p.samples.push_back({std::to_string(i), probs[i], gold[i]});
  return p;
}

const std::vector<double> kPos{0.9, 0.025, 0.025, 0.025, 0.025};
const std::vector<double> kNeg{0.025, 0.025, 0.9, 0.025, 0.025};
const std::vector<double> kNeu{0.025, 0.9, 0.025, 0.025, 0.025};
const std::vector<double> kNone{0.025, 0.025, 0.025, 0.025, 0.9};

}  // namespace

TEST_CASE("extraction scores match brute-force counting") {
  Rng rng(101);
  for (int trial = 0; trial < 150; ++trial) {
    auto p = random_set(rng, 1 + rng.below(12), 1 + rng.below(4), trial % 3 == 0);
    const double thr = trial % 2 ? 0.5 : rng.uniform();
    bool any = false;
    for (const auto& s : p.samples)
      for (const auto& g : s.gold) any = any || g.has_value();
    if (!any) {
      CHECK_THROWS_AS(extraction_scores(p, thr), DataError);
      continue;
    }
    oracle::Counts all;
    std::map<std::size_t, oracle::Counts> per;
    for (const auto& q : pairs_of(p)) {
      if (!q.gold) continue;
      const bool gold = *q.gold != 4, pred = 1.0 - q.probs[4] > thr;
      auto& c = per[q.category];
      (gold ? (pred ? c.tp : c.fn) : (pred ? c.fp : c.tn)) += 1;
      (gold ? (pred ? all.tp : all.fn) : (pred ? all.fp : all.tn)) += 1;
    }
    double macro = 0;
    for (const auto& [cat, c] : per) macro += oracle::f1(c);
    macro /= static_cast<double>(per.size());
    const auto r = extraction_scores(p, thr);
    CHECK(r.micro_f1 == doctest::Approx(oracle::f1(all)).epsilon(1e-12));
    CHECK(r.macro_f1 == doctest::Approx(macro).epsilon(1e-12));
    if (all.tp + all.fp > 0) CHECK(r.precision == doctest::Approx(all.tp / (all.tp + all.fp)));
    if (all.tp + all.fn > 0) CHECK(r.recall == doctest::Approx(all.tp / (all.tp + all.fn)));
  }
}

TEST_CASE("predicting everything present gives recall 1 and precision g/n") {
  std::vector<std::vector<std::vector<double>>> probs;
  std::vector<LabelVector> gold;
  for (int i = 0; i < 10; ++i) {
    probs.push_back({kPos});
    gold.push_back({i < 3 ? std::size_t{0} : std::size_t{4}});
  }
  const auto r = extraction_scores(fixture(probs, gold), 0.5);
  CHECK(r.recall == 1.0);
  CHECK(r.precision == doctest::Approx(0.3));
}

TEST_CASE("macro F1 counts a category with no gold and no predictions as 1") {
  const auto p = fixture({{kPos, kNone}, {kNone, kNone}}, {{0, 4}, {4, 4}});
  const auto r = extraction_scores(p, 0.5);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.micro_f1 == 1.0);
  const auto q = fixture({{kNone, kNone}, {kNone, kNone}}, {{4, 4}, {4, 4}});
  const auto r2 = extraction_scores(q, 0.5);
  CHECK(r2.micro_f1 == 1.0);
  CHECK(r2.precision == 1.0);
  CHECK(r2.recall == 1.0);
}

TEST_CASE("sentiment accuracies match brute force") {
  Rng rng(103);
  for (int trial = 0; trial < 120; ++trial) {
    const auto p = random_set(rng, 1 + rng.below(10), 1 + rng.below(4), trial % 2 == 0);
    for (auto subset : {SentimentSubset::kBinary, SentimentSubset::kThreeWay, SentimentSubset::kFourWay}) {
      std::vector<std::size_t> classes;
      for (const auto& name : subset_labels(subset)) classes.push_back(*p.polarities.index_of(name));
      const std::set<std::size_t> in(classes.begin(), classes.end());
      std::sort(classes.begin(), classes.end());
      double total = 0, correct = 0;
      for (const auto& q : pairs_of(p)) {
        if (!q.gold || !in.count(*q.gold)) continue;
        total += 1;
        if (oracle::argmax_over(q.probs, classes) == *q.gold) correct += 1;
      }
      const auto got = sentiment_accuracy(p, subset);
      if (total == 0) CHECK_FALSE(got.has_value());
      else CHECK(*got == doctest::Approx(correct / total).epsilon(1e-12));
    }
  }
}

TEST_CASE("four-way equals three-way accuracy on conflict-free gold") {
  Rng rng(107);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_set(rng, 2 + rng.below(10), 3, false);
    for (auto& s : p.samples)
      for (auto& g : s.gold)
        if (g && *g == 3) g = 1;
    const auto three = sentiment_accuracy(p, SentimentSubset::kThreeWay);
    const auto four = sentiment_accuracy(p, SentimentSubset::kFourWay);
    REQUIRE(three.has_value() == four.has_value());
    if (!three) continue;
    // argmax over four classes can pick "conflict" where three-way cannot
    bool conflict_wins = false;
    for (const auto& q : pairs_of(p))
      if (q.gold && *q.gold != 4 && oracle::argmax_over(q.probs, {0, 1, 2, 3}) == 3) conflict_wins = true;
    if (!conflict_wins) CHECK(*three == *four);
  }
}

TEST_CASE("sentiment accuracy is absent when the polarity set lacks a class") {
  PredictionSet p;
  p.polarities = PolaritySet::tacsa();
  p.category_names = {"a"};
  p.categories = {0};
  p.samples.push_back({"x", {{0.5, 0.3, 0.2}}, {0}});
  CHECK(sentiment_accuracy(p, SentimentSubset::kBinary) == doctest::Approx(1.0));
  CHECK_FALSE(sentiment_accuracy(p, SentimentSubset::kThreeWay).has_value());
  CHECK_FALSE(sentiment_accuracy(p, SentimentSubset::kFourWay).has_value());
}

TEST_CASE("strict accuracy is all-or-nothing per sample") {
  // sample 0: both categories right; sample 1: one of two wrong
  const auto p = fixture({{kPos, kNone}, {kNeg, kPos}}, {{0, 4}, {2, 2}});
  CHECK(*strict_accuracy(p) == 0.5);
  CHECK(*extraction_strict_accuracy(p, 0.5) == 1.0);
  CHECK(*pair_accuracy(p) == 0.75);

  const auto all_right = fixture({{kPos, kNone}, {kNeg, kNeu}}, {{0, 4}, {2, 1}});
  CHECK(*strict_accuracy(all_right) == 1.0);
  const auto none_right = fixture({{kNeg, kPos}, {kPos, kNone}}, {{0, 4}, {2, 1}});
  CHECK(*strict_accuracy(none_right) == 0.0);
  CHECK(*extraction_strict_accuracy(none_right, 0.5) == 0.0);

  const auto partial = fixture({{kPos, kNone}}, {{0, std::nullopt}});
  CHECK_THROWS_AS(strict_accuracy(partial), DataError);
  CHECK(strict_accuracy(partial.restricted({0})) == 1.0);
}

TEST_CASE("AUC matches the pairwise oracle") {
  Rng rng(109);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, bool>> xs;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i)
      xs.emplace_back(trial % 2 ? static_cast<double>(rng.below(4)) : rng.uniform(), rng.uniform() < 0.4);
    const auto a = auc(xs);
    const auto b = oracle::auc(xs);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(*a == doctest::Approx(*b).epsilon(1e-12));
  }
}

TEST_CASE("AUC edge cases") {
  std::vector<std::pair<double, bool>> tied{{0.3, true}, {0.3, false}, {0.3, true}, {0.3, false}, {0.3, false}};
  CHECK(*auc(tied) == 0.5);
  std::vector<std::pair<double, bool>> perfect{{0.9, true}, {0.1, false}, {0.8, true}};
  CHECK(*auc(perfect) == 1.0);
  std::vector<std::pair<double, bool>> inverted{{0.1, true}, {0.9, false}};
  CHECK(*auc(inverted) == 0.0);
  std::vector<std::pair<double, bool>> single{{0.1, true}, {0.9, true}};
  CHECK_FALSE(auc(single).has_value());
  CHECK_FALSE(auc({}).has_value());
}

TEST_CASE("extraction and sentiment AUC are per-category macro averages") {
  Rng rng(113);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_set(rng, 3 + rng.below(15), 1 + rng.below(3), trial % 2 == 0);
    double ext_sum = 0, sen_sum = 0;
    int ext_n = 0, sen_n = 0;
    for (auto c : p.categories) {
      std::vector<std::pair<double, bool>> e, s;
      for (const auto& smp : p.samples) {
        if (!smp.gold[c]) continue;
        const auto& pr = smp.probs[c];
        e.emplace_back(1.0 - pr[4], *smp.gold[c] != 4);
        if (*smp.gold[c] == 0 || *smp.gold[c] == 2) s.emplace_back(pr[0] / (pr[0] + pr[2]), *smp.gold[c] == 0);
      }
      if (auto v = oracle::auc(e)) ext_sum += *v, ++ext_n;
      if (auto v = oracle::auc(s)) sen_sum += *v, ++sen_n;
    }
    const auto ea = extraction_auc(p), sa = sentiment_auc(p);
    REQUIRE(ea.has_value() == (ext_n > 0));
    REQUIRE(sa.has_value() == (sen_n > 0));
    if (ea) CHECK(*ea == doctest::Approx(ext_sum / ext_n).epsilon(1e-12));
    if (sa) CHECK(*sa == doctest::Approx(sen_sum / sen_n).epsilon(1e-12));
  }
}

TEST_CASE("prediction sets validate rows and restrict to subsets") {
  auto p = fixture({{kPos, kNone}}, {{0, 4}});
  CHECK_NOTHROW(p.validate());
  p.samples[0].probs[0][0] += 0.01;
  CHECK_THROWS_AS(p.validate(), DataError);
  const auto q = fixture({{kPos, kNeg}}, {{0, 2}}).restricted({1});
  CHECK(q.categories == std::vector<std::size_t>{1});
  CHECK(*pair_accuracy(q) == 1.0);
}

TEST_CASE("category groups resolve against the schema partition") {
  const auto s = CategorySchema::acsa_default();
  CHECK(group_indices(s, CategoryGroup::kTarget) == std::vector<std::size_t>{1});
  CHECK(group_indices(s, CategoryGroup::kSource) == std::vector<std::size_t>{0, 2, 3, 4});
  CHECK(group_indices(s, CategoryGroup::kAll).size() == 5);
  CHECK(parse_category_group("target") == CategoryGroup::kTarget);
  CHECK_THROWS_AS(parse_category_group("other"), ConfigError);
  CHECK_THROWS_AS(group_indices(CategorySchema({"a", "b"}), CategoryGroup::kSource), ConfigError);
}

TEST_CASE("report JSON keeps absent metrics as null and round-trips") {
  const auto p = fixture({{kPos, kNone}, {kNeg, kNone}}, {{0, 4}, {2, 4}});
  const auto rep = evaluate(p, "all", 0.5);
  CHECK(rep.sentiment.three_way_acc.has_value());
  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j.at("report_version") == kReportVersion);
  // each category has single-class extraction gold here
  CHECK(j.at("extraction").at("auc").is_null());
  CHECK(j.at("sentiment").at("auc").is_number());
  // No neutral or conflict gold: the n-way accuracies still resolve; sentiment AUC over one category
  const auto only_neg = fixture({{kNeg}}, {{2}});
  const auto rep2 = evaluate(only_neg, "all", 0.5);
  const auto j2 = nlohmann::json::parse(report_to_json(rep2));
  CHECK(j2.at("extraction").at("auc").is_null());
  CHECK(j2.at("sentiment").at("auc").is_null());
  const auto back = report_from_json(report_to_json(rep2));
  CHECK_FALSE(back.extraction.auc.has_value());
  CHECK(back.extraction.micro_f1 == rep2.extraction.micro_f1);
  CHECK(report_to_json(back) == report_to_json(rep2));
  const MetricsReport reps[] = {rep, rep2};
  const auto table = render_table(reps);
  CHECK(table.find("ext.microF1") != std::string::npos);
  CHECK(table.find('-') != std::string::npos);
}
