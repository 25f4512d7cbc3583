// tests/test_scorenorm.cpp

// Copyright 2026  mismatch-sv authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "mismatch_sv/evalcal.hpp"
#include "mismatch_sv/scorenorm.hpp"
#include "test_helpers.hpp"

using namespace msv;

TEST_CASE("cosine scores", "[scorenorm]") {
  Eigen::Vector2d a(1, 0), b(1, 1), c(0, 2);
  CHECK(cosine_score(a, a) == Catch::Approx(1.0));
  CHECK(cosine_score(a, c) == Catch::Approx(0.0).margin(1e-15));
  CHECK(cosine_score(a, b) == Catch::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(cosine_score(a, Eigen::Vector2d(0, 0)), NumericalError);
  CHECK(cosine_score(a, 1e-100 * a) <= 1.0);  // clamped against rounding
  Eigen::VectorXd long_vec = Eigen::VectorXd::LinSpaced(20, 0.05, 1.0);
  CHECK(cosine_score(long_vec, long_vec) <= 1.0);
  CHECK(cosine_score(long_vec, -long_vec) >= -1.0);
}

TEST_CASE("trial scoring resolves ids and preserves order", "[scorenorm]") {
  EmbeddingSet models = testutil::make_set({{"m1", {1, 0}}, {"m2", {0, 1}}});
  EmbeddingSet segments = testutil::make_set({{"s1", {1, 0}}, {"s2", {1, 1}}});

  SECTION("cosine of identical vectors is one") {
    ScoreSet scores = score_trials(CosineBackend{}, models, segments,
                                   TrialList({{"m1", "s1"}}));
    REQUIRE(scores.size() == 1);
    CHECK(scores.scores()[0] == Catch::Approx(1.0));
  }
  SECTION("collapsed PLDA backend scores everything zero") {
    PldaModel model;
    model.mean = Eigen::VectorXd::Zero(2);
    model.between = Eigen::MatrixXd::Zero(2, 2);
    model.within = Eigen::MatrixXd::Identity(2, 2);
    ScoreSet scores =
        score_trials(ScoreBackend{PldaBackend(model)}, models, segments,
                     TrialList({{"m1", "s1"}, {"m2", "s2"}}));
    for (double s : scores.scores()) CHECK(std::abs(s) <= 1e-12);
  }
  SECTION("permuting trials permutes scores identically") {
    TrialList forward({{"m1", "s1"}, {"m1", "s2"}, {"m2", "s1"}, {"m2", "s2"}});
    TrialList reversed({{"m2", "s2"}, {"m2", "s1"}, {"m1", "s2"}, {"m1", "s1"}});
    ScoreSet f = score_trials(CosineBackend{}, models, segments, forward);
    ScoreSet r = score_trials(CosineBackend{}, models, segments, reversed);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(f.scores()[i] == r.scores()[3 - i]);
  }
  SECTION("unresolved ids are named") {
    CHECK_THROWS_WITH(score_trials(CosineBackend{}, models, segments,
                                   TrialList({{"mX", "s1"}})),
                      Catch::Matchers::ContainsSubstring("mX"));
  }
}

namespace {

ScoreSet raw_single(double value) {
  return ScoreSet(TrialList({{"m", "s"}}), {value});
}

}  // namespace

TEST_CASE("symmetric normalization arithmetic", "[scorenorm]") {
  SECTION("identity statistics pass scores through") {
    CohortScoreLists enroll{{"m", {1.0, -1.0}}};  // mean 0, sigma 1
    CohortScoreLists test{{"s", {1.0, -1.0}}};
    ScoreSet out = snorm(raw_single(0.7), enroll, test);
    CHECK(out.scores()[0] == Catch::Approx(0.7));
  }
  SECTION("textbook example") {
    // mu_e 1, sigma_e 1; mu_t 3, sigma_t 2 -> 0.5 * (1 + (-0.5)) = 0.25.
    CohortScoreLists enroll{{"m", {0.0, 2.0}}};
    CohortScoreLists test{{"s", {1.0, 5.0}}};
    ScoreSet out = snorm(raw_single(2.0), enroll, test);
    CHECK(out.scores()[0] == Catch::Approx(0.25));
  }
  SECTION("constant cohort scores fail loudly") {
    CohortScoreLists enroll{{"m", {1.0, 1.0}}};
    CohortScoreLists test{{"s", {1.0, 5.0}}};
    CHECK_THROWS_WITH(snorm(raw_single(2.0), enroll, test),
                      Catch::Matchers::ContainsSubstring("(m, s)"));
  }
  SECTION("fallback flag passes the raw score through") {
    CohortScoreLists enroll{{"m", {1.0, 1.0}}};
    CohortScoreLists test{{"s", {1.0, 5.0}}};
    SnormOptions opts;
    opts.fallback_raw_on_zero_sigma = true;
    ScoreSet out = snorm(raw_single(2.0), enroll, test, opts);
    CHECK(out.scores()[0] == 2.0);
  }
  SECTION("missing cohort list is an error") {
    CohortScoreLists enroll{{"other", {1.0, -1.0}}};
    CohortScoreLists test{{"s", {1.0, -1.0}}};
    CHECK_THROWS_AS(snorm(raw_single(0.0), enroll, test), InvalidInput);
  }
}

TEST_CASE("top-N restricts statistics to the best cohort scores",
          "[scorenorm]") {
  // Top 2 of {5, 1, 3, -7}: mean 4, population sigma 1.
  CohortScoreLists enroll{{"m", {5.0, 1.0, 3.0, -7.0}}};
  CohortScoreLists test{{"s", {1.0, -1.0}}};  // mean 0, sigma 1
  SnormOptions opts;
  opts.top_n = 2;
  ScoreSet out = snorm(raw_single(6.0), enroll, test, opts);
  CHECK(out.scores()[0] == Catch::Approx(0.5 * ((6.0 - 4.0) / 1.0 + 6.0)));

  SECTION("top-N larger than the cohort uses everything") {
    SnormOptions big;
    big.top_n = 100;
    ScoreSet all = snorm(raw_single(6.0), enroll, test, big);
    ScoreSet plain = snorm(raw_single(6.0), enroll, test);
    CHECK(all.scores()[0] == plain.scores()[0]);
  }
}

TEST_CASE("symmetric normalization is affine invariant", "[scorenorm]") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, 2.0);
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  std::uniform_real_distribution<double> offset(-10.0, 10.0);

  // A small trial set over 3 models x 3 segments with random cohort lists.
  std::vector<Trial> trials;
  std::vector<double> raw;
  CohortScoreLists enroll, test;
  for (int m = 0; m < 3; ++m) {
    std::vector<double> list;
    for (int j = 0; j < 7; ++j) list.push_back(gauss(rng));
    enroll["m" + std::to_string(m)] = list;
  }
  for (int s = 0; s < 3; ++s) {
    std::vector<double> list;
    for (int j = 0; j < 7; ++j) list.push_back(gauss(rng));
    test["s" + std::to_string(s)] = list;
  }
  for (int m = 0; m < 3; ++m)
    for (int s = 0; s < 3; ++s) {
      trials.push_back({"m" + std::to_string(m), "s" + std::to_string(s)});
      raw.push_back(gauss(rng));
    }
  ScoreSet raw_scores(TrialList(trials), raw);
  ScoreSet base = snorm(raw_scores, enroll, test);

  for (int rep = 0; rep < 20; ++rep) {
    const double a = scale(rng);
    const double b = offset(rng);
    CohortScoreLists enroll2, test2;
    for (const auto &[id, list] : enroll) {
      std::vector<double> mapped;
      for (double v : list) mapped.push_back(a * v + b);
      enroll2[id] = mapped;
    }
    for (const auto &[id, list] : test) {
      std::vector<double> mapped;
      for (double v : list) mapped.push_back(a * v + b);
      test2[id] = mapped;
    }
    std::vector<double> raw2;
    for (double v : raw) raw2.push_back(a * v + b);
    ScoreSet mapped = snorm(raw_scores.with_scores(raw2), enroll2, test2);
    for (std::size_t i = 0; i < base.size(); ++i)
      CHECK(std::abs(mapped.scores()[i] - base.scores()[i]) <= 1e-10);
  }
}

namespace {

struct GlnormFixture {
  EmbeddingSet models;
  EmbeddingSet segments;
  Cohort cohort;
  CategoryMap side_categories;
  ScoreSet raw;

  static GlnormFixture build(int languages, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::Index d = 4;
    const auto draw = [&](double shift) {
      Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(
          d, [&](Eigen::Index) { return gauss(rng); });
      v[0] += shift;
      return v;
    };

    GlnormFixture fx;
    std::vector<EmbeddingRecord> model_recs, seg_recs, cohort_recs;
    for (int i = 0; i < 4; ++i) {
      const int lang = i % languages;
      const Gender gender = (i / 2 == 0) ? Gender::male : Gender::female;
      const double shift = lang == 0 ? -2.0 : 2.0;
      EmbeddingRecord m;
      m.id = "m" + std::to_string(i);
      m.vector = draw(shift);
      model_recs.push_back(m);
      EmbeddingRecord s;
      s.id = "s" + std::to_string(i);
      s.vector = draw(shift);
      seg_recs.push_back(s);
      fx.side_categories[m.id] = {gender, "lang" + std::to_string(lang)};
      fx.side_categories[s.id] = {gender, "lang" + std::to_string(lang)};
    }
    for (int i = 0; i < 12; ++i) {
      const int lang = i % languages;
      const Gender gender = (i / 6 == 0) ? Gender::male : Gender::female;
      EmbeddingRecord c;
      c.id = "c" + std::to_string(i);
      c.vector = draw(lang == 0 ? -2.0 : 2.0);
      cohort_recs.push_back(c);
      fx.cohort.categories[c.id] = {gender, "lang" + std::to_string(lang)};
    }
    fx.models = EmbeddingSet(model_recs);
    fx.segments = EmbeddingSet(seg_recs);
    fx.cohort.vectors = EmbeddingSet(cohort_recs);

    std::vector<Trial> trials;
    for (int m = 0; m < 4; ++m)
      for (int s = 0; s < 4; ++s)
        trials.push_back({"m" + std::to_string(m), "s" + std::to_string(s)});
    fx.raw = score_trials(CosineBackend{}, fx.models, fx.segments,
                          TrialList(trials));
    return fx;
  }
};

}  // namespace

TEST_CASE("single-category glnorm reproduces snorm bitwise", "[scorenorm]") {
  GlnormFixture fx = GlnormFixture::build(1, 11);
  // Force one shared category for every side and cohort member.
  for (auto &[id, cat] : fx.side_categories) cat = {Gender::male, "only"};
  CategoryMap cohort_cats;
  for (const auto &rec : fx.cohort.vectors)
    cohort_cats[rec.id] = {Gender::male, "only"};
  fx.cohort.categories = cohort_cats;

  ScoreSet via_glnorm = glnorm(fx.raw, fx.cohort, CosineBackend{}, fx.models,
                               fx.segments, fx.side_categories);
  ScoreSet via_snorm =
      snorm(fx.raw,
            score_against_cohort(CosineBackend{}, fx.models, fx.cohort.vectors),
            score_against_cohort(CosineBackend{}, fx.segments,
                                 fx.cohort.vectors));
  for (std::size_t i = 0; i < via_glnorm.size(); ++i)
    CHECK(via_glnorm.scores()[i] == via_snorm.scores()[i]);
}

TEST_CASE("glnorm uses exactly the matching category partition",
          "[scorenorm]") {
  GlnormFixture fx = GlnormFixture::build(2, 13);
  ScoreSet out = glnorm(fx.raw, fx.cohort, CosineBackend{}, fx.models,
                        fx.segments, fx.side_categories);

  // Oracle: per trial, recompute the statistics against the hand-filtered
  // cohort subset of the side's category.
  const auto stats_against = [&](const Eigen::VectorXd &side,
                                 const Category &cat) {
    std::vector<double> scores;
    for (const auto &rec : fx.cohort.vectors)
      if (fx.cohort.categories.at(rec.id) == cat)
        scores.push_back(cosine_score(side, rec.vector));
    double mu = 0.0;
    for (double s : scores) mu += s;
    mu /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mu) * (s - mu);
    var /= static_cast<double>(scores.size());
    return std::make_pair(mu, std::sqrt(var));
  };

  for (std::size_t i = 0; i < fx.raw.size(); ++i) {
    const Trial &t = fx.raw.trials()[i];
    const auto [mu_e, sigma_e] = stats_against(
        fx.models.find(t.model_id)->vector, fx.side_categories.at(t.model_id));
    const auto [mu_t, sigma_t] =
        stats_against(fx.segments.find(t.segment_id)->vector,
                      fx.side_categories.at(t.segment_id));
    const double s = fx.raw.scores()[i];
    const double expect =
        0.5 * ((s - mu_e) / sigma_e + (s - mu_t) / sigma_t);
    CHECK(out.scores()[i] == Catch::Approx(expect).margin(1e-12));
  }
}

TEST_CASE("glnorm names an undersized category", "[scorenorm]") {
  GlnormFixture fx = GlnormFixture::build(2, 17);
  // Shrink one category to a single member.
  CategoryMap pruned;
  int kept = 0;
  for (const auto &rec : fx.cohort.vectors) {
    Category cat = fx.cohort.categories.at(rec.id);
    if (cat.gender == Gender::male && cat.language == "lang0" && kept++ > 0)
      cat.language = "lang1";
    pruned[rec.id] = cat;
  }
  fx.cohort.categories = pruned;
  CHECK_THROWS_WITH(glnorm(fx.raw, fx.cohort, CosineBackend{}, fx.models,
                           fx.segments, fx.side_categories),
                    Catch::Matchers::ContainsSubstring("m/lang0"));
}

TEST_CASE("scoring output is identical across thread counts", "[scorenorm]") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<EmbeddingRecord> model_recs, seg_recs;
  std::vector<Trial> trials;
  for (int i = 0; i < 12; ++i) {
    EmbeddingRecord m;
    m.id = "m" + std::to_string(i);
    m.vector = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    model_recs.push_back(m);
    EmbeddingRecord s;
    s.id = "s" + std::to_string(i);
    s.vector = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    seg_recs.push_back(s);
  }
  for (int a = 0; a < 12; ++a)
    for (int b = 0; b < 12; ++b)
      trials.push_back({"m" + std::to_string(a), "s" + std::to_string(b)});
  EmbeddingSet models(model_recs), segments(seg_recs);

  set_thread_count(1);
  ScoreSet serial =
      score_trials(CosineBackend{}, models, segments, TrialList(trials));
  set_thread_count(2);
  ScoreSet parallel =
      score_trials(CosineBackend{}, models, segments, TrialList(trials));
  set_thread_count(0);
  CHECK(serial.scores() == parallel.scores());
}

TEST_CASE("category-matched normalization improves shifted trials",
          "[scorenorm]") {
  // Nontarget same-language pairs get a shared-shift score boost; snorm
  // with a pooled cohort cannot correct it, category-wise stats can.
  std::mt19937_64 rng(19);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index d = 8;
  const double shift = 3.0;

  const auto draw = [&](int lang) {
    Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(
        d, [&](Eigen::Index) { return gauss(rng); });
    v[0] += lang == 0 ? -shift : shift;
    return v;
  };

  std::vector<EmbeddingRecord> speakers_enroll, speakers_test, cohort_recs;
  CategoryMap side_cats;
  Cohort cohort;
  std::vector<Trial> trials;
  std::vector<TrialKey> key;

  const int n_speakers = 40;
  std::vector<Eigen::VectorXd> identity(n_speakers);
  std::vector<int> lang_of(n_speakers);
  for (int s = 0; s < n_speakers; ++s) {
    lang_of[s] = s % 2;
    identity[s] = draw(lang_of[s]);
    EmbeddingRecord e;
    e.id = "m" + std::to_string(s);
    e.vector = identity[s] + 0.4 * Eigen::VectorXd::NullaryExpr(
                                       d, [&](Eigen::Index) { return gauss(rng); });
    speakers_enroll.push_back(e);
    EmbeddingRecord t;
    t.id = "s" + std::to_string(s);
    t.vector = identity[s] + 0.4 * Eigen::VectorXd::NullaryExpr(
                                       d, [&](Eigen::Index) { return gauss(rng); });
    speakers_test.push_back(t);
    side_cats[e.id] = {Gender::male, "lang" + std::to_string(lang_of[s])};
    side_cats[t.id] = {Gender::male, "lang" + std::to_string(lang_of[s])};
  }
  for (int c = 0; c < 60; ++c) {
    EmbeddingRecord rec;
    rec.id = "c" + std::to_string(c);
    rec.vector = draw(c % 2);
    cohort.categories[rec.id] = {Gender::male,
                                 "lang" + std::to_string(c % 2)};
    cohort_recs.push_back(rec);
  }
  cohort.vectors = EmbeddingSet(cohort_recs);
  EmbeddingSet models(speakers_enroll);
  EmbeddingSet segments(speakers_test);

  for (int a = 0; a < n_speakers; ++a)
    for (int b = 0; b < n_speakers; ++b) {
      trials.push_back({"m" + std::to_string(a), "s" + std::to_string(b)});
      key.push_back(a == b ? TrialKey::target : TrialKey::nontarget);
    }
  TrialList trial_list(trials, key);
  ScoreSet raw = score_trials(CosineBackend{}, models, segments, trial_list);
  ScoreSet raw_keyed(trial_list, raw.scores());

  ScoreSet plain = snorm(
      raw_keyed, score_against_cohort(CosineBackend{}, models, cohort.vectors),
      score_against_cohort(CosineBackend{}, segments, cohort.vectors));
  ScoreSet matched = glnorm(raw_keyed, cohort, CosineBackend{}, models,
                            segments, side_cats);

  CHECK(eer(matched) <= eer(plain));
}
