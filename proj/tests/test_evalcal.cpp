// tests/test_evalcal.cpp

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
#include "test_helpers.hpp"

using namespace msv;
using testutil::make_scores;

TEST_CASE("equal error rate on hand cases", "[evalcal]") {
  SECTION("perfect separation") {
    CHECK(eer(make_scores({2, 3}, {0, 1})) == 0.0);
  }
  SECTION("identical score multisets") {
    CHECK(eer(make_scores({0.5, 1.5, 2.5}, {0.5, 1.5, 2.5})) ==
          Catch::Approx(0.5));
  }
  SECTION("interleaved quartet crosses at one half") {
    CHECK(eer(make_scores({1, 3}, {2, 4})) == Catch::Approx(0.5));
  }
  SECTION("missing key or single class is an error") {
    ScoreSet unkeyed(TrialList({{"m", "s"}}), {0.0});
    CHECK_THROWS_AS(eer(unkeyed), InvalidInput);
    CHECK_THROWS_AS(eer(make_scores({1.0}, {})), InvalidInput);
  }
}

TEST_CASE("metrics match the exhaustive sweep oracle", "[evalcal]") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> count(1, 25);
  std::uniform_real_distribution<double> value(-5.0, 5.0);
  std::uniform_int_distribution<int> quantized(0, 1);
  const std::vector<double> priors{0.01, 0.005};

  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> targets, nontargets;
    const int nt = count(rng), nn = count(rng);
    // Half the instances use quantized scores to exercise tied thresholds.
    const bool quantize = quantized(rng) == 1;
    for (int i = 0; i < nt; ++i) {
      double v = value(rng) + 1.0;
      targets.push_back(quantize ? std::round(v) : v);
    }
    for (int i = 0; i < nn; ++i) {
      double v = value(rng) - 1.0;
      nontargets.push_back(quantize ? std::round(v) : v);
    }
    ScoreSet scores = make_scores(targets, nontargets);
    CHECK(std::abs(eer(scores) - testutil::eer_oracle(targets, nontargets)) <=
          1e-12);
    CHECK(std::abs(min_cprimary(scores) -
                   testutil::min_cost_oracle(targets, nontargets, priors)) <=
          1e-12);
    CHECK(min_cprimary(scores) <= act_cprimary(scores) + 1e-12);
    CHECK(min_cprimary(scores) <= 1.0 + 1e-12);
  }
}

TEST_CASE("minimum cost endpoints", "[evalcal]") {
  SECTION("perfect separation scores zero") {
    CHECK(min_cprimary(make_scores({10, 11}, {-10, -11})) == 0.0);
  }
  SECTION("constant scores cost exactly one") {
    CHECK(min_cprimary(make_scores({3, 3, 3}, {3, 3, 3})) == 1.0);
  }
}

TEST_CASE("actual cost uses the fixed Bayes threshold", "[evalcal]") {
  SECTION("confident correct scores cost nothing") {
    CHECK(act_cprimary(make_scores({100, 100}, {-100, -100})) == 0.0);
  }
  SECTION("threshold sits at log((1-p)/p)") {
    CostParams params;
    params.p_targets = {0.01};
    const double threshold = std::log(99.0);  // ~4.59512
    // A target just below the threshold is missed, just above is accepted.
    CHECK(act_cprimary(make_scores({threshold - 1e-6}, {-100}), params) ==
          Catch::Approx(1.0));
    CHECK(act_cprimary(make_scores({threshold + 1e-6}, {-100}), params) ==
          0.0);
  }
  SECTION("actual dominates minimum on random LLR-ish sets") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss(0.0, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> targets, nontargets;
      for (int i = 0; i < 30; ++i) targets.push_back(gauss(rng) + 2.0);
      for (int i = 0; i < 60; ++i) nontargets.push_back(gauss(rng) - 2.0);
      ScoreSet scores = make_scores(targets, nontargets);
      CHECK(act_cprimary(scores) >= min_cprimary(scores) - 1e-12);
    }
  }
}

TEST_CASE("eer and minimum cost are invariant to increasing transforms",
          "[evalcal]") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> targets, nontargets;
    for (int i = 0; i < 15; ++i) targets.push_back(gauss(rng) + 1.0);
    for (int i = 0; i < 20; ++i) nontargets.push_back(gauss(rng) - 1.0);
    ScoreSet scores = make_scores(targets, nontargets);

    std::vector<double> t2, n2;
    for (double v : targets) t2.push_back(std::exp(0.5 * v) + v);
    for (double v : nontargets) n2.push_back(std::exp(0.5 * v) + v);
    ScoreSet mapped = make_scores(t2, n2);

    CHECK(std::abs(eer(scores) - eer(mapped)) <= 1e-12);
    CHECK(std::abs(min_cprimary(scores) - min_cprimary(mapped)) <= 1e-12);
  }
}

TEST_CASE("equalized metrics average over partition cells", "[evalcal]") {
  // Cell A has EER 0.1 (one of ten targets below one of ten nontargets),
  // cell B is smaller with EER 0.4, so cell sizes skew the pooled value.
  std::vector<double> t_a(9, 10.0), n_a(9, 1.0);
  t_a.push_back(0.0);
  n_a.push_back(11.0);
  std::vector<double> t_b(3, 10.0), n_b(3, 1.0);
  for (int i = 0; i < 2; ++i) {
    t_b.push_back(0.0);
    n_b.push_back(11.0);
  }

  std::vector<Trial> trials;
  std::vector<TrialKey> key;
  std::vector<double> vals;
  std::vector<std::string> cells;
  std::size_t n = 0;
  const auto add = [&](const std::vector<double> &scores, TrialKey k,
                       const std::string &cell) {
    for (double s : scores) {
      trials.push_back({"m" + std::to_string(n), "s" + std::to_string(n)});
      key.push_back(k);
      vals.push_back(s);
      cells.push_back(cell);
      ++n;
    }
  };
  add(t_a, TrialKey::target, "A");
  add(n_a, TrialKey::nontarget, "A");
  add(t_b, TrialKey::target, "B");
  add(n_b, TrialKey::nontarget, "B");
  ScoreSet scores(TrialList(trials, key), vals);

  SECTION("per-cell EERs are as constructed") {
    CHECK(eer(make_scores(t_a, n_a)) == Catch::Approx(0.1));
    CHECK(eer(make_scores(t_b, n_b)) == Catch::Approx(0.4));
  }
  SECTION("equalized EER is their unweighted mean") {
    CHECK(equalized_metric(scores, cells, Metric::eer) == Catch::Approx(0.25));
  }
  SECTION("two equal-size cells with EERs 0.1 and 0.3 average to 0.2") {
    std::vector<double> t_c(7, 10.0), n_c(7, 1.0);
    for (int i = 0; i < 3; ++i) {
      t_c.push_back(0.0);
      n_c.push_back(11.0);
    }
    std::vector<Trial> tr2;
    std::vector<TrialKey> k2;
    std::vector<double> v2;
    std::vector<std::string> c2;
    std::size_t m = 0;
    const auto add2 = [&](const std::vector<double> &ss, TrialKey k,
                          const std::string &cell) {
      for (double s : ss) {
        tr2.push_back({"a" + std::to_string(m), "b" + std::to_string(m)});
        k2.push_back(k);
        v2.push_back(s);
        c2.push_back(cell);
        ++m;
      }
    };
    add2(t_a, TrialKey::target, "A");
    add2(n_a, TrialKey::nontarget, "A");
    add2(t_c, TrialKey::target, "C");
    add2(n_c, TrialKey::nontarget, "C");
    ScoreSet s2(TrialList(tr2, k2), v2);
    CHECK(equalized_metric(s2, c2, Metric::eer) == Catch::Approx(0.2));
  }
  SECTION("single category equals the pooled metric") {
    std::vector<std::string> one(cells.size(), "all");
    CHECK(equalized_metric(scores, one, Metric::eer) ==
          Catch::Approx(eer(scores)));
  }
  SECTION("pooled and equalized can differ") {
    CHECK(equalized_metric(scores, cells, Metric::eer) !=
          Catch::Approx(eer(scores)).margin(1e-6));
  }
  SECTION("a cell without both classes is an error") {
    std::vector<std::string> broken = cells;
    broken[0] = "C";  // moves a single target into its own cell
    CHECK_THROWS_WITH(equalized_metric(scores, broken, Metric::eer),
                      Catch::Matchers::ContainsSubstring("C"));
  }
}

namespace {

// Scores that are true LLRs of N(mu1, 1) vs N(mu0, 1) samples.
ScoreSet true_llr_scores(int n_per_class, double mu0, double mu1,
                         std::uint64_t seed, double offset = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g0(mu0, 1.0), g1(mu1, 1.0);
  const auto llr = [&](double x) {
    return (mu1 - mu0) * x - 0.5 * (mu1 * mu1 - mu0 * mu0);
  };
  std::vector<double> targets, nontargets;
  for (int i = 0; i < n_per_class; ++i) {
    targets.push_back(llr(g1(rng)) + offset);
    nontargets.push_back(llr(g0(rng)) + offset);
  }
  return make_scores(targets, nontargets);
}

}  // namespace

TEST_CASE("calibration recovers the identity on true LLRs", "[evalcal]") {
  ScoreSet scores = true_llr_scores(20000, -1.0, 1.0, 2024);
  CalibrationModel model = train_calibration(scores, 0.1);
  CHECK(model.scale == Catch::Approx(1.0).margin(0.05));
  CHECK(model.offset == Catch::Approx(0.0).margin(0.05));
}

TEST_CASE("calibration absorbs a constant score offset", "[evalcal]") {
  const double c = 3.7;
  ScoreSet base = true_llr_scores(20000, -1.0, 1.0, 2025);
  ScoreSet shifted = true_llr_scores(20000, -1.0, 1.0, 2025, c);
  CalibrationModel m0 = train_calibration(base, 0.1);
  CalibrationModel m1 = train_calibration(shifted, 0.1);
  CHECK(m1.scale == Catch::Approx(m0.scale).margin(0.02));
  CHECK(m1.offset == Catch::Approx(m0.offset - m0.scale * c).margin(0.05));
}

TEST_CASE("calibration slope is positive on separable-direction data",
          "[evalcal]") {
  ScoreSet scores = true_llr_scores(500, -2.0, 2.0, 11);
  CalibrationModel model = train_calibration(scores, 0.05);
  CHECK(model.scale > 0.0);
}

TEST_CASE("calibration optimum is independent of the starting point",
          "[evalcal]") {
  ScoreSet scores = true_llr_scores(2000, -1.0, 1.0, 5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> init(-4.0, 4.0);
  CalibrationModel reference = train_calibration(scores, 0.0075);
  for (int i = 0; i < 5; ++i) {
    CalibrationModel model =
        train_calibration(scores, 0.0075, init(rng), init(rng));
    CHECK(model.scale == Catch::Approx(reference.scale).margin(1e-6));
    CHECK(model.offset == Catch::Approx(reference.offset).margin(1e-6));
  }
}

TEST_CASE("calibration shrinks the actual-to-minimum cost gap", "[evalcal]") {
  // Deliberately miscalibrated raw scores: scaled and shifted LLRs.
  ScoreSet raw = true_llr_scores(20000, -1.5, 1.5, 31);
  std::vector<double> distorted;
  for (double s : raw.scores()) distorted.push_back(0.2 * s + 5.0);
  ScoreSet bad(raw.trials(), distorted);

  CalibrationModel model = train_calibration(bad, 0.0075);
  ScoreSet fixed = apply_calibration(bad, model);
  CHECK(act_cprimary(fixed) - min_cprimary(fixed) <= 0.05);
}

TEST_CASE("single-subsystem fusion degenerates to calibration", "[evalcal]") {
  ScoreSet scores = true_llr_scores(3000, -1.0, 1.0, 17);
  CalibrationModel cal = train_calibration(scores, 0.0075);
  FusionModel fus = train_fusion({scores}, 0.0075, 1e-8);
  REQUIRE(fus.weights.size() == 1);
  CHECK(fus.weights[0] == Catch::Approx(cal.scale).margin(1e-3));
  CHECK(fus.bias == Catch::Approx(cal.offset).margin(1e-3));
}

TEST_CASE("fusion ignores a pure-noise subsystem", "[evalcal]") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0.0, 1.0);
  ScoreSet informative = true_llr_scores(40000, -1.5, 1.5, 29);
  std::vector<double> junk;
  for (std::size_t i = 0; i < informative.size(); ++i)
    junk.push_back(noise(rng));
  ScoreSet noise_scores(informative.trials(), junk);

  FusionModel model = train_fusion({informative, noise_scores}, 0.0075);
  CHECK(std::abs(model.weights[1]) <= 0.05 * std::abs(model.weights[0]));
}

TEST_CASE("fusion training cross-entropy dominates each calibrated subsystem",
          "[evalcal]") {
  std::mt19937_64 rng(37);
  const double prior = 0.0075;
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<ScoreSet> subsystems;
    for (int s = 0; s < 3; ++s)
      subsystems.push_back(
          true_llr_scores(800, -0.5 - 0.3 * s, 0.5 + 0.2 * s, rng()));
    // Re-align the trial lists: same trials, different score columns.
    std::vector<ScoreSet> aligned;
    for (auto &s : subsystems)
      aligned.emplace_back(subsystems[0].trials(), s.scores());

    FusionModel fusion = train_fusion(aligned, prior, 1e-10);
    const double fused_ce =
        weighted_cross_entropy(apply_fusion(aligned, fusion), prior);
    for (const auto &s : aligned) {
      CalibrationModel cal = train_calibration(s, prior);
      const double single_ce =
          weighted_cross_entropy(apply_calibration(s, cal), prior);
      CHECK(fused_ce <= single_ce + 1e-9);
    }
  }
}

TEST_CASE("fusion rejects misaligned trial lists", "[evalcal]") {
  ScoreSet a(TrialList({{"m1", "s1"}, {"m2", "s2"}},
                       {TrialKey::target, TrialKey::nontarget}),
             {1.0, -1.0});
  ScoreSet b(TrialList({{"m1", "s1"}, {"mX", "s2"}},
                       {TrialKey::target, TrialKey::nontarget}),
             {1.0, -1.0});
  CHECK_THROWS_WITH(train_fusion({a, b}, 0.01),
                    Catch::Matchers::ContainsSubstring("mX"));
}

TEST_CASE("pseudo trials enumerate the cluster cross product", "[evalcal]") {
  EmbeddingSet set = testutil::make_set({{"u0", {1, 0}},
                                         {"u1", {2, 0}},
                                         {"u2", {3, 0}},
                                         {"u3", {0, 1}},
                                         {"u4", {0, 2}}});
  ClusteringResult clusters;
  clusters.labels = {0, 0, 0, 1, 1};
  clusters.centroids = Eigen::MatrixXd::Zero(2, 2);
  clusters.centroids << 2, 0, 0, 1.5;

  PseudoTrials pt = derive_pseudo_trials(set, clusters);
  CHECK(pt.models.size() == 2);
  CHECK(pt.trials.size() == 10);
  int targets = 0;
  for (auto k : pt.trials.key())
    if (k == TrialKey::target) ++targets;
  CHECK(targets == 5);

  // Cluster means are length normalized.
  CHECK(std::abs(pt.models[0].vector.norm() - 1.0) <= 1e-12);
  CHECK(pt.models[0].vector[0] == Catch::Approx(1.0));

  SECTION("a singleton cluster is its own normalized member") {
    ClusteringResult fine;
    fine.labels = {0, 0, 0, 1, 2};
    fine.centroids = Eigen::MatrixXd::Zero(3, 2);
    PseudoTrials pt3 = derive_pseudo_trials(set, fine);
    CHECK(pt3.models[2].vector == Eigen::Vector2d(0, 1));
    // Its self-trial is a target.
    const auto &trials = pt3.trials;
    bool found = false;
    for (std::size_t i = 0; i < trials.size(); ++i)
      if (trials[i].model_id == "cluster2" && trials[i].segment_id == "u4") {
        CHECK(trials.key()[i] == TrialKey::target);
        found = true;
      }
    CHECK(found);
  }
  SECTION("an empty cluster is an error") {
    ClusteringResult holey;
    holey.labels = {0, 0, 0, 2, 2};
    holey.centroids = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(derive_pseudo_trials(set, holey), InvalidInput);
  }
  SECTION("fewer than two clusters is an error") {
    ClusteringResult single;
    single.labels = {0, 0, 0, 0, 0};
    single.centroids = Eigen::MatrixXd::Zero(1, 2);
    CHECK_THROWS_AS(derive_pseudo_trials(set, single), InvalidInput);
  }
}

TEST_CASE("calibration and fusion files round trip", "[evalcal]") {
  testutil::TempDir dir("calfiles");
  CalibrationModel cal{1.25, -0.75};
  save_calibration(cal, dir.file("c.txt"));
  CalibrationModel cal2 = load_calibration(dir.file("c.txt"));
  CHECK(cal2.scale == cal.scale);
  CHECK(cal2.offset == cal.offset);

  FusionModel fus;
  fus.weights = Eigen::Vector3d(0.5, 1.5, -0.25);
  fus.bias = 2.5;
  save_fusion(fus, dir.file("f.txt"));
  FusionModel fus2 = load_fusion(dir.file("f.txt"));
  CHECK(fus2.weights == fus.weights);
  CHECK(fus2.bias == fus.bias);
}

TEST_CASE("cost parameter validation", "[evalcal]") {
  CostParams bad;
  bad.p_targets = {0.0};
  CHECK_THROWS_AS(min_cprimary(make_scores({1}, {0}), bad), InvalidInput);
  CostParams negative;
  negative.c_miss = -1.0;
  CHECK_THROWS_AS(min_cprimary(make_scores({1}, {0}), negative), InvalidInput);
}
