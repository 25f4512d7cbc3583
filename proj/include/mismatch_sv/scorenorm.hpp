// mismatch_sv/scorenorm.hpp

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

// Trial scoring (cosine or PLDA backend), symmetric cohort score
// normalization, and its gender/language-dependent variant where cohort
// statistics are restricted to the trial side's predicted category.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "mismatch_sv/plda.hpp"
#include "mismatch_sv/types.hpp"

namespace msv {

inline double cosine_score(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  require(a.size() == b.size(), "cosine of vectors with different dimensions");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw NumericalError("cosine undefined for zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

struct CosineBackend {};

struct PldaBackend {
  explicit PldaBackend(const PldaModel &model) : scorer(model) {}
  PldaScorer scorer;
};

using ScoreBackend = std::variant<CosineBackend, PldaBackend>;

inline double score_pair(const ScoreBackend &backend, const Eigen::VectorXd &a,
                         const Eigen::VectorXd &b) {
  if (std::holds_alternative<CosineBackend>(backend)) return cosine_score(a, b);
  return std::get<PldaBackend>(backend).scorer(a, b);
}

// Scores every trial with the chosen backend; output order equals trial
// order.  Model vectors come from `models`, segment vectors from `segments`.
inline ScoreSet score_trials(const ScoreBackend &backend,
                             const EmbeddingSet &models,
                             const EmbeddingSet &segments,
                             const TrialList &trials) {
  // Resolve ids up front so failures name the offending trial, not a thread.
  std::vector<const Eigen::VectorXd *> side_a(trials.size());
  std::vector<const Eigen::VectorXd *> side_b(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const EmbeddingRecord *m = models.find(trials[i].model_id);
    if (m == nullptr)
      throw InvalidInput("trial " + std::to_string(i) + ": unknown model id '" +
                         trials[i].model_id + "'");
    const EmbeddingRecord *s = segments.find(trials[i].segment_id);
    if (s == nullptr)
      throw InvalidInput("trial " + std::to_string(i) +
                         ": unknown segment id '" + trials[i].segment_id + "'");
    side_a[i] = &m->vector;
    side_b[i] = &s->vector;
  }
  std::vector<double> scores(trials.size());
  parallel_for(trials.size(), [&](std::size_t i) {
    scores[i] = score_pair(backend, *side_a[i], *side_b[i]);
  });
  return ScoreSet(trials, std::move(scores));
}

// Score lists of each side embedding against every cohort member, keyed by
// the side id; list order follows cohort order.
using CohortScoreLists = std::unordered_map<std::string, std::vector<double>>;

inline CohortScoreLists score_against_cohort(const ScoreBackend &backend,
                                             const EmbeddingSet &sides,
                                             const EmbeddingSet &cohort) {
  require(!cohort.empty(), "cohort is empty");
  std::vector<std::vector<double>> rows(sides.size());
  parallel_for(sides.size(), [&](std::size_t i) {
    rows[i].resize(cohort.size());
    for (std::size_t j = 0; j < cohort.size(); ++j)
      rows[i][j] = score_pair(backend, sides[i].vector, cohort[j].vector);
  });
  CohortScoreLists out;
  out.reserve(sides.size());
  for (std::size_t i = 0; i < sides.size(); ++i)
    out.emplace(sides[i].id, std::move(rows[i]));
  return out;
}

struct SnormOptions {
  // Use only the N highest cohort scores per side (0 = all).
  int top_n = 0;
  // On a zero-spread cohort, pass the raw score through instead of failing.
  bool fallback_raw_on_zero_sigma = false;
};

// Cohort statistics for the two sides of one trial.
struct NormStats {
  double mu_e = 0.0;
  double sigma_e = 0.0;
  double mu_t = 0.0;
  double sigma_t = 0.0;
};

namespace detail {

struct SideStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
};

inline SideStats side_stats(const std::vector<double> &scores,
                            const SnormOptions &opts) {
  require(!scores.empty(), "empty cohort score list");
  const std::vector<double> *use = &scores;
  std::vector<double> top;
  if (opts.top_n > 0 && static_cast<std::size_t>(opts.top_n) < scores.size()) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] > scores[b];
    });
    top.reserve(static_cast<std::size_t>(opts.top_n));
    for (int i = 0; i < opts.top_n; ++i) top.push_back(scores[idx[static_cast<std::size_t>(i)]]);
    use = &top;
  }
  const auto n = static_cast<double>(use->size());
  double mu = 0.0;
  for (double s : *use) mu += s;
  mu /= n;
  double var = 0.0;
  for (double s : *use) var += (s - mu) * (s - mu);
  var /= n;
  return {mu, std::sqrt(var)};
}

}  // namespace detail

// Symmetric normalization: each raw score is z-normalized under the
// enrollment side's cohort statistics and under the test side's, then the
// two are averaged.  Statistics use the population standard deviation.
inline ScoreSet snorm(const ScoreSet &raw, const CohortScoreLists &enroll,
                      const CohortScoreLists &test,
                      const SnormOptions &opts = {}) {
  std::vector<double> out(raw.size());
  std::unordered_map<std::string, detail::SideStats> enroll_stats, test_stats;
  const auto stats_for = [&](const CohortScoreLists &lists,
                             std::unordered_map<std::string, detail::SideStats>
                                 &cache,
                             const std::string &id) -> const detail::SideStats & {
    auto cached = cache.find(id);
    if (cached != cache.end()) return cached->second;
    auto it = lists.find(id);
    if (it == lists.end())
      throw InvalidInput("no cohort scores for side '" + id + "'");
    return cache.emplace(id, detail::side_stats(it->second, opts)).first->second;
  };

  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Trial &t = raw.trials()[i];
    const detail::SideStats &e = stats_for(enroll, enroll_stats, t.model_id);
    const detail::SideStats &s = stats_for(test, test_stats, t.segment_id);
    const NormStats stats{e.mu, e.sigma, s.mu, s.sigma};
    if (stats.sigma_e <= 0.0 || stats.sigma_t <= 0.0) {
      if (opts.fallback_raw_on_zero_sigma) {
        out[i] = raw.scores()[i];
        continue;
      }
      throw NumericalError("zero cohort score spread for trial (" +
                           t.model_id + ", " + t.segment_id + ")");
    }
    const double v = raw.scores()[i];
    out[i] = 0.5 * ((v - stats.mu_e) / stats.sigma_e +
                    (v - stats.mu_t) / stats.sigma_t);
  }
  return raw.with_scores(std::move(out));
}

// Imposter cohort with a (gender, language) category per member.
struct Cohort {
  EmbeddingSet vectors;
  CategoryMap categories;
};

// Gender/language-dependent normalization: identical to snorm except each
// side's statistics are computed only against cohort members whose category
// matches that side's.  Categories are taken as given (typically predicted
// upstream by the gender classifier and the two-step language clustering).
// Any category a trial side maps to must have at least 2 cohort members.
inline ScoreSet glnorm(const ScoreSet &raw, const Cohort &cohort,
                       const ScoreBackend &backend, const EmbeddingSet &models,
                       const EmbeddingSet &segments,
                       const CategoryMap &side_categories,
                       const SnormOptions &opts = {}) {
  // Cohort member indices per category, preserving cohort order.
  std::unordered_map<Category, std::vector<std::size_t>, CategoryHash> cells;
  for (std::size_t j = 0; j < cohort.vectors.size(); ++j) {
    auto it = cohort.categories.find(cohort.vectors[j].id);
    if (it == cohort.categories.end())
      throw InvalidInput("cohort member '" + cohort.vectors[j].id +
                         "' has no category");
    cells[it->second].push_back(j);
  }

  const auto category_of = [&](const std::string &id) -> const Category & {
    auto it = side_categories.find(id);
    if (it == side_categories.end())
      throw InvalidInput("no category for trial side '" + id + "'");
    return it->second;
  };

  // Score each needed side against its category's cohort subset.  Caches are
  // per side; an id may name both a model and a segment.
  std::unordered_map<std::string, detail::SideStats> enroll_cache, test_cache;
  const auto stats_for = [&](const EmbeddingSet &side_set,
                             std::unordered_map<std::string, detail::SideStats>
                                 &stats_cache,
                             const std::string &id) -> const detail::SideStats & {
    auto cached = stats_cache.find(id);
    if (cached != stats_cache.end()) return cached->second;
    const Category &cat = category_of(id);
    auto cell = cells.find(cat);
    if (cell == cells.end() || cell->second.size() < 2)
      throw InvalidInput("cohort category '" + cat.name() +
                         "' has fewer than 2 members");
    const EmbeddingRecord *rec = side_set.find(id);
    if (rec == nullptr)
      throw InvalidInput("unknown trial side id '" + id + "'");
    std::vector<double> scores(cell->second.size());
    const auto &members = cell->second;
    parallel_for(members.size(), [&](std::size_t j) {
      scores[j] =
          score_pair(backend, rec->vector, cohort.vectors[members[j]].vector);
    });
    return stats_cache.emplace(id, detail::side_stats(scores, opts))
        .first->second;
  };

  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Trial &t = raw.trials()[i];
    const detail::SideStats &e = stats_for(models, enroll_cache, t.model_id);
    const detail::SideStats &s = stats_for(segments, test_cache, t.segment_id);
    if (e.sigma <= 0.0 || s.sigma <= 0.0) {
      if (opts.fallback_raw_on_zero_sigma) {
        out[i] = raw.scores()[i];
        continue;
      }
      throw NumericalError("zero cohort score spread for trial (" +
                           t.model_id + ", " + t.segment_id + ")");
    }
    const double v = raw.scores()[i];
    out[i] = 0.5 * ((v - e.mu) / e.sigma + (v - s.mu) / s.sigma);
  }
  return raw.with_scores(std::move(out));
}

}  // namespace msv
