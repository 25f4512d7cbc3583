// mismatch_sv/simulator.hpp

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

// Synthetic embedding corpora drawn from the same speaker/session Gaussian
// model the PLDA backend assumes, with additive language and gender mean
// shifts, plus enrollment/test protocol sampling.  Everything is
// deterministic given the seed.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mismatch_sv/types.hpp"

namespace msv {

// Scalar, diagonal or full SPD covariance specification.
class CovSpec {
 public:
  static CovSpec scaled_identity(double scale) {
    CovSpec spec;
    spec.scale_ = scale;
    return spec;
  }
  static CovSpec diagonal(Eigen::VectorXd values) {
    CovSpec spec;
    spec.diagonal_ = std::move(values);
    return spec;
  }
  static CovSpec full(Eigen::MatrixXd matrix) {
    CovSpec spec;
    spec.full_ = std::move(matrix);
    return spec;
  }

  // Lower Cholesky factor of the d x d covariance; throws on anything that
  // is not symmetric positive definite.
  Eigen::MatrixXd cholesky_factor(Eigen::Index d) const {
    if (full_.has_value()) {
      if (full_->rows() != d || full_->cols() != d)
        throw InvalidInput("covariance spec has wrong dimension");
      if (!full_->isApprox(full_->transpose(), 1e-12))
        throw InvalidInput("covariance spec is not symmetric");
      Eigen::LLT<Eigen::MatrixXd> llt(*full_);
      if (llt.info() != Eigen::Success)
        throw InvalidInput("covariance spec is not positive definite");
      return llt.matrixL();
    }
    if (diagonal_.has_value()) {
      if (diagonal_->size() != d)
        throw InvalidInput("diagonal covariance spec has wrong dimension");
      if ((diagonal_->array() < 0.0).any())
        throw InvalidInput("diagonal covariance spec must be nonnegative");
      return diagonal_->cwiseSqrt().asDiagonal();
    }
    // Zero is allowed for the scalar and diagonal forms (a degenerate but
    // useful corpus: identical draws within the group).
    if (scale_ < 0.0)
      throw InvalidInput("identity covariance scale must be nonnegative");
    return std::sqrt(scale_) * Eigen::MatrixXd::Identity(d, d);
  }

  Eigen::MatrixXd materialize(Eigen::Index d) const {
    const Eigen::MatrixXd l = cholesky_factor(d);
    return l * l.transpose();
  }

 private:
  double scale_ = 1.0;
  std::optional<Eigen::VectorXd> diagonal_;
  std::optional<Eigen::MatrixXd> full_;
};

// A named population group (language or gender) with an additive mean shift
// and a sampling probability.
struct GroupSpec {
  std::string name;
  Eigen::VectorXd shift;  // empty = zero shift
  double prob = 1.0;
};

struct SimConfig {
  Eigen::Index dim = 0;
  int n_speakers = 0;
  int sessions_min = 0;  // inclusive range; equal values fix the count
  int sessions_max = 0;
  CovSpec between = CovSpec::scaled_identity(1.0);
  CovSpec within = CovSpec::scaled_identity(1.0);
  std::vector<GroupSpec> languages;
  std::vector<GroupSpec> genders;
  std::string dataset = "sim";
  std::uint64_t seed = 0;

  void validate() const {
    require(dim > 0, "simulation dimension must be positive");
    require(n_speakers > 0, "simulation needs at least one speaker");
    require(sessions_min > 0 && sessions_max >= sessions_min,
            "bad sessions-per-speaker range");
    require(!languages.empty(), "at least one language group is required");
    require(!genders.empty(), "at least one gender group is required");
    require(!is_unknown(dataset) && !contains_whitespace(dataset),
            "bad dataset name");
    const auto check_groups = [this](const std::vector<GroupSpec> &groups,
                                     const char *what) {
      double total = 0.0;
      for (const auto &g : groups) {
        require(!g.name.empty() && !contains_whitespace(g.name),
                std::string(what) + " group name must be non-empty");
        require(g.prob >= 0.0, std::string(what) + " probability is negative");
        require(g.shift.size() == 0 || g.shift.size() == dim,
                std::string(what) + " shift has wrong dimension");
        total += g.prob;
      }
      require(std::abs(total - 1.0) <= 1e-9,
              std::string(what) + " probabilities must sum to 1");
    };
    check_groups(languages, "language");
    check_groups(genders, "gender");
  }
};

namespace detail {

inline std::size_t draw_group(const std::vector<GroupSpec> &groups,
                              std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    acc += groups[i].prob;
    if (u < acc) return i;
  }
  return groups.size() - 1;
}

inline Eigen::VectorXd draw_normal(Eigen::Index d, std::mt19937_64 &rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = unit(rng);
  return z;
}

}  // namespace detail

// Draws the corpus: per speaker a gender, a language, an identity vector
// y ~ N(shift_lang + shift_gender, B), and per session w ~ N(y, W).  Record
// ids are "<dataset>-spk<i>-s<j>"; all labels are populated.
inline EmbeddingSet generate_corpus(const SimConfig &config) {
  config.validate();
  const Eigen::Index d = config.dim;
  const Eigen::MatrixXd l_between = config.between.cholesky_factor(d);
  const Eigen::MatrixXd l_within = config.within.cholesky_factor(d);

  std::mt19937_64 rng(config.seed);
  std::vector<EmbeddingRecord> records;
  for (int s = 0; s < config.n_speakers; ++s) {
    const std::size_t gi = detail::draw_group(config.genders, rng);
    const std::size_t li = detail::draw_group(config.languages, rng);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    if (config.languages[li].shift.size() > 0)
      mean += config.languages[li].shift;
    if (config.genders[gi].shift.size() > 0) mean += config.genders[gi].shift;
    const Eigen::VectorXd identity =
        mean + l_between * detail::draw_normal(d, rng);

    int sessions = config.sessions_min;
    if (config.sessions_max > config.sessions_min) {
      std::uniform_int_distribution<int> pick(config.sessions_min,
                                              config.sessions_max);
      sessions = pick(rng);
    }
    const std::string speaker =
        config.dataset + "-spk" + std::to_string(s);
    for (int j = 0; j < sessions; ++j) {
      EmbeddingRecord rec;
      rec.id = speaker + "-s" + std::to_string(j);
      rec.vector = identity + l_within * detail::draw_normal(d, rng);
      rec.speaker = speaker;
      rec.gender = parse_gender(config.genders[gi].name);
      rec.language = config.languages[li].name;
      rec.dataset = config.dataset;
      records.push_back(std::move(rec));
    }
  }
  return EmbeddingSet(std::move(records));
}

struct Protocol {
  ModelRegistry registry;
  TrialList trials;  // keyed
};

// Splits each speaker's sessions into the first `enroll_sessions` (the
// model) and the rest (test segments), then samples keyed trials without
// replacement: n_target same-speaker pairs and n_nontarget cross-speaker
// pairs.  Model ids equal speaker labels.
inline Protocol generate_protocol(const EmbeddingSet &set, int enroll_sessions,
                                  std::size_t n_target,
                                  std::size_t n_nontarget,
                                  std::uint64_t seed) {
  require(enroll_sessions > 0, "enrollment needs at least one session");

  std::vector<std::string> speaker_order;
  std::unordered_map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto &rec = set[i];
    if (is_unknown(rec.speaker))
      throw InvalidInput("record '" + rec.id + "' has no speaker label");
    auto [it, inserted] = by_speaker.emplace(rec.speaker,
                                             std::vector<std::size_t>{});
    if (inserted) speaker_order.push_back(rec.speaker);
    it->second.push_back(i);
  }

  Protocol protocol;
  std::vector<std::pair<std::string, std::string>> segment_of;  // id, speaker
  for (const auto &speaker : speaker_order) {
    const auto &sessions = by_speaker[speaker];
    if (sessions.size() < static_cast<std::size_t>(enroll_sessions))
      throw InvalidInput("speaker '" + speaker + "' has " +
                         std::to_string(sessions.size()) +
                         " sessions, needs " +
                         std::to_string(enroll_sessions) + " to enroll");
    std::vector<std::string> enroll_ids;
    for (int j = 0; j < enroll_sessions; ++j)
      enroll_ids.push_back(set[sessions[static_cast<std::size_t>(j)]].id);
    protocol.registry.add(speaker, std::move(enroll_ids));
    for (std::size_t j = static_cast<std::size_t>(enroll_sessions);
         j < sessions.size(); ++j)
      segment_of.emplace_back(set[sessions[j]].id, speaker);
  }

  std::vector<Trial> target_pool, nontarget_pool;
  for (const auto &speaker : speaker_order)
    for (const auto &[seg_id, seg_speaker] : segment_of) {
      if (seg_speaker == speaker)
        target_pool.push_back({speaker, seg_id});
      else
        nontarget_pool.push_back({speaker, seg_id});
    }

  if (n_target > target_pool.size())
    throw InvalidInput("requested " + std::to_string(n_target) +
                       " target trials but only " +
                       std::to_string(target_pool.size()) + " pairs exist");
  if (n_nontarget > nontarget_pool.size())
    throw InvalidInput("requested " + std::to_string(n_nontarget) +
                       " nontarget trials but only " +
                       std::to_string(nontarget_pool.size()) +
                       " pairs exist");

  std::mt19937_64 rng(seed);
  std::shuffle(target_pool.begin(), target_pool.end(), rng);
  std::shuffle(nontarget_pool.begin(), nontarget_pool.end(), rng);

  std::vector<Trial> trials;
  std::vector<TrialKey> key;
  trials.reserve(n_target + n_nontarget);
  for (std::size_t i = 0; i < n_target; ++i) {
    trials.push_back(std::move(target_pool[i]));
    key.push_back(TrialKey::target);
  }
  for (std::size_t i = 0; i < n_nontarget; ++i) {
    trials.push_back(std::move(nontarget_pool[i]));
    key.push_back(TrialKey::nontarget);
  }
  protocol.trials = TrialList(std::move(trials), std::move(key));
  return protocol;
}

}  // namespace msv
