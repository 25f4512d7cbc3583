// mismatch_sv/types.hpp

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

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mismatch_sv/common.hpp"

namespace msv {

// "-" marks an unknown speaker/language/dataset label in files and in memory.
inline constexpr const char *kUnknownLabel = "-";

inline bool is_unknown(const std::string &label) {
  return label.empty() || label == kUnknownLabel;
}

enum class Gender : std::uint8_t { male, female, unknown };

inline const char *gender_token(Gender g) {
  switch (g) {
    case Gender::male: return "m";
    case Gender::female: return "f";
    default: return "-";
  }
}

inline Gender parse_gender(std::string_view token) {
  if (token == "m") return Gender::male;
  if (token == "f") return Gender::female;
  if (token == "-") return Gender::unknown;
  throw InvalidInput("bad gender token '" + std::string(token) +
                     "' (expected m, f or -)");
}

// A (gender, language) cell, the unit of gender/language-dependent cohorts.
struct Category {
  Gender gender = Gender::unknown;
  std::string language = kUnknownLabel;

  bool operator==(const Category &o) const {
    return gender == o.gender && language == o.language;
  }
  std::string name() const {
    return std::string(gender_token(gender)) + "/" + language;
  }
};

struct CategoryHash {
  std::size_t operator()(const Category &c) const {
    return std::hash<std::string>()(c.language) * 3u +
           static_cast<std::size_t>(c.gender);
  }
};

using CategoryMap = std::unordered_map<std::string, Category>;

// One identified embedding with optional metadata labels.
struct EmbeddingRecord {
  std::string id;
  Eigen::VectorXd vector;
  std::string speaker = kUnknownLabel;
  Gender gender = Gender::unknown;
  std::string language = kUnknownLabel;
  std::string dataset = kUnknownLabel;
};

// An ordered collection of records sharing one dimension, with unique ids.
// Immutable once constructed; transformations build new sets.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  explicit EmbeddingSet(std::vector<EmbeddingRecord> records)
      : records_(std::move(records)) {
    index_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const EmbeddingRecord &r = records_[i];
      require(!r.id.empty(), "embedding id must be non-empty");
      require(!contains_whitespace(r.id),
              "embedding id '" + r.id + "' contains whitespace");
      if (i == 0) {
        dim_ = r.vector.size();
        require(dim_ > 0, "embedding '" + r.id + "' has zero dimension");
      } else if (r.vector.size() != dim_) {
        throw InvalidInput("embedding '" + r.id + "' has dimension " +
                           std::to_string(r.vector.size()) + ", expected " +
                           std::to_string(dim_));
      }
      if (!r.vector.allFinite())
        throw InvalidInput("embedding '" + r.id +
                           "' has non-finite components");
      if (!index_.emplace(r.id, i).second)
        throw InvalidInput("duplicate embedding id '" + r.id + "'");
    }
  }

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const EmbeddingRecord &operator[](std::size_t i) const { return records_[i]; }
  const std::vector<EmbeddingRecord> &records() const { return records_; }

  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  const EmbeddingRecord *find(const std::string &id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  std::size_t index_of(const std::string &id) const {
    auto it = index_.find(id);
    require(it != index_.end(), "unknown embedding id '" + id + "'");
    return it->second;
  }

  bool contains(const std::string &id) const { return index_.count(id) != 0; }

  // New set with the same ids/labels and vectors f(i, old_vector).
  template <typename F>
  EmbeddingSet map_vectors(F &&f) const {
    std::vector<EmbeddingRecord> out(records_);
    parallel_for(out.size(), [&](std::size_t i) {
      out[i].vector = f(i, records_[i].vector);
    });
    return EmbeddingSet(std::move(out));
  }

 private:
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  Eigen::Index dim_ = 0;
};

inline EmbeddingSet merge_sets(const std::vector<EmbeddingSet> &sets) {
  std::vector<EmbeddingRecord> all;
  for (const auto &s : sets) all.insert(all.end(), s.begin(), s.end());
  return EmbeddingSet(std::move(all));
}

enum class TrialKey : std::uint8_t { target, nontarget };

struct Trial {
  std::string model_id;
  std::string segment_id;

  bool operator==(const Trial &o) const {
    return model_id == o.model_id && segment_id == o.segment_id;
  }
};

// Ordered (model, segment) pairs, optionally with a target/nontarget key.
class TrialList {
 public:
  TrialList() = default;

  explicit TrialList(std::vector<Trial> trials) : trials_(std::move(trials)) {}

  TrialList(std::initializer_list<Trial> trials) : trials_(trials) {}

  TrialList(std::vector<Trial> trials, std::vector<TrialKey> key)
      : trials_(std::move(trials)), key_(std::move(key)) {
    require(key_->size() == trials_.size(),
            "trial key length does not match trial count");
  }

  std::size_t size() const { return trials_.size(); }
  bool empty() const { return trials_.empty(); }
  const std::vector<Trial> &trials() const { return trials_; }
  const Trial &operator[](std::size_t i) const { return trials_[i]; }

  bool has_key() const { return key_.has_value(); }
  const std::vector<TrialKey> &key() const {
    require(key_.has_value(), "trial list has no key");
    return *key_;
  }

 private:
  std::vector<Trial> trials_;
  std::optional<std::vector<TrialKey>> key_;
};

// Scores aligned one-to-one with a trial list.
class ScoreSet {
 public:
  ScoreSet() = default;

  ScoreSet(TrialList trials, std::vector<double> scores)
      : trials_(std::move(trials)), scores_(std::move(scores)) {
    require(scores_.size() == trials_.size(),
            "score count does not match trial count");
    for (std::size_t i = 0; i < scores_.size(); ++i)
      if (!std::isfinite(scores_[i]))
        throw InvalidInput("non-finite score at trial " + std::to_string(i));
  }

  std::size_t size() const { return scores_.size(); }
  const TrialList &trials() const { return trials_; }
  const std::vector<double> &scores() const { return scores_; }

  ScoreSet with_scores(std::vector<double> scores) const {
    return ScoreSet(trials_, std::move(scores));
  }

 private:
  TrialList trials_;
  std::vector<double> scores_;
};

// model_id -> enrollment segment ids, in file/insertion order.
class ModelRegistry {
 public:
  void add(std::string model_id, std::vector<std::string> segments) {
    require(!segments.empty(),
            "model '" + model_id + "' has an empty segment list");
    require(index_.emplace(model_id, entries_.size()).second,
            "duplicate model id '" + model_id + "' in registry");
    entries_.emplace_back(std::move(model_id), std::move(segments));
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, std::vector<std::string>>> &
  entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

// Majority value; ties (including a tie with "no majority") give fallback.
template <typename T>
T majority_or(const std::vector<T> &votes, T fallback) {
  std::map<T, int> counts;
  for (const T &v : votes) ++counts[v];
  int best = 0;
  bool tied = false;
  T winner = fallback;
  for (const auto &[value, count] : counts) {
    if (count > best) {
      best = count;
      winner = value;
      tied = false;
    } else if (count == best) {
      tied = true;
    }
  }
  return tied ? fallback : winner;
}

}  // namespace detail

// Pools enrollment segments into one record per model: arithmetic mean of the
// segment vectors, then length normalization.  Labels are decided by majority
// vote over the segments, ties falling back to unknown.
inline EmbeddingSet build_enrollment_models(const EmbeddingSet &set,
                                            const ModelRegistry &registry) {
  std::vector<EmbeddingRecord> models;
  models.reserve(registry.size());
  for (const auto &[model_id, segment_ids] : registry.entries()) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(set.dim());
    std::vector<std::string> speakers, languages, datasets;
    std::vector<Gender> genders;
    for (const std::string &seg : segment_ids) {
      const EmbeddingRecord *rec = set.find(seg);
      if (rec == nullptr)
        throw InvalidInput("model '" + model_id +
                           "' references missing segment '" + seg + "'");
      sum += rec->vector;
      speakers.push_back(rec->speaker);
      genders.push_back(rec->gender);
      languages.push_back(rec->language);
      datasets.push_back(rec->dataset);
    }
    Eigen::VectorXd mean = sum / static_cast<double>(segment_ids.size());
    const double norm = mean.norm();
    if (norm == 0.0)
      throw NumericalError("model '" + model_id +
                           "' pools to a zero-norm vector");
    EmbeddingRecord rec;
    rec.id = model_id;
    rec.vector = mean / norm;
    rec.speaker = detail::majority_or<std::string>(speakers, kUnknownLabel);
    rec.gender = detail::majority_or<Gender>(genders, Gender::unknown);
    rec.language = detail::majority_or<std::string>(languages, kUnknownLabel);
    rec.dataset = detail::majority_or<std::string>(datasets, kUnknownLabel);
    models.push_back(std::move(rec));
  }
  return EmbeddingSet(std::move(models));
}

}  // namespace msv
