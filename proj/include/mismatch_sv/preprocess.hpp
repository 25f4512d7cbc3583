// mismatch_sv/preprocess.hpp

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

// Embedding-space compensation: centering/whitening, length normalization,
// and removal of nuisance subspaces spanned by group-mean directions
// (dataset-wise or language-wise, optionally crossed with gender).

#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mismatch_sv/io.hpp"
#include "mismatch_sv/types.hpp"

namespace msv {

// Centering + decorrelating transform fit on one dataset.
struct WhitenModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd transform;

  Eigen::Index dim() const { return mean.size(); }
};

// Orthonormal basis of directions to project out, with the label keys the
// groups were built from (e.g. "dataset,gender" or "language,gender").
struct SubspaceModel {
  Eigen::MatrixXd basis;  // d x k, orthonormal columns
  std::string grouping;

  Eigen::Index dim() const { return basis.rows(); }
  Eigen::Index k() const { return basis.cols(); }
};

namespace detail {

// Population covariance (1/n) about the sample mean.
inline Eigen::MatrixXd population_covariance(const EmbeddingSet &set,
                                             Eigen::VectorXd &mean_out) {
  const auto n = static_cast<double>(set.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(set.dim());
  for (const auto &rec : set) mean += rec.vector;
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(set.dim(), set.dim());
  for (const auto &rec : set) {
    Eigen::VectorXd c = rec.vector - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c, 1.0 / n);
  }
  cov.triangularView<Eigen::StrictlyUpper>() =
      cov.transpose().triangularView<Eigen::StrictlyUpper>();
  mean_out = std::move(mean);
  return cov;
}

inline std::string label_for_key(const EmbeddingRecord &rec,
                                 const std::string &key) {
  if (key == "speaker") return rec.speaker;
  if (key == "gender") return gender_token(rec.gender);
  if (key == "language") return rec.language;
  if (key == "dataset") return rec.dataset;
  throw InvalidInput("unknown grouping key '" + key +
                     "' (expected speaker, gender, language or dataset)");
}

}  // namespace detail

// Fits mean and whitening transform Lambda^{-1/2} U^T from the symmetric
// eigendecomposition of (covariance + ridge * I), eigenvalues floored at
// ridge.  The default ridge is 1e-6 * trace(cov) / d.
inline WhitenModel fit_whiten(const EmbeddingSet &set,
                              std::optional<double> ridge = std::nullopt) {
  require(set.size() >= 2, "whitening needs at least 2 records");
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov = detail::population_covariance(set, mean);

  const auto d = set.dim();
  double r = ridge.value_or(1e-6 * cov.trace() / static_cast<double>(d));
  if (r < 0.0) throw InvalidInput("whitening ridge must be nonnegative");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      cov + r * Eigen::MatrixXd::Identity(d, d));
  if (eig.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of covariance failed");

  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(r);
  if (lambda.minCoeff() <= 0.0)
    throw NumericalError(
        "covariance is singular and ridge is zero; cannot whiten");

  WhitenModel model;
  model.mean = std::move(mean);
  model.transform =
      lambda.cwiseInverse().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  return model;
}

inline EmbeddingSet apply_whiten(const EmbeddingSet &set,
                                 const WhitenModel &model) {
  require(set.dim() == model.dim(),
          "whitening model dimension " + std::to_string(model.dim()) +
              " does not match embeddings of dimension " +
              std::to_string(set.dim()));
  return set.map_vectors([&](std::size_t, const Eigen::VectorXd &v) {
    return Eigen::VectorXd(model.transform * (v - model.mean));
  });
}

inline EmbeddingSet length_normalize(const EmbeddingSet &set) {
  for (const auto &rec : set)
    if (rec.vector.norm() == 0.0)
      throw NumericalError("cannot length-normalize zero vector '" + rec.id +
                           "'");
  return set.map_vectors([](std::size_t, const Eigen::VectorXd &v) {
    return Eigen::VectorXd(v / v.norm());
  });
}

// Builds the nuisance basis from per-group mean embeddings.  Groups are the
// distinct value tuples of `grouping` keys; records with an unknown value in
// any key are skipped.  The group means are centered by their unweighted
// average and the basis is the top-k left singular vectors of the centered
// mean matrix.  k defaults to the numerical rank (at most G-1); asking for
// more than G-1 directions requires allow_rank_deficient, which admits the
// trailing near-null directions up to min(G, d).
inline SubspaceModel fit_nuisance_subspace(
    const EmbeddingSet &set, const std::vector<std::string> &grouping,
    std::optional<int> k = std::nullopt, bool allow_rank_deficient = false) {
  require(!grouping.empty(), "grouping key list is empty");

  std::map<std::vector<std::string>, std::pair<Eigen::VectorXd, int>> groups;
  for (const auto &rec : set) {
    std::vector<std::string> tuple;
    tuple.reserve(grouping.size());
    bool known = true;
    for (const auto &key : grouping) {
      std::string v = detail::label_for_key(rec, key);
      if (is_unknown(v)) {
        known = false;
        break;
      }
      tuple.push_back(std::move(v));
    }
    if (!known) continue;
    auto it = groups.find(tuple);
    if (it == groups.end()) {
      groups.emplace(std::move(tuple),
                     std::make_pair(Eigen::VectorXd(rec.vector), 1));
    } else {
      it->second.first += rec.vector;
      it->second.second += 1;
    }
  }

  const auto G = static_cast<Eigen::Index>(groups.size());
  if (G < 2)
    throw InvalidInput("nuisance subspace needs at least 2 groups, found " +
                       std::to_string(G));

  const auto d = set.dim();
  Eigen::MatrixXd means(d, G);
  Eigen::Index col = 0;
  for (auto &[tuple, acc] : groups)
    means.col(col++) = acc.first / static_cast<double>(acc.second);
  Eigen::VectorXd center = means.rowwise().mean();
  means.colwise() -= center;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(means,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd &sv = svd.singularValues();
  const double tol = sv.size() == 0
                         ? 0.0
                         : sv[0] * static_cast<double>(std::max(d, G)) *
                               Eigen::NumTraits<double>::epsilon();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) ++rank;

  Eigen::Index k_used;
  if (k.has_value()) {
    require(*k >= 0, "subspace dimension k must be nonnegative");
    k_used = *k;
    const Eigen::Index limit =
        allow_rank_deficient ? std::min(G, d) : G - 1;
    if (k_used > limit)
      throw InvalidInput("requested k=" + std::to_string(k_used) +
                         " exceeds limit " + std::to_string(limit) + " for " +
                         std::to_string(G) + " groups");
  } else {
    k_used = rank;
  }

  std::string descriptor;
  for (std::size_t i = 0; i < grouping.size(); ++i) {
    if (i > 0) descriptor += ",";
    descriptor += grouping[i];
  }

  SubspaceModel model;
  model.basis = svd.matrixU().leftCols(k_used);
  model.grouping = std::move(descriptor);
  return model;
}

// w -> (I - V V^T) w; an empty basis is the identity map.
inline EmbeddingSet remove_subspace(const EmbeddingSet &set,
                                    const SubspaceModel &model) {
  if (model.k() == 0) return set;
  require(set.dim() == model.dim(),
          "subspace model dimension " + std::to_string(model.dim()) +
              " does not match embeddings of dimension " +
              std::to_string(set.dim()));
  return set.map_vectors([&](std::size_t, const Eigen::VectorXd &v) {
    return Eigen::VectorXd(v - model.basis * (model.basis.transpose() * v));
  });
}

inline void save_whiten(const WhitenModel &model, const std::string &path) {
  std::ofstream out = detail::open_output(path);
  out << "whiten d=" << model.dim() << '\n';
  detail::write_vector_row(out, model.mean);
  detail::write_matrix_rows(out, model.transform);
  detail::finish_output(out, path);
}

inline WhitenModel load_whiten(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  auto kv = detail::parse_header(path, in, "whiten");
  const auto d = static_cast<std::size_t>(detail::header_int(kv, path, "d"));
  WhitenModel model;
  model.mean = detail::read_vector_row(in, path, d);
  model.transform = detail::read_matrix_rows(in, path, d, d);
  return model;
}

inline void save_subspace(const SubspaceModel &model, const std::string &path) {
  require(!contains_whitespace(model.grouping),
          "grouping descriptor must not contain whitespace");
  std::ofstream out = detail::open_output(path);
  out << "subspace d=" << model.dim() << " k=" << model.k()
      << " grouping=" << model.grouping << '\n';
  detail::write_matrix_rows(out, model.basis);
  detail::finish_output(out, path);
}

inline SubspaceModel load_subspace(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  auto kv = detail::parse_header(path, in, "subspace");
  const auto d = static_cast<std::size_t>(detail::header_int(kv, path, "d"));
  const auto k = static_cast<std::size_t>(detail::header_int(kv, path, "k"));
  SubspaceModel model;
  model.grouping = kv.count("grouping") ? kv.at("grouping") : "";
  model.basis = k == 0 ? Eigen::MatrixXd(d, 0)
                       : detail::read_matrix_rows(in, path, d, k);
  return model;
}

}  // namespace msv
