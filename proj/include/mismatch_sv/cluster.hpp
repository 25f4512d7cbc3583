// mismatch_sv/cluster.hpp

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

// Unsupervised clustering: Lloyd k-means, agglomerative clustering under
// average-linkage cosine distance, cosine gender classification, and the
// two-step cluster-then-refine scheme used for language discovery.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mismatch_sv/preprocess.hpp"
#include "mismatch_sv/types.hpp"

namespace msv {

// Labels are aligned with the input set's record order; centroids are row k
// of `centroids` for cluster k; inertia is the sum of squared Euclidean
// distances of each record to its assigned centroid.
struct ClusteringResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // K x d
  double inertia = 0.0;

  int num_clusters() const { return static_cast<int>(centroids.rows()); }
};

struct KmeansOptions {
  int max_iter = 100;
  double tol = 1e-6;
};

// Either explicit initial centroids (K x d) or K records drawn at random.
struct KmeansInit {
  static KmeansInit centroids(Eigen::MatrixXd c) {
    KmeansInit init;
    init.explicit_centroids = std::move(c);
    return init;
  }
  static KmeansInit seeded(std::uint64_t seed) {
    KmeansInit init;
    init.seed = seed;
    return init;
  }

  std::optional<Eigen::MatrixXd> explicit_centroids;
  std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::MatrixXd stack_vectors(const EmbeddingSet &set) {
  Eigen::MatrixXd m(set.size(), set.dim());
  for (std::size_t i = 0; i < set.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = set[i].vector.transpose();
  return m;
}

// K distinct record indices, deterministic per seed.
inline std::vector<std::size_t> sample_indices(std::size_t n, int k,
                                               std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace detail

// Lloyd's algorithm with Euclidean distance.  Deterministic given the init:
// assignment ties go to the lowest centroid index, and a cluster left empty
// is reseeded to the record farthest from its assigned centroid (ties to the
// lowest record index).  Iterates until the largest centroid move is below
// tol or max_iter is reached.
inline ClusteringResult kmeans(const EmbeddingSet &set, int K,
                               const KmeansInit &init,
                               const KmeansOptions &opts = {}) {
  const std::size_t n = set.size();
  require(K > 0, "K must be positive");
  require(static_cast<std::size_t>(K) <= n,
          "K=" + std::to_string(K) + " exceeds number of records " +
              std::to_string(n));

  const Eigen::MatrixXd data = detail::stack_vectors(set);
  const auto d = set.dim();

  Eigen::MatrixXd centroids(K, d);
  if (init.explicit_centroids.has_value()) {
    require(init.explicit_centroids->rows() == K &&
                init.explicit_centroids->cols() == d,
            "explicit centroids must be K x d");
    centroids = *init.explicit_centroids;
  } else {
    auto idx = detail::sample_indices(n, K, init.seed);
    for (int k = 0; k < K; ++k)
      centroids.row(k) = data.row(static_cast<Eigen::Index>(idx[k]));
  }

  std::vector<int> labels(n, 0);
  std::vector<double> dist(n, 0.0);
  double prev_inertia = std::numeric_limits<double>::infinity();

  const auto assign = [&]() {
    parallel_for(n, [&](std::size_t i) {
      int best = 0;
      double best_d = (data.row(static_cast<Eigen::Index>(i)) -
                       centroids.row(0)).squaredNorm();
      for (int k = 1; k < K; ++k) {
        const double dk = (data.row(static_cast<Eigen::Index>(i)) -
                           centroids.row(k)).squaredNorm();
        if (dk < best_d) {
          best_d = dk;
          best = k;
        }
      }
      labels[i] = best;
      dist[i] = best_d;
    });
    // Reseed empty clusters from the current farthest records, never
    // stealing the sole member of another cluster.
    std::vector<int> counts(K, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(labels[i])];
    for (int k = 0; k < K; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(labels[i])] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      --counts[static_cast<std::size_t>(labels[far])];
      labels[far] = k;
      counts[static_cast<std::size_t>(k)] = 1;
      centroids.row(k) = data.row(static_cast<Eigen::Index>(far));
      dist[far] = 0.0;
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += dist[i];
    return inertia;
  };

  double inertia = assign();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (inertia > prev_inertia * (1.0 + 1e-12) + 1e-12)
      throw NumericalError("k-means objective increased; this is a bug");
    prev_inertia = inertia;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, d);
    std::vector<int> counts(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(labels[i]) += data.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(labels[i])];
    }
    double shift = 0.0;
    for (int k = 0; k < K; ++k) {
      Eigen::RowVectorXd updated =
          sums.row(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
      shift = std::max(shift, (updated - centroids.row(k)).norm());
      centroids.row(k) = updated;
    }
    inertia = assign();
    if (shift < opts.tol) break;
  }

  ClusteringResult result;
  result.labels = std::move(labels);
  result.centroids = std::move(centroids);
  result.inertia = inertia;
  return result;
}

// Bottom-up agglomerative clustering under cosine distance (1 - cosine
// similarity) with average linkage, stopped at K clusters.  Merge order is
// deterministic: among equal distances the pair with the lexicographically
// smallest (i, j) cluster indices wins, where a merged cluster keeps the
// smaller index (equal to its smallest member record index).  Centroids are
// the plain means of the member vectors.
inline ClusteringResult ahc(const EmbeddingSet &set, int K) {
  const std::size_t n = set.size();
  require(K > 0, "K must be positive");
  require(static_cast<std::size_t>(K) <= n,
          "K=" + std::to_string(K) + " exceeds number of records " +
              std::to_string(n));

  for (const auto &rec : set)
    if (rec.vector.norm() == 0.0)
      throw NumericalError("cosine distance undefined for zero vector '" +
                           rec.id + "'");

  const Eigen::MatrixXd data = detail::stack_vectors(set);
  Eigen::VectorXd norms(n);
  for (std::size_t i = 0; i < n; ++i)
    norms[static_cast<Eigen::Index>(i)] = data.row(static_cast<Eigen::Index>(i)).norm();

  Eigen::MatrixXd dist(n, n);
  parallel_for(n, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    dist(ii, ii) = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double cos = data.row(ii).dot(data.row(jj)) / (norms[ii] * norms[jj]);
      const double cd = 1.0 - std::clamp(cos, -1.0, 1.0);
      dist(ii, jj) = cd;
      dist(jj, ii) = cd;
    }
  });

  std::vector<bool> active(n, true);
  std::vector<int> size(n, 1);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};

  // Nearest active neighbour per active cluster (smallest partner index
  // among equal distances).
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> nn(n, 0);
  std::vector<double> nn_dist(n, kInf);
  const auto recompute_nn = [&](std::size_t c) {
    nn_dist[c] = kInf;
    nn[c] = c;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == c || !active[j]) continue;
      const double dj = dist(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
      if (dj < nn_dist[c]) {
        nn_dist[c] = dj;
        nn[c] = j;
      }
    }
  };
  for (std::size_t c = 0; c < n; ++c) recompute_nn(c);

  std::size_t clusters = n;
  while (clusters > static_cast<std::size_t>(K)) {
    std::size_t best = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c]) continue;
      if (best == n || nn_dist[c] < nn_dist[best]) best = c;
    }
    const std::size_t i = std::min(best, nn[best]);
    const std::size_t j = std::max(best, nn[best]);

    // Average-linkage update: d(k, i+j) is the size-weighted mean of the
    // member-pairwise distances, exact under Lance-Williams.
    const double wi = size[i], wj = size[j];
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == i || c == j) continue;
      const auto cc = static_cast<Eigen::Index>(c);
      const double merged =
          (wi * dist(static_cast<Eigen::Index>(i), cc) +
           wj * dist(static_cast<Eigen::Index>(j), cc)) /
          (wi + wj);
      dist(static_cast<Eigen::Index>(i), cc) = merged;
      dist(cc, static_cast<Eigen::Index>(i)) = merged;
    }
    active[j] = false;
    size[i] += size[j];
    members[i].insert(members[i].end(), members[j].begin(), members[j].end());
    members[j].clear();
    --clusters;
    if (clusters == static_cast<std::size_t>(K)) break;

    recompute_nn(i);
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == i) continue;
      if (nn[c] == i || nn[c] == j) {
        recompute_nn(c);
      } else {
        const double di =
            dist(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i));
        if (di < nn_dist[c] || (di == nn_dist[c] && i < nn[c])) {
          nn_dist[c] = di;
          nn[c] = i;
        }
      }
    }
  }

  // Active clusters are already ordered by their smallest member index.
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < n; ++c)
    if (active[c]) order.push_back(c);

  ClusteringResult result;
  result.labels.assign(n, -1);
  result.centroids.resize(static_cast<Eigen::Index>(order.size()), set.dim());
  for (std::size_t k = 0; k < order.size(); ++k) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(set.dim());
    for (std::size_t m : members[order[k]]) {
      result.labels[m] = static_cast<int>(k);
      sum += set[m].vector;
    }
    result.centroids.row(static_cast<Eigen::Index>(k)) =
        (sum / static_cast<double>(members[order[k]].size())).transpose();
  }
  double inertia = 0.0;
  for (std::size_t m = 0; m < n; ++m)
    inertia += (set[m].vector.transpose() -
                result.centroids.row(result.labels[m])).squaredNorm();
  result.inertia = inertia;
  return result;
}

// Mean embedding per gender, the cosine reference for classification.
struct GenderModel {
  Eigen::VectorXd male_mean;
  Eigen::VectorXd female_mean;
};

inline GenderModel fit_gender_model(const EmbeddingSet &set) {
  Eigen::VectorXd male = Eigen::VectorXd::Zero(set.dim());
  Eigen::VectorXd female = Eigen::VectorXd::Zero(set.dim());
  int n_male = 0, n_female = 0;
  for (const auto &rec : set) {
    if (rec.gender == Gender::male) {
      male += rec.vector;
      ++n_male;
    } else if (rec.gender == Gender::female) {
      female += rec.vector;
      ++n_female;
    }
  }
  require(n_male > 0 && n_female > 0,
          "gender model needs at least one record of each gender");
  GenderModel model;
  model.male_mean = male / n_male;
  model.female_mean = female / n_female;
  if (model.male_mean.norm() == 0.0 || model.female_mean.norm() == 0.0)
    throw NumericalError("a gender mean vector is zero");
  return model;
}

// Assigns each record the gender whose mean has the larger cosine
// similarity; an exact tie maps to unknown.  Aligned with the set order.
inline std::vector<Gender> classify_gender(const EmbeddingSet &set,
                                           const GenderModel &model) {
  require(set.dim() == model.male_mean.size(),
          "gender model dimension does not match embeddings");
  if (model.male_mean.norm() == 0.0 || model.female_mean.norm() == 0.0)
    throw NumericalError("gender model has a zero mean vector");
  for (const auto &rec : set)
    if (rec.vector.norm() == 0.0)
      throw NumericalError("cosine undefined for zero vector '" + rec.id +
                           "'");
  std::vector<Gender> out(set.size());
  const Eigen::VectorXd m = model.male_mean / model.male_mean.norm();
  const Eigen::VectorXd f = model.female_mean / model.female_mean.norm();
  parallel_for(set.size(), [&](std::size_t i) {
    const double norm = set[i].vector.norm();
    const double cm = set[i].vector.dot(m) / norm;
    const double cf = set[i].vector.dot(f) / norm;
    out[i] = cm > cf ? Gender::male : (cf > cm ? Gender::female : Gender::unknown);
  });
  return out;
}

enum class TwoStepInit { subspace, ahc };

// Cluster-then-refine: a first clustering pass on a different representation
// picks the initial centroids, then full-space k-means refines them.
//
//   subspace: project each vector to V^T w (optionally only the leading
//             subspace_dims coordinates), run seeded k-means there, and map
//             each cluster back to the mean of its members' original vectors.
//   ahc:      agglomerative clustering down to K; its centroids initialize.
//
// The returned result is the second-pass k-means output.
inline ClusteringResult two_step_cluster(
    const EmbeddingSet &set, int K, TwoStepInit init_mode,
    const SubspaceModel *subspace = nullptr, std::uint64_t seed = 0,
    const KmeansOptions &opts = {}, int subspace_dims = 0) {
  Eigen::MatrixXd init_centroids(K, set.dim());

  if (init_mode == TwoStepInit::ahc) {
    ClusteringResult first = ahc(set, K);
    init_centroids = first.centroids;
  } else {
    require(subspace != nullptr && subspace->k() >= 1,
            "subspace initialization needs a subspace model with k >= 1");
    require(subspace->dim() == set.dim(),
            "subspace model dimension does not match embeddings");
    Eigen::Index use = subspace->k();
    if (subspace_dims > 0)
      use = std::min<Eigen::Index>(use, subspace_dims);
    const Eigen::MatrixXd basis = subspace->basis.leftCols(use);

    std::vector<EmbeddingRecord> projected(set.records());
    for (std::size_t i = 0; i < projected.size(); ++i)
      projected[i].vector = basis.transpose() * set[i].vector;
    ClusteringResult first =
        kmeans(EmbeddingSet(std::move(projected)), K, KmeansInit::seeded(seed), opts);

    // Map step-1 clusters to full-space centroids (means of the original
    // vectors of each cluster's members).
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, set.dim());
    std::vector<int> counts(K, 0);
    for (std::size_t i = 0; i < set.size(); ++i) {
      sums.row(first.labels[i]) += set[i].vector.transpose();
      ++counts[static_cast<std::size_t>(first.labels[i])];
    }
    for (int k = 0; k < K; ++k)
      init_centroids.row(k) = sums.row(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
  }

  return kmeans(set, K, KmeansInit::centroids(init_centroids), opts);
}

// Fraction of records whose cluster label matches the reference under the
// best bijective cluster-to-class assignment (exhaustive over permutations;
// intended for small K).
inline double clustering_accuracy(const std::vector<int> &labels,
                                  const std::vector<int> &reference, int K) {
  require(labels.size() == reference.size(),
          "label vectors must have equal length");
  require(K >= 1 && K <= 8, "accuracy evaluation supports 1 <= K <= 8");
  Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(K, K);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < K, "cluster label out of range");
    require(reference[i] >= 0 && reference[i] < K,
            "reference label out of range");
    ++confusion(labels[i], reference[i]);
  }
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  long best = 0;
  do {
    long hits = 0;
    for (int k = 0; k < K; ++k)
      hits += confusion(k, perm[static_cast<std::size_t>(k)]);
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return labels.empty() ? 1.0
                        : static_cast<double>(best) /
                              static_cast<double>(labels.size());
}

// True when two clusterings of the same records induce the same partition.
inline bool same_partition(const std::vector<int> &a, const std::vector<int> &b,
                           int K) {
  return clustering_accuracy(a, b, K) == 1.0;
}

}  // namespace msv
