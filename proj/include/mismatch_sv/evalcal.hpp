// mismatch_sv/evalcal.hpp

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

// Detection metrics (EER, minimum and actual cost, pooled or averaged over
// trial partitions), prior-weighted logistic calibration and fusion, and
// pseudo-trial derivation from cluster labels.
//
// The decision rule everywhere is "accept when score >= threshold", so
// P_miss(t) is the fraction of target scores below t and P_fa(t) the
// fraction of nontarget scores at or above t.  The detection cost for prior
// p is miss-normalized:
//
//   C(t) = (c_miss * p * P_miss + c_fa * (1-p) * P_fa) / (c_miss * p)
//
// reported as the mean over the configured priors.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mismatch_sv/cluster.hpp"
#include "mismatch_sv/io.hpp"
#include "mismatch_sv/types.hpp"

namespace msv {

struct CostParams {
  std::vector<double> p_targets{0.01, 0.005};
  double c_miss = 1.0;
  double c_fa = 1.0;

  void validate() const {
    require(!p_targets.empty(), "at least one target prior is required");
    for (double p : p_targets)
      require(p > 0.0 && p < 1.0, "target priors must lie in (0, 1)");
    require(c_miss > 0.0 && c_fa > 0.0, "costs must be positive");
  }

  double beta(double p) const { return c_fa * (1.0 - p) / (c_miss * p); }
};

namespace detail {

struct SweepPoint {
  double threshold;
  double p_miss;
  double p_fa;
};

inline void split_by_key(const ScoreSet &scores, std::vector<double> &targets,
                         std::vector<double> &nontargets) {
  const auto &key = scores.trials().key();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (key[i] == TrialKey::target)
      targets.push_back(scores.scores()[i]);
    else
      nontargets.push_back(scores.scores()[i]);
  }
  require(!targets.empty(), "no target trials in key");
  require(!nontargets.empty(), "no nontarget trials in key");
}

// Operating points at every distinct score threshold, ascending, plus the
// reject-all point (P_miss 1, P_fa 0).
inline std::vector<SweepPoint> roc_sweep(std::vector<double> targets,
                                         std::vector<double> nontargets) {
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());
  std::vector<double> thresholds;
  thresholds.reserve(targets.size() + nontargets.size());
  std::merge(targets.begin(), targets.end(), nontargets.begin(),
             nontargets.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const double nt = static_cast<double>(targets.size());
  const double nn = static_cast<double>(nontargets.size());
  std::vector<SweepPoint> sweep;
  sweep.reserve(thresholds.size() + 1);
  for (double t : thresholds) {
    const double below_t = static_cast<double>(
        std::lower_bound(targets.begin(), targets.end(), t) - targets.begin());
    const double at_or_above_n = static_cast<double>(
        nontargets.end() -
        std::lower_bound(nontargets.begin(), nontargets.end(), t));
    sweep.push_back({t, below_t / nt, at_or_above_n / nn});
  }
  sweep.push_back({std::numeric_limits<double>::infinity(), 1.0, 0.0});
  return sweep;
}

}  // namespace detail

// Equal error rate: the sweep is walked to the first point where
// P_miss - P_fa changes sign and the crossing is linearly interpolated
// between the adjacent operating points.
inline double eer(const ScoreSet &scores) {
  std::vector<double> targets, nontargets;
  detail::split_by_key(scores, targets, nontargets);
  const auto sweep = detail::roc_sweep(std::move(targets), std::move(nontargets));

  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const double diff = sweep[k].p_miss - sweep[k].p_fa;
    if (diff < 0.0) continue;
    if (diff == 0.0 || k == 0) return sweep[k].p_miss;
    const auto &lo = sweep[k - 1];
    const auto &hi = sweep[k];
    const double denom =
        (hi.p_miss - lo.p_miss) - (hi.p_fa - lo.p_fa);
    if (denom == 0.0) return lo.p_miss;
    const double t = (lo.p_fa - lo.p_miss) / denom;
    return lo.p_miss + t * (hi.p_miss - lo.p_miss);
  }
  return sweep.back().p_miss;  // unreachable: the sentinel has diff = 1
}

// Minimum detection cost: the best achievable operating point per prior,
// averaged over priors.  The reject-all point bounds it above by 1.
inline double min_cprimary(const ScoreSet &scores, const CostParams &params = {}) {
  params.validate();
  std::vector<double> targets, nontargets;
  detail::split_by_key(scores, targets, nontargets);
  const auto sweep = detail::roc_sweep(std::move(targets), std::move(nontargets));

  double sum = 0.0;
  for (double p : params.p_targets) {
    const double beta = params.beta(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto &pt : sweep)
      best = std::min(best, pt.p_miss + beta * pt.p_fa);
    sum += best;
  }
  return sum / static_cast<double>(params.p_targets.size());
}

// Actual detection cost of calibrated log-likelihood-ratio scores at the
// fixed Bayes threshold log(beta) per prior, averaged over priors.
inline double act_cprimary(const ScoreSet &scores, const CostParams &params = {}) {
  params.validate();
  std::vector<double> targets, nontargets;
  detail::split_by_key(scores, targets, nontargets);
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());
  const double nt = static_cast<double>(targets.size());
  const double nn = static_cast<double>(nontargets.size());

  double sum = 0.0;
  for (double p : params.p_targets) {
    const double beta = params.beta(p);
    const double threshold = std::log(beta);
    const double p_miss =
        static_cast<double>(std::lower_bound(targets.begin(), targets.end(),
                                             threshold) -
                            targets.begin()) /
        nt;
    const double p_fa =
        static_cast<double>(nontargets.end() -
                            std::lower_bound(nontargets.begin(),
                                             nontargets.end(), threshold)) /
        nn;
    sum += p_miss + beta * p_fa;
  }
  return sum / static_cast<double>(params.p_targets.size());
}

enum class Metric { eer, min_cprimary, act_cprimary };

inline double compute_metric(Metric metric, const ScoreSet &scores,
                             const CostParams &params = {}) {
  switch (metric) {
    case Metric::eer: return eer(scores);
    case Metric::min_cprimary: return min_cprimary(scores, params);
    default: return act_cprimary(scores, params);
  }
}

// Unweighted mean of the metric over trial categories.  `partition` is
// aligned with the trials; every cell must contain both classes.
inline double equalized_metric(const ScoreSet &scores,
                               const std::vector<std::string> &partition,
                               Metric metric, const CostParams &params = {}) {
  require(partition.size() == scores.size(),
          "partition is not aligned with trials");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    auto [it, inserted] = cells.emplace(partition[i], std::vector<std::size_t>{});
    if (inserted) order.push_back(partition[i]);
    it->second.push_back(i);
  }

  double sum = 0.0;
  for (const std::string &cell : order) {
    const auto &idx = cells[cell];
    std::vector<Trial> trials;
    std::vector<TrialKey> key;
    std::vector<double> vals;
    trials.reserve(idx.size());
    for (std::size_t i : idx) {
      trials.push_back(scores.trials()[i]);
      key.push_back(scores.trials().key()[i]);
      vals.push_back(scores.scores()[i]);
    }
    ScoreSet cell_scores(TrialList(std::move(trials), std::move(key)),
                         std::move(vals));
    try {
      sum += compute_metric(metric, cell_scores, params);
    } catch (const InvalidInput &e) {
      throw InvalidInput("partition cell '" + cell + "': " + e.what());
    }
  }
  return sum / static_cast<double>(order.size());
}

// Affine score-to-LLR map s -> a*s + b.
struct CalibrationModel {
  double scale = 1.0;
  double offset = 0.0;
};

// Affine combination of m subsystem scores.
struct FusionModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

namespace detail {

inline double softplus(double x) {
  // log(1 + e^x) without overflow.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// Prior-weighted logistic objective over rows X (n x m) with affine
// parameters theta = (w, b).  Targets and nontargets are re-weighted to the
// effective prior; an optional L2 penalty applies to w only.
struct LogisticProblem {
  const Eigen::MatrixXd &X;
  const std::vector<TrialKey> &key;
  double prior;
  double l2 = 0.0;

  double weight(TrialKey k, double n_t, double n_n) const {
    return k == TrialKey::target ? prior / n_t : (1.0 - prior) / n_n;
  }

  // Value, gradient and Hessian at theta (length m + 1, bias last).
  double evaluate(const Eigen::VectorXd &theta, Eigen::VectorXd *grad,
                  Eigen::MatrixXd *hess) const {
    const auto n = X.rows();
    const auto m = X.cols();
    const double logit_prior = std::log(prior / (1.0 - prior));
    double n_t = 0.0, n_n = 0.0;
    for (auto k : key) (k == TrialKey::target ? n_t : n_n) += 1.0;

    double obj = 0.0;
    if (grad != nullptr) grad->setZero(m + 1);
    if (hess != nullptr) hess->setZero(m + 1, m + 1);
    Eigen::VectorXd row(m + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      row.head(m) = X.row(i).transpose();
      row[m] = 1.0;
      const double z = theta.dot(row) + logit_prior;
      const double w = weight(key[static_cast<std::size_t>(i)], n_t, n_n);
      const bool is_target = key[static_cast<std::size_t>(i)] == TrialKey::target;
      obj += w * softplus(is_target ? -z : z);
      if (grad != nullptr) {
        const double dz = is_target ? -sigmoid(-z) : sigmoid(z);
        *grad += (w * dz) * row;
      }
      if (hess != nullptr) {
        const double s = sigmoid(z);
        hess->selfadjointView<Eigen::Lower>().rankUpdate(row, w * s * (1.0 - s));
      }
    }
    if (l2 > 0.0) {
      obj += 0.5 * l2 * theta.head(m).squaredNorm();
      if (grad != nullptr) grad->head(m) += l2 * theta.head(m);
      if (hess != nullptr)
        for (Eigen::Index j = 0; j < m; ++j) (*hess)(j, j) += l2;
    }
    if (hess != nullptr)
      hess->triangularView<Eigen::StrictlyUpper>() =
          hess->transpose().triangularView<Eigen::StrictlyUpper>();
    return obj;
  }
};

// Damped Newton descent to gradient norm <= grad_tol.  The objective is
// convex, so this is deterministic up to the starting point.
inline Eigen::VectorXd newton_minimize(const LogisticProblem &problem,
                                       Eigen::VectorXd theta,
                                       double grad_tol = 1e-8,
                                       int max_iter = 500) {
  const auto dim = theta.size();
  Eigen::VectorXd grad(dim);
  Eigen::MatrixXd hess(dim, dim);
  double obj = problem.evaluate(theta, &grad, &hess);
  for (int iter = 0; iter < max_iter; ++iter) {
    if (grad.norm() <= grad_tol) break;
    Eigen::MatrixXd damped = hess;
    damped.diagonal().array() += 1e-12;
    Eigen::VectorXd step = damped.ldlt().solve(-grad);
    if (!step.allFinite())
      throw NumericalError("logistic fit produced a non-finite step");
    double alpha = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Eigen::VectorXd cand = theta + alpha * step;
      const double cand_obj = problem.evaluate(cand, nullptr, nullptr);
      if (cand_obj <= obj + 1e-4 * alpha * grad.dot(step)) {
        theta = std::move(cand);
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;  // no descent possible at double precision
    obj = problem.evaluate(theta, &grad, &hess);
  }
  return theta;
}

inline Eigen::MatrixXd scores_as_column(const ScoreSet &scores) {
  Eigen::MatrixXd X(scores.size(), 1);
  for (std::size_t i = 0; i < scores.size(); ++i)
    X(static_cast<Eigen::Index>(i), 0) = scores.scores()[i];
  return X;
}

}  // namespace detail

// Prior-weighted logistic cross-entropy of scores interpreted as LLRs; the
// quantity calibration and fusion minimize, exposed for comparisons.
inline double weighted_cross_entropy(const ScoreSet &llr_scores, double prior) {
  require(prior > 0.0 && prior < 1.0, "effective prior must lie in (0, 1)");
  const Eigen::MatrixXd X = detail::scores_as_column(llr_scores);
  detail::LogisticProblem problem{X, llr_scores.trials().key(), prior, 0.0};
  Eigen::VectorXd identity(2);
  identity << 1.0, 0.0;
  return problem.evaluate(identity, nullptr, nullptr);
}

// Fits the affine calibration map by minimizing the prior-weighted logistic
// cross-entropy of a*s + b against the key.
inline CalibrationModel train_calibration(const ScoreSet &scores,
                                          double effective_prior,
                                          double init_scale = 1.0,
                                          double init_offset = 0.0) {
  require(effective_prior > 0.0 && effective_prior < 1.0,
          "effective prior must lie in (0, 1)");
  std::vector<double> targets, nontargets;
  detail::split_by_key(scores, targets, nontargets);

  const Eigen::MatrixXd X = detail::scores_as_column(scores);
  detail::LogisticProblem problem{X, scores.trials().key(), effective_prior,
                                  0.0};
  Eigen::VectorXd theta(2);
  theta << init_scale, init_offset;
  // Converge well past the 1e-8 gradient contract so the optimum is
  // reproducible to ~1e-8 in the parameters from any starting point.
  theta = detail::newton_minimize(problem, std::move(theta), 1e-10);
  return CalibrationModel{theta[0], theta[1]};
}

inline ScoreSet apply_calibration(const ScoreSet &scores,
                                  const CalibrationModel &model) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = model.scale * scores.scores()[i] + model.offset;
  return scores.with_scores(std::move(out));
}

// Fits weights and bias of the score-level fusion by L2-penalized
// prior-weighted logistic regression over the stacked subsystem scores.
// All subsystems must present identical trial lists.
inline FusionModel train_fusion(const std::vector<ScoreSet> &subsystems,
                                double effective_prior, double l2 = 1e-4) {
  require(!subsystems.empty(), "fusion needs at least one subsystem");
  require(effective_prior > 0.0 && effective_prior < 1.0,
          "effective prior must lie in (0, 1)");
  require(l2 >= 0.0, "l2 penalty must be nonnegative");
  const ScoreSet &first = subsystems.front();
  require(first.trials().has_key(), "fusion training needs a trial key");
  for (std::size_t s = 1; s < subsystems.size(); ++s) {
    const auto &other = subsystems[s].trials();
    require(other.size() == first.trials().size(),
            "subsystem " + std::to_string(s) + " has a different trial count");
    for (std::size_t i = 0; i < other.size(); ++i)
      if (!(other[i] == first.trials()[i]))
        throw InvalidInput("subsystem " + std::to_string(s) +
                           " trial " + std::to_string(i) + " is (" +
                           other[i].model_id + ", " + other[i].segment_id +
                           "), expected (" + first.trials()[i].model_id +
                           ", " + first.trials()[i].segment_id + ")");
  }
  std::vector<double> targets, nontargets;
  detail::split_by_key(first, targets, nontargets);

  const auto m = static_cast<Eigen::Index>(subsystems.size());
  Eigen::MatrixXd X(first.size(), m);
  for (Eigen::Index s = 0; s < m; ++s)
    for (std::size_t i = 0; i < first.size(); ++i)
      X(static_cast<Eigen::Index>(i), s) =
          subsystems[static_cast<std::size_t>(s)].scores()[i];

  detail::LogisticProblem problem{X, first.trials().key(), effective_prior, l2};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m + 1);
  theta = detail::newton_minimize(problem, std::move(theta), 1e-10);

  FusionModel model;
  model.weights = theta.head(m);
  model.bias = theta[m];
  return model;
}

inline ScoreSet apply_fusion(const std::vector<ScoreSet> &subsystems,
                             const FusionModel &model) {
  require(!subsystems.empty(), "fusion needs at least one subsystem");
  require(model.weights.size() ==
              static_cast<Eigen::Index>(subsystems.size()),
          "fusion model arity does not match subsystem count");
  const ScoreSet &first = subsystems.front();
  for (std::size_t s = 1; s < subsystems.size(); ++s)
    for (std::size_t i = 0; i < first.size(); ++i)
      if (!(subsystems[s].trials()[i] == first.trials()[i]))
        throw InvalidInput("subsystem trial lists are not aligned");
  std::vector<double> out(first.size(), model.bias);
  for (std::size_t s = 0; s < subsystems.size(); ++s)
    for (std::size_t i = 0; i < first.size(); ++i)
      out[i] += model.weights[static_cast<Eigen::Index>(s)] *
                subsystems[s].scores()[i];
  return first.with_scores(std::move(out));
}

// Derives a supervised trial set from cluster labels: one model per cluster
// (the length-normalized cluster mean) crossed against every record, keyed
// target when the record belongs to the cluster.
struct PseudoTrials {
  EmbeddingSet models;
  TrialList trials;
};

inline PseudoTrials derive_pseudo_trials(const EmbeddingSet &unlabeled,
                                         const ClusteringResult &clusters) {
  const int K = clusters.num_clusters();
  require(K >= 2, "pseudo trials need at least 2 clusters");
  require(clusters.labels.size() == unlabeled.size(),
          "clustering is not aligned with the embedding set");

  std::vector<int> counts(static_cast<std::size_t>(K), 0);
  for (int label : clusters.labels) ++counts[static_cast<std::size_t>(label)];
  for (int k = 0; k < K; ++k)
    if (counts[static_cast<std::size_t>(k)] == 0)
      throw InvalidInput("cluster " + std::to_string(k) + " is empty");

  std::vector<EmbeddingRecord> models;
  models.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(unlabeled.dim());
    for (std::size_t i = 0; i < unlabeled.size(); ++i)
      if (clusters.labels[i] == k) sum += unlabeled[i].vector;
    Eigen::VectorXd mean = sum / counts[static_cast<std::size_t>(k)];
    const double norm = mean.norm();
    if (norm == 0.0)
      throw NumericalError("cluster " + std::to_string(k) +
                           " has a zero-norm mean");
    EmbeddingRecord rec;
    rec.id = "cluster" + std::to_string(k);
    rec.speaker = rec.id;
    rec.vector = mean / norm;
    models.push_back(std::move(rec));
  }

  std::vector<Trial> trials;
  std::vector<TrialKey> key;
  trials.reserve(static_cast<std::size_t>(K) * unlabeled.size());
  for (int k = 0; k < K; ++k)
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      trials.push_back({"cluster" + std::to_string(k), unlabeled[i].id});
      key.push_back(clusters.labels[i] == k ? TrialKey::target
                                            : TrialKey::nontarget);
    }

  PseudoTrials out;
  out.models = EmbeddingSet(std::move(models));
  out.trials = TrialList(std::move(trials), std::move(key));
  return out;
}

inline void save_calibration(const CalibrationModel &model,
                             const std::string &path) {
  std::ofstream out = detail::open_output(path);
  out << "calibration a=" << format_full(model.scale)
      << " b=" << format_full(model.offset) << '\n';
  detail::finish_output(out, path);
}

inline CalibrationModel load_calibration(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  auto kv = detail::parse_header(path, in, "calibration");
  CalibrationModel model;
  auto a = kv.find("a");
  auto b = kv.find("b");
  if (a == kv.end() || b == kv.end())
    throw InvalidInput(path + ": calibration header needs 'a' and 'b'");
  if (!try_parse_double(a->second, model.scale) ||
      !try_parse_double(b->second, model.offset))
    throw InvalidInput(path + ": bad calibration coefficients");
  return model;
}

inline void save_fusion(const FusionModel &model, const std::string &path) {
  std::ofstream out = detail::open_output(path);
  out << "fusion m=" << model.weights.size() << " w=";
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) {
    if (i > 0) out << ',';
    out << format_full(model.weights[i]);
  }
  out << " b=" << format_full(model.bias) << '\n';
  detail::finish_output(out, path);
}

inline FusionModel load_fusion(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  auto kv = detail::parse_header(path, in, "fusion");
  const long m = detail::header_int(kv, path, "m");
  auto it = kv.find("w");
  if (it == kv.end()) throw InvalidInput(path + ": header missing 'w'");
  std::vector<double> weights;
  std::string token;
  std::stringstream ss(it->second);
  while (std::getline(ss, token, ',')) {
    double v;
    if (!try_parse_double(token, v))
      throw InvalidInput(path + ": bad weight '" + token + "'");
    weights.push_back(v);
  }
  if (static_cast<long>(weights.size()) != m)
    throw InvalidInput(path + ": expected " + std::to_string(m) + " weights");
  FusionModel model;
  model.weights = Eigen::Map<Eigen::VectorXd>(weights.data(),
                                              static_cast<Eigen::Index>(m));
  auto bit = kv.find("b");
  if (bit == kv.end()) throw InvalidInput(path + ": header missing 'b'");
  if (!try_parse_double(bit->second, model.bias))
    throw InvalidInput(path + ": bad bias '" + bit->second + "'");
  return model;
}

}  // namespace msv
