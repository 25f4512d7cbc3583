// mismatch_sv/plda.hpp

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

// Two-covariance PLDA.  The generative model is
//
//   speaker identity   y_s   ~ N(mu, B)      (B: across-speaker covariance)
//   session embedding  w_si  ~ N(y_s, W)     (W: within-speaker covariance)
//
// trained by EM over the latent y_s, scored as a same/different-speaker
// log-likelihood ratio, and adapted to a new domain by convex interpolation
// of (mu, B, W) or by training on clusters of unlabeled data.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mismatch_sv/cluster.hpp"
#include "mismatch_sv/io.hpp"
#include "mismatch_sv/types.hpp"

namespace msv {

struct PldaModel {
  Eigen::VectorXd mean;     // mu
  Eigen::MatrixXd between;  // B, symmetric PSD
  Eigen::MatrixXd within;   // W, symmetric PD

  Eigen::Index dim() const { return mean.size(); }
};

struct PldaTrainOptions {
  int iterations = 10;
  // Per-M-step diagonal loading of W: ridge_scale * trace(W) / d.
  double ridge_scale = 1e-8;
  // When false, single-session speakers still shape B but their residual
  // terms are left out of the W statistic (the cluster-as-speaker regime,
  // where singleton clusters carry no usable within-speaker evidence).
  bool singletons_in_within = true;
};

// In-domain weight for interpolating a cluster-trained model with an
// out-of-domain one.
struct InterpolationWeights {
  double alpha = 0.5;
};

namespace detail {

struct SpeakerStats {
  Eigen::VectorXd mean;  // session mean m_s
  int sessions = 0;
};

// log N(x; 0, C) given the Cholesky factorization of C.
inline double gaussian_log_density(const Eigen::LLT<Eigen::MatrixXd> &llt,
                                   const Eigen::VectorXd &x) {
  const auto d = static_cast<double>(x.size());
  const Eigen::VectorXd half = llt.matrixL().solve(x);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet +
                 half.squaredNorm());
}

inline Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd &m,
                                               const char *what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(what) + " is not positive definite");
  return llt;
}

}  // namespace detail

/**
   EM for the two-covariance model, with mu pinned to the global session
   mean.  For a speaker with n sessions and session mean m, the posterior of
   the identity variable y given the sessions is Gaussian:

     cov   = (B^-1 + n W^-1)^-1 = B - B (B + W/n)^-1 B
     mean  = mu + B (B + W/n)^-1 (m - mu)

   (the right-hand forms avoid inverting B, which may be singular).  Both
   depend on n only through (B + W/n), so speakers are grouped by session
   count and the factorization is shared.  The M-step re-estimates

     B = (1/S)   sum_s [ cov_s + (mean_s - mu)(mean_s - mu)^T ]
     W = (1/N_w) sum_s [ S_s + n_s (m_s - mean_s)(m_s - mean_s)^T + n_s cov_s ]

   where S_s is the speaker's scatter about its own session mean and the W
   sum ranges over all speakers (exact EM) or only multi-session speakers
   (cluster regime).  The exact-EM total log-likelihood

     sum_s [ log N(m_s; mu, B + W/n_s) + residual term under W ]

   is non-decreasing per iteration, which training asserts.
 */
inline PldaModel train_plda(const EmbeddingSet &set,
                            const PldaTrainOptions &opts = {},
                            std::vector<double> *loglik_out = nullptr) {
  const auto d = set.dim();
  require(set.size() >= 2, "PLDA training needs at least 2 records");
  require(opts.iterations >= 1, "PLDA training needs at least 1 iteration");

  // Per-speaker sufficient statistics, in first-appearance order.
  std::vector<detail::SpeakerStats> speakers;
  {
    std::unordered_map<std::string, std::size_t> index;
    for (const auto &rec : set) {
      if (is_unknown(rec.speaker))
        throw InvalidInput("record '" + rec.id + "' has no speaker label");
      auto [it, inserted] = index.emplace(rec.speaker, speakers.size());
      if (inserted) {
        speakers.push_back({Eigen::VectorXd::Zero(d), 0});
      }
      speakers[it->second].mean += rec.vector;
      speakers[it->second].sessions += 1;
    }
  }
  const auto S = speakers.size();
  require(S >= 2, "PLDA training needs at least 2 speakers");

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (const auto &rec : set) mu += rec.vector;
  mu /= static_cast<double>(set.size());

  long n_within = 0;
  for (auto &spk : speakers) {
    spk.mean /= static_cast<double>(spk.sessions);
    if (spk.sessions >= 2) n_within += spk.sessions;
  }
  if (n_within == 0)
    throw InvalidInput(
        "every speaker has a single session; within-speaker covariance is "
        "unidentifiable");

  // Residual scatter about the speakers' own session means, summed over the
  // speakers that feed the W statistic; constant across iterations.
  const bool all_speakers_in_w = opts.singletons_in_within;
  Eigen::MatrixXd within_scatter = Eigen::MatrixXd::Zero(d, d);
  {
    std::unordered_map<std::string, std::size_t> index;
    std::size_t next = 0;
    for (const auto &rec : set) {
      auto [it, inserted] = index.emplace(rec.speaker, next);
      if (inserted) ++next;
      const detail::SpeakerStats &spk = speakers[it->second];
      if (!all_speakers_in_w && spk.sessions < 2) continue;
      Eigen::VectorXd c = rec.vector - spk.mean;
      within_scatter.selfadjointView<Eigen::Lower>().rankUpdate(c, 1.0);
    }
    within_scatter.triangularView<Eigen::StrictlyUpper>() =
        within_scatter.transpose().triangularView<Eigen::StrictlyUpper>();
  }

  // Total covariance initializes both B and W at half strength.
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, d);
  for (const auto &rec : set) {
    Eigen::VectorXd c = rec.vector - mu;
    total.selfadjointView<Eigen::Lower>().rankUpdate(
        c, 1.0 / static_cast<double>(set.size()));
  }
  total.triangularView<Eigen::StrictlyUpper>() =
      total.transpose().triangularView<Eigen::StrictlyUpper>();

  Eigen::MatrixXd B = 0.5 * total;
  Eigen::MatrixXd W = 0.5 * total;
  if (!W.allFinite() || W.trace() <= 0.0)
    throw NumericalError("degenerate total covariance; cannot train PLDA");
  // The same diagonal loading the M-step applies, so a rank-deficient input
  // (e.g. embeddings with nuisance directions projected out) starts from a
  // usable W.
  W += (opts.ridge_scale * W.trace() / static_cast<double>(d)) *
       Eigen::MatrixXd::Identity(d, d);

  // Speakers bucketed by session count share posterior algebra.
  std::map<int, std::vector<std::size_t>> by_sessions;
  for (std::size_t s = 0; s < S; ++s)
    by_sessions[speakers[s].sessions].push_back(s);

  const double w_denom = all_speakers_in_w
                             ? static_cast<double>(set.size())
                             : static_cast<double>(n_within);

  // Exact total log-likelihood of the data under (mu, B, W).  A singleton
  // speaker's scatter about its own mean is zero, so within_scatter serves
  // both modes.
  const auto total_loglik = [&](const Eigen::MatrixXd &B_cur,
                                const Eigen::MatrixXd &W_cur) {
    const auto llt_w = detail::checked_llt(W_cur, "within covariance");
    double logdet_w = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      logdet_w += 2.0 * std::log(llt_w.matrixL()(i, i));
    const double log2pi = std::log(2.0 * std::numbers::pi);
    const double resid_count =
        static_cast<double>(set.size()) - static_cast<double>(S);
    double ll = -0.5 * (resid_count *
                            (logdet_w + static_cast<double>(d) * log2pi) +
                        llt_w.solve(within_scatter).trace());
    for (const auto &[n, members] : by_sessions) {
      const Eigen::MatrixXd mean_cov = B_cur + W_cur / static_cast<double>(n);
      const auto llt = detail::checked_llt(mean_cov, "B + W/n");
      for (std::size_t s : members)
        ll += detail::gaussian_log_density(llt, speakers[s].mean - mu);
      ll += -0.5 * static_cast<double>(d) * std::log(static_cast<double>(n)) *
            static_cast<double>(members.size());
    }
    return ll;
  };

  for (int iter = 0; iter < opts.iterations; ++iter) {
    const double ll_current = total_loglik(B, W);
    if (loglik_out != nullptr) loglik_out->push_back(ll_current);

    Eigen::MatrixXd b_acc = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd w_acc = within_scatter;
    for (const auto &[n, members] : by_sessions) {
      const double nd = static_cast<double>(n);
      const Eigen::MatrixXd mean_cov = B + W / nd;
      const auto llt = detail::checked_llt(mean_cov, "B + W/n");
      const Eigen::MatrixXd gain = llt.solve(B);        // (B + W/n)^-1 B
      const Eigen::MatrixXd post_cov = B - B * gain;    // posterior covariance
      const bool in_w = all_speakers_in_w || n >= 2;
      for (std::size_t s : members) {
        const Eigen::VectorXd centered = speakers[s].mean - mu;
        const Eigen::VectorXd post_mean_dev = gain.transpose() * centered;
        b_acc.selfadjointView<Eigen::Lower>().rankUpdate(post_mean_dev, 1.0);
        if (in_w) {
          Eigen::VectorXd resid = centered - post_mean_dev;
          w_acc.selfadjointView<Eigen::Lower>().rankUpdate(resid, nd);
        }
      }
      b_acc += post_cov * static_cast<double>(members.size());
      if (in_w) w_acc += post_cov * (nd * static_cast<double>(members.size()));
    }
    b_acc.triangularView<Eigen::StrictlyUpper>() =
        b_acc.transpose().triangularView<Eigen::StrictlyUpper>();
    w_acc.triangularView<Eigen::StrictlyUpper>() =
        w_acc.transpose().triangularView<Eigen::StrictlyUpper>();

    B = b_acc / static_cast<double>(S);
    W = w_acc / w_denom;
    // Keep exact symmetry so downstream Cholesky factorizations are stable.
    B = ((B + B.transpose()) * 0.5).eval();
    W = ((W + W.transpose()) * 0.5).eval();

    // The EM guarantee is that the raw M-step output does not lower the
    // likelihood; the subsequent diagonal loading of W is a regularization
    // outside that guarantee (its effect is ~ridge_scale-relative for
    // healthy spectra but visible on rank-deficient inputs).  Assert the
    // guaranteed inequality whenever the raw update is factorable.
    if (all_speakers_in_w) {
      std::optional<double> ll_raw;
      try {
        ll_raw = total_loglik(B, W);
      } catch (const NumericalError &) {
        // W without its ridge can be singular; nothing to check then.
      }
      if (ll_raw.has_value() &&
          *ll_raw < ll_current - 1e-8 * (1.0 + std::abs(ll_current)))
        throw NumericalError(
            "PLDA EM log-likelihood decreased; this is a bug");
    }

    const double ridge = opts.ridge_scale * W.trace() / static_cast<double>(d);
    if (!(ridge > 0.0) || !W.allFinite())
      throw NumericalError("degenerate within covariance after ridge");
    W += ridge * Eigen::MatrixXd::Identity(d, d);
  }
  if (loglik_out != nullptr) loglik_out->push_back(total_loglik(B, W));

  PldaModel model;
  model.mean = std::move(mu);
  model.between = std::move(B);
  model.within = std::move(W);
  return model;
}

/**
   Verification LLR.  With x = e - mu, y = t - mu, the same-speaker
   hypothesis makes [x; y] jointly Gaussian with blocks [[B+W, B], [B, B+W]],
   the different-speaker hypothesis zeroes the off-diagonal blocks.  Rotating
   to u = (x+y)/sqrt2, v = (x-y)/sqrt2 block-diagonalizes the joint:

     LLR = log N(u; 0, W + 2B) + log N(v; 0, W)
         - log N(x; 0, B + W) - log N(y; 0, B + W)

   which is symmetric in (e, t) and identically zero when B = 0.
 */
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &model)
      : mean_(model.mean),
        llt_sum_(detail::checked_llt(model.within + 2.0 * model.between,
                                     "W + 2B")),
        llt_within_(detail::checked_llt(model.within, "within covariance")),
        llt_total_(detail::checked_llt(model.within + model.between,
                                       "total covariance")) {}

  double operator()(const Eigen::VectorXd &enroll,
                    const Eigen::VectorXd &test) const {
    require(enroll.size() == mean_.size() && test.size() == mean_.size(),
            "PLDA scorer dimension mismatch");
    const Eigen::VectorXd x = enroll - mean_;
    const Eigen::VectorXd y = test - mean_;
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    const Eigen::VectorXd u = (x + y) * inv_sqrt2;
    const Eigen::VectorXd v = (x - y) * inv_sqrt2;
    return detail::gaussian_log_density(llt_sum_, u) +
           detail::gaussian_log_density(llt_within_, v) -
           detail::gaussian_log_density(llt_total_, x) -
           detail::gaussian_log_density(llt_total_, y);
  }

  Eigen::Index dim() const { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> llt_sum_;
  Eigen::LLT<Eigen::MatrixXd> llt_within_;
  Eigen::LLT<Eigen::MatrixXd> llt_total_;
};

inline double score_plda(const PldaModel &model, const Eigen::VectorXd &enroll,
                         const Eigen::VectorXd &test) {
  return PldaScorer(model)(enroll, test);
}

// Convex combination of two models; alpha weights the first (in-domain) one.
inline PldaModel interpolate_plda(const PldaModel &in_model,
                                  const PldaModel &out_model,
                                  const InterpolationWeights &w) {
  require(w.alpha >= 0.0 && w.alpha <= 1.0,
          "interpolation weight must lie in [0, 1]");
  require(in_model.dim() == out_model.dim(),
          "PLDA models have different dimensions");
  const double a = w.alpha;
  PldaModel out;
  out.mean = a * in_model.mean + (1.0 - a) * out_model.mean;
  out.between = a * in_model.between + (1.0 - a) * out_model.between;
  out.within = a * in_model.within + (1.0 - a) * out_model.within;
  return out;
}

// Clusters an unlabeled in-domain set, treats the clusters as speakers,
// trains a PLDA model on them (singleton clusters only shape B), and
// interpolates with the out-of-domain model.
inline PldaModel pseudo_label_plda(const EmbeddingSet &unlabeled, int K,
                                   const PldaModel &out_model,
                                   const InterpolationWeights &w,
                                   int iterations = 10) {
  require(unlabeled.dim() == out_model.dim(),
          "unlabeled set dimension does not match out-of-domain model");
  ClusteringResult clusters = ahc(unlabeled, K);
  std::vector<EmbeddingRecord> labeled(unlabeled.records());
  for (std::size_t i = 0; i < labeled.size(); ++i)
    labeled[i].speaker = "c" + std::to_string(clusters.labels[i]);
  PldaTrainOptions opts;
  opts.iterations = iterations;
  opts.singletons_in_within = false;
  PldaModel pseudo = train_plda(EmbeddingSet(std::move(labeled)), opts);
  return interpolate_plda(pseudo, out_model, w);
}

inline void save_plda(const PldaModel &model, const std::string &path) {
  std::ofstream out = detail::open_output(path);
  out << "plda d=" << model.dim() << '\n';
  detail::write_vector_row(out, model.mean);
  detail::write_matrix_rows(out, model.between);
  detail::write_matrix_rows(out, model.within);
  detail::finish_output(out, path);
}

inline PldaModel load_plda(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  auto kv = detail::parse_header(path, in, "plda");
  const auto d = static_cast<std::size_t>(detail::header_int(kv, path, "d"));
  PldaModel model;
  model.mean = detail::read_vector_row(in, path, d);
  model.between = detail::read_matrix_rows(in, path, d, d);
  model.within = detail::read_matrix_rows(in, path, d, d);
  return model;
}

}  // namespace msv
