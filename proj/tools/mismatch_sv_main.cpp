// tools/mismatch_sv_main.cpp

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

// mismatch-sv: embedding-space speaker-verification backend driver.
// Subcommands wrap the pipeline stages one-to-one; `pipeline` runs an
// ordered stage list from a JSON config.  Exit codes: 0 success, 2 usage or
// validation error, 3 numerical/runtime error.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mismatch_sv/pipeline.hpp"

namespace {

using msv::Json;

int resolve_threads(const std::optional<int> &flag) {
  if (flag.has_value()) return *flag;
  if (const char *env = std::getenv("MISMATCH_SV_THREADS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception &) {
      throw msv::InvalidInput("bad MISMATCH_SV_THREADS value '" +
                              std::string(env) + "'");
    }
  }
  return 0;  // all cores
}

// Comma-separated double list ("0.01,0.005").
std::vector<double> parse_double_list(const std::string &text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    double v;
    if (!msv::try_parse_double(token, v))
      throw msv::InvalidInput("bad number '" + token + "' in list");
    out.push_back(v);
  }
  if (out.empty()) throw msv::InvalidInput("empty number list");
  return out;
}

std::vector<std::string> parse_string_list(const std::string &text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) out.push_back(token);
  return out;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Embedding-space speaker-verification backend under language "
               "mismatch: compensation, clustering, PLDA, score "
               "normalization, calibration, fusion and metrics."};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::optional<int> threads;
  app.add_option("--threads", threads,
                 "Worker threads (default: MISMATCH_SV_THREADS or all cores)");

  // Deferred work: subcommand callbacks fill this in; main executes after a
  // successful parse so exit-code mapping stays in one place.
  std::function<int()> action;

  // ---- simulate ----------------------------------------------------------
  {
    auto *cmd = app.add_subcommand(
        "simulate", "Generate a synthetic labeled corpus (and protocol)");
    auto config = std::make_shared<std::string>();
    auto seed = std::make_shared<std::int64_t>(0);
    auto vectors = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    auto registry = std::make_shared<std::string>();
    auto trials = std::make_shared<std::string>();
    auto key = std::make_shared<std::string>();
    auto enroll = std::make_shared<std::int64_t>(0);
    auto n_target = std::make_shared<std::int64_t>(0);
    auto n_nontarget = std::make_shared<std::int64_t>(0);
    auto protocol_seed = std::make_shared<std::int64_t>(0);
    cmd->add_option("--config", *config, "SimConfig JSON file")->required();
    cmd->add_option("--seed", *seed, "Corpus RNG seed")->required();
    cmd->add_option("--out-vectors", *vectors, "Output vector file")->required();
    auto *labels_opt = cmd->add_option("--out-labels", *labels, "Output label file");
    auto *reg_opt = cmd->add_option("--out-registry", *registry, "Output registry");
    auto *trials_opt = cmd->add_option("--out-trials", *trials, "Output trials");
    auto *key_opt = cmd->add_option("--out-key", *key, "Output key");
    auto *enroll_opt =
        cmd->add_option("--enroll-sessions", *enroll, "Sessions per model");
    auto *nt_opt = cmd->add_option("--n-target", *n_target, "Target trials");
    auto *nn_opt =
        cmd->add_option("--n-nontarget", *n_nontarget, "Nontarget trials");
    auto *pseed_opt =
        cmd->add_option("--protocol-seed", *protocol_seed, "Protocol RNG seed");
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["config"] = *config;
        params["seed"] = *seed;
        params["vectors"] = *vectors;
        if (labels_opt->count()) params["labels"] = *labels;
        if (reg_opt->count()) params["registry"] = *registry;
        if (trials_opt->count()) params["trials"] = *trials;
        if (key_opt->count()) params["key"] = *key;
        if (enroll_opt->count()) params["enroll_sessions"] = *enroll;
        if (nt_opt->count()) params["n_target"] = *n_target;
        if (nn_opt->count()) params["n_nontarget"] = *n_nontarget;
        if (pseed_opt->count()) params["protocol_seed"] = *protocol_seed;
        msv::run_stage("simulate", params, ".");
        return 0;
      };
    });
  }

  // ---- preprocess --------------------------------------------------------
  {
    auto *cmd = app.add_subcommand(
        "preprocess",
        "Fit/apply whitening, length normalization, nuisance-subspace "
        "removal (idvc/ilvc/subspace) or enrollment pooling");
    auto op = std::make_shared<std::string>();
    auto fit_vectors = std::make_shared<std::string>();
    auto fit_labels = std::make_shared<std::string>();
    auto grouping = std::make_shared<std::string>();
    auto k = std::make_shared<std::int64_t>(0);
    auto allow_rd = std::make_shared<bool>(false);
    auto ridge = std::make_shared<double>(0.0);
    auto model_out = std::make_shared<std::string>();
    auto ins = std::make_shared<std::vector<std::string>>();
    auto outs = std::make_shared<std::vector<std::string>>();
    auto vectors = std::make_shared<std::string>();
    auto registry = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    cmd->add_option("--op", *op, "whiten|idvc|ilvc|subspace|lengthnorm|pool")
        ->required()
        ->check(CLI::IsMember(
            {"whiten", "idvc", "ilvc", "subspace", "lengthnorm", "pool"}));
    cmd->add_option("--fit-vectors", *fit_vectors, "Vectors to fit on");
    cmd->add_option("--fit-labels", *fit_labels, "Labels for the fit vectors");
    cmd->add_option("--grouping", *grouping,
                    "Comma-joined label keys (subspace op)");
    auto *k_opt = cmd->add_option("--k", *k, "Removed dimensions");
    cmd->add_flag("--allow-rank-deficient", *allow_rd,
                  "Admit k beyond the group-mean rank");
    auto *ridge_opt = cmd->add_option("--ridge", *ridge, "Covariance ridge");
    auto *model_opt = cmd->add_option("--model-out", *model_out, "Model file");
    cmd->add_option("--in", *ins, "Vector files to transform");
    cmd->add_option("--out", *outs, "Transformed outputs (or pool output)");
    cmd->add_option("--vectors", *vectors, "Vectors to pool (pool op)");
    cmd->add_option("--registry", *registry, "Enrollment registry (pool op)");
    auto *labels_opt =
        cmd->add_option("--labels", *labels, "Labels applied before pooling");
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        std::string stage = *op;
        if (stage == "pool") {
          params["vectors"] = *vectors;
          params["registry"] = *registry;
          if (!outs->empty()) params["out"] = outs->front();
          if (labels_opt->count()) params["labels"] = *labels;
        } else if (stage == "lengthnorm") {
          params["in"] = *ins;
          params["out"] = *outs;
        } else if (stage == "whiten") {
          params["fit_vectors"] = *fit_vectors;
          if (ridge_opt->count()) params["ridge"] = *ridge;
          if (model_opt->count()) params["model"] = *model_out;
          if (!ins->empty()) params["in"] = *ins;
          if (!outs->empty()) params["out"] = *outs;
        } else {
          params["fit_vectors"] = *fit_vectors;
          params["fit_labels"] = *fit_labels;
          if (stage == "subspace")
            params["grouping"] = parse_string_list(*grouping);
          if (k_opt->count()) params["k"] = *k;
          if (*allow_rd) params["allow_rank_deficient"] = true;
          if (model_opt->count()) params["model"] = *model_out;
          if (!ins->empty()) params["in"] = *ins;
          if (!outs->empty()) params["out"] = *outs;
        }
        msv::run_stage(stage, params, ".");
        return 0;
      };
    });
  }

  // ---- cluster -----------------------------------------------------------
  {
    auto *cmd = app.add_subcommand(
        "cluster", "K-means / agglomerative / two-step language clustering "
                   "and gender classification; writes a label file");
    auto vectors = std::make_shared<std::vector<std::string>>();
    auto mode = std::make_shared<std::string>();
    auto k = std::make_shared<std::int64_t>(0);
    auto seed = std::make_shared<std::int64_t>(0);
    auto init = std::make_shared<std::string>("ahc");
    auto subspace_model = std::make_shared<std::string>();
    auto subspace_dims = std::make_shared<std::int64_t>(0);
    auto labels = std::make_shared<std::string>();
    auto gtv = std::make_shared<std::string>();
    auto gtl = std::make_shared<std::string>();
    auto out_labels = std::make_shared<std::string>();
    cmd->add_option("--vectors", *vectors,
                    "Input vectors (repeatable; files cluster as one set)")
        ->required();
    cmd->add_option("--mode", *mode, "kmeans|ahc|gclc|gender")
        ->required()
        ->check(CLI::IsMember({"kmeans", "ahc", "gclc", "gender"}));
    auto *k_opt = cmd->add_option("--k", *k, "Cluster count");
    auto *seed_opt = cmd->add_option("--seed", *seed, "RNG seed");
    auto *init_opt =
        cmd->add_option("--init", *init, "gclc initialization: ahc|subspace")
            ->check(CLI::IsMember({"ahc", "subspace"}));
    auto *sub_opt = cmd->add_option("--subspace-model", *subspace_model,
                                    "Subspace model for gclc init");
    auto *dims_opt = cmd->add_option("--subspace-dims", *subspace_dims,
                                     "Leading subspace coordinates to use");
    auto *labels_opt =
        cmd->add_option("--labels", *labels, "Pass-through labels");
    auto *gtv_opt = cmd->add_option("--gender-train-vectors", *gtv,
                                    "Gender-labeled training vectors");
    auto *gtl_opt = cmd->add_option("--gender-train-labels", *gtl,
                                    "Labels for the gender training vectors");
    cmd->add_option("--out-labels", *out_labels, "Output label file")
        ->required();
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["vectors"] = *vectors;
        params["mode"] = *mode;
        params["out_labels"] = *out_labels;
        if (k_opt->count()) params["k"] = *k;
        if (seed_opt->count()) params["seed"] = *seed;
        if (init_opt->count()) params["init"] = *init;
        if (sub_opt->count()) params["subspace_model"] = *subspace_model;
        if (dims_opt->count()) params["subspace_dims"] = *subspace_dims;
        if (labels_opt->count()) params["labels"] = *labels;
        if (gtv_opt->count()) params["gender_train_vectors"] = *gtv;
        if (gtl_opt->count()) params["gender_train_labels"] = *gtl;
        msv::run_stage("cluster", params, ".");
        return 0;
      };
    });
  }

  // ---- plda-train --------------------------------------------------------
  {
    auto *cmd = app.add_subcommand(
        "plda-train", "Train a PLDA model from speaker labels, or from "
                      "cluster pseudo-speakers with interpolation");
    auto vectors = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    auto iters = std::make_shared<std::int64_t>(10);
    auto model_out = std::make_shared<std::string>();
    auto pseudo_k = std::make_shared<std::int64_t>(0);
    auto out_of_domain = std::make_shared<std::string>();
    auto alpha = std::make_shared<double>(0.5);
    cmd->add_option("--vectors", *vectors, "Training vectors")->required();
    auto *labels_opt = cmd->add_option("--labels", *labels, "Speaker labels");
    cmd->add_option("--iters", *iters, "EM iterations");
    cmd->add_option("--model-out", *model_out, "Output model file")->required();
    auto *pk_opt = cmd->add_option("--pseudo-k", *pseudo_k,
                                   "Cluster count for pseudo-speaker training");
    auto *ood_opt = cmd->add_option("--out-of-domain", *out_of_domain,
                                    "Out-of-domain model to interpolate with");
    cmd->add_option("--alpha", *alpha, "In-domain interpolation weight");
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["vectors"] = *vectors;
        params["model"] = *model_out;
        params["iters"] = *iters;
        if (pk_opt->count()) {
          params["k"] = *pseudo_k;
          if (ood_opt->count()) params["out_of_domain"] = *out_of_domain;
          params["alpha"] = *alpha;
          msv::run_stage("pseudo-label-plda", params, ".");
        } else {
          if (labels_opt->count()) params["labels"] = *labels;
          msv::run_stage("plda-train", params, ".");
        }
        return 0;
      };
    });
  }

  // ---- plda-interp -------------------------------------------------------
  {
    auto *cmd = app.add_subcommand("plda-interp",
                                   "Interpolate two PLDA models");
    auto in_domain = std::make_shared<std::string>();
    auto out_of_domain = std::make_shared<std::string>();
    auto alpha = std::make_shared<double>(0.5);
    auto model_out = std::make_shared<std::string>();
    cmd->add_option("--in-domain", *in_domain, "In-domain model")->required();
    cmd->add_option("--out-of-domain", *out_of_domain, "Out-of-domain model")
        ->required();
    cmd->add_option("--alpha", *alpha, "In-domain weight in [0,1]");
    cmd->add_option("--model-out", *model_out, "Output model")->required();
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["in_domain"] = *in_domain;
        params["out_of_domain"] = *out_of_domain;
        params["alpha"] = *alpha;
        params["model"] = *model_out;
        msv::run_stage("plda-interp", params, ".");
        return 0;
      };
    });
  }

  // ---- score -------------------------------------------------------------
  {
    auto *cmd = app.add_subcommand("score", "Score a trial list");
    auto backend = std::make_shared<std::string>("cosine");
    auto plda_model = std::make_shared<std::string>();
    auto models = std::make_shared<std::string>();
    auto segments = std::make_shared<std::string>();
    auto trials = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--backend", *backend, "cosine|plda")
        ->check(CLI::IsMember({"cosine", "plda"}));
    auto *pm_opt = cmd->add_option("--plda-model", *plda_model, "PLDA model");
    cmd->add_option("--models", *models, "Enrollment model vectors")->required();
    cmd->add_option("--segments", *segments, "Test segment vectors")->required();
    cmd->add_option("--trials", *trials, "Trial list")->required();
    cmd->add_option("--out", *out, "Output score file")->required();
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["backend"] = *backend;
        if (pm_opt->count()) params["plda_model"] = *plda_model;
        params["models"] = *models;
        params["segments"] = *segments;
        params["trials"] = *trials;
        params["scores"] = *out;
        msv::run_stage("score", params, ".");
        return 0;
      };
    });
  }

  // ---- snorm / glnorm ----------------------------------------------------
  for (const std::string norm : {"snorm", "glnorm"}) {
    auto *cmd = app.add_subcommand(
        norm, norm == "snorm"
                  ? "Symmetric cohort score normalization"
                  : "Gender/language-dependent symmetric normalization");
    auto scores = std::make_shared<std::string>();
    auto cohort = std::make_shared<std::string>();
    auto models = std::make_shared<std::string>();
    auto segments = std::make_shared<std::string>();
    auto backend = std::make_shared<std::string>("cosine");
    auto plda_model = std::make_shared<std::string>();
    auto top_n = std::make_shared<std::int64_t>(0);
    auto fallback = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    auto cohort_cats = std::make_shared<std::string>();
    auto side_cats = std::make_shared<std::string>();
    cmd->add_option("--scores", *scores, "Raw score file")->required();
    cmd->add_option("--cohort", *cohort, "Cohort vector file")->required();
    cmd->add_option("--models", *models, "Enrollment model vectors")->required();
    cmd->add_option("--segments", *segments, "Test segment vectors")->required();
    cmd->add_option("--backend", *backend, "cosine|plda")
        ->check(CLI::IsMember({"cosine", "plda"}));
    auto *pm_opt = cmd->add_option("--plda-model", *plda_model, "PLDA model");
    auto *tn_opt = cmd->add_option("--top-n", *top_n,
                                   "Use only the N best cohort scores");
    cmd->add_flag("--fallback-raw", *fallback,
                  "Pass raw scores through on zero cohort spread");
    cmd->add_option("--out", *out, "Output score file")->required();
    CLI::Option *cc_opt = nullptr, *sc_opt = nullptr;
    if (norm == "glnorm") {
      cc_opt = cmd->add_option("--cohort-categories", *cohort_cats,
                               "Label file with cohort categories")
                   ->required();
      sc_opt = cmd->add_option("--side-categories", *side_cats,
                               "Label file with model/segment categories")
                   ->required();
    }
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["scores"] = *scores;
        params["cohort"] = *cohort;
        params["models"] = *models;
        params["segments"] = *segments;
        params["backend"] = *backend;
        params["out"] = *out;
        if (pm_opt->count()) params["plda_model"] = *plda_model;
        if (tn_opt->count()) params["top_n"] = *top_n;
        if (*fallback) params["fallback_raw"] = true;
        if (cc_opt != nullptr) {
          params["cohort_categories"] = *cohort_cats;
          params["side_categories"] = *side_cats;
        }
        msv::run_stage(norm, params, ".");
        return 0;
      };
    });
  }

  // ---- calibrate ---------------------------------------------------------
  {
    auto *cmd = app.add_subcommand(
        "calibrate", "Train or apply an affine score-to-LLR calibration");
    auto scores = std::make_shared<std::string>();
    auto key = std::make_shared<std::string>();
    auto prior = std::make_shared<double>(0.0075);
    auto model_out = std::make_shared<std::string>();
    auto model_in = std::make_shared<std::string>();
    auto apply_to = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--scores", *scores, "Score file")->required();
    auto *key_opt = cmd->add_option("--key", *key, "Key file (trains)");
    cmd->add_option("--prior", *prior, "Effective target prior");
    auto *mo_opt = cmd->add_option("--model-out", *model_out, "Trained model");
    auto *mi_opt = cmd->add_option("--model-in", *model_in, "Model to apply");
    auto *at_opt = cmd->add_option("--apply-to", *apply_to,
                                   "Scores to map (default: --scores)");
    auto *out_opt = cmd->add_option("--out", *out, "Calibrated score file");
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["scores"] = *scores;
        params["prior"] = *prior;
        if (key_opt->count()) params["key"] = *key;
        if (mo_opt->count()) params["model"] = *model_out;
        if (mi_opt->count()) params["model_in"] = *model_in;
        if (at_opt->count()) params["apply_to"] = *apply_to;
        if (out_opt->count()) params["out"] = *out;
        msv::run_stage("calibrate", params, ".");
        return 0;
      };
    });
  }

  // ---- fuse --------------------------------------------------------------
  {
    auto *cmd = app.add_subcommand(
        "fuse", "Train or apply a linear fusion of subsystem scores");
    auto scores = std::make_shared<std::vector<std::string>>();
    auto key = std::make_shared<std::string>();
    auto prior = std::make_shared<double>(0.0075);
    auto l2 = std::make_shared<double>(1e-4);
    auto model_out = std::make_shared<std::string>();
    auto model_in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--scores", *scores, "Subsystem score files (repeat)")
        ->required();
    auto *key_opt = cmd->add_option("--key", *key, "Key file (trains)");
    cmd->add_option("--prior", *prior, "Effective target prior");
    cmd->add_option("--l2", *l2, "L2 penalty on fusion weights");
    auto *mo_opt = cmd->add_option("--model-out", *model_out, "Trained model");
    auto *mi_opt = cmd->add_option("--model-in", *model_in, "Model to apply");
    auto *out_opt = cmd->add_option("--out", *out, "Fused score file");
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["scores"] = *scores;
        params["prior"] = *prior;
        params["l2"] = *l2;
        if (key_opt->count()) params["key"] = *key;
        if (mo_opt->count()) params["model"] = *model_out;
        if (mi_opt->count()) params["model_in"] = *model_in;
        if (out_opt->count()) params["out"] = *out;
        msv::run_stage("fuse", params, ".");
        return 0;
      };
    });
  }

  // ---- metrics -----------------------------------------------------------
  {
    auto *cmd = app.add_subcommand(
        "metrics", "EER and detection costs (pooled, optionally equalized)");
    auto scores = std::make_shared<std::string>();
    auto key = std::make_shared<std::string>();
    auto priors = std::make_shared<std::string>();
    auto partition = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto det = std::make_shared<std::string>();
    cmd->add_option("--scores", *scores, "Score file")->required();
    cmd->add_option("--key", *key, "Key file")->required();
    auto *priors_opt =
        cmd->add_option("--priors", *priors, "Comma-separated target priors");
    auto *part_opt = cmd->add_option(
        "--partition", *partition,
        "Per-trial category file for equalized metrics");
    auto *out_opt = cmd->add_option("--out", *out, "Also write metrics here");
    auto *det_opt = cmd->add_option("--det", *det, "Write P_fa/P_miss points");
    cmd->callback([=, &action] {
      action = [=] {
        Json params;
        params["scores"] = *scores;
        params["key"] = *key;
        if (priors_opt->count()) params["priors"] = parse_double_list(*priors);
        if (part_opt->count()) params["partition"] = *partition;
        if (out_opt->count()) params["out"] = *out;
        if (det_opt->count()) params["det"] = *det;
        std::vector<std::string> messages;
        msv::run_stage("metrics", params, ".", &messages);
        for (const auto &line : messages) std::cout << line << "\n";
        return 0;
      };
    });
  }

  // ---- pipeline ----------------------------------------------------------
  {
    auto *cmd = app.add_subcommand(
        "pipeline", "Run (or just validate) a JSON-configured stage list");
    auto config_path = std::make_shared<std::string>();
    auto check_only = std::make_shared<bool>(false);
    auto no_intermediates = std::make_shared<bool>(false);
    auto workdir = std::make_shared<std::string>();
    cmd->add_option("--config", *config_path, "Pipeline JSON config")
        ->required();
    cmd->add_flag("--check", *check_only, "Validate without executing");
    cmd->add_flag("--no-intermediates", *no_intermediates,
                  "Remove non-final artifacts after a successful run");
    auto *wd_opt = cmd->add_option("--workdir", *workdir,
                                   "Override the config's working directory");
    cmd->callback([=, &action, &threads] {
      action = [=, &threads] {
        msv::PipelineConfig config = msv::load_pipeline_config(*config_path);
        if (wd_opt->count()) config.workdir = *workdir;
        if (*no_intermediates) config.keep_intermediates = false;
        if (threads.has_value()) config.threads = threads;
        if (*check_only) {
          msv::validate_pipeline(config);
          std::cout << "pipeline config ok: " << config.stages.size()
                    << " stages\n";
          return 0;
        }
        for (const auto &line : msv::run_pipeline(config))
          std::cout << line << "\n";
        return 0;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    msv::set_thread_count(resolve_threads(threads));
    return action ? action() : 2;
  } catch (const msv::InvalidInput &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
