// mismatch_sv/pipeline.hpp

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

// Declarative pipeline driver.  A pipeline is an ordered list of stages,
// each a named operation with JSON parameters; every stage reads and writes
// ordinary files so intermediate state stays inspectable.  Validation runs
// before execution: parameter names and types are checked against the stage
// table and every input must either exist on disk or be produced by an
// earlier stage.
//
// Stage vocabulary (parameters in [] are optional):
//
//   simulate   config|sim, seed, vectors, [labels, registry, trials, key,
//              enroll_sessions, n_target, n_nontarget, protocol_seed]
//   idvc/ilvc/subspace
//              fit_vectors, fit_labels, [grouping (subspace only), k,
//              allow_rank_deficient, model, in, out]
//   whiten     fit_vectors, [ridge, model, in, out]
//   lengthnorm in, out
//   pool       vectors, registry, out, [labels]
//   cluster    vectors (path or list; several files cluster as one set),
//              mode, out_labels, [k, seed, init, subspace_model,
//              subspace_dims, labels, gender_train_vectors,
//              gender_train_labels]
//   plda-train vectors, labels, model, [iters]
//   pseudo-label-plda
//              vectors, k, out_of_domain, model, [alpha, iters]
//   plda-interp
//              in_domain, out_of_domain, model, [alpha]
//   score      backend, models, segments, trials, scores, [plda_model]
//   snorm      scores, cohort, models, segments, backend, out,
//              [plda_model, top_n, fallback_raw]
//   glnorm     scores, cohort, cohort_categories, side_categories, models,
//              segments, backend, out, [plda_model, top_n, fallback_raw]
//   calibrate  scores, [key, prior, model, model_in, apply_to, out]
//   fuse       scores (array), [key, prior, l2, model, model_in, out]
//   metrics    scores, key, [priors, partition, out, det]

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mismatch_sv/mismatch_sv.hpp"

namespace msv {

using Json = nlohmann::json;

struct PipelineStage {
  std::string name;
  Json params;
};

struct PipelineConfig {
  std::filesystem::path workdir = ".";
  bool keep_intermediates = true;
  std::optional<int> threads;
  std::vector<PipelineStage> stages;
};

namespace detail {

[[noreturn]] inline void stage_error(const std::string &stage,
                                     const std::string &what) {
  throw InvalidInput("stage '" + stage + "': " + what);
}

inline std::string get_string(const Json &params, const std::string &stage,
                              const std::string &key) {
  if (!params.contains(key)) stage_error(stage, "missing parameter '" + key + "'");
  if (!params[key].is_string())
    stage_error(stage, "parameter '" + key + "' must be a string");
  return params[key].get<std::string>();
}

inline std::string get_string_or(const Json &params, const std::string &stage,
                                 const std::string &key,
                                 const std::string &fallback) {
  if (!params.contains(key)) return fallback;
  if (!params[key].is_string())
    stage_error(stage, "parameter '" + key + "' must be a string");
  return params[key].get<std::string>();
}

inline double get_number(const Json &params, const std::string &stage,
                         const std::string &key) {
  if (!params.contains(key)) stage_error(stage, "missing parameter '" + key + "'");
  if (!params[key].is_number())
    stage_error(stage, "parameter '" + key + "' must be a number");
  return params[key].get<double>();
}

inline double get_number_or(const Json &params, const std::string &stage,
                            const std::string &key, double fallback) {
  if (!params.contains(key)) return fallback;
  if (!params[key].is_number())
    stage_error(stage, "parameter '" + key + "' must be a number");
  return params[key].get<double>();
}

inline long get_integer(const Json &params, const std::string &stage,
                        const std::string &key) {
  if (!params.contains(key)) stage_error(stage, "missing parameter '" + key + "'");
  if (!params[key].is_number_integer())
    stage_error(stage, "parameter '" + key + "' must be an integer");
  return params[key].get<long>();
}

inline long get_integer_or(const Json &params, const std::string &stage,
                           const std::string &key, long fallback) {
  if (!params.contains(key)) return fallback;
  if (!params[key].is_number_integer())
    stage_error(stage, "parameter '" + key + "' must be an integer");
  return params[key].get<long>();
}

inline bool get_bool_or(const Json &params, const std::string &stage,
                        const std::string &key, bool fallback) {
  if (!params.contains(key)) return fallback;
  if (!params[key].is_boolean())
    stage_error(stage, "parameter '" + key + "' must be a boolean");
  return params[key].get<bool>();
}

inline std::vector<std::string> get_path_list(const Json &params,
                                              const std::string &stage,
                                              const std::string &key) {
  if (!params.contains(key)) return {};
  const Json &v = params[key];
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array())
    stage_error(stage, "parameter '" + key + "' must be a path or path list");
  std::vector<std::string> out;
  for (const auto &item : v) {
    if (!item.is_string())
      stage_error(stage, "parameter '" + key + "' must contain strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

// Stage metadata: which parameters exist, which are required, and which
// name input/output files (for dependency validation).
struct StageSpec {
  std::vector<std::string> required;
  std::vector<std::string> optional;
  std::vector<std::string> input_keys;   // single path or path list
  std::vector<std::string> output_keys;  // single path or path list
  std::function<void(const Json &, const std::string &)> check;  // extra rules
};

inline const std::map<std::string, StageSpec> &stage_table() {
  static const std::map<std::string, StageSpec> table = [] {
    std::map<std::string, StageSpec> t;
    t["simulate"] = StageSpec{
        {"seed", "vectors"},
        {"config", "sim", "labels", "registry", "trials", "key",
         "enroll_sessions", "n_target", "n_nontarget", "protocol_seed"},
        {"config"},
        {"vectors", "labels", "registry", "trials", "key"},
        [](const Json &p, const std::string &s) {
          if (!p.contains("config") && !p.contains("sim"))
            stage_error(s, "needs 'config' (file) or inline 'sim' object");
          const bool protocol = p.contains("registry") || p.contains("trials") ||
                                p.contains("key");
          if (protocol &&
              !(p.contains("enroll_sessions") && p.contains("n_target") &&
                p.contains("n_nontarget") && p.contains("registry") &&
                p.contains("trials") && p.contains("key")))
            stage_error(s,
                        "protocol output needs enroll_sessions, n_target, "
                        "n_nontarget, registry, trials and key");
        }};
    const auto subspace_spec = [](bool needs_grouping) {
      StageSpec spec;
      spec.required = {"fit_vectors", "fit_labels"};
      spec.optional = {"k", "allow_rank_deficient", "model", "in", "out"};
      if (needs_grouping) spec.required.push_back("grouping");
      spec.input_keys = {"fit_vectors", "fit_labels", "in"};
      spec.output_keys = {"model", "out"};
      spec.check = [](const Json &p, const std::string &s) {
        if (get_path_list(p, s, "in").size() != get_path_list(p, s, "out").size())
          stage_error(s, "'in' and 'out' lists must have the same length");
      };
      return spec;
    };
    t["idvc"] = subspace_spec(false);
    t["ilvc"] = subspace_spec(false);
    t["subspace"] = subspace_spec(true);
    t["whiten"] = StageSpec{
        {"fit_vectors"},
        {"ridge", "model", "in", "out"},
        {"fit_vectors", "in"},
        {"model", "out"},
        [](const Json &p, const std::string &s) {
          if (get_path_list(p, s, "in").size() != get_path_list(p, s, "out").size())
            stage_error(s, "'in' and 'out' lists must have the same length");
        }};
    t["lengthnorm"] = StageSpec{
        {"in", "out"},
        {},
        {"in"},
        {"out"},
        [](const Json &p, const std::string &s) {
          if (get_path_list(p, s, "in").size() != get_path_list(p, s, "out").size())
            stage_error(s, "'in' and 'out' lists must have the same length");
        }};
    t["pool"] = StageSpec{
        {"vectors", "registry", "out"}, {"labels"},
        {"vectors", "registry", "labels"}, {"out"}, nullptr};
    t["cluster"] = StageSpec{
        {"vectors", "mode", "out_labels"},
        {"k", "seed", "init", "subspace_model", "subspace_dims", "labels",
         "gender_train_vectors", "gender_train_labels"},
        {"vectors", "subspace_model", "labels", "gender_train_vectors",
         "gender_train_labels"},
        {"out_labels"},
        [](const Json &p, const std::string &s) {
          const std::string mode = get_string(p, s, "mode");
          if (mode != "kmeans" && mode != "ahc" && mode != "gclc" &&
              mode != "gender")
            stage_error(s, "unknown mode '" + mode + "'");
          if (mode != "gender" && !p.contains("k"))
            stage_error(s, "mode '" + mode + "' needs 'k'");
          if ((mode == "kmeans" || mode == "gclc") && !p.contains("seed"))
            stage_error(s, "mode '" + mode + "' needs 'seed'");
          if (mode == "gclc") {
            const std::string init = get_string_or(p, s, "init", "ahc");
            if (init != "ahc" && init != "subspace")
              stage_error(s, "unknown init '" + init + "'");
            if (init == "subspace" && !p.contains("subspace_model"))
              stage_error(s, "subspace init needs 'subspace_model'");
          }
          if (mode == "gender" && !(p.contains("gender_train_vectors") &&
                                    p.contains("gender_train_labels")))
            stage_error(s, "gender mode needs gender_train_vectors/labels");
          if (p.contains("gender_train_vectors") !=
              p.contains("gender_train_labels"))
            stage_error(s,
                        "gender_train_vectors and gender_train_labels must "
                        "be given together");
        }};
    t["plda-train"] = StageSpec{
        {"vectors", "labels", "model"}, {"iters"},
        {"vectors", "labels"}, {"model"}, nullptr};
    t["pseudo-label-plda"] = StageSpec{
        {"vectors", "k", "out_of_domain", "model"}, {"alpha", "iters"},
        {"vectors", "out_of_domain"}, {"model"}, nullptr};
    t["plda-interp"] = StageSpec{
        {"in_domain", "out_of_domain", "model"}, {"alpha"},
        {"in_domain", "out_of_domain"}, {"model"}, nullptr};
    const auto backend_check = [](const Json &p, const std::string &s) {
      const std::string backend = get_string(p, s, "backend");
      if (backend != "cosine" && backend != "plda")
        stage_error(s, "unknown backend '" + backend + "'");
      if (backend == "plda" && !p.contains("plda_model"))
        stage_error(s, "plda backend needs 'plda_model'");
    };
    t["score"] = StageSpec{
        {"backend", "models", "segments", "trials", "scores"}, {"plda_model"},
        {"models", "segments", "trials", "plda_model"}, {"scores"},
        backend_check};
    t["snorm"] = StageSpec{
        {"scores", "cohort", "models", "segments", "backend", "out"},
        {"plda_model", "top_n", "fallback_raw"},
        {"scores", "cohort", "models", "segments", "plda_model"},
        {"out"},
        backend_check};
    t["glnorm"] = StageSpec{
        {"scores", "cohort", "cohort_categories", "side_categories", "models",
         "segments", "backend", "out"},
        {"plda_model", "top_n", "fallback_raw"},
        {"scores", "cohort", "cohort_categories", "side_categories", "models",
         "segments", "plda_model"},
        {"out"},
        backend_check};
    t["calibrate"] = StageSpec{
        {"scores"},
        {"key", "prior", "model", "model_in", "apply_to", "out"},
        {"scores", "key", "model_in", "apply_to"},
        {"model", "out"},
        [](const Json &p, const std::string &s) {
          if (!p.contains("key") && !p.contains("model_in"))
            stage_error(s, "needs 'key' (to train) or 'model_in' (to apply)");
          if (p.contains("key") && p.contains("model_in"))
            stage_error(s, "'key' and 'model_in' are mutually exclusive");
          if (p.contains("model_in") && !p.contains("out"))
            stage_error(s, "applying a model needs 'out'");
        }};
    t["fuse"] = StageSpec{
        {"scores"},
        {"key", "prior", "l2", "model", "model_in", "out"},
        {"scores", "key", "model_in"},
        {"model", "out"},
        [](const Json &p, const std::string &s) {
          if (!p.contains("key") && !p.contains("model_in"))
            stage_error(s, "needs 'key' (to train) or 'model_in' (to apply)");
          if (p.contains("model_in") && !p.contains("out"))
            stage_error(s, "applying a model needs 'out'");
        }};
    t["metrics"] = StageSpec{
        {"scores", "key"},
        {"priors", "partition", "out", "det", "c_miss", "c_fa"},
        {"scores", "key", "partition"},
        {"out", "det"},
        nullptr};
    return t;
  }();
  return table;
}

inline std::string resolve(const std::filesystem::path &workdir,
                           const std::string &path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p.string();
  return (workdir / p).string();
}

inline CovSpec parse_cov_spec(const Json &j, Eigen::Index dim,
                              const std::string &stage) {
  if (j.is_number()) return CovSpec::scaled_identity(j.get<double>());
  if (!j.is_object() || !j.contains("type"))
    stage_error(stage, "covariance spec must be a number or typed object");
  const std::string type = j["type"].get<std::string>();
  if (type == "scaled_identity")
    return CovSpec::scaled_identity(j.at("scale").get<double>());
  if (type == "diagonal") {
    const auto values = j.at("values").get<std::vector<double>>();
    return CovSpec::diagonal(Eigen::Map<const Eigen::VectorXd>(
        values.data(), static_cast<Eigen::Index>(values.size())));
  }
  if (type == "full") {
    const auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd m(rows.size(), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != dim)
        stage_error(stage, "full covariance rows must have length dim");
      for (Eigen::Index c = 0; c < dim; ++c)
        m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
    if (static_cast<Eigen::Index>(rows.size()) != dim)
      stage_error(stage, "full covariance must be dim x dim");
    return CovSpec::full(m);
  }
  stage_error(stage, "unknown covariance type '" + type + "'");
}

inline Eigen::VectorXd parse_shift(const Json &j, Eigen::Index dim,
                                   const std::string &stage) {
  if (j.is_null()) return Eigen::VectorXd();
  if (j.is_array()) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != dim)
      stage_error(stage, "shift vector must have length dim");
    return Eigen::Map<const Eigen::VectorXd>(
        values.data(), static_cast<Eigen::Index>(values.size()));
  }
  if (j.is_object() && j.contains("axis") && j.contains("magnitude")) {
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(dim);
    const auto axis = j["axis"].get<Eigen::Index>();
    if (axis < 0 || axis >= dim) stage_error(stage, "shift axis out of range");
    shift[axis] = j["magnitude"].get<double>();
    return shift;
  }
  stage_error(stage, "shift must be an array or {axis, magnitude}");
}

inline SimConfig parse_sim_config(const Json &j, const std::string &stage) {
  SimConfig config;
  if (!j.contains("dim")) stage_error(stage, "sim config needs 'dim'");
  config.dim = j["dim"].get<Eigen::Index>();
  config.n_speakers = j.at("n_speakers").get<int>();
  const Json &sessions = j.at("sessions_per_speaker");
  if (sessions.is_number_integer()) {
    config.sessions_min = config.sessions_max = sessions.get<int>();
  } else if (sessions.is_array() && sessions.size() == 2) {
    config.sessions_min = sessions[0].get<int>();
    config.sessions_max = sessions[1].get<int>();
  } else {
    stage_error(stage, "sessions_per_speaker must be an int or [min, max]");
  }
  if (j.contains("between"))
    config.between = parse_cov_spec(j["between"], config.dim, stage);
  if (j.contains("within"))
    config.within = parse_cov_spec(j["within"], config.dim, stage);
  const auto parse_groups = [&](const char *key) {
    std::vector<GroupSpec> groups;
    if (!j.contains(key)) return groups;
    for (const auto &g : j.at(key)) {
      GroupSpec spec;
      spec.name = g.at("name").get<std::string>();
      spec.shift = parse_shift(g.contains("shift") ? g["shift"] : Json(),
                               config.dim, stage);
      spec.prob = g.contains("prob")
                      ? g["prob"].get<double>()
                      : 1.0 / static_cast<double>(j.at(key).size());
      groups.push_back(std::move(spec));
    }
    return groups;
  };
  config.languages = parse_groups("languages");
  if (config.languages.empty())
    config.languages = {{"eng", Eigen::VectorXd(), 1.0}};
  config.genders = parse_groups("genders");
  if (config.genders.empty())
    config.genders = {{"m", Eigen::VectorXd(), 0.5},
                      {"f", Eigen::VectorXd(), 0.5}};
  if (j.contains("dataset")) config.dataset = j["dataset"].get<std::string>();
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  return config;
}

inline ScoreBackend make_backend(const Json &params, const std::string &stage,
                                 const std::filesystem::path &workdir) {
  const std::string backend = get_string(params, stage, "backend");
  if (backend == "cosine") return CosineBackend{};
  return PldaBackend(
      load_plda(resolve(workdir, get_string(params, stage, "plda_model"))));
}

inline std::vector<std::string> category_cells(const ScoreSet &scores,
                                               const CategoryMap &per_trial) {
  std::vector<std::string> cells;
  cells.reserve(scores.size());
  for (const auto &t : scores.trials().trials()) {
    auto it = per_trial.find(t.model_id + "\t" + t.segment_id);
    if (it == per_trial.end())
      throw InvalidInput("no partition category for trial (" + t.model_id +
                         ", " + t.segment_id + ")");
    cells.push_back(it->second.name());
  }
  return cells;
}

}  // namespace detail

// Per-trial partition file: `model_id segment_id category` per line.
inline std::unordered_map<std::string, std::string> load_trial_partition(
    const std::string &path) {
  std::ifstream in = detail::open_input(path);
  std::unordered_map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 3)
      detail::parse_error(path, line_no,
                          "expected 'model_id segment_id category'");
    out[std::string(tokens[0]) + "\t" + std::string(tokens[1])] =
        std::string(tokens[2]);
  }
  return out;
}

// Executes one named stage.  Paths are resolved against `workdir`; any
// human-readable result lines (currently from `metrics`) are appended to
// `messages` when provided.  Returns the list of files written.
inline std::vector<std::string> run_stage(
    const std::string &name, const Json &params,
    const std::filesystem::path &workdir,
    std::vector<std::string> *messages = nullptr) {
  const auto &table = detail::stage_table();
  auto spec_it = table.find(name);
  if (spec_it == table.end())
    throw InvalidInput("unknown stage '" + name + "'");
  const detail::StageSpec &spec = spec_it->second;

  // Parameter-name hygiene: catch typos before touching any file.
  for (const auto &[key, value] : params.items()) {
    const bool known =
        std::find(spec.required.begin(), spec.required.end(), key) !=
            spec.required.end() ||
        std::find(spec.optional.begin(), spec.optional.end(), key) !=
            spec.optional.end();
    if (!known) detail::stage_error(name, "unknown parameter '" + key + "'");
  }
  for (const auto &key : spec.required)
    if (!params.contains(key))
      detail::stage_error(name, "missing parameter '" + key + "'");
  if (spec.check) spec.check(params, name);

  const auto in = [&](const std::string &key) {
    return detail::resolve(workdir, detail::get_string(params, name, key));
  };
  const auto out_path = in;  // same resolution, different intent

  std::vector<std::string> written;
  const auto note_written = [&](const std::string &path) {
    written.push_back(path);
  };

  if (name == "simulate") {
    Json sim_json;
    if (params.contains("sim")) {
      sim_json = params["sim"];
    } else {
      std::ifstream cfg(in("config"));
      if (!cfg) throw InvalidInput("cannot open '" + in("config") + "'");
      cfg >> sim_json;
    }
    SimConfig config = detail::parse_sim_config(sim_json, name);
    config.seed = static_cast<std::uint64_t>(
        detail::get_integer(params, name, "seed"));
    EmbeddingSet corpus = generate_corpus(config);
    save_embeddings(corpus, out_path("vectors"));
    note_written(out_path("vectors"));
    if (params.contains("labels")) {
      save_labels(corpus, out_path("labels"));
      note_written(out_path("labels"));
    }
    if (params.contains("registry")) {
      Protocol protocol = generate_protocol(
          corpus, static_cast<int>(detail::get_integer(params, name, "enroll_sessions")),
          static_cast<std::size_t>(detail::get_integer(params, name, "n_target")),
          static_cast<std::size_t>(detail::get_integer(params, name, "n_nontarget")),
          static_cast<std::uint64_t>(detail::get_integer_or(
              params, name, "protocol_seed",
              detail::get_integer(params, name, "seed") + 1)));
      save_registry(protocol.registry, out_path("registry"));
      save_trials(protocol.trials, out_path("trials"));
      save_key(protocol.trials, out_path("key"));
      note_written(out_path("registry"));
      note_written(out_path("trials"));
      note_written(out_path("key"));
    }
    return written;
  }

  if (name == "idvc" || name == "ilvc" || name == "subspace") {
    std::vector<std::string> grouping;
    if (name == "idvc") {
      grouping = {"dataset", "gender"};
    } else if (name == "ilvc") {
      grouping = {"language", "gender"};
    } else {
      for (const auto &key : detail::get_path_list(params, name, "grouping"))
        grouping.push_back(key);
    }
    EmbeddingSet fit_set = apply_labels(load_embeddings(in("fit_vectors")),
                                        load_labels(in("fit_labels")));
    std::optional<int> k;
    if (params.contains("k"))
      k = static_cast<int>(detail::get_integer(params, name, "k"));
    SubspaceModel model = fit_nuisance_subspace(
        fit_set, grouping, k,
        detail::get_bool_or(params, name, "allow_rank_deficient", false));
    if (params.contains("model")) {
      save_subspace(model, out_path("model"));
      note_written(out_path("model"));
    }
    const auto ins = detail::get_path_list(params, name, "in");
    const auto outs = detail::get_path_list(params, name, "out");
    for (std::size_t i = 0; i < ins.size(); ++i) {
      EmbeddingSet set = load_embeddings(detail::resolve(workdir, ins[i]));
      save_embeddings(remove_subspace(set, model),
                      detail::resolve(workdir, outs[i]));
      note_written(detail::resolve(workdir, outs[i]));
    }
    return written;
  }

  if (name == "whiten") {
    EmbeddingSet fit_set = load_embeddings(in("fit_vectors"));
    std::optional<double> ridge;
    if (params.contains("ridge"))
      ridge = detail::get_number(params, name, "ridge");
    WhitenModel model = fit_whiten(fit_set, ridge);
    if (params.contains("model")) {
      save_whiten(model, out_path("model"));
      note_written(out_path("model"));
    }
    const auto ins = detail::get_path_list(params, name, "in");
    const auto outs = detail::get_path_list(params, name, "out");
    for (std::size_t i = 0; i < ins.size(); ++i) {
      EmbeddingSet set = load_embeddings(detail::resolve(workdir, ins[i]));
      save_embeddings(apply_whiten(set, model),
                      detail::resolve(workdir, outs[i]));
      note_written(detail::resolve(workdir, outs[i]));
    }
    return written;
  }

  if (name == "lengthnorm") {
    const auto ins = detail::get_path_list(params, name, "in");
    const auto outs = detail::get_path_list(params, name, "out");
    for (std::size_t i = 0; i < ins.size(); ++i) {
      EmbeddingSet set = load_embeddings(detail::resolve(workdir, ins[i]));
      save_embeddings(length_normalize(set), detail::resolve(workdir, outs[i]));
      note_written(detail::resolve(workdir, outs[i]));
    }
    return written;
  }

  if (name == "pool") {
    EmbeddingSet set = load_embeddings(in("vectors"));
    if (params.contains("labels"))
      set = apply_labels(set, load_labels(in("labels")));
    EmbeddingSet models =
        build_enrollment_models(set, load_registry(in("registry")));
    save_embeddings(models, out_path("out"));
    note_written(out_path("out"));
    // Pooled labels ride along for category-dependent stages downstream.
    const std::string label_path = out_path("out") + ".labels";
    save_labels(models, label_path);
    note_written(label_path);
    return written;
  }

  if (name == "cluster") {
    const std::string mode = detail::get_string(params, name, "mode");
    // Several vector files are clustered as one set, so category names stay
    // consistent across cohort/model/segment files.
    std::vector<EmbeddingSet> parts;
    for (const auto &p : detail::get_path_list(params, name, "vectors"))
      parts.push_back(load_embeddings(detail::resolve(workdir, p)));
    EmbeddingSet set = parts.size() == 1 ? std::move(parts.front())
                                         : merge_sets(parts);
    if (params.contains("labels"))
      set = apply_labels(set, load_labels(in("labels")));
    std::vector<EmbeddingRecord> out_records(set.records());

    if (mode == "gender" || (mode == "gclc" &&
                             params.contains("gender_train_vectors"))) {
      EmbeddingSet train =
          apply_labels(load_embeddings(in("gender_train_vectors")),
                       load_labels(in("gender_train_labels")));
      GenderModel gender_model = fit_gender_model(train);
      std::vector<Gender> genders = classify_gender(set, gender_model);
      for (std::size_t i = 0; i < out_records.size(); ++i)
        out_records[i].gender = genders[i];
    }

    if (mode != "gender") {
      const int k = static_cast<int>(detail::get_integer(params, name, "k"));
      ClusteringResult result;
      if (mode == "kmeans") {
        result = kmeans(set, k,
                        KmeansInit::seeded(static_cast<std::uint64_t>(
                            detail::get_integer(params, name, "seed"))));
      } else if (mode == "ahc") {
        result = ahc(set, k);
      } else {  // gclc
        const std::string init = detail::get_string_or(params, name, "init", "ahc");
        SubspaceModel subspace;
        const SubspaceModel *subspace_ptr = nullptr;
        if (init == "subspace") {
          subspace = load_subspace(in("subspace_model"));
          subspace_ptr = &subspace;
        }
        result = two_step_cluster(
            set, k, init == "ahc" ? TwoStepInit::ahc : TwoStepInit::subspace,
            subspace_ptr,
            static_cast<std::uint64_t>(
                detail::get_integer_or(params, name, "seed", 0)),
            KmeansOptions{},
            static_cast<int>(
                detail::get_integer_or(params, name, "subspace_dims", 0)));
      }
      for (std::size_t i = 0; i < out_records.size(); ++i) {
        if (mode == "gclc")
          out_records[i].language = "lang" + std::to_string(result.labels[i]);
        else
          out_records[i].speaker = "c" + std::to_string(result.labels[i]);
      }
    }
    save_labels(EmbeddingSet(std::move(out_records)), out_path("out_labels"));
    note_written(out_path("out_labels"));
    return written;
  }

  if (name == "plda-train") {
    EmbeddingSet set = apply_labels(load_embeddings(in("vectors")),
                                    load_labels(in("labels")));
    PldaTrainOptions opts;
    opts.iterations =
        static_cast<int>(detail::get_integer_or(params, name, "iters", 10));
    PldaModel model = train_plda(set, opts);
    save_plda(model, out_path("model"));
    note_written(out_path("model"));
    return written;
  }

  if (name == "pseudo-label-plda") {
    EmbeddingSet set = load_embeddings(in("vectors"));
    PldaModel out_of_domain = load_plda(in("out_of_domain"));
    InterpolationWeights weights{
        detail::get_number_or(params, name, "alpha", 0.5)};
    PldaModel model = pseudo_label_plda(
        set, static_cast<int>(detail::get_integer(params, name, "k")),
        out_of_domain, weights,
        static_cast<int>(detail::get_integer_or(params, name, "iters", 10)));
    save_plda(model, out_path("model"));
    note_written(out_path("model"));
    return written;
  }

  if (name == "plda-interp") {
    PldaModel in_domain = load_plda(in("in_domain"));
    PldaModel out_of_domain = load_plda(in("out_of_domain"));
    InterpolationWeights weights{
        detail::get_number_or(params, name, "alpha", 0.5)};
    save_plda(interpolate_plda(in_domain, out_of_domain, weights),
              out_path("model"));
    note_written(out_path("model"));
    return written;
  }

  if (name == "score") {
    ScoreBackend backend = detail::make_backend(params, name, workdir);
    ScoreSet scores =
        score_trials(backend, load_embeddings(in("models")),
                     load_embeddings(in("segments")), load_trials(in("trials")));
    save_scores(scores, out_path("scores"));
    note_written(out_path("scores"));
    return written;
  }

  if (name == "snorm" || name == "glnorm") {
    ScoreBackend backend = detail::make_backend(params, name, workdir);
    ScoreSet raw = load_scores(in("scores"));
    EmbeddingSet models = load_embeddings(in("models"));
    EmbeddingSet segments = load_embeddings(in("segments"));
    EmbeddingSet cohort_vectors = load_embeddings(in("cohort"));
    SnormOptions opts;
    opts.top_n = static_cast<int>(detail::get_integer_or(params, name, "top_n", 0));
    opts.fallback_raw_on_zero_sigma =
        detail::get_bool_or(params, name, "fallback_raw", false);

    ScoreSet normd;
    if (name == "snorm") {
      normd = snorm(raw,
                    score_against_cohort(backend, models, cohort_vectors),
                    score_against_cohort(backend, segments, cohort_vectors),
                    opts);
    } else {
      Cohort cohort{cohort_vectors, load_categories(in("cohort_categories"))};
      normd = glnorm(raw, cohort, backend, models, segments,
                     load_categories(in("side_categories")), opts);
    }
    save_scores(normd, out_path("out"));
    note_written(out_path("out"));
    return written;
  }

  if (name == "calibrate") {
    ScoreSet scores = load_scores(in("scores"));
    CalibrationModel model;
    if (params.contains("key")) {
      ScoreSet keyed = attach_key(scores, load_key(in("key")));
      model = train_calibration(
          keyed, detail::get_number_or(params, name, "prior", 0.0075));
      if (params.contains("model")) {
        save_calibration(model, out_path("model"));
        note_written(out_path("model"));
      }
    } else {
      model = load_calibration(in("model_in"));
    }
    if (params.contains("out")) {
      ScoreSet target = params.contains("apply_to")
                            ? load_scores(in("apply_to"))
                            : scores;
      save_scores(apply_calibration(target, model), out_path("out"));
      note_written(out_path("out"));
    }
    return written;
  }

  if (name == "fuse") {
    const auto paths = detail::get_path_list(params, name, "scores");
    if (paths.empty()) detail::stage_error(name, "'scores' list is empty");
    std::vector<ScoreSet> subsystems;
    for (const auto &p : paths)
      subsystems.push_back(load_scores(detail::resolve(workdir, p)));
    FusionModel model;
    if (params.contains("key")) {
      TrialList key = load_key(in("key"));
      std::vector<ScoreSet> keyed;
      for (const auto &s : subsystems) keyed.push_back(attach_key(s, key));
      model = train_fusion(keyed,
                           detail::get_number_or(params, name, "prior", 0.0075),
                           detail::get_number_or(params, name, "l2", 1e-4));
      if (params.contains("model")) {
        save_fusion(model, out_path("model"));
        note_written(out_path("model"));
      }
    } else {
      model = load_fusion(in("model_in"));
    }
    if (params.contains("out")) {
      save_scores(apply_fusion(subsystems, model), out_path("out"));
      note_written(out_path("out"));
    }
    return written;
  }

  if (name == "metrics") {
    ScoreSet scores = attach_key(load_scores(in("scores")), load_key(in("key")));
    CostParams cost;
    if (params.contains("priors")) {
      if (!params["priors"].is_array())
        detail::stage_error(name, "'priors' must be an array of numbers");
      cost.p_targets.clear();
      for (const auto &p : params["priors"]) {
        if (!p.is_number())
          detail::stage_error(name, "'priors' must be an array of numbers");
        cost.p_targets.push_back(p.get<double>());
      }
    }
    cost.c_miss = detail::get_number_or(params, name, "c_miss", 1.0);
    cost.c_fa = detail::get_number_or(params, name, "c_fa", 1.0);

    std::vector<std::pair<std::string, double>> lines;
    lines.emplace_back("eer", 100.0 * eer(scores));
    lines.emplace_back("min_cprimary", min_cprimary(scores, cost));
    lines.emplace_back("act_cprimary", act_cprimary(scores, cost));
    if (params.contains("partition")) {
      const auto cells_by_pair = load_trial_partition(in("partition"));
      std::vector<std::string> cells;
      for (const auto &t : scores.trials().trials()) {
        auto it = cells_by_pair.find(t.model_id + "\t" + t.segment_id);
        if (it == cells_by_pair.end())
          throw InvalidInput("no partition category for trial (" +
                             t.model_id + ", " + t.segment_id + ")");
        cells.push_back(it->second);
      }
      lines.emplace_back("eer_equalized",
                         100.0 * equalized_metric(scores, cells, Metric::eer, cost));
      lines.emplace_back("min_cprimary_equalized",
                         equalized_metric(scores, cells, Metric::min_cprimary, cost));
      lines.emplace_back("act_cprimary_equalized",
                         equalized_metric(scores, cells, Metric::act_cprimary, cost));
    }

    std::string text;
    for (const auto &[metric, value] : lines) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f", value);
      text += metric + "\t" + buf + "\n";
      if (messages != nullptr)
        messages->push_back(metric + "\t" + buf);
    }
    if (params.contains("out")) {
      std::ofstream out = detail::open_output(out_path("out"));
      out << text;
      detail::finish_output(out, out_path("out"));
      note_written(out_path("out"));
    }
    if (params.contains("det")) {
      std::vector<double> targets, nontargets;
      detail::split_by_key(scores, targets, nontargets);
      const auto sweep = detail::roc_sweep(targets, nontargets);
      std::ofstream det = detail::open_output(out_path("det"));
      for (const auto &pt : sweep)
        det << format_full(pt.p_fa) << '\t' << format_full(pt.p_miss) << '\n';
      detail::finish_output(det, out_path("det"));
      note_written(out_path("det"));
    }
    return written;
  }

  detail::stage_error(name, "stage has no executor");  // unreachable
}

inline PipelineConfig load_pipeline_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open pipeline config '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error &e) {
    throw InvalidInput("pipeline config '" + path + "': " + e.what());
  }
  PipelineConfig config;
  if (j.contains("workdir"))
    config.workdir = j["workdir"].get<std::string>();
  if (j.contains("keep_intermediates"))
    config.keep_intermediates = j["keep_intermediates"].get<bool>();
  if (j.contains("threads")) config.threads = j["threads"].get<int>();
  if (!j.contains("stages") || !j["stages"].is_array() || j["stages"].empty())
    throw InvalidInput("pipeline config needs a non-empty 'stages' array");
  for (const auto &stage : j["stages"]) {
    if (!stage.is_object() || !stage.contains("stage"))
      throw InvalidInput("every stage needs a 'stage' name");
    PipelineStage s;
    s.name = stage["stage"].get<std::string>();
    s.params = stage;
    s.params.erase("stage");
    config.stages.push_back(std::move(s));
  }
  return config;
}

// Structural and dependency validation without executing anything: every
// stage must be known with well-formed parameters, and every input file must
// either already exist or be written by an earlier stage.
inline void validate_pipeline(const PipelineConfig &config) {
  const auto &table = detail::stage_table();
  std::set<std::string> produced;
  for (const auto &stage : config.stages) {
    auto spec_it = table.find(stage.name);
    if (spec_it == table.end())
      throw InvalidInput("unknown stage '" + stage.name + "'");
    const detail::StageSpec &spec = spec_it->second;
    for (const auto &[key, value] : stage.params.items()) {
      const bool known =
          std::find(spec.required.begin(), spec.required.end(), key) !=
              spec.required.end() ||
          std::find(spec.optional.begin(), spec.optional.end(), key) !=
              spec.optional.end();
      if (!known)
        detail::stage_error(stage.name, "unknown parameter '" + key + "'");
    }
    for (const auto &key : spec.required)
      if (!stage.params.contains(key))
        detail::stage_error(stage.name, "missing parameter '" + key + "'");
    if (spec.check) spec.check(stage.params, stage.name);

    for (const auto &key : spec.input_keys) {
      if (!stage.params.contains(key)) continue;
      if (key == "sim") continue;
      for (const auto &path :
           detail::get_path_list(stage.params, stage.name, key)) {
        const std::string resolved = detail::resolve(config.workdir, path);
        if (produced.count(resolved) == 0 &&
            !std::filesystem::exists(resolved))
          detail::stage_error(stage.name,
                              "input '" + path +
                                  "' does not exist and is not produced by "
                                  "an earlier stage");
      }
    }
    for (const auto &key : spec.output_keys) {
      if (!stage.params.contains(key)) continue;
      for (const auto &path :
           detail::get_path_list(stage.params, stage.name, key))
        produced.insert(detail::resolve(config.workdir, path));
    }
    if (stage.name == "pool" && stage.params.contains("out"))
      produced.insert(detail::resolve(
          config.workdir,
          detail::get_string(stage.params, stage.name, "out") + ".labels"));
  }
}

// Validates, then runs every stage in order.  When keep_intermediates is
// false, files written by non-final stages are removed after a successful
// run.  Returns every line a stage reported (metrics output).
inline std::vector<std::string> run_pipeline(const PipelineConfig &config) {
  validate_pipeline(config);
  if (config.threads.has_value()) set_thread_count(*config.threads);
  std::filesystem::create_directories(config.workdir);

  std::vector<std::string> messages;
  std::vector<std::vector<std::string>> written_per_stage;
  for (const auto &stage : config.stages)
    written_per_stage.push_back(
        run_stage(stage.name, stage.params, config.workdir, &messages));

  if (!config.keep_intermediates && written_per_stage.size() > 1) {
    std::set<std::string> keep(written_per_stage.back().begin(),
                               written_per_stage.back().end());
    for (std::size_t i = 0; i + 1 < written_per_stage.size(); ++i)
      for (const auto &path : written_per_stage[i])
        if (keep.count(path) == 0) {
          std::error_code ec;
          std::filesystem::remove(path, ec);
        }
  }
  return messages;
}

}  // namespace msv
