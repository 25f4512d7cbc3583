// mismatch_sv/io.hpp

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

// Text file formats.  All files are UTF-8, one record per line, '\n'
// terminated.  Fields are whitespace-separated except score files, which are
// tab-separated with scores printed to exactly 6 fractional digits.
//
//   vector file:    id f1 f2 ... fd          (full-precision decimals)
//   label file:     id speaker gender language dataset   ('-' = unknown)
//   trial file:     model_id segment_id
//   key file:       model_id segment_id target|nontarget
//   score file:     model_id<TAB>segment_id<TAB>%.6f
//   registry file:  model_id seg1 seg2 ...

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mismatch_sv/types.hpp"

namespace msv {

namespace detail {

// A missing or unreadable input is a validation failure (exit 2 at the
// CLI); only output-side failures are runtime errors.
inline std::ifstream open_input(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

inline void finish_output(std::ofstream &out, const std::string &path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

[[noreturn]] inline void parse_error(const std::string &path, std::size_t line,
                                     const std::string &what) {
  throw InvalidInput(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

inline EmbeddingSet load_embeddings(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  std::vector<EmbeddingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 2)
      detail::parse_error(path, line_no, "expected 'id v1 ... vd'");
    EmbeddingRecord rec;
    rec.id = std::string(tokens[0]);
    const Eigen::Index d = static_cast<Eigen::Index>(tokens.size()) - 1;
    if (dim < 0) {
      dim = d;
    } else if (d != dim) {
      detail::parse_error(path, line_no,
                          "dimension " + std::to_string(d) +
                              " does not match first record's dimension " +
                              std::to_string(dim));
    }
    rec.vector.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      double v;
      if (!try_parse_double(tokens[static_cast<std::size_t>(j) + 1], v))
        detail::parse_error(
            path, line_no,
            "non-numeric field '" +
                std::string(tokens[static_cast<std::size_t>(j) + 1]) + "'");
      rec.vector[j] = v;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw InvalidInput(path + ": empty vector file");
  try {
    return EmbeddingSet(std::move(records));
  } catch (const InvalidInput &e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

inline void save_embeddings(const EmbeddingSet &set, const std::string &path) {
  std::ofstream out = detail::open_output(path);
  for (const EmbeddingRecord &rec : set) {
    out << rec.id;
    for (Eigen::Index j = 0; j < rec.vector.size(); ++j)
      out << ' ' << format_full(rec.vector[j]);
    out << '\n';
  }
  detail::finish_output(out, path);
}

// Loads a label file into an id-keyed table; unlisted ids keep their labels.
struct LabelEntry {
  std::string speaker;
  Gender gender;
  std::string language;
  std::string dataset;
};

inline std::unordered_map<std::string, LabelEntry> load_labels(
    const std::string &path) {
  std::ifstream in = detail::open_input(path);
  std::unordered_map<std::string, LabelEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 5)
      detail::parse_error(path, line_no,
                          "expected 'id speaker gender language dataset'");
    LabelEntry entry;
    entry.speaker = std::string(tokens[1]);
    try {
      entry.gender = parse_gender(tokens[2]);
    } catch (const InvalidInput &e) {
      detail::parse_error(path, line_no, e.what());
    }
    entry.language = std::string(tokens[3]);
    entry.dataset = std::string(tokens[4]);
    if (!out.emplace(std::string(tokens[0]), std::move(entry)).second)
      detail::parse_error(path, line_no,
                          "duplicate id '" + std::string(tokens[0]) + "'");
  }
  return out;
}

inline EmbeddingSet apply_labels(
    const EmbeddingSet &set,
    const std::unordered_map<std::string, LabelEntry> &labels) {
  std::vector<EmbeddingRecord> records(set.records());
  for (EmbeddingRecord &rec : records) {
    auto it = labels.find(rec.id);
    if (it == labels.end()) continue;
    rec.speaker = it->second.speaker;
    rec.gender = it->second.gender;
    rec.language = it->second.language;
    rec.dataset = it->second.dataset;
  }
  return EmbeddingSet(std::move(records));
}

inline void save_labels(const EmbeddingSet &set, const std::string &path) {
  std::ofstream out = detail::open_output(path);
  for (const EmbeddingRecord &rec : set) {
    out << rec.id << ' ' << (rec.speaker.empty() ? kUnknownLabel : rec.speaker.c_str())
        << ' ' << gender_token(rec.gender) << ' '
        << (rec.language.empty() ? kUnknownLabel : rec.language.c_str()) << ' '
        << (rec.dataset.empty() ? kUnknownLabel : rec.dataset.c_str()) << '\n';
  }
  detail::finish_output(out, path);
}

// Categories for gender/language-dependent normalization, read from the same
// label-file format (speaker and dataset columns are ignored).
inline CategoryMap load_categories(const std::string &path) {
  CategoryMap out;
  for (const auto &[id, entry] : load_labels(path))
    out.emplace(id, Category{entry.gender, entry.language});
  return out;
}

inline TrialList load_trials(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  std::vector<Trial> trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 2)
      detail::parse_error(path, line_no, "expected 'model_id segment_id'");
    trials.push_back({std::string(tokens[0]), std::string(tokens[1])});
  }
  return TrialList(std::move(trials));
}

inline void save_trials(const TrialList &trials, const std::string &path) {
  std::ofstream out = detail::open_output(path);
  for (const Trial &t : trials.trials())
    out << t.model_id << ' ' << t.segment_id << '\n';
  detail::finish_output(out, path);
}

inline TrialList load_key(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  std::vector<Trial> trials;
  std::vector<TrialKey> key;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 3)
      detail::parse_error(path, line_no,
                          "expected 'model_id segment_id target|nontarget'");
    trials.push_back({std::string(tokens[0]), std::string(tokens[1])});
    if (tokens[2] == "target")
      key.push_back(TrialKey::target);
    else if (tokens[2] == "nontarget")
      key.push_back(TrialKey::nontarget);
    else
      detail::parse_error(path, line_no,
                          "bad key token '" + std::string(tokens[2]) + "'");
  }
  return TrialList(std::move(trials), std::move(key));
}

inline void save_key(const TrialList &trials, const std::string &path) {
  const auto &key = trials.key();
  std::ofstream out = detail::open_output(path);
  for (std::size_t i = 0; i < trials.size(); ++i)
    out << trials[i].model_id << ' ' << trials[i].segment_id << ' '
        << (key[i] == TrialKey::target ? "target" : "nontarget") << '\n';
  detail::finish_output(out, path);
}

// Attaches the key from a key file to scored trials, joining on the
// (model, segment) pair.  Every scored trial must appear in the key.
inline ScoreSet attach_key(const ScoreSet &scores, const TrialList &keyed) {
  const auto &key = keyed.key();
  std::unordered_map<std::string, TrialKey> lookup;
  lookup.reserve(keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i)
    lookup[keyed[i].model_id + "\t" + keyed[i].segment_id] = key[i];
  std::vector<TrialKey> aligned;
  aligned.reserve(scores.size());
  for (const Trial &t : scores.trials().trials()) {
    auto it = lookup.find(t.model_id + "\t" + t.segment_id);
    if (it == lookup.end())
      throw InvalidInput("trial (" + t.model_id + ", " + t.segment_id +
                         ") not present in key");
    aligned.push_back(it->second);
  }
  return ScoreSet(TrialList(scores.trials().trials(), std::move(aligned)),
                  scores.scores());
}

inline ScoreSet load_scores(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  std::vector<Trial> trials;
  std::vector<double> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 3)
      detail::parse_error(path, line_no,
                          "expected 'model_id segment_id score'");
    double v;
    if (!try_parse_double(tokens[2], v))
      detail::parse_error(path, line_no,
                          "non-numeric score '" + std::string(tokens[2]) + "'");
    trials.push_back({std::string(tokens[0]), std::string(tokens[1])});
    scores.push_back(v);
  }
  return ScoreSet(TrialList(std::move(trials)), std::move(scores));
}

inline void save_scores(const ScoreSet &scores, const std::string &path) {
  std::ofstream out = detail::open_output(path);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Trial &t = scores.trials()[i];
    out << t.model_id << '\t' << t.segment_id << '\t'
        << format_fixed6(scores.scores()[i]) << '\n';
  }
  detail::finish_output(out, path);
}

inline ModelRegistry load_registry(const std::string &path) {
  std::ifstream in = detail::open_input(path);
  ModelRegistry registry;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 2)
      detail::parse_error(path, line_no, "expected 'model_id seg1 ...'");
    std::vector<std::string> segs;
    for (std::size_t i = 1; i < tokens.size(); ++i)
      segs.emplace_back(tokens[i]);
    try {
      registry.add(std::string(tokens[0]), std::move(segs));
    } catch (const InvalidInput &e) {
      detail::parse_error(path, line_no, e.what());
    }
  }
  return registry;
}

inline void save_registry(const ModelRegistry &registry,
                          const std::string &path) {
  std::ofstream out = detail::open_output(path);
  for (const auto &[model_id, segs] : registry.entries()) {
    out << model_id;
    for (const std::string &s : segs) out << ' ' << s;
    out << '\n';
  }
  detail::finish_output(out, path);
}

namespace detail {

// Shared helpers for the whiten/subspace/plda model text formats: a header
// line of 'name key=value ...' followed by whitespace-separated matrix rows.
inline void write_matrix_rows(std::ofstream &out, const Eigen::MatrixXd &m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_full(m(r, c));
    }
    out << '\n';
  }
}

inline void write_vector_row(std::ofstream &out, const Eigen::VectorXd &v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out << ' ';
    out << format_full(v[i]);
  }
  out << '\n';
}

inline std::vector<double> read_numeric_row(std::ifstream &in,
                                            const std::string &path,
                                            std::size_t expected) {
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    std::vector<double> row;
    row.reserve(tokens.size());
    for (auto t : tokens) {
      double v;
      if (!try_parse_double(t, v))
        throw InvalidInput(path + ": non-numeric field '" + std::string(t) +
                           "'");
      row.push_back(v);
    }
    if (expected != 0 && row.size() != expected)
      throw InvalidInput(path + ": expected row of " +
                         std::to_string(expected) + " values, got " +
                         std::to_string(row.size()));
    return row;
  }
  throw InvalidInput(path + ": unexpected end of file");
}

inline Eigen::VectorXd read_vector_row(std::ifstream &in,
                                       const std::string &path,
                                       std::size_t expected) {
  auto row = read_numeric_row(in, path, expected);
  return Eigen::Map<Eigen::VectorXd>(row.data(),
                                     static_cast<Eigen::Index>(row.size()));
}

inline Eigen::MatrixXd read_matrix_rows(std::ifstream &in,
                                        const std::string &path,
                                        std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = read_numeric_row(in, path, cols);
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

// Parses 'key=value' tokens from a model header line after the type tag.
inline std::unordered_map<std::string, std::string> parse_header(
    const std::string &path, std::ifstream &in, const std::string &expect_tag) {
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens[0] != expect_tag)
      throw InvalidInput(path + ": expected '" + expect_tag +
                         "' header, got '" + std::string(tokens[0]) + "'");
    std::unordered_map<std::string, std::string> kv;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      auto tok = tokens[i];
      auto eq = tok.find('=');
      if (eq == std::string_view::npos)
        throw InvalidInput(path + ": bad header token '" + std::string(tok) +
                           "'");
      kv.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
    return kv;
  }
  throw InvalidInput(path + ": empty model file");
}

inline long header_int(const std::unordered_map<std::string, std::string> &kv,
                       const std::string &path, const std::string &key) {
  auto it = kv.find(key);
  if (it == kv.end())
    throw InvalidInput(path + ": header missing '" + key + "'");
  try {
    return std::stol(it->second);
  } catch (const std::exception &) {
    throw InvalidInput(path + ": bad integer for '" + key + "'");
  }
}

}  // namespace detail

}  // namespace msv
