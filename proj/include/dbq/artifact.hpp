// Copyright 2026 The dbq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Model artifact bundle: everything the service needs to featurize, classify
// and explain, in one directory.
//
//   manifest.json             {"format":"dbq-artifact","version":1,
//                              "pipeline":{...},
//                              "files":{"<relative path>":{"sha256":..,"bytes":..}}}
//   embedding/embedding.json  {"dim":K,"subwords":{min_n,max_n,buckets}|null}
//   embedding/vectors.txt     word2vec text format
//   embedding/buckets.txt     bucket table (only with subwords)
//   classifier.json           see to_json(TrainedModel)
//   background.json           {"rows":[[...],...]} Shapley background set
//
// The manifest is written last. Loading checks every listed file's size and
// SHA-256 before parsing anything, and any problem is an ErrorCode::kArtifact.

#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dbq/classify.hpp"
#include "dbq/embedding.hpp"
#include "dbq/error.hpp"
#include "dbq/featurize.hpp"
#include "dbq/matrix.hpp"
#include "dbq/random.hpp"

namespace dbq {

inline constexpr std::string_view kArtifactFormat = "dbq-artifact";
inline constexpr int kArtifactVersion = 1;
inline constexpr std::size_t kDefaultBackgroundRows = 100;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kInternal, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kNotFound, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::kInternal, "write failed for " + path.string());
}

struct PipelineConfig {
  FeaturizeOptions featurize{};
  double threshold = kDefaultThreshold;
};

struct Pipeline {
  EmbeddingModel embedding;
  TrainedModel classifier;
  PipelineConfig config;
  Matrix background;
  std::string version;  // derived from the manifest digest when loaded

  FeatureVector features(const QAItem& item, ItemTrace* trace = nullptr) const {
    return featurize(embedding, item, config.featurize, trace);
  }
  double probability(const QAItem& item) const {
    return classifier.predict_proba(features(item).values);
  }
};

// Seeded sample of at most n rows, kept in their original order.
inline Matrix sample_background(const Matrix& train, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(train.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(std::min(idx.size(), n));
  std::sort(idx.begin(), idx.end());
  Matrix out(0, train.cols());
  for (std::size_t i : idx) out.append_row(train.row(i));
  return out;
}

namespace artifact_internal {

inline nlohmann::json pipeline_json(const Pipeline& p) {
  return {{"question_pooling", std::string(pooling_name(p.config.featurize.question_pooling))},
          {"answer_pooling", "mean"},
          {"include_handcrafted", p.config.featurize.include_handcrafted},
          {"threshold", p.config.threshold},
          {"embedding_dim", p.embedding.dim()},
          {"feature_dim", p.classifier.dim()},
          {"model_kind", std::string(model_kind_name(p.classifier.kind()))}};
}

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"cols", m.cols()}, {"rows", rows}};
}

[[noreturn]] inline void artifact_error(const std::string& what) {
  fail(ErrorCode::kArtifact, "artifact rejected: " + what);
}

}  // namespace artifact_internal

// A trained embedding as named files: embedding.json
// {"dim":K,"subwords":{min_n,max_n,buckets}|null}, vectors.txt, and
// buckets.txt when subwords are enabled.
inline std::vector<std::pair<std::string, std::string>> embedding_files(const EmbeddingModel& m) {
  std::vector<std::pair<std::string, std::string>> files;
  nlohmann::json emb{{"dim", m.dim()}, {"subwords", nullptr}};
  if (const auto& sw = m.subword_config()) {
    emb["subwords"] = {{"min_n", sw->min_n}, {"max_n", sw->max_n}, {"buckets", sw->buckets}};
  }
  files.emplace_back("embedding.json", emb.dump(2) + "\n");
  {
    std::ostringstream ss;
    write_word_vectors(ss, m);
    files.emplace_back("vectors.txt", ss.str());
  }
  if (m.subwords_enabled()) {
    std::ostringstream ss;
    write_buckets(ss, m);
    files.emplace_back("buckets.txt", ss.str());
  }
  return files;
}

inline EmbeddingModel embedding_from_files(const std::map<std::string, std::string>& files) {
  const auto need = [&](const std::string& name) -> const std::string& {
    const auto it = files.find(name);
    if (it == files.end()) fail(ErrorCode::kParse, "embedding " + name + " missing");
    return it->second;
  };
  nlohmann::json emb;
  try {
    emb = nlohmann::json::parse(need("embedding.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("embedding.json: ") + e.what());
  }
  std::istringstream vec(need("vectors.txt"));
  EmbeddingModel embedding = read_word_vectors(vec, "vectors.txt");
  if (embedding.dim() != emb.value("dim", std::size_t{0})) {
    fail(ErrorCode::kParse, "embedding dimension disagrees with embedding.json");
  }
  if (emb.contains("subwords") && !emb["subwords"].is_null()) {
    std::istringstream buckets(need("buckets.txt"));
    read_buckets(buckets, embedding, "buckets.txt");
  }
  return embedding;
}

inline void save_embedding(const std::filesystem::path& dir, const EmbeddingModel& m) {
  for (const auto& [name, content] : embedding_files(m)) write_file(dir / name, content);
}

inline EmbeddingModel load_embedding(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorCode::kNotFound, "embedding directory " + dir.string() + " not found");
  }
  std::map<std::string, std::string> files;
  for (const char* name : {"embedding.json", "vectors.txt", "buckets.txt"}) {
    if (std::filesystem::is_regular_file(dir / name)) files.emplace(name, read_file(dir / name));
  }
  return embedding_from_files(files);
}

inline void save_artifact(const std::filesystem::path& dir, const Pipeline& p) {
  using namespace artifact_internal;
  if (p.background.rows() > 0 && p.background.cols() != p.classifier.dim()) {
    fail(ErrorCode::kInvalidArgument, "background width does not match the classifier");
  }
  if (feature_dimension(p.embedding.dim(), p.config.featurize.include_handcrafted) !=
      p.classifier.dim()) {
    fail(ErrorCode::kInvalidArgument, "classifier dimension does not match the featurizer");
  }
  std::vector<std::pair<std::string, std::string>> files;
  for (auto& [name, content] : embedding_files(p.embedding)) {
    files.emplace_back("embedding/" + name, std::move(content));
  }
  files.emplace_back("classifier.json", to_json(p.classifier).dump() + "\n");
  files.emplace_back("background.json", matrix_json(p.background).dump() + "\n");

  nlohmann::json manifest{{"format", std::string(kArtifactFormat)},
                          {"version", kArtifactVersion},
                          {"pipeline", pipeline_json(p)},
                          {"files", nlohmann::json::object()}};
  for (const auto& [rel, content] : files) {
    write_file(dir / rel, content);
    manifest["files"][rel] = {{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline Pipeline load_artifact(const std::filesystem::path& dir) {
  using namespace artifact_internal;
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) artifact_error(dir.string() + " is not a directory");
  std::string manifest_text;
  nlohmann::json manifest;
  try {
    manifest_text = read_file(dir / "manifest.json");
    manifest = nlohmann::json::parse(manifest_text);
  } catch (const std::exception& e) {
    artifact_error(std::string("manifest.json: ") + e.what());
  }

  std::map<std::string, std::string> contents;
  try {
    if (manifest.at("format") != kArtifactFormat) artifact_error("manifest format is not dbq-artifact");
    if (manifest.at("version") != kArtifactVersion) artifact_error("unsupported manifest version");
    for (const auto& [rel, meta] : manifest.at("files").items()) {
      const fs::path path = dir / rel;
      if (!fs::is_regular_file(path)) artifact_error(rel + " is missing");
      std::string content = read_file(path);
      if (content.size() != meta.at("bytes").get<std::size_t>()) {
        artifact_error(rel + " has " + std::to_string(content.size()) + " bytes, manifest says " +
                       std::to_string(meta.at("bytes").get<std::size_t>()));
      }
      if (sha256_hex(content) != meta.at("sha256").get<std::string>()) {
        artifact_error(rel + " checksum mismatch");
      }
      contents.emplace(rel, std::move(content));
    }
    for (const char* required : {"embedding/embedding.json", "embedding/vectors.txt",
                                 "classifier.json", "background.json"}) {
      if (!contents.count(required)) artifact_error(std::string(required) + " not in manifest");
    }
  } catch (const nlohmann::json::exception& e) {
    artifact_error(std::string("malformed manifest: ") + e.what());
  }

  try {
    std::map<std::string, std::string> emb_files;
    for (const auto& [rel, content] : contents) {
      if (rel.rfind("embedding/", 0) == 0) emb_files.emplace(rel.substr(10), content);
    }
    EmbeddingModel embedding = embedding_from_files(emb_files);
    TrainedModel classifier =
        trained_model_from_json(nlohmann::json::parse(contents["classifier.json"]));
    const auto& pj = manifest.at("pipeline");
    PipelineConfig config;
    config.featurize.question_pooling =
        parse_pooling(pj.at("question_pooling").get<std::string>());
    config.featurize.include_handcrafted = pj.at("include_handcrafted").get<bool>();
    config.threshold = pj.at("threshold").get<double>();
    if (feature_dimension(embedding.dim(), config.featurize.include_handcrafted) !=
        classifier.dim()) {
      artifact_error("classifier dimension does not match the featurizer");
    }
    const auto bg = nlohmann::json::parse(contents["background.json"]);
    Matrix background(0, bg.at("cols").get<std::size_t>());
    for (const auto& row : bg.at("rows")) {
      background.append_row(row.get<std::vector<double>>());
    }
    if (background.rows() > 0 && background.cols() != classifier.dim()) {
      artifact_error("background width does not match the classifier");
    }
    return Pipeline{std::move(embedding), std::move(classifier), config, std::move(background),
                    sha256_hex(manifest_text).substr(0, 16)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kArtifact) throw;
    artifact_error(e.what());
  } catch (const std::exception& e) {
    artifact_error(e.what());
  }
}

}  // namespace dbq
