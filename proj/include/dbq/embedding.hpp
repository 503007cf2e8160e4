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

// Word vectors with FastText-style subword composition.
//
// A token vector is the average of the token's own row (when it is in the
// vocabulary) and the rows of its hashed character n-grams. N-grams are taken
// from the token wrapped in boundary markers "<" and ">", counted in code
// points, and hashed with 32-bit FNV-1a modulo the bucket count.
//
// On-disk formats (all text, UTF-8, '\n' line ends, '.' decimal point):
//   vectors:  "V K" header, then V lines "word c1 ... cK"
//   buckets:  "B K" header, then "#subword min_n=<a> max_n=<b> hash=fnv1a32",
//             then B lines of K components; with " layout=sparse rows=N"
//             appended to the metadata, N lines "bucket c1 ... cK" instead
// Components are written in shortest round-trip form.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dbq/error.hpp"
#include "dbq/matrix.hpp"

namespace dbq {

struct SubwordConfig {
  int min_n = 3;
  int max_n = 6;
  std::size_t buckets = 100000;

  friend bool operator==(const SubwordConfig&, const SubwordConfig&) = default;
};

inline std::uint32_t fnv1a32(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

// Character n-grams of "<word>" for n in [min_n, max_n], shortest n first and
// left to right within one n. `exclude_full_word` drops the n-gram equal to
// the whole marked word; the vocabulary row already stands for it.
inline std::vector<std::string> subword_ngrams(std::string_view word, int min_n,
                                               int max_n,
                                               bool exclude_full_word = false) {
  if (min_n < 1 || max_n < min_n) {
    fail(ErrorCode::kInvalidArgument, "subword range requires 1 <= min_n <= max_n");
  }
  const std::string marked = "<" + std::string(word) + ">";
  std::vector<std::size_t> starts;  // code point boundaries
  for (std::size_t i = 0; i < marked.size(); ++i) {
    if ((static_cast<unsigned char>(marked[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  starts.push_back(marked.size());
  const std::size_t chars = starts.size() - 1;

  std::vector<std::string> grams;
  for (int n = min_n; n <= max_n; ++n) {
    const auto len = static_cast<std::size_t>(n);
    if (len > chars) break;
    for (std::size_t i = 0; i + len <= chars; ++i) {
      if (exclude_full_word && len == chars) continue;
      grams.push_back(marked.substr(starts[i], starts[i + len] - starts[i]));
    }
  }
  return grams;
}

class EmbeddingModel {
 public:
  explicit EmbeddingModel(std::size_t dim) : dim_(dim) {
    if (dim == 0) fail(ErrorCode::kInvalidArgument, "embedding dim must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t vocab_size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::optional<std::size_t> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void add_word(std::string word, std::span<const double> values) {
    check_row(values, "word \"" + word + "\"");
    if (index_.count(word) != 0) {
      fail(ErrorCode::kInvalidArgument, "duplicate word \"" + word + "\"");
    }
    index_.emplace(word, words_.size());
    words_.push_back(std::move(word));
    word_rows_.insert(word_rows_.end(), values.begin(), values.end());
  }

  std::span<const float> word_row(std::size_t i) const {
    return {word_rows_.data() + i * dim_, dim_};
  }
  std::span<float> mutable_word_row(std::size_t i) {
    return {word_rows_.data() + i * dim_, dim_};
  }

  bool subwords_enabled() const { return subwords_.has_value(); }
  const std::optional<SubwordConfig>& subword_config() const { return subwords_; }

  // Allocates a zeroed bucket table.
  void enable_subwords(const SubwordConfig& config) {
    if (config.buckets == 0) {
      fail(ErrorCode::kInvalidArgument, "subword bucket count must be positive");
    }
    if (config.min_n < 1 || config.max_n < config.min_n) {
      fail(ErrorCode::kInvalidArgument, "subword range requires 1 <= min_n <= max_n");
    }
    subwords_ = config;
    bucket_rows_.assign(config.buckets * dim_, 0.0f);
  }

  void disable_subwords() {
    subwords_.reset();
    bucket_rows_.clear();
  }

  std::size_t bucket_of(std::string_view ngram) const {
    return fnv1a32(ngram) % subwords_->buckets;
  }

  std::span<const float> bucket_row(std::size_t b) const {
    return {bucket_rows_.data() + b * dim_, dim_};
  }
  std::span<float> mutable_bucket_row(std::size_t b) {
    return {bucket_rows_.data() + b * dim_, dim_};
  }

  void set_bucket(std::size_t b, std::span<const double> values) {
    check_row(values, "bucket " + std::to_string(b));
    std::copy(values.begin(), values.end(), mutable_bucket_row(b).begin());
  }

  // Row indices feeding a token: the vocabulary row (if any) and the
  // n-gram buckets. Buckets are offset by vocab_size() so that one index
  // space covers both tables.
  std::vector<std::size_t> input_rows(std::string_view word) const {
    std::vector<std::size_t> rows;
    const auto id = find(word);
    if (id) rows.push_back(*id);
    if (subwords_) {
      for (const std::string& g : subword_ngrams(word, subwords_->min_n,
                                                 subwords_->max_n, id.has_value())) {
        rows.push_back(words_.size() + bucket_of(g));
      }
    }
    return rows;
  }

  std::span<const float> row(std::size_t input_row) const {
    return input_row < words_.size() ? word_row(input_row)
                                     : bucket_row(input_row - words_.size());
  }
  std::span<float> mutable_row(std::size_t input_row) {
    return input_row < words_.size() ? mutable_word_row(input_row)
                                     : mutable_bucket_row(input_row - words_.size());
  }

 private:
  void check_row(std::span<const double> values, const std::string& what) const {
    if (values.size() != dim_) {
      fail(ErrorCode::kInvalidArgument,
           what + " has " + std::to_string(values.size()) +
               " components, expected " + std::to_string(dim_));
    }
    for (double v : values) {
      if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, what + " is not finite");
    }
  }

  std::size_t dim_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> word_rows_;
  std::optional<SubwordConfig> subwords_;
  std::vector<float> bucket_rows_;
};

struct TokenVector {
  std::vector<double> values;
  bool oov = false;  // the token has no vocabulary row
};

// Total: unknown tokens without subword coverage come back as zeros with the
// oov flag set.
inline TokenVector compose_token_vector(const EmbeddingModel& model,
                                        std::string_view word) {
  TokenVector out;
  out.values.assign(model.dim(), 0.0);
  out.oov = !model.find(word).has_value();
  const std::vector<std::size_t> rows = model.input_rows(word);
  if (rows.empty()) return out;
  for (std::size_t r : rows) {
    const auto src = model.row(r);
    for (std::size_t k = 0; k < src.size(); ++k) out.values[k] += src[k];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : out.values) v *= inv;
  return out;
}

namespace embedding_internal {

inline double parse_double(std::string_view field, const std::string& where) {
  double value = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    fail(ErrorCode::kParse, where + ": non-numeric component \"" +
                                std::string(field) + "\"");
  }
  return value;
}

inline std::size_t parse_size(std::string_view field, const std::string& where) {
  std::size_t value = 0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorCode::kParse, where + ": expected an integer, got \"" +
                                std::string(field) + "\"");
  }
  return value;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > b) fields.push_back(line.substr(b, i - b));
  }
  return fields;
}

inline void append_float(std::string& out, float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

// Reads "N K" and returns both.
inline std::pair<std::size_t, std::size_t> read_header(std::istream& in,
                                                       const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || split_fields(line).empty()) {
    fail(ErrorCode::kParse, source + ": missing header");
  }
  const auto fields = split_fields(line);
  if (fields.size() != 2) {
    fail(ErrorCode::kParse, source + ":1: malformed header, expected \"count dim\"");
  }
  const std::string where = source + ":1";
  const std::size_t n = parse_size(fields[0], where);
  const std::size_t k = parse_size(fields[1], where);
  if (k == 0) fail(ErrorCode::kParse, where + ": dimension must be positive");
  return {n, k};
}

}  // namespace embedding_internal

// word2vec text format.
inline EmbeddingModel read_word_vectors(std::istream& in,
                                        const std::string& source = "<stream>") {
  using namespace embedding_internal;
  const auto [count, dim] = read_header(in, source);
  EmbeddingModel model(dim);
  std::string line;
  std::vector<double> row(dim);
  std::size_t line_no = 1;
  while (model.vocab_size() < count) {
    if (!std::getline(in, line)) {
      fail(ErrorCode::kParse, source + ": expected " + std::to_string(count) +
                                  " rows, found " + std::to_string(model.vocab_size()));
    }
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto fields = split_fields(line);
    if (fields.size() != dim + 1) {
      fail(ErrorCode::kParse, where + ": expected " + std::to_string(dim) +
                                  " components, found " +
                                  std::to_string(fields.empty() ? 0 : fields.size() - 1));
    }
    for (std::size_t k = 0; k < dim; ++k) row[k] = parse_double(fields[k + 1], where);
    try {
      model.add_word(std::string(fields[0]), row);
    } catch (const Error& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
  }
  return model;
}

inline EmbeddingModel load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + path);
  return read_word_vectors(in, path);
}

inline void write_word_vectors(std::ostream& out, const EmbeddingModel& model) {
  out << model.vocab_size() << ' ' << model.dim() << '\n';
  std::string line;
  for (std::size_t i = 0; i < model.vocab_size(); ++i) {
    line = model.words()[i];
    for (float v : model.word_row(i)) {
      line.push_back(' ');
      embedding_internal::append_float(line, v);
    }
    line.push_back('\n');
    out << line;
  }
}

enum class BucketLayout { kDense, kSparse };

// Dense files hold all B rows. Sparse files hold only the rows that are not
// all zero, each prefixed by its bucket index, and say so in the metadata
// line ("layout=sparse rows=N").
inline void write_buckets(std::ostream& out, const EmbeddingModel& model,
                          BucketLayout layout = BucketLayout::kSparse) {
  const SubwordConfig& cfg = *model.subword_config();
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < cfg.buckets; ++b) {
    const auto r = model.bucket_row(b);
    if (layout == BucketLayout::kDense ||
        std::any_of(r.begin(), r.end(), [](float v) { return v != 0.0f; })) {
      rows.push_back(b);
    }
  }
  out << cfg.buckets << ' ' << model.dim() << '\n';
  out << "#subword min_n=" << cfg.min_n << " max_n=" << cfg.max_n << " hash=fnv1a32";
  if (layout == BucketLayout::kSparse) out << " layout=sparse rows=" << rows.size();
  out << '\n';
  std::string line;
  for (std::size_t b : rows) {
    line.clear();
    if (layout == BucketLayout::kSparse) line = std::to_string(b) + ' ';
    bool first = true;
    for (float v : model.bucket_row(b)) {
      if (!first) line.push_back(' ');
      first = false;
      embedding_internal::append_float(line, v);
    }
    line.push_back('\n');
    out << line;
  }
}

// Attaches a bucket table to `model`; dimensions must agree.
inline void read_buckets(std::istream& in, EmbeddingModel& model,
                         const std::string& source = "<stream>") {
  using namespace embedding_internal;
  const auto [count, dim] = read_header(in, source);
  if (dim != model.dim()) {
    fail(ErrorCode::kParse, source + ":1: bucket dim " + std::to_string(dim) +
                                " does not match vector dim " +
                                std::to_string(model.dim()));
  }
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kParse, source + ":2: missing subword metadata");
  SubwordConfig cfg;
  cfg.buckets = count;
  bool saw_min = false, saw_max = false, saw_hash = false;
  bool sparse = false;
  std::size_t stored = count;
  const auto fields = split_fields(line);
  if (fields.empty() || fields[0] != "#subword") {
    fail(ErrorCode::kParse, source + ":2: expected \"#subword ...\" metadata");
  }
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = fields[i].substr(0, eq);
    const auto value = fields[i].substr(eq + 1);
    if (key == "min_n") {
      cfg.min_n = static_cast<int>(parse_size(value, source + ":2"));
      saw_min = true;
    } else if (key == "max_n") {
      cfg.max_n = static_cast<int>(parse_size(value, source + ":2"));
      saw_max = true;
    } else if (key == "hash") {
      if (value != "fnv1a32") {
        fail(ErrorCode::kParse, source + ":2: unsupported hash \"" + std::string(value) + "\"");
      }
      saw_hash = true;
    } else if (key == "layout") {
      if (value != "sparse" && value != "dense") {
        fail(ErrorCode::kParse, source + ":2: unknown layout \"" + std::string(value) + "\"");
      }
      sparse = value == "sparse";
    } else if (key == "rows") {
      stored = parse_size(value, source + ":2");
    }
  }
  if (!saw_min || !saw_max || !saw_hash) {
    fail(ErrorCode::kParse, source + ":2: metadata needs min_n, max_n and hash");
  }
  try {
    model.enable_subwords(cfg);
  } catch (const Error& e) {
    fail(ErrorCode::kParse, source + ":2: " + e.what());
  }
  if (!sparse) stored = count;
  std::vector<double> row(dim);
  const std::size_t width = sparse ? dim + 1 : dim;
  for (std::size_t i = 0; i < stored; ++i) {
    const std::string where = source + ":" + std::to_string(i + 3);
    if (!std::getline(in, line)) {
      fail(ErrorCode::kParse, where + ": expected " + std::to_string(stored) + " bucket rows");
    }
    const auto parts = split_fields(line);
    if (parts.size() != width) {
      fail(ErrorCode::kParse, where + ": expected " + std::to_string(dim) +
                                  " components, found " +
                                  std::to_string(parts.size() - (sparse && !parts.empty())));
    }
    std::size_t b = i;
    if (sparse) {
      b = parse_size(parts[0], where);
      if (b >= count) fail(ErrorCode::kParse, where + ": bucket index out of range");
    }
    for (std::size_t k = 0; k < dim; ++k) row[k] = parse_double(parts[k + width - dim], where);
    model.set_bucket(b, row);
  }
}

// Reductions over the rows of a token matrix.
enum class Pooling { kMean, kSum, kMax, kMin };

inline std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::kMean: return "mean";
    case Pooling::kSum: return "sum";
    case Pooling::kMax: return "max";
    case Pooling::kMin: return "min";
  }
  return "mean";
}

inline Pooling parse_pooling(std::string_view name) {
  if (name == "mean") return Pooling::kMean;
  if (name == "sum") return Pooling::kSum;
  if (name == "max") return Pooling::kMax;
  if (name == "min") return Pooling::kMin;
  fail(ErrorCode::kInvalidArgument, "unknown pooling \"" + std::string(name) + "\"");
}

inline std::vector<double> pool(const Matrix& vectors, Pooling strategy) {
  if (vectors.rows() == 0) fail(ErrorCode::kInvalidArgument, "nothing to pool");
  std::vector<double> out(vectors.row(0).begin(), vectors.row(0).end());
  for (std::size_t r = 1; r < vectors.rows(); ++r) {
    const auto v = vectors.row(r);
    for (std::size_t k = 0; k < out.size(); ++k) {
      switch (strategy) {
        case Pooling::kMean:
        case Pooling::kSum: out[k] += v[k]; break;
        case Pooling::kMax: out[k] = std::max(out[k], v[k]); break;
        case Pooling::kMin: out[k] = std::min(out[k], v[k]); break;
      }
    }
  }
  if (strategy == Pooling::kMean) {
    const double inv = 1.0 / static_cast<double>(vectors.rows());
    for (double& x : out) x *= inv;
  }
  return out;
}

}  // namespace dbq
