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

#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dbq/error.hpp"
#include "dbq/text.hpp"

namespace dbq {

enum class Label : int { kNonDbq = 0, kDbq = 1 };

inline int to_int(Label label) { return static_cast<int>(label); }

inline Label label_from_int(int value) {
  if (value != 0 && value != 1) {
    fail(ErrorCode::kInvalidArgument,
         "label must be 0 or 1, got " + std::to_string(value));
  }
  return static_cast<Label>(value);
}

// One survey question together with its ordered answer options.
struct QAItem {
  std::string id;
  std::string question;
  std::vector<std::string> options;
  std::optional<Label> label;

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

inline constexpr std::size_t kMaxQuestionWords = 200;

enum class RejectReason { kEmptyQuestion, kTooManyWords };

inline std::string_view reject_reason_name(RejectReason reason) {
  return reason == RejectReason::kEmptyQuestion ? "empty_question"
                                                : "too_many_words";
}

inline std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  for (const Token& t : tokenize(text)) n += t.is_word() ? 1 : 0;
  return n;
}

inline std::optional<RejectReason> check_item(const QAItem& item) {
  const bool blank = std::all_of(item.question.begin(), item.question.end(),
                                 [](char c) {
                                   return text_internal::is_space(
                                       static_cast<unsigned char>(c));
                                 });
  if (blank) return RejectReason::kEmptyQuestion;
  if (count_words(item.question) > kMaxQuestionWords) {
    return RejectReason::kTooManyWords;
  }
  return std::nullopt;
}

struct Rejection {
  std::string id;
  RejectReason reason;
};

struct IngestResult {
  std::vector<QAItem> accepted;
  std::vector<Rejection> rejected;
};

// Applies the ingestion rules. Over-long questions are dropped with a reason,
// never truncated.
inline IngestResult ingest(std::vector<QAItem> items) {
  IngestResult result;
  for (QAItem& item : items) {
    if (auto reason = check_item(item)) {
      result.rejected.push_back({item.id, *reason});
    } else {
      result.accepted.push_back(std::move(item));
    }
  }
  return result;
}

// JSON Lines, one object per line:
//   {"id": str, "question": str, "options": [str], "label": 0|1|null}
inline nlohmann::json to_json(const QAItem& item) {
  nlohmann::json j;
  j["id"] = item.id;
  j["question"] = item.question;
  j["options"] = item.options;
  j["label"] = item.label ? nlohmann::json(to_int(*item.label)) : nullptr;
  return j;
}

inline QAItem qa_item_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::kParse, "expected a JSON object");
  QAItem item;
  if (!j.contains("id") || !j["id"].is_string()) {
    fail(ErrorCode::kParse, "missing string field \"id\"");
  }
  if (!j.contains("question") || !j["question"].is_string()) {
    fail(ErrorCode::kParse, "missing string field \"question\"");
  }
  item.id = j["id"].get<std::string>();
  item.question = j["question"].get<std::string>();
  if (j.contains("options") && !j["options"].is_null()) {
    if (!j["options"].is_array()) {
      fail(ErrorCode::kParse, "\"options\" must be an array of strings");
    }
    for (const auto& o : j["options"]) {
      if (!o.is_string()) {
        fail(ErrorCode::kParse, "\"options\" must be an array of strings");
      }
      item.options.push_back(o.get<std::string>());
    }
  }
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_number_integer()) {
      fail(ErrorCode::kParse, "\"label\" must be 0, 1 or null");
    }
    const int v = j["label"].get<int>();
    if (v != 0 && v != 1) fail(ErrorCode::kParse, "\"label\" must be 0, 1 or null");
    item.label = static_cast<Label>(v);
  }
  return item;
}

// Reads a JSONL stream. Errors carry `source:line`.
inline std::vector<QAItem> read_corpus(std::istream& in,
                                       std::string_view source = "<stream>") {
  std::vector<QAItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      items.push_back(qa_item_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, std::string(source) + ":" +
                                  std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::kParse, std::string(source) + ":" +
                                  std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

inline std::vector<QAItem> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot open corpus " + path);
  return read_corpus(in, path);
}

inline void write_corpus(std::ostream& out, const std::vector<QAItem>& items) {
  for (const QAItem& item : items) out << to_json(item).dump() << '\n';
}

inline void write_corpus_file(const std::string& path,
                              const std::vector<QAItem>& items) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kInvalidArgument, "cannot write " + path);
  write_corpus(out, items);
}

}  // namespace dbq
