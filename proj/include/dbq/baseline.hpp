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

// Rule-based DBQ detectors. They look at the question text only.
//
//   a1  a conjunction is present
//   a2  a1 and the text is a single sentence
//   a3  a2 applied after cutting the noun-phrase chunks out of the text

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dbq/corpus.hpp"
#include "dbq/error.hpp"
#include "dbq/metrics.hpp"
#include "dbq/text.hpp"

namespace dbq {

enum class BaselineKind { kApproach1, kApproach2, kApproach3 };

inline std::string_view baseline_kind_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kApproach1: return "a1";
    case BaselineKind::kApproach2: return "a2";
    case BaselineKind::kApproach3: return "a3";
  }
  return "a1";
}

inline BaselineKind parse_baseline_kind(std::string_view name) {
  if (name == "a1" || name == "approach1") return BaselineKind::kApproach1;
  if (name == "a2" || name == "approach2") return BaselineKind::kApproach2;
  if (name == "a3" || name == "approach3") return BaselineKind::kApproach3;
  fail(ErrorCode::kInvalidArgument,
       "unknown baseline \"" + std::string(name) + "\" (expected a1, a2 or a3)");
}

namespace baseline_internal {

inline bool single_sentence_with_conjunction(std::string_view text,
                                             const ConjunctionLexicon& lexicon) {
  return has_conjunction(text, lexicon) && split_sentences(text).size() == 1;
}

}  // namespace baseline_internal

inline Label baseline_predict(BaselineKind kind, const QAItem& item,
                              const ConjunctionLexicon& lexicon) {
  bool flagged = false;
  switch (kind) {
    case BaselineKind::kApproach1:
      flagged = has_conjunction(item.question, lexicon);
      break;
    case BaselineKind::kApproach2:
      flagged = baseline_internal::single_sentence_with_conjunction(item.question, lexicon);
      break;
    case BaselineKind::kApproach3: {
      const std::string rest = excise_spans(item.question, chunk_noun_phrases(item.question));
      flagged = baseline_internal::single_sentence_with_conjunction(rest, lexicon);
      break;
    }
  }
  return flagged ? Label::kDbq : Label::kNonDbq;
}

// Items without a label are ignored. AUC is computed on the hard 0/1 flags.
inline EvalReport baseline_evaluate(BaselineKind kind, const std::vector<QAItem>& corpus,
                                    const ConjunctionLexicon& lexicon) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const QAItem& item : corpus) {
    if (!item.label) continue;
    scores.push_back(to_int(baseline_predict(kind, item, lexicon)));
    labels.push_back(to_int(*item.label));
  }
  if (labels.empty()) fail(ErrorCode::kInvalidArgument, "no labeled items to evaluate");
  return evaluate_scores(scores, labels, 0.5);
}

}  // namespace dbq
