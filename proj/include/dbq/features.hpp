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

// Structural features of a question: counts of words, sentences, conjunctions,
// punctuation, chunks and coarse part-of-speech classes. The order of the
// vector is frozen by kHandcraftedFeatureNames and must not change without a
// model format bump.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dbq/corpus.hpp"
#include "dbq/text.hpp"

namespace dbq {

enum class CoarseTag { kNoun, kVerb, kAdjective, kAdverb, kPronoun, kDeterminer, kOther };

inline constexpr std::array<CoarseTag, 6> kTaggedClasses = {
    CoarseTag::kNoun,      CoarseTag::kVerb,    CoarseTag::kAdjective,
    CoarseTag::kAdverb,    CoarseTag::kPronoun, CoarseTag::kDeterminer};

namespace features_internal {

inline bool ends_with(std::string_view word, std::string_view suffix) {
  return word.size() > suffix.size() + 1 &&
         word.substr(word.size() - suffix.size()) == suffix;
}

template <std::size_t N>
bool in(const std::array<std::string_view, N>& list, std::string_view w) {
  return std::find(list.begin(), list.end(), w) != list.end();
}

inline constexpr std::array<std::string_view, 30> kPronouns = {
    "i",    "you",   "he",   "she",  "it",    "we",     "they",  "me",
    "him",  "her",   "us",   "them", "my",    "your",   "his",   "its",
    "our",  "their", "mine", "yours", "who",  "whom",   "whose", "what",
    "which", "myself", "yourself", "themselves", "ourselves", "itself"};

inline constexpr std::array<std::string_view, 16> kDeterminers = {
    "the", "a", "an", "this", "that", "these", "those", "each",
    "every", "some", "any", "no", "all", "both", "either", "neither"};

inline constexpr std::array<std::string_view, 40> kVerbs = {
    "is",     "are",   "was",     "were",     "be",      "been",   "being",
    "am",     "do",    "does",    "did",      "have",    "has",    "had",
    "can",    "could", "will",    "would",    "should",  "may",    "might",
    "must",   "like",  "agree",   "disagree", "feel",    "think",  "rate",
    "recommend", "use", "prefer", "know",     "want",    "need",   "make",
    "get",    "give",  "listen",  "improve",  "describe"};

inline constexpr std::array<std::string_view, 24> kAdjectives = {
    "good",  "bad",    "great",  "new",    "old",    "easy",     "hard",
    "simple", "happy", "clean",  "fast",   "slow",   "friendly", "satisfied",
    "likely", "better", "best",  "worse",  "worst",  "high",     "low",
    "fair",  "yummy",  "helpful"};

inline constexpr std::array<std::string_view, 16> kAdverbs = {
    "very", "how", "when", "where", "why", "often", "never", "always",
    "too", "quite", "rather", "well", "not", "ever", "again", "now"};

// Prepositions, conjunctions and other function words that carry no coarse
// content class.
inline constexpr std::array<std::string_view, 27> kFunctionWords = {
    "and",  "or",   "but",  "nor",   "for",  "yet",  "so",   "of",  "in",
    "on",   "at",   "to",   "with",  "from", "by",   "about", "as", "into",
    "if",   "than", "then", "also", "including", "along", "together", "per",
    "via"};

}  // namespace features_internal

// Closed-class lexicon lookup followed by suffix rules; anything alphabetic
// left over is called a noun.
inline CoarseTag coarse_tag(std::string_view normalized) {
  using namespace features_internal;
  if (normalized.empty()) return CoarseTag::kOther;
  if (!std::any_of(normalized.begin(), normalized.end(),
                   [](char c) { return c >= 'a' && c <= 'z'; })) {
    return CoarseTag::kOther;
  }
  if (in(kFunctionWords, normalized)) return CoarseTag::kOther;
  if (in(kPronouns, normalized)) return CoarseTag::kPronoun;
  if (in(kDeterminers, normalized)) return CoarseTag::kDeterminer;
  if (in(kVerbs, normalized)) return CoarseTag::kVerb;
  if (in(kAdjectives, normalized)) return CoarseTag::kAdjective;
  if (in(kAdverbs, normalized)) return CoarseTag::kAdverb;
  if (ends_with(normalized, "ly")) return CoarseTag::kAdverb;
  for (std::string_view s : {"ness", "tion", "sion", "ment", "ity", "ship",
                             "ance", "ence", "ism", "er", "or"}) {
    if (ends_with(normalized, s)) return CoarseTag::kNoun;
  }
  for (std::string_view s : {"ous", "ful", "ive", "able", "ible", "less",
                             "ic", "al", "ish"}) {
    if (ends_with(normalized, s)) return CoarseTag::kAdjective;
  }
  for (std::string_view s : {"ing", "ed", "ize", "ise", "ate", "ify"}) {
    if (ends_with(normalized, s)) return CoarseTag::kVerb;
  }
  return CoarseTag::kNoun;
}

// Punctuation tracked by the feature vector, in feature order. Typographic
// quotes count toward their straight counterparts.
inline constexpr std::array<std::string_view, 10> kTrackedPunctuation = {
    ",", ";", ":", "?", "!", "\"", "'", "(", ")", "."};

inline constexpr std::array<std::string_view, 51> kHandcraftedFeatureNames = {
    "word_count",
    "char_count",
    "sentence_count",
    "option_count",
    "mean_option_word_count",
    "conj_for",
    "conj_and",
    "conj_nor",
    "conj_but",
    "conj_or",
    "conj_yet",
    "conj_so",
    "conj_along_with",
    "conj_also",
    "conj_as_well_as",
    "conj_together_with",
    "conj_including",
    "count_comma",
    "count_semicolon",
    "count_colon",
    "count_question_mark",
    "count_exclamation",
    "count_double_quote",
    "count_single_quote",
    "count_open_paren",
    "count_close_paren",
    "count_period",
    "has_comma",
    "has_semicolon",
    "has_colon",
    "has_question_mark",
    "has_exclamation",
    "has_double_quote",
    "has_single_quote",
    "has_open_paren",
    "has_close_paren",
    "has_period",
    "noun_phrase_count",
    "has_noun",
    "has_verb",
    "has_adjective",
    "has_adverb",
    "has_pronoun",
    "has_determiner",
    "count_noun",
    "count_verb",
    "count_adjective",
    "count_adverb",
    "count_pronoun",
    "count_determiner",
    "ends_with_question_mark",
};

inline constexpr std::size_t kHandcraftedFeatureCount =
    kHandcraftedFeatureNames.size();

inline std::size_t count_code_points(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

// Conjunction counts use the standard lexicon regardless of the caller's
// lexicon so that the vector layout never depends on configuration.
inline std::vector<double> handcrafted_features(const QAItem& item) {
  const ConjunctionLexicon lexicon = ConjunctionLexicon::standard();
  const std::vector<Token> tokens = tokenize(item.question);

  std::vector<double> f;
  f.reserve(kHandcraftedFeatureCount);

  std::size_t words = 0;
  std::array<std::size_t, 6> tag_counts{};
  for (const Token& t : tokens) {
    if (!t.is_word()) continue;
    ++words;
    const CoarseTag tag = coarse_tag(t.normalized);
    for (std::size_t k = 0; k < kTaggedClasses.size(); ++k) {
      if (kTaggedClasses[k] == tag) ++tag_counts[k];
    }
  }
  f.push_back(static_cast<double>(words));
  f.push_back(static_cast<double>(count_code_points(item.question)));
  f.push_back(static_cast<double>(split_sentences(item.question).size()));
  f.push_back(static_cast<double>(item.options.size()));
  double option_words = 0.0;
  for (const std::string& o : item.options) option_words += count_words(o);
  f.push_back(item.options.empty() ? 0.0 : option_words / item.options.size());

  std::vector<double> conj(lexicon.entries().size(), 0.0);
  for (const ConjunctionMatch& m : find_conjunctions(tokens, lexicon)) {
    conj[m.entry] += 1.0;
  }
  f.insert(f.end(), conj.begin(), conj.end());

  std::array<double, kTrackedPunctuation.size()> punct{};
  for (const Token& t : tokens) {
    if (t.is_word()) continue;
    std::string_view s = t.surface;
    if (s == "\xE2\x80\x9C" || s == "\xE2\x80\x9D") s = "\"";
    if (s == "\xE2\x80\x98" || s == "\xE2\x80\x99") s = "'";
    for (std::size_t k = 0; k < kTrackedPunctuation.size(); ++k) {
      if (kTrackedPunctuation[k] == s) punct[k] += 1.0;
    }
  }
  f.insert(f.end(), punct.begin(), punct.end());
  for (double c : punct) f.push_back(c > 0.0 ? 1.0 : 0.0);

  f.push_back(static_cast<double>(chunk_noun_phrases(item.question).size()));
  for (std::size_t c : tag_counts) f.push_back(c > 0 ? 1.0 : 0.0);
  for (std::size_t c : tag_counts) f.push_back(static_cast<double>(c));

  f.push_back(!tokens.empty() && tokens.back().surface == "?" ? 1.0 : 0.0);
  return f;
}

}  // namespace dbq
