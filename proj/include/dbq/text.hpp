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

// Tokenization, sentence splitting, conjunction lookup and a small heuristic
// noun-phrase chunker. Everything here works on UTF-8 bytes; only a handful of
// typographic quote and dash code points are treated specially, all other
// non-ASCII text is considered word material.

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbq/error.hpp"

namespace dbq {

struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t pos) const { return pos >= begin && pos < end; }
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

struct Token {
  std::string surface;
  std::string normalized;
  ByteSpan span;

  // True when the token carries letters or digits, as opposed to a lone
  // punctuation mark.
  bool is_word() const;
};

namespace text_internal {

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

inline bool is_ascii_punct(unsigned char c) {
  return c < 0x80 && c > 0x20 && c != 0x7f && !is_ascii_alnum(c);
}

// Multi-byte punctuation we isolate: left/right single and double quotes,
// en and em dash, horizontal ellipsis (all U+20xx, encoded E2 80 xx).
inline std::size_t unicode_punct_length(std::string_view s, std::size_t pos) {
  if (pos + 2 < s.size() && static_cast<unsigned char>(s[pos]) == 0xE2 &&
      static_cast<unsigned char>(s[pos + 1]) == 0x80) {
    switch (static_cast<unsigned char>(s[pos + 2])) {
      case 0x93: case 0x94: case 0x98: case 0x99: case 0x9C: case 0x9D:
      case 0xA6:
        return 3;
      default:
        break;
    }
  }
  return 0;
}

// Non-breaking space (C2 A0) counts as a separator.
inline std::size_t space_length(std::string_view s, std::size_t pos) {
  const auto c = static_cast<unsigned char>(s[pos]);
  if (is_space(c)) return 1;
  if (c == 0xC2 && pos + 1 < s.size() &&
      static_cast<unsigned char>(s[pos + 1]) == 0xA0) {
    return 2;
  }
  return 0;
}

inline std::size_t punct_length(std::string_view s, std::size_t pos) {
  if (is_ascii_punct(static_cast<unsigned char>(s[pos]))) return 1;
  return unicode_punct_length(s, pos);
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace text_internal

inline bool Token::is_word() const {
  for (char c : surface) {
    const auto u = static_cast<unsigned char>(c);
    if (text_internal::is_ascii_alnum(u)) return true;
  }
  // Non-ASCII material that is not one of the isolated punctuation marks.
  return !surface.empty() &&
         static_cast<unsigned char>(surface.front()) >= 0x80 &&
         text_internal::unicode_punct_length(surface, 0) == 0;
}

// Splits on whitespace and isolates every punctuation character as its own
// token. Spans index into `text`; removing the separators from `text` yields
// the concatenation of the token surfaces.
inline std::vector<Token> tokenize(std::string_view text) {
  using namespace text_internal;
  std::vector<Token> tokens;
  std::size_t pos = 0;
  std::size_t word_begin = std::string_view::npos;

  auto flush_word = [&](std::size_t end) {
    if (word_begin == std::string_view::npos) return;
    Token t;
    t.surface = std::string(text.substr(word_begin, end - word_begin));
    t.normalized = ascii_lower(t.surface);
    t.span = {word_begin, end};
    tokens.push_back(std::move(t));
    word_begin = std::string_view::npos;
  };

  while (pos < text.size()) {
    if (const std::size_t n = space_length(text, pos); n > 0) {
      flush_word(pos);
      pos += n;
      continue;
    }
    if (const std::size_t n = punct_length(text, pos); n > 0) {
      flush_word(pos);
      Token t;
      t.surface = std::string(text.substr(pos, n));
      t.normalized = t.surface;
      t.span = {pos, pos + n};
      tokens.push_back(std::move(t));
      pos += n;
      continue;
    }
    if (word_begin == std::string_view::npos) word_begin = pos;
    ++pos;
  }
  flush_word(text.size());
  return tokens;
}

inline std::vector<Token> word_tokens(std::span<const Token> tokens) {
  std::vector<Token> out;
  for (const Token& t : tokens) {
    if (t.is_word()) out.push_back(t);
  }
  return out;
}

// Rebuilds a text from tokens, re-inserting the original separators.
inline std::string detokenize(std::string_view original,
                              std::span<const Token> tokens) {
  std::string out;
  std::size_t cursor = 0;
  for (const Token& t : tokens) {
    out.append(original.substr(cursor, t.span.begin - cursor));
    out.append(t.surface);
    cursor = t.span.end;
  }
  out.append(original.substr(std::min(cursor, original.size())));
  return out;
}

// Quoted regions, quote characters included. Straight double quotes pair up;
// a straight single quote only opens after whitespace or an opening bracket
// and only closes when not followed by a letter, which keeps apostrophes in
// contractions ("don't") from opening spans. Typographic quotes pair with
// their mirrored counterpart. Unterminated quotes produce no span.
inline std::vector<ByteSpan> quoted_spans(std::string_view text) {
  using namespace text_internal;
  std::vector<ByteSpan> spans;
  const auto at = [&](std::size_t i) -> unsigned char {
    return i < text.size() ? static_cast<unsigned char>(text[i]) : 0;
  };
  const auto code_at = [&](std::size_t i) -> int {
    // 0x201C and friends reported as their low byte; -1 otherwise.
    if (unicode_punct_length(text, i) == 3) return at(i + 2);
    return -1;
  };
  const auto opens_single = [&](std::size_t i) {
    if (i + 1 >= text.size() || is_space(at(i + 1))) return false;
    if (i == 0) return true;
    const unsigned char p = at(i - 1);
    return is_space(p) || p == '(' || p == '[' || p == '{' || p == ':';
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = at(i);
    const int code = code_at(i);
    std::size_t close = std::string_view::npos;
    std::size_t close_len = 0;
    if (c == '"') {
      const std::size_t j = text.find('"', i + 1);
      if (j != std::string_view::npos) {
        close = j;
        close_len = 1;
      }
    } else if (c == '\'' && opens_single(i)) {
      for (std::size_t j = i + 1; j < text.size(); ++j) {
        if (at(j) == '\'' && !is_space(at(j - 1)) && !is_ascii_alnum(at(j + 1))) {
          close = j;
          close_len = 1;
          break;
        }
      }
    } else if (code == 0x9C || code == 0x98) {
      const int closing = code == 0x9C ? 0x9D : 0x99;
      for (std::size_t j = i + 3; j < text.size(); ++j) {
        if (code_at(j) == closing &&
            (closing == 0x9D || !is_ascii_alnum(at(j + 3)))) {
          close = j;
          close_len = 3;
          break;
        }
      }
    }
    if (close != std::string_view::npos) {
      spans.push_back({i, close + close_len});
      i = close + close_len;
    } else {
      i += code >= 0 ? 3 : 1;
    }
  }
  return spans;
}

// Splits after runs of . ! ? that are followed by whitespace or the end of
// the text, except inside quoted spans. Sentences are returned trimmed;
// blank input yields no sentences.
inline std::vector<std::string> split_sentences(std::string_view text) {
  using namespace text_internal;
  const std::vector<ByteSpan> quotes = quoted_spans(text);
  const auto quoted = [&](std::size_t pos) {
    return std::any_of(quotes.begin(), quotes.end(),
                       [&](const ByteSpan& s) { return s.contains(pos); });
  };
  const auto trim = [&](std::size_t b, std::size_t e) {
    while (b < e && space_length(text, b) == 1) ++b;
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
  };

  std::vector<std::string> sentences;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_terminal(text[i]) && !quoted(i)) {
      std::size_t j = i;
      while (j + 1 < text.size() && is_terminal(text[j + 1])) ++j;
      if (j + 1 == text.size() || space_length(text, j + 1) > 0) {
        std::string s = trim(start, j + 1);
        if (!s.empty()) sentences.push_back(std::move(s));
        start = j + 1;
      }
      i = j + 1;
      continue;
    }
    ++i;
  }
  std::string tail = trim(start, text.size());
  if (!tail.empty()) sentences.push_back(std::move(tail));
  return sentences;
}

// The seven coordinating conjunctions and five multi-word synonyms of "and"
// used both by the rule-based detectors and by the labeling guideline.
class ConjunctionLexicon {
 public:
  static ConjunctionLexicon standard() {
    return ConjunctionLexicon(
        {"for", "and", "nor", "but", "or", "yet", "so"},
        {"along with", "also", "as well as", "together with", "including"});
  }

  ConjunctionLexicon(std::vector<std::string> coordinators,
                     std::vector<std::string> and_synonyms)
      : coordinators_(std::move(coordinators)),
        and_synonyms_(std::move(and_synonyms)) {
    for (const auto* list : {&coordinators_, &and_synonyms_}) {
      for (const std::string& entry : *list) {
        std::vector<std::string> words;
        for (const Token& t : tokenize(entry)) words.push_back(t.normalized);
        if (words.empty()) {
          fail(ErrorCode::kInvalidArgument, "empty conjunction lexicon entry");
        }
        entries_.push_back(entry);
        entry_words_.push_back(std::move(words));
      }
    }
    // Longest phrases are tried first so "as well as" wins over anything
    // shorter starting at the same token.
    by_length_.resize(entries_.size());
    for (std::size_t i = 0; i < by_length_.size(); ++i) by_length_[i] = i;
    std::stable_sort(by_length_.begin(), by_length_.end(),
                     [&](std::size_t a, std::size_t b) {
                       return entry_words_[a].size() > entry_words_[b].size();
                     });
  }

  const std::vector<std::string>& coordinators() const { return coordinators_; }
  const std::vector<std::string>& and_synonyms() const { return and_synonyms_; }

  // Coordinators first, then synonyms, in declaration order.
  const std::vector<std::string>& entries() const { return entries_; }
  const std::vector<std::string>& entry_words(std::size_t i) const {
    return entry_words_[i];
  }
  const std::vector<std::size_t>& longest_first() const { return by_length_; }

  bool is_coordinator(std::string_view normalized) const {
    return std::find(coordinators_.begin(), coordinators_.end(), normalized) !=
           coordinators_.end();
  }

 private:
  std::vector<std::string> coordinators_;
  std::vector<std::string> and_synonyms_;
  std::vector<std::string> entries_;
  std::vector<std::vector<std::string>> entry_words_;
  std::vector<std::size_t> by_length_;
};

struct ConjunctionMatch {
  std::size_t first_token = 0;
  std::size_t token_count = 0;
  std::size_t entry = 0;  // index into ConjunctionLexicon::entries()
  ByteSpan span;
};

// Left-to-right, longest-match-first, non-overlapping scan on normalized
// forms. Punctuation tokens break multi-word phrases.
inline std::vector<ConjunctionMatch> find_conjunctions(
    std::span<const Token> tokens, const ConjunctionLexicon& lexicon) {
  std::vector<ConjunctionMatch> matches;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    for (std::size_t entry : lexicon.longest_first()) {
      const auto& words = lexicon.entry_words(entry);
      if (i + words.size() > tokens.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; k < words.size() && ok; ++k) {
        ok = tokens[i + k].normalized == words[k];
      }
      if (!ok) continue;
      matches.push_back({i, words.size(), entry,
                         {tokens[i].span.begin,
                          tokens[i + words.size() - 1].span.end}});
      i += words.size();
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return matches;
}

inline bool has_conjunction(std::string_view text,
                            const ConjunctionLexicon& lexicon) {
  const std::vector<Token> tokens = tokenize(text);
  return !find_conjunctions(tokens, lexicon).empty();
}

// Heuristic chunker standing in for a statistical one. Returns, sorted and
// non-overlapping:
//  - quoted spans (quotes included), and
//  - maximal runs of capitalized words that do not start a sentence,
//    optionally joined once by a coordinator ("Park and Ride").
// The pronoun "I" never starts or extends a run.
inline std::vector<ByteSpan> chunk_noun_phrases(std::string_view text) {
  const std::vector<ByteSpan> quotes = quoted_spans(text);
  const std::vector<Token> tokens = tokenize(text);
  const ConjunctionLexicon lexicon = ConjunctionLexicon::standard();

  const auto in_quote = [&](const Token& t) {
    return std::any_of(quotes.begin(), quotes.end(), [&](const ByteSpan& q) {
      return t.span.begin >= q.begin && t.span.end <= q.end;
    });
  };

  // Sentence-initial words are capitalized for grammatical reasons only.
  std::vector<bool> initial(tokens.size(), false);
  bool at_start = true;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.is_word()) {
      initial[i] = at_start;
      at_start = false;
    } else if (t.surface == "." || t.surface == "!" || t.surface == "?" ||
               t.surface == ":") {
      at_start = true;
    }
  }

  const auto capitalized = [&](std::size_t i) {
    const Token& t = tokens[i];
    return t.is_word() && !initial[i] && !in_quote(t) && t.surface != "I" &&
           t.surface[0] >= 'A' && t.surface[0] <= 'Z';
  };

  std::vector<ByteSpan> spans = quotes;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!capitalized(i)) {
      ++i;
      continue;
    }
    std::size_t last = i;
    bool joined = false;
    std::size_t j = i + 1;
    while (j < tokens.size()) {
      if (capitalized(j)) {
        last = j++;
      } else if (!joined && j + 1 < tokens.size() &&
                 lexicon.is_coordinator(tokens[j].normalized) &&
                 capitalized(j + 1)) {
        joined = true;
        last = j + 1;
        j += 2;
      } else {
        break;
      }
    }
    spans.push_back({tokens[i].span.begin, tokens[last].span.end});
    i = last + 1;
  }
  std::sort(spans.begin(), spans.end(),
            [](const ByteSpan& a, const ByteSpan& b) { return a.begin < b.begin; });
  return spans;
}

// Replaces each span with a single space.
inline std::string excise_spans(std::string_view text,
                                std::span<const ByteSpan> spans) {
  std::string out;
  std::size_t cursor = 0;
  for (const ByteSpan& s : spans) {
    if (s.begin < cursor) continue;
    out.append(text.substr(cursor, s.begin - cursor));
    out.push_back(' ');
    cursor = s.end;
  }
  out.append(text.substr(std::min(cursor, text.size())));
  return out;
}

}  // namespace dbq
