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

// Highlighted renderings of a TokenAttribution.
//
// Intensity is |score| / max |score| over the question tokens and option
// phrases of the item; positive scores (towards DBQ) are red, negative ones
// blue. A zero score, or an all-zero attribution, is rendered without any
// highlight. The HTML variant carries every score at full precision in a
// data-score attribute.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>

#include "dbq/attribution.hpp"
#include "dbq/corpus.hpp"
#include "dbq/text.hpp"

namespace dbq {

struct Rgb {
  int r = 255, g = 255, b = 255;
};

inline constexpr Rgb kPositiveColor{214, 39, 40};
inline constexpr Rgb kNegativeColor{31, 119, 180};

inline double attribution_scale(const TokenAttribution& a) {
  double m = 0.0;
  for (double v : a.scores) m = std::max(m, std::abs(v));
  for (double v : a.option_scores) m = std::max(m, std::abs(v));
  return m;
}

// In [0, 1]; 0 when there is nothing to highlight.
inline double highlight_intensity(double score, double scale) {
  if (!(scale > 0.0)) return 0.0;
  return std::clamp(std::abs(score) / scale, 0.0, 1.0);
}

// Blend of white towards the sign color.
inline Rgb highlight_color(double score, double scale) {
  const double t = highlight_intensity(score, scale);
  const Rgb base = score >= 0.0 ? kPositiveColor : kNegativeColor;
  auto mix = [t](int c) { return static_cast<int>(std::lround(255.0 - t * (255.0 - c))); };
  return {mix(base.r), mix(base.g), mix(base.b)};
}

inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace render_internal {

// Calls emit(text, score*) for every piece of the question, where score is
// null for separators and unscored tokens.
template <class Emit>
void walk_question(std::string_view question, const TokenAttribution& a, Emit emit) {
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < a.token_spans.size(); ++i) {
    const ByteSpan& s = a.token_spans[i];
    if (s.begin < cursor || s.end > question.size()) {
      fail(ErrorCode::kInvalidArgument, "attribution is not aligned with the question text");
    }
    if (s.begin > cursor) emit(question.substr(cursor, s.begin - cursor), nullptr);
    emit(question.substr(s.begin, s.end - s.begin), &a.scores[i]);
    cursor = s.end;
  }
  if (cursor < question.size()) emit(question.substr(cursor), nullptr);
}

inline std::string ansi_background(Rgb c) {
  return "\x1b[48;2;" + std::to_string(c.r) + ";" + std::to_string(c.g) + ";" +
         std::to_string(c.b) + "m\x1b[38;2;0;0;0m";
}

}  // namespace render_internal

inline std::string render_terminal(const QAItem& item, const TokenAttribution& a) {
  const double scale = attribution_scale(a);
  std::ostringstream out;
  auto piece = [&](std::string_view text, const double* score) {
    if (score == nullptr || highlight_intensity(*score, scale) == 0.0) {
      out << text;
      return;
    }
    out << render_internal::ansi_background(highlight_color(*score, scale)) << text << "\x1b[0m";
  };
  render_internal::walk_question(item.question, a, piece);
  out << '\n';
  for (std::size_t o = 0; o < a.option_phrases.size(); ++o) {
    out << "  - ";
    piece(o < item.options.size() ? std::string_view(item.options[o])
                                  : std::string_view(a.option_phrases[o]),
          &a.option_scores[o]);
    out << "  (" << format_score(a.option_scores[o]) << ")\n";
  }
  if (a.option_phrases.empty()) out << "  (no answer options)\n";
  return out.str();
}

inline std::string render_html(const QAItem& item, const TokenAttribution& a) {
  const double scale = attribution_scale(a);
  auto span = [&](std::string_view text, double score, std::string_view cls) {
    std::string style;
    if (highlight_intensity(score, scale) > 0.0) {
      const Rgb c = highlight_color(score, scale);
      style = " style=\"background-color: rgb(" + std::to_string(c.r) + "," +
              std::to_string(c.g) + "," + std::to_string(c.b) + ")\"";
    }
    return "<span class=\"" + std::string(cls) + "\" data-score=\"" + format_score(score) +
           "\"" + style + ">" + html_escape(text) + "</span>";
  };

  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      << "<title>" << html_escape(item.id) << "</title>\n"
      << "<style>body{font-family:sans-serif;max-width:48em;margin:2em auto}"
         "span.token,span.option{padding:0 2px;border-radius:3px}"
         "ul{list-style:none;padding-left:1em}</style>\n"
      << "</head>\n<body>\n";
  out << "<p class=\"question\" data-id=\"" << html_escape(item.id) << "\">";
  render_internal::walk_question(item.question, a, [&](std::string_view text, const double* s) {
    out << (s == nullptr ? html_escape(text) : span(text, *s, "token"));
  });
  out << "</p>\n<ul class=\"options\">\n";
  for (std::size_t o = 0; o < a.option_phrases.size(); ++o) {
    const std::string_view text = o < item.options.size() ? std::string_view(item.options[o])
                                                          : std::string_view(a.option_phrases[o]);
    out << "<li>" << span(text, a.option_scores[o], "option") << "</li>\n";
  }
  if (a.option_phrases.empty()) out << "<li class=\"no-options\">no answer options</li>\n";
  out << "</ul>\n<p class=\"summary\" data-base-value=\"" << format_score(a.base_value)
      << "\" data-output=\"" << format_score(a.output) << "\" data-residual=\""
      << format_score(a.residual) << "\" data-mode=\"" << row_aggregation_name(a.mode)
      << "\">base " << format_score(a.base_value) << ", output " << format_score(a.output)
      << "</p>\n</body>\n</html>\n";
  return out.str();
}

}  // namespace dbq
