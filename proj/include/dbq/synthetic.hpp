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

// Template-composed survey questions with known labels.
//
// Double-barreled items join two unrelated aspects, mostly with a
// conjunction; some span two sentences and some join the aspects with a
// slash or comma only. Neutral items ask about one thing; a share of them
// still contains a conjunction (show titles, fixed pairs such as "fish and
// chips", "for" as a preposition, either/or choices, follow-ups in a second
// sentence), which is exactly where the rule-based detectors go wrong.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dbq/corpus.hpp"
#include "dbq/error.hpp"
#include "dbq/random.hpp"

namespace dbq {

struct SyntheticConfig {
  std::size_t n_items = 2000;
  double dbq_ratio = 0.3;
  double conjunction_neutral_ratio = 0.4;  // of neutral items
  double multi_sentence_dbq_ratio = 0.1;   // of DBQ items
  double no_conjunction_dbq_ratio = 0.08;  // of DBQ items
  std::uint64_t seed = 1;
};

namespace synthetic_internal {

using List = std::vector<std::string_view>;

inline const List& aspects() {
  static const List v{
      "food quality",      "service",          "price",            "cleanliness",
      "staff friendliness", "delivery speed",  "website design",   "product quality",
      "customer support",  "checkout process", "parking",          "music",
      "room comfort",      "wifi",             "menu variety",     "packaging",
      "return policy",     "mobile app",       "noise level",      "location",
      "portion size",      "wait time",        "billing",          "onboarding",
      "documentation",     "training course",  "manager feedback", "workload",
      "salary",            "team culture",     "office space",     "commute",
      "lighting",          "seating",          "ticket price",     "sound quality",
      "battery life",      "screen size",      "installation",     "warranty"};
  return v;
}

inline const List& adjectives() {
  static const List v{"good",      "fast",    "friendly", "clean",    "affordable",
                      "reliable",  "helpful", "clear",    "pleasant", "convenient",
                      "simple",    "modern",  "quiet",    "fair",     "effective"};
  return v;
}

inline const List& states() {
  static const List v{"pregnant",  "breastfeeding", "employed",  "a student",
                      "married",   "retired",       "a smoker",  "a parent",
                      "a veteran", "a homeowner",   "a manager", "self-employed"};
  return v;
}

inline const List& activities() {
  static const List v{"exercise", "read",  "travel", "cook",  "shop online",
                      "volunteer", "garden", "drive", "swim", "meditate"};
  return v;
}

inline const List& titles() {
  static const List v{"Tom and Jerry",        "Pride and Prejudice", "Law and Order",
                      "Pirates and Princesses", "War and Peace",     "Romeo and Juliet",
                      "Salt and Pepper Diner", "Bread and Roses",    "Sense and Sensibility",
                      "Park and Ride"};
  return v;
}

inline const List& binomials() {
  static const List v{"fish and chips",      "bread and butter",    "macaroni and cheese",
                      "peanut butter and jelly", "rice and beans",    "terms and conditions",
                      "pros and cons",       "salt and pepper",     "rock and roll",
                      "research and development", "bed and breakfast", "trial and error"};
  return v;
}

inline const List& choices() {
  static const List v{"tea",   "coffee", "email", "phone", "morning", "evening",
                      "cash",  "card",   "train", "car",   "online",  "in store"};
  return v;
}

inline const List& brands() {
  static const List v{"Acme",     "Globex",  "Initech",   "Umbrella", "Hooli",
                      "Vandelay", "Soylent", "Stark Labs", "Wayne Co", "Cyberdyne"};
  return v;
}

inline const std::array<std::vector<std::string>, 5>& option_sets() {
  static const std::array<std::vector<std::string>, 5> v{{
      {"strongly agree", "agree", "neutral", "disagree", "strongly disagree"},
      {"yes", "no"},
      {"very satisfied", "satisfied", "neither satisfied nor dissatisfied", "dissatisfied",
       "very dissatisfied"},
      {"excellent", "good", "fair", "poor"},
      {},
  }};
  return v;
}

inline std::string pick(Rng& rng, const List& list) {
  return std::string(list[rng.index(list.size())]);
}

// Two different entries.
inline std::pair<std::string, std::string> pick_two(Rng& rng, const List& list) {
  const std::size_t a = rng.index(list.size());
  std::size_t b = rng.index(list.size() - 1);
  if (b >= a) ++b;
  return {std::string(list[a]), std::string(list[b])};
}

inline std::string dbq_single(Rng& rng) {
  auto [a, b] = pick_two(rng, aspects());
  auto [x, y] = pick_two(rng, adjectives());
  switch (rng.index(9)) {
    case 0: return "How satisfied are you with the " + a + " and the " + b + "?";
    case 1: return "Rate our " + a + " and " + b + ".";
    case 2: return "Was the " + a + " " + x + " and the " + b + " " + y + "?";
    case 3: return "Do you agree that the " + a + " is " + x + " and the " + b + " is " + y + "?";
    case 4: return "How would you rate the " + a + " as well as the " + b + "?";
    case 5: {
      auto [s, t] = pick_two(rng, states());
      return "Are you " + s + " or " + t + "?";
    }
    case 6: return "How happy are you with the " + a + " along with the " + b + "?";
    case 7: {
      auto [p, q] = pick_two(rng, activities());
      return "How often do you " + p + " and " + q + "?";
    }
    default:
      return "Do you agree with the following statement: The " + a + " is " + x +
             ", and the " + b + " is " + y + ".";
  }
}

inline std::string dbq_multi_sentence(Rng& rng) {
  auto [a, b] = pick_two(rng, aspects());
  switch (rng.index(3)) {
    case 0: return "Think about your last visit. How was the " + a + " and the " + b + "?";
    case 1: return "We value your opinion. Please rate the " + a + " and " + b + ".";
    default:
      return "Consider the past month. Were you happy with the " + a + " and the " + b + "?";
  }
}

inline std::string dbq_no_conjunction(Rng& rng) {
  auto [a, b] = pick_two(rng, aspects());
  switch (rng.index(2)) {
    case 0: return "Rate the " + a + "/" + b + ".";
    default: return "How satisfied are you with the " + a + ", " + b + "?";
  }
}

inline std::string neutral_plain(Rng& rng) {
  const std::string a = pick(rng, aspects());
  const std::string x = pick(rng, adjectives());
  switch (rng.index(7)) {
    case 0: return "How satisfied are you with the " + a + "?";
    case 1: return "Rate our " + a + ".";
    case 2: return "Was the " + a + " " + x + "?";
    case 3: return "How likely are you to recommend " + pick(rng, brands()) + " to a friend?";
    case 4: return "Do you agree that the " + a + " is " + x + "?";
    case 5: return "How often do you " + pick(rng, activities()) + "?";
    default: return "Are you " + pick(rng, states()) + "?";
  }
}

inline std::string neutral_with_conjunction(Rng& rng) {
  const std::string a = pick(rng, aspects());
  switch (rng.index(8)) {
    case 0: return "How much do you like the show '" + pick(rng, titles()) + "'?";
    case 1: return "How often do you eat " + pick(rng, binomials()) + "?";
    case 2: return "How long have you worked for " + pick(rng, brands()) + "?";
    case 3: return "How much did you pay for the " + a + "?";
    case 4: {
      auto [p, q] = pick_two(rng, choices());
      return "Do you prefer " + p + " or " + q + "?";
    }
    case 5: return "Have you read the " + pick(rng, binomials()) + " for the " + a + "?";
    case 6: return "How satisfied are you with the " + a + "? Why do you think so?";
    default: return "Did you visit " + pick(rng, titles()) + " last year?";
  }
}

}  // namespace synthetic_internal

inline std::vector<QAItem> generate_corpus(const SyntheticConfig& config) {
  using namespace synthetic_internal;
  for (double r : {config.dbq_ratio, config.conjunction_neutral_ratio,
                   config.multi_sentence_dbq_ratio, config.no_conjunction_dbq_ratio}) {
    if (!(r >= 0.0 && r <= 1.0)) fail(ErrorCode::kInvalidArgument, "ratios must lie in [0, 1]");
  }
  if (config.multi_sentence_dbq_ratio + config.no_conjunction_dbq_ratio > 1.0) {
    fail(ErrorCode::kInvalidArgument, "DBQ sub-ratios add up to more than 1");
  }
  Rng rng(config.seed);
  std::vector<QAItem> items;
  items.reserve(config.n_items);
  const auto n_dbq = static_cast<std::size_t>(
      std::llround(config.dbq_ratio * static_cast<double>(config.n_items)));
  std::vector<int> labels(config.n_items, 0);
  for (std::size_t i = 0; i < n_dbq && i < labels.size(); ++i) labels[i] = 1;
  rng.shuffle(labels);

  char id[32];
  for (std::size_t i = 0; i < config.n_items; ++i) {
    QAItem item;
    std::snprintf(id, sizeof id, "syn-%06zu", i);
    item.id = id;
    const double u = rng.uniform();
    if (labels[i] == 1) {
      if (u < config.multi_sentence_dbq_ratio) {
        item.question = dbq_multi_sentence(rng);
      } else if (u < config.multi_sentence_dbq_ratio + config.no_conjunction_dbq_ratio) {
        item.question = dbq_no_conjunction(rng);
      } else {
        item.question = dbq_single(rng);
      }
      item.label = Label::kDbq;
    } else {
      item.question = u < config.conjunction_neutral_ratio ? neutral_with_conjunction(rng)
                                                          : neutral_plain(rng);
      item.label = Label::kNonDbq;
    }
    item.options = option_sets()[rng.index(option_sets().size())];
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace dbq
