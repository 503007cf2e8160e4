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

// Prediction service.
//
// The request handlers are plain functions over JSON so they can be tested
// without a socket; serve() wires them to HTTP routes:
//
//   GET  /health
//   POST /v1/predict      {survey_id?|questions?, explain?}
//   POST /v1/feedback     {survey_id, question_id, action}
//   GET  /v1/al/next?batch=N
//   POST /v1/al/label     {item_id, label: 0|1|"dbq"|"non_dbq"|"skip"}
//   GET  /v1/al/status
//   POST /v1/admin/swap   {artifact_path}
//
// Errors are {"error": <code name>, "message": ...} with the HTTP status
// given by http_status().

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dbq/active_learning.hpp"
#include "dbq/artifact.hpp"
#include "dbq/attribution.hpp"
#include "dbq/corpus.hpp"
#include "dbq/error.hpp"

namespace dbq {

using nlohmann::json;

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kNotReady: return 503;
    case ErrorCode::kTimeout: return 504;
    case ErrorCode::kArtifact:
    case ErrorCode::kNumeric:
    case ErrorCode::kInternal: return 500;
  }
  return 500;
}

inline json error_body(ErrorCode code, std::string_view message) {
  return {{"error", std::string(error_code_name(code))}, {"message", std::string(message)}};
}

struct Response {
  int status = 200;
  json body;
};

// Runs fn and turns a thrown Error into its HTTP form.
template <class Fn>
Response guarded(Fn&& fn) {
  try {
    return {200, fn()};
  } catch (const Error& e) {
    return {http_status(e.code()), error_body(e.code(), e.what())};
  } catch (const json::exception& e) {
    return {400, error_body(ErrorCode::kParse, e.what())};
  } catch (const std::exception& e) {
    return {500, error_body(ErrorCode::kInternal, e.what())};
  }
}

// --- survey store -----------------------------------------------------------

class SurveyStore {
 public:
  virtual ~SurveyStore() = default;
  // Throws ErrorCode::kNotFound for an unknown survey.
  virtual std::vector<QAItem> fetch(const std::string& survey_id) const = 0;
};

class InMemorySurveyStore : public SurveyStore {
 public:
  void put(std::string survey_id, std::vector<QAItem> questions) {
    surveys_[std::move(survey_id)] = std::move(questions);
  }
  std::vector<QAItem> fetch(const std::string& survey_id) const override {
    const auto it = surveys_.find(survey_id);
    if (it == surveys_.end()) fail(ErrorCode::kNotFound, "unknown survey \"" + survey_id + "\"");
    return it->second;
  }

 private:
  std::map<std::string, std::vector<QAItem>> surveys_;
};

// One survey per line: {"survey_id": str, "questions": [{id, question, options}]}.
class JsonlSurveyStore : public InMemorySurveyStore {
 public:
  explicit JsonlSurveyStore(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kNotFound, "cannot open survey store " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = path + ":" + std::to_string(line_no);
      try {
        const json j = json::parse(line);
        std::vector<QAItem> questions;
        for (const json& q : j.at("questions")) questions.push_back(qa_item_from_json(q));
        put(j.at("survey_id").get<std::string>(), std::move(questions));
      } catch (const std::exception& e) {
        fail(ErrorCode::kParse, where + ": " + e.what());
      }
    }
  }
};

// --- model holder -----------------------------------------------------------

// Readers take a snapshot; a swap replaces the pointer and leaves in-flight
// requests on the snapshot they already hold.
class ModelHolder {
 public:
  std::shared_ptr<const Pipeline> get() const {
    std::lock_guard lock(mu_);
    return pipeline_;
  }
  void swap(std::shared_ptr<const Pipeline> next) {
    std::lock_guard lock(mu_);
    pipeline_ = std::move(next);
  }
  bool ready() const { return get() != nullptr; }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Pipeline> pipeline_;
};

// --- feedback ---------------------------------------------------------------

struct AdoptionStats {
  std::size_t applied = 0;
  std::size_t shown = 0;

  std::optional<double> rate() const {
    if (shown == 0) return std::nullopt;
    return static_cast<double>(applied) / static_cast<double>(shown);
  }
  friend bool operator==(const AdoptionStats&, const AdoptionStats&) = default;
};

// Rebuilds the counters from a feedback log.
inline AdoptionStats recompute_adoption(std::istream& log) {
  AdoptionStats s;
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    ++s.shown;
    if (j.at("action") == "applied_fix") ++s.applied;
  }
  return s;
}

class FeedbackLog {
 public:
  // An empty path keeps the log in memory only.
  explicit FeedbackLog(std::string path = {}) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      keys_.insert(key(j.at("survey_id"), j.at("question_id")));
      ++stats_.shown;
      if (j.at("action") == "applied_fix") ++stats_.applied;
      lines_.push_back(line);
    }
  }

  void record_served(const std::string& survey_id, const std::string& question_id,
                     int prediction) {
    std::lock_guard lock(mu_);
    served_[key(survey_id, question_id)] = prediction;
  }

  json append(const json& request) {
    const std::string survey_id = request.value("survey_id", "");
    const std::string question_id = request.at("question_id").get<std::string>();
    const std::string action = request.at("action").get<std::string>();
    if (action != "applied_fix" && action != "dismissed") {
      fail(ErrorCode::kInvalidArgument, "action must be applied_fix or dismissed");
    }
    std::lock_guard lock(mu_);
    const std::string k = key(survey_id, question_id);
    const auto served = served_.find(k);
    if (served == served_.end()) {
      fail(ErrorCode::kNotFound, "no prediction was served for question \"" + question_id + "\"");
    }
    if (!keys_.insert(k).second) {
      fail(ErrorCode::kConflict, "feedback for question \"" + question_id + "\" already recorded");
    }
    json record{{"survey_id", survey_id},
                {"question_id", question_id},
                {"model_prediction", served->second},
                {"action", action},
                {"timestamp", now_utc()}};
    const std::string line = record.dump();
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::app);
      out << line << '\n';
      out.flush();
      if (!out) {
        keys_.erase(k);
        fail(ErrorCode::kInternal, "cannot append to feedback log " + path_);
      }
    }
    lines_.push_back(line);
    ++stats_.shown;
    if (action == "applied_fix") ++stats_.applied;
    return {{"ok", true}, {"adoption", adoption_json(stats_)}};
  }

  AdoptionStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

  std::string contents() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const std::string& l : lines_) out += l + "\n";
    return out;
  }

  static json adoption_json(const AdoptionStats& s) {
    json j{{"applied", s.applied}, {"shown", s.shown}};
    j["rate"] = s.rate() ? json(*s.rate()) : json(nullptr);
    return j;
  }

 private:
  static std::string key(const std::string& survey_id, const std::string& question_id) {
    return survey_id + '\x1f' + question_id;
  }
  static std::string now_utc() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, int> served_;
  std::set<std::string> keys_;
  std::vector<std::string> lines_;
  AdoptionStats stats_;
};

// --- active-learning session -------------------------------------------------

struct AlSessionConfig {
  std::size_t batch_size = 10;
  CommitteeParams committee{};
  std::uint64_t seed = 1;
  std::size_t explain_samples = 200;
  std::string log_path;  // JSONL round log; empty = memory only
};

// Single-writer state machine over a pool. A batch is opened by next(); once
// every item in it is labeled or skipped the round closes, the committee is
// retrained and the round index advances.
class AlSession {
 public:
  AlSession(Dataset seed_labeled, Pool pool, AlSessionConfig config,
            std::shared_ptr<const Pipeline> explainer = nullptr)
      : labeled_(std::move(seed_labeled)),
        pool_(std::move(pool)),
        config_(std::move(config)),
        explainer_(std::move(explainer)),
        consumed_(pool_.size(), false) {
    require_both_classes(labeled_, "active learning seed set");
    for (std::size_t i = 0; i < pool_.size(); ++i) index_[pool_.items[i].item.id] = i;
    retrain();
  }

  json next(std::optional<std::size_t> batch) {
    std::lock_guard lock(mu_);
    if (open_.empty()) open_batch(batch.value_or(config_.batch_size));
    json items = json::array();
    const std::size_t limit = batch.value_or(open_.size());
    for (std::size_t i : open_) {
      if (items.size() >= limit) break;
      if (resolved_.count(i)) continue;
      items.push_back(describe(i));
    }
    return {{"round", round_}, {"items", items}, {"exhausted", open_.empty() && remaining() == 0}};
  }

  json label(const std::string& item_id, std::optional<Label> label) {
    std::lock_guard lock(mu_);
    const auto it = index_.find(item_id);
    if (it == index_.end()) fail(ErrorCode::kNotFound, "unknown item \"" + item_id + "\"");
    const std::size_t i = it->second;
    if (consumed_[i] || resolved_.count(i)) {
      fail(ErrorCode::kConflict, "item \"" + item_id + "\" is already labeled");
    }
    if (std::find(open_.begin(), open_.end(), i) == open_.end()) {
      fail(ErrorCode::kConflict, "item \"" + item_id + "\" is not in the current batch");
    }
    resolved_[i] = label;
    bool closed = false;
    if (resolved_.size() == open_.size()) {
      close_round();
      closed = true;
    }
    return {{"ok", true}, {"round", round_}, {"round_closed", closed},
            {"labeled_size", labeled_.size()}};
  }

  json status() const {
    std::lock_guard lock(mu_);
    json rounds = json::array();
    for (const QueryRound& r : rounds_) rounds.push_back(to_json(r));
    const double ratio = static_cast<double>(labeled_.positives()) /
                         static_cast<double>(labeled_.size());
    return {{"round", round_},
            {"labeled_size", labeled_.size()},
            {"positives", labeled_.positives()},
            {"positive_ratio", ratio},
            {"pool_remaining", remaining()},
            {"open_batch", open_.size() - resolved_.size()},
            {"abstained", abstained_},
            {"exhausted", open_.empty() && remaining() == 0},
            {"rounds", rounds},
            {"instruction", std::string(kLabelingInstruction)}};
  }

  std::size_t round() const {
    std::lock_guard lock(mu_);
    return round_;
  }
  std::size_t labeled_size() const {
    std::lock_guard lock(mu_);
    return labeled_.size();
  }

 private:
  std::size_t remaining() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < consumed_.size(); ++i) {
      if (!consumed_[i] && std::find(open_.begin(), open_.end(), i) == open_.end()) ++n;
    }
    return n;
  }

  void retrain() {
    committee_.emplace(train_committee(labeled_, config_.committee,
                                       derive_seed(config_.seed, round_)));
  }

  void open_batch(std::size_t size) {
    if (size == 0) fail(ErrorCode::kInvalidArgument, "batch must be at least 1");
    const QueryResult q = query_most_informative(*committee_, pool_, size, &consumed_);
    for (const ScoredItem& s : q.items) {
      open_.push_back(s.pool_index);
      scores_[s.pool_index] = s;
    }
  }

  json describe(std::size_t i) const {
    const PoolItem& p = pool_.items[i];
    const ScoredItem& s = scores_.at(i);
    json j{{"id", p.item.id},
           {"question", p.item.question},
           {"options", p.item.options},
           {"source", std::string(pool_source_name(p.source))},
           {"votes", s.votes},
           {"entropy", s.entropy}};
    const LabelingPrecondition pre = labeling_precondition(p.item, ConjunctionLexicon::standard());
    j["machine_checkable"] = pre.machine_checkable;
    j["needs_human_judgment"] = pre.needs_human_judgment;
    if (explainer_ && explainer_->classifier.dim() == p.features.size()) {
      const TrainedModel& member = committee_->members().front();
      const Matrix background = sample_background(labeled_.features, kDefaultBackgroundRows,
                                                  derive_seed(config_.seed, 1000 + round_));
      ItemTrace trace;
      const FeatureVector fv = explainer_->features(p.item, &trace);
      const ShapVector shap = estimate_shap(probability_of(member), fv.values, background,
                                            config_.explain_samples,
                                            derive_seed(config_.seed, 2000 + i));
      const ProjectedShap projected = project_shap(shap, fv, trace);
      j["attribution"] = to_json(attribute_tokens(shap, projected, trace, RowAggregation::kSum));
    }
    return j;
  }

  void close_round() {
    QueryRound log;
    log.round = round_;
    log.strategy = QueryStrategy::kQbc;
    for (std::size_t i : open_) {
      const PoolItem& p = pool_.items[i];
      const std::optional<Label> label = resolved_.at(i);
      const ScoredItem& s = scores_.at(i);
      log.queried.push_back({p.item.id, s.entropy, s.votes, label});
      consumed_[i] = true;
      if (!label) {
        abstained_.push_back(p.item.id);
        continue;
      }
      labeled_.add(p.features, to_int(*label), p.item.id);
      ++log.labels_received;
      if (*label == Label::kDbq) ++log.positives_received;
    }
    log.labeled_size = labeled_.size();
    log.labeled_positive_ratio = static_cast<double>(labeled_.positives()) /
                                 static_cast<double>(labeled_.size());
    if (!config_.log_path.empty()) {
      std::ofstream out(config_.log_path, std::ios::app);
      out << to_json(log).dump() << '\n';
    }
    rounds_.push_back(std::move(log));
    open_.clear();
    resolved_.clear();
    scores_.clear();
    ++round_;
    retrain();
  }

  Dataset labeled_;
  Pool pool_;
  AlSessionConfig config_;
  std::shared_ptr<const Pipeline> explainer_;
  std::vector<bool> consumed_;
  std::map<std::string, std::size_t> index_;
  std::optional<Committee> committee_;
  std::vector<std::size_t> open_;
  std::map<std::size_t, std::optional<Label>> resolved_;
  std::map<std::size_t, ScoredItem> scores_;
  std::vector<QueryRound> rounds_;
  std::vector<std::string> abstained_;
  std::size_t round_ = 0;
  mutable std::mutex mu_;
};

// Accepts 0/1, "dbq"/"non_dbq", or "skip" (returned as nullopt).
inline std::optional<Label> parse_label_value(const json& v) {
  if (v.is_number_integer()) return label_from_int(v.get<int>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "skip") return std::nullopt;
    if (s == "dbq" || s == "1") return Label::kDbq;
    if (s == "non_dbq" || s == "0") return Label::kNonDbq;
  }
  fail(ErrorCode::kInvalidArgument, "label must be 0, 1, \"dbq\", \"non_dbq\" or \"skip\"");
}

// --- service -----------------------------------------------------------------

struct ServiceConfig {
  std::chrono::milliseconds request_timeout{10000};
  std::size_t explain_samples = 500;
  std::uint64_t explain_seed = 1;
};

class Service {
 public:
  Service(ServiceConfig config, std::shared_ptr<const SurveyStore> store,
          std::shared_ptr<FeedbackLog> feedback = std::make_shared<FeedbackLog>())
      : config_(config), store_(std::move(store)), feedback_(std::move(feedback)) {}

  ModelHolder& models() { return models_; }
  FeedbackLog& feedback() { return *feedback_; }
  void set_al_session(std::shared_ptr<AlSession> session) { al_ = std::move(session); }

  // Loads and verifies a bundle, then makes it current.
  void load(const std::filesystem::path& artifact) {
    models_.swap(std::make_shared<const Pipeline>(load_artifact(artifact)));
  }

  Response health() const {
    const auto p = models_.get();
    if (!p) return {503, {{"status", "not_ready"}}};
    return {200, {{"status", "ready"}, {"model_version", p->version}}};
  }

  Response predict_request(const json& request) const {
    return guarded([&] { return predict_body(request); });
  }

  Response predict(std::string_view body) const {
    return guarded([&] { return predict_body(parse_body(body)); });
  }

  Response feedback(std::string_view body) {
    return guarded([&] { return feedback_->append(parse_body(body)); });
  }

  Response al_next(std::optional<std::size_t> batch) {
    return guarded([&] { return session().next(batch); });
  }

  Response al_label(std::string_view body) {
    return guarded([&] {
      const json j = parse_body(body);
      return session().label(j.at("item_id").get<std::string>(), parse_label_value(j.at("label")));
    });
  }

  Response al_status() {
    return guarded([&] { return session().status(); });
  }

  Response swap(std::string_view body) {
    return guarded([&] {
      const json j = parse_body(body);
      load(j.at("artifact_path").get<std::string>());
      return json{{"ok", true}, {"model_version", models_.get()->version}};
    });
  }

 private:
  static json parse_body(std::string_view body) {
    try {
      return json::parse(body);
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, std::string("request body is not JSON: ") + e.what());
    }
  }

  AlSession& session() {
    if (!al_) fail(ErrorCode::kNotReady, "no active-learning session is configured");
    return *al_;
  }

  json predict_body(const json& request) const {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + config_.request_timeout;
    if (!request.is_object()) fail(ErrorCode::kInvalidArgument, "request must be a JSON object");
    const bool has_survey = request.contains("survey_id") && !request["survey_id"].is_null();
    const bool has_inline = request.contains("questions") && !request["questions"].is_null();
    if (has_survey == has_inline) {
      fail(ErrorCode::kInvalidArgument, "give exactly one of survey_id and questions");
    }
    const bool explain = request.value("explain", false);
    const std::shared_ptr<const Pipeline> pipeline = models_.get();
    if (!pipeline) fail(ErrorCode::kNotReady, "model is not loaded");

    std::string survey_id;
    std::vector<QAItem> items;
    if (has_survey) {
      survey_id = request.at("survey_id").get<std::string>();
      if (!store_) fail(ErrorCode::kNotFound, "no survey store is configured");
      items = store_->fetch(survey_id);
    } else {
      const json& qs = request.at("questions");
      if (!qs.is_array()) fail(ErrorCode::kInvalidArgument, "questions must be an array");
      for (const json& q : qs) {
        try {
          items.push_back(qa_item_from_json(q));
        } catch (const Error& e) {
          fail(ErrorCode::kInvalidArgument, e.what());
        }
      }
    }
    for (const QAItem& item : items) {
      if (const auto reason = check_item(item)) {
        fail(ErrorCode::kInvalidArgument, "question \"" + item.id + "\" rejected: " +
                                              std::string(reject_reason_name(*reason)));
      }
    }

    json results = json::array();
    for (const QAItem& item : items) {
      if (clock::now() > deadline) fail(ErrorCode::kTimeout, "prediction exceeded its deadline");
      json r{{"id", item.id}};
      double p = 0.0;
      if (explain) {
        const ExplainOptions opts{config_.explain_samples, config_.explain_seed,
                                  RowAggregation::kSum};
        const Explanation e = explain_item(pipeline->classifier, pipeline->embedding, item,
                                           pipeline->config.featurize, pipeline->background, opts);
        p = e.probability;
        r["attribution"] = to_json(e.attribution);
      } else {
        p = pipeline->probability(item);
      }
      const int label = p >= pipeline->config.threshold ? 1 : 0;
      r["is_dbq"] = label == 1;
      r["probability"] = p;
      results.push_back(std::move(r));
      feedback_->record_served(survey_id, item.id, label);
    }
    if (clock::now() > deadline) fail(ErrorCode::kTimeout, "prediction exceeded its deadline");
    return {{"model_version", pipeline->version}, {"results", results}};
  }

  ServiceConfig config_;
  std::shared_ptr<const SurveyStore> store_;
  std::shared_ptr<FeedbackLog> feedback_;
  ModelHolder models_;
  std::shared_ptr<AlSession> al_;
};

// Wires the handlers to HTTP routes on `server`.
inline void install_routes(httplib::Server& server, Service& service) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/health", [&, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.health());
  });
  server.Post("/v1/predict", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.predict(std::string_view(req.body)));
  });
  server.Post("/v1/feedback", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.feedback(req.body));
  });
  server.Get("/v1/al/next", [&, reply](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::size_t> batch;
    if (req.has_param("batch")) {
      try {
        const long long n = std::stoll(req.get_param_value("batch"));
        if (n < 1) throw std::invalid_argument("batch");
        batch = static_cast<std::size_t>(n);
      } catch (const std::exception&) {
        reply(res, {400, error_body(ErrorCode::kInvalidArgument, "batch must be a positive integer")});
        return;
      }
    }
    reply(res, service.al_next(batch));
  });
  server.Post("/v1/al/label", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.al_label(req.body));
  });
  server.Get("/v1/al/status", [&, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.al_status());
  });
  server.Post("/v1/admin/swap", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.swap(req.body));
  });
}

}  // namespace dbq
