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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "dbq/service.hpp"
#include "test_support.hpp"

namespace dbq {
namespace {

namespace fs = std::filesystem;
using testing::fixture_corpus;
using testing::fixture_pipeline;
using testing::fresh_dir;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no dbq::Error thrown";
  return ErrorCode::kInternal;
}

fs::path saved_fixture(const std::string& name) {
  const fs::path dir = fresh_dir(name);
  save_artifact(dir, fixture_pipeline());
  return dir;
}

// Same corpus, different seed: a second, distinct artifact.
const Pipeline& other_pipeline() {
  static const Pipeline p = train_pipeline(fixture_corpus(), testing::fixture_config(77));
  return p;
}

void overwrite(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// --- artifact -----------------------------------------------------------------

TEST(Artifact, RoundTripPreservesPredictions) {
  const fs::path dir = saved_fixture("roundtrip");
  const Pipeline loaded = load_artifact(dir);
  EXPECT_EQ(loaded.version.size(), 16u);
  EXPECT_EQ(to_json(loaded.classifier), to_json(fixture_pipeline().classifier));
  EXPECT_EQ(loaded.config.featurize, fixture_pipeline().config.featurize);
  EXPECT_EQ(loaded.background.rows(), fixture_pipeline().background.rows());
  for (std::size_t i = 0; i < 50; ++i) {
    const QAItem& item = fixture_corpus()[i];
    EXPECT_DOUBLE_EQ(loaded.probability(item), fixture_pipeline().probability(item)) << item.id;
  }
}

TEST(Artifact, VersionIsAFunctionOfContent) {
  const Pipeline a = load_artifact(saved_fixture("version_a"));
  const Pipeline b = load_artifact(saved_fixture("version_b"));
  EXPECT_EQ(a.version, b.version);
  const fs::path other = fresh_dir("version_other");
  save_artifact(other, other_pipeline());
  EXPECT_NE(load_artifact(other).version, a.version);
}

TEST(Artifact, FlippedByteFailsChecksum) {
  const fs::path dir = saved_fixture("flipped");
  std::string content = read_file(dir / "classifier.json");
  content[content.size() / 2] = content[content.size() / 2] == '1' ? '2' : '1';
  overwrite(dir / "classifier.json", content);
  try {
    load_artifact(dir);
    FAIL() << "corrupt artifact accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kArtifact);
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
}

TEST(Artifact, TruncatedFileFailsSizeCheck) {
  const fs::path dir = saved_fixture("truncated");
  const std::string content = read_file(dir / "embedding/vectors.txt");
  overwrite(dir / "embedding/vectors.txt", content.substr(0, content.size() / 2));
  try {
    load_artifact(dir);
    FAIL() << "truncated artifact accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kArtifact);
    EXPECT_NE(std::string(e.what()).find("bytes"), std::string::npos) << e.what();
  }
}

TEST(Artifact, MissingPiecesAreRejected) {
  {
    const fs::path dir = saved_fixture("missing_file");
    fs::remove(dir / "background.json");
    EXPECT_EQ(code_of([&] { load_artifact(dir); }), ErrorCode::kArtifact);
  }
  {
    const fs::path dir = saved_fixture("missing_manifest");
    fs::remove(dir / "manifest.json");
    EXPECT_EQ(code_of([&] { load_artifact(dir); }), ErrorCode::kArtifact);
  }
  {
    const fs::path dir = saved_fixture("garbled_manifest");
    overwrite(dir / "manifest.json", "{\"format\": ");
    EXPECT_EQ(code_of([&] { load_artifact(dir); }), ErrorCode::kArtifact);
  }
  EXPECT_EQ(code_of([] { load_artifact(fs::path(DBQ_TEST_TMP) / "no_such_artifact"); }),
            ErrorCode::kArtifact);
}

TEST(Artifact, EditedManifestChangesNothingSilently) {
  // Rewriting a checksum to match tampered content is detected by the
  // pipeline-level dimension check.
  const fs::path dir = saved_fixture("tampered");
  auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  manifest["pipeline"]["include_handcrafted"] = true;
  overwrite(dir / "manifest.json", manifest.dump(2) + "\n");
  EXPECT_EQ(code_of([&] { load_artifact(dir); }), ErrorCode::kArtifact);
}

TEST(Artifact, SaveRejectsMismatchedParts) {
  Pipeline p = fixture_pipeline();
  p.config.featurize.include_handcrafted = true;
  EXPECT_EQ(code_of([&] { save_artifact(fresh_dir("bad_save"), p); }),
            ErrorCode::kInvalidArgument);
}

// --- service: predict -------------------------------------------------------------

std::shared_ptr<InMemorySurveyStore> survey_store() {
  auto store = std::make_shared<InMemorySurveyStore>();
  std::vector<QAItem> twenty(fixture_corpus().begin(), fixture_corpus().begin() + 20);
  for (QAItem& q : twenty) q.label.reset();
  store->put("s20", twenty);
  return store;
}

std::unique_ptr<Service> loaded_service(ServiceConfig config = {}) {
  auto s = std::make_unique<Service>(config, survey_store());
  s->models().swap(std::make_shared<const Pipeline>(load_artifact(saved_fixture("svc"))));
  return s;
}

TEST(Service, NotReadyUntilLoaded) {
  Service s({}, survey_store());
  EXPECT_EQ(s.health().status, 503);
  const Response r = s.predict(R"({"survey_id": "s20"})");
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(r.body["error"], "not_ready");
  s.load(saved_fixture("ready"));
  EXPECT_EQ(s.health().status, 200);
  EXPECT_EQ(s.health().body["status"], "ready");
}

TEST(Service, CorruptArtifactIsNeverServed) {
  Service s({}, survey_store());
  const fs::path dir = saved_fixture("corrupt_start");
  overwrite(dir / "classifier.json", "{}");
  EXPECT_EQ(code_of([&] { s.load(dir); }), ErrorCode::kArtifact);
  EXPECT_EQ(s.health().status, 503);
}

TEST(Service, TwentyQuestionSurveyWithinASecond) {
  const auto s = loaded_service();
  const auto start = std::chrono::steady_clock::now();
  const Response r = s->predict(R"({"survey_id": "s20"})");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(r.status, 200) << r.body.dump();
  ASSERT_EQ(r.body["results"].size(), 20u);
  EXPECT_LT(secs, 1.0);
  for (std::size_t i = 0; i < 20; ++i) {
    const json& res = r.body["results"][i];
    EXPECT_EQ(res["id"], fixture_corpus()[i].id);
    const double p = res["probability"];
    EXPECT_EQ(res["is_dbq"].get<bool>(), p >= kDefaultThreshold);
    EXPECT_DOUBLE_EQ(p, fixture_pipeline().probability(fixture_corpus()[i]));
    EXPECT_FALSE(res.contains("attribution"));
  }
}

TEST(Service, NeutralInlineQuestion) {
  const auto s = loaded_service();
  const Response r = s->predict(
      R"({"questions": [{"id": "n1", "question": "How satisfied are you with the price?",
          "options": ["Very satisfied", "Satisfied", "Unsatisfied"]}]})");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_FALSE(r.body["results"][0]["is_dbq"].get<bool>());
  EXPECT_LT(r.body["results"][0]["probability"].get<double>(), kDefaultThreshold);
}

TEST(Service, IdenticalRequestsGiveIdenticalBodies) {
  const auto s = loaded_service();
  for (const char* body :
       {R"({"survey_id": "s20"})", R"({"survey_id": "s20", "explain": true})",
        R"({"questions": [{"id": "a", "question": "Is the food and service good?",
            "options": ["Yes", "No"]}], "explain": true})"}) {
    const Response a = s->predict(body);
    const Response b = s->predict(body);
    ASSERT_EQ(a.status, 200) << a.body.dump();
    EXPECT_EQ(a.body.dump(), b.body.dump());
  }
  // A second service over the same artifact agrees as well.
  const auto t = loaded_service();
  EXPECT_EQ(s->predict(R"({"survey_id": "s20", "explain": true})").body.dump(),
            t->predict(R"({"survey_id": "s20", "explain": true})").body.dump());
}

TEST(Service, ExplainAddsConservingAttribution) {
  const auto s = loaded_service();
  const Response r = s->predict(
      R"({"questions": [{"id": "a", "question": "Is the food and service good?",
          "options": ["Yes", "No"]}], "explain": true})");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const json& res = r.body["results"][0];
  ASSERT_TRUE(res.contains("attribution"));
  const json& a = res["attribution"];
  double total = a["residual"].get<double>();
  for (double v : a["scores"]) total += v;
  for (double v : a["option_scores"]) total += v;
  EXPECT_NEAR(a["base_value"].get<double>() + total, a["output"].get<double>(), 1e-9);
}

TEST(Service, MalformedRequests) {
  const auto s = loaded_service();
  auto status = [&](const char* body) { return s->predict(body).status; };
  EXPECT_EQ(status(R"({"survey_id": "s20", "questions": []})"), 400);
  EXPECT_EQ(status(R"({})"), 400);
  EXPECT_EQ(status(R"([1, 2])"), 400);
  EXPECT_EQ(status("not json"), 400);
  EXPECT_EQ(status(R"({"questions": {"id": "x"}})"), 400);
  EXPECT_EQ(status(R"({"questions": [{"id": "x"}]})"), 400);
  EXPECT_EQ(status(R"({"questions": [{"id": "x", "question": "   ", "options": []}]})"), 400);
  EXPECT_EQ(status(R"({"survey_id": "nope"})"), 404);
  const Response r = s->predict(R"({"survey_id": "nope"})");
  EXPECT_EQ(r.body["error"], "not_found");
  EXPECT_TRUE(r.body.contains("message"));
}

TEST(Service, DeadlineProducesTimeoutNotPartialResults) {
  const auto s = loaded_service({.request_timeout = std::chrono::milliseconds(0)});
  const Response r = s->predict(R"({"survey_id": "s20", "explain": true})");
  EXPECT_EQ(r.status, 504);
  EXPECT_FALSE(r.body.contains("results"));
}

// --- service: feedback -------------------------------------------------------------

TEST(Feedback, RequiresAServedPrediction) {
  const auto s = loaded_service();
  EXPECT_EQ(s->feedback(R"({"survey_id": "s20", "question_id": "q1", "action": "applied_fix"})")
                .status,
            404);
}

TEST(Feedback, CountersAndReplayRejection) {
  const auto s = loaded_service();
  ASSERT_EQ(s->predict(R"({"survey_id": "s20"})").status, 200);
  const std::string a = fixture_corpus()[0].id, b = fixture_corpus()[1].id;
  auto send = [&](const std::string& id, const char* action) {
    return s->feedback(json{{"survey_id", "s20"}, {"question_id", id}, {"action", action}}.dump());
  };
  const Response first = send(a, "applied_fix");
  ASSERT_EQ(first.status, 200) << first.body.dump();
  EXPECT_EQ(first.body["adoption"]["applied"], 1);
  EXPECT_EQ(first.body["adoption"]["shown"], 1);
  const Response second = send(b, "dismissed");
  EXPECT_EQ(second.body["adoption"]["applied"], 1);
  EXPECT_EQ(second.body["adoption"]["shown"], 2);
  EXPECT_DOUBLE_EQ(second.body["adoption"]["rate"].get<double>(), 0.5);
  EXPECT_EQ(send(a, "dismissed").status, 409);
  EXPECT_EQ(send(fixture_corpus()[2].id, "ignored").status, 400);
  EXPECT_EQ(s->feedback().stats(), (AdoptionStats{1, 2}));
}

TEST(Feedback, AdoptionIsRecomputableFromTheLog) {
  const fs::path path = fresh_dir("feedback") / "feedback.jsonl";
  auto log = std::make_shared<FeedbackLog>(path.string());
  Service s({}, survey_store(), log);
  s.load(saved_fixture("feedback_model"));
  ASSERT_EQ(s.predict(R"({"survey_id": "s20"})").status, 200);
  for (std::size_t i = 0; i < 20; ++i) {
    const json req{{"survey_id", "s20"},
                   {"question_id", fixture_corpus()[i].id},
                   {"action", i % 3 == 0 ? "applied_fix" : "dismissed"}};
    ASSERT_EQ(s.feedback(req.dump()).status, 200);
  }
  std::ifstream in(path);
  const AdoptionStats from_log = recompute_adoption(in);
  EXPECT_EQ(from_log, log->stats());
  EXPECT_EQ(from_log, (AdoptionStats{7, 20}));

  // Each line carries the served prediction.
  std::istringstream lines(log->contents());
  std::string line;
  std::size_t i = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    const int expected = fixture_pipeline().probability(fixture_corpus()[i]) >= kDefaultThreshold;
    EXPECT_EQ(j["model_prediction"], expected);
    EXPECT_TRUE(j.contains("timestamp"));
    ++i;
  }
  EXPECT_EQ(i, 20u);

  // A reopened log keeps its counters and idempotency keys.
  FeedbackLog reopened(path.string());
  EXPECT_EQ(reopened.stats(), from_log);
  reopened.record_served("s20", fixture_corpus()[0].id, 1);
  EXPECT_EQ(code_of([&] {
              reopened.append({{"survey_id", "s20"},
                               {"question_id", fixture_corpus()[0].id},
                               {"action", "dismissed"}});
            }),
            ErrorCode::kConflict);
}

TEST(Feedback, RecomputeIgnoresBlankLines) {
  std::istringstream log(
      "{\"action\":\"applied_fix\"}\n\n{\"action\":\"dismissed\"}\n{\"action\":\"applied_fix\"}\n");
  const AdoptionStats s = recompute_adoption(log);
  EXPECT_EQ(s, (AdoptionStats{2, 3}));
  EXPECT_FALSE(AdoptionStats{}.rate().has_value());
}

// --- service: hot swap ---------------------------------------------------------------

TEST(Swap, ReplacesTheModelAtomically) {
  const auto s = loaded_service();
  const fs::path other = fresh_dir("swap_other");
  save_artifact(other, other_pipeline());
  const std::string v1 = s->health().body["model_version"];
  const Response r = s->swap(json{{"artifact_path", other.string()}}.dump());
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_NE(r.body["model_version"], v1);
  EXPECT_EQ(s->health().body["model_version"], r.body["model_version"]);
}

TEST(Swap, CorruptBundleLeavesTheOldModelInPlace) {
  const auto s = loaded_service();
  const std::string v1 = s->health().body["model_version"];
  const fs::path bad = saved_fixture("swap_bad");
  fs::remove(bad / "embedding/vectors.txt");
  const Response r = s->swap(json{{"artifact_path", bad.string()}}.dump());
  EXPECT_EQ(r.status, 500);
  EXPECT_EQ(r.body["error"], "artifact_error");
  EXPECT_EQ(s->health().body["model_version"], v1);
}

TEST(Swap, ConcurrentReadersSeeOneWholeModel) {
  const fs::path dir_a = saved_fixture("concurrent_a");
  const fs::path dir_b = fresh_dir("concurrent_b");
  save_artifact(dir_b, other_pipeline());
  const Pipeline a = load_artifact(dir_a), b = load_artifact(dir_b);
  const std::string req = R"({"survey_id": "s20"})";
  Service s({}, survey_store());
  s.load(dir_a);
  const json body_a = s.predict(req).body;
  s.load(dir_b);
  const json body_b = s.predict(req).body;
  ASSERT_NE(body_a.dump(), body_b.dump());

  std::atomic<bool> stop{false};
  std::atomic<int> bad{0}, served{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t) {
    readers.emplace_back([&] {
      while (!stop) {
        const Response r = s.predict(req);
        const std::string d = r.body.dump();
        if (r.status != 200 || (d != body_a.dump() && d != body_b.dump())) ++bad;
        ++served;
      }
    });
  }
  for (int i = 0; i < 20; ++i) {
    s.load(i % 2 == 0 ? dir_a : dir_b);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  stop = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(bad, 0);
  EXPECT_GT(served, 0);
}

// --- active-learning session ------------------------------------------------------------

struct AlFixture {
  Dataset seed;
  Pool pool;
  std::map<std::string, Label> truth;
};

AlFixture al_fixture(std::size_t per_source) {
  AlFixture f;
  const auto& corpus = fixture_corpus();
  for (std::size_t i = 0; i < 120; ++i) {
    f.seed.add(fixture_pipeline().features(corpus[i]).values, to_int(*corpus[i].label),
               corpus[i].id);
  }
  const std::vector<QAItem> rest(corpus.begin() + 120, corpus.end());
  for (const QAItem& q : rest) f.truth[q.id] = *q.label;
  f.pool = build_two_source_pool(rest, ConjunctionLexicon::standard(), per_source, 3,
                                 [](const QAItem& q) { return fixture_pipeline().features(q).values; });
  return f;
}

AlSessionConfig small_session(std::size_t batch) {
  AlSessionConfig c;
  c.batch_size = batch;
  c.committee.forest.n_trees = 10;
  c.committee.gbt.n_stages = 10;
  c.explain_samples = 60;
  return c;
}

TEST(AlSession, RoundClosesAfterTheWholeBatch) {
  AlFixture f = al_fixture(5);
  AlSession session(f.seed, f.pool, small_session(3));
  const json first = session.next(std::nullopt);
  EXPECT_EQ(first["round"], 0);
  ASSERT_EQ(first["items"].size(), 3u);
  double last = 1.0;
  for (const json& item : first["items"]) {
    EXPECT_EQ(item["votes"].size(), 3u);
    EXPECT_LE(item["entropy"].get<double>(), last + 1e-15);
    last = item["entropy"];
    EXPECT_TRUE(item.contains("machine_checkable"));
  }
  // A repeated next() returns the same open batch.
  EXPECT_EQ(session.next(std::nullopt)["items"], first["items"]);

  const std::size_t before = session.labeled_size();
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string id = first["items"][k]["id"];
    const json r = session.label(id, f.truth.at(id));
    EXPECT_EQ(r["round_closed"], k == 2);
    EXPECT_EQ(session.round(), k == 2 ? 1u : 0u);
    EXPECT_EQ(session.labeled_size(), k == 2 ? before + 3 : before);
  }
  const json st = session.status();
  EXPECT_EQ(st["round"], 1);
  ASSERT_EQ(st["rounds"].size(), 1u);
  EXPECT_EQ(st["rounds"][0]["labels_received"], 3);
  EXPECT_EQ(st["pool_remaining"], 7);
  const json second = session.next(std::nullopt);
  EXPECT_EQ(second["round"], 1);
  for (const json& item : second["items"]) {
    for (const json& old : first["items"]) EXPECT_NE(item["id"], old["id"]);
  }
}

TEST(AlSession, SkipIsLoggedAsAbstention) {
  AlFixture f = al_fixture(5);
  AlSession session(f.seed, f.pool, small_session(2));
  const json batch = session.next(std::nullopt);
  const std::string skipped = batch["items"][0]["id"];
  const std::string kept = batch["items"][1]["id"];
  session.label(skipped, std::nullopt);
  session.label(kept, f.truth.at(kept));
  const json st = session.status();
  EXPECT_EQ(st["abstained"], json::array({skipped}));
  EXPECT_EQ(st["labeled_size"], 121);
  EXPECT_EQ(st["rounds"][0]["labels_received"], 1);
}

TEST(AlSession, RejectsUnknownRepeatedAndOutOfBatchLabels) {
  AlFixture f = al_fixture(5);
  AlSession session(f.seed, f.pool, small_session(2));
  const json batch = session.next(std::nullopt);
  const std::string id = batch["items"][0]["id"];
  EXPECT_EQ(code_of([&] { session.label("ghost", Label::kDbq); }), ErrorCode::kNotFound);
  session.label(id, Label::kDbq);
  EXPECT_EQ(code_of([&] { session.label(id, Label::kNonDbq); }), ErrorCode::kConflict);
  std::string outside;
  for (const PoolItem& p : f.pool.items) {
    if (p.item.id != id && p.item.id != batch["items"][1]["id"]) outside = p.item.id;
  }
  EXPECT_EQ(code_of([&] { session.label(outside, Label::kDbq); }), ErrorCode::kConflict);
}

TEST(AlSession, ExhaustedPoolReportsEmptyList) {
  AlFixture f = al_fixture(1);
  ASSERT_EQ(f.pool.size(), 2u);
  AlSession session(f.seed, f.pool, small_session(5));
  const json batch = session.next(std::nullopt);
  ASSERT_EQ(batch["items"].size(), 2u);
  for (const json& item : batch["items"]) session.label(item["id"], Label::kNonDbq);
  const json after = session.next(std::nullopt);
  EXPECT_TRUE(after["items"].empty());
  EXPECT_TRUE(after["exhausted"].get<bool>());
  EXPECT_TRUE(session.status()["exhausted"].get<bool>());
}

TEST(AlSession, ConcurrentLabelsForOneItemAcceptExactlyOne) {
  AlFixture f = al_fixture(5);
  auto session = std::make_shared<AlSession>(f.seed, f.pool, small_session(4));
  Service s({}, nullptr);
  s.set_al_session(session);
  const std::string id = s.al_next(std::nullopt).body["items"][0]["id"];
  const std::string body = json{{"item_id", id}, {"label", "dbq"}}.dump();
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      const int status = s.al_label(body).status;
      if (status == 200) ++ok;
      if (status == 409) ++conflict;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok, 1);
  EXPECT_EQ(conflict, 7);
}

TEST(AlSession, ItemsCarryTokenAttributions) {
  AlFixture f = al_fixture(3);
  const auto explainer = std::make_shared<const Pipeline>(fixture_pipeline());
  AlSession session(f.seed, f.pool, small_session(2), explainer);
  const json batch = session.next(std::nullopt);
  for (const json& item : batch["items"]) {
    ASSERT_TRUE(item.contains("attribution")) << item.dump();
    EXPECT_FALSE(item["attribution"]["tokens"].empty());
    EXPECT_EQ(item["attribution"]["tokens"].size(), item["attribution"]["scores"].size());
  }
}

TEST(AlSession, LabelValues) {
  EXPECT_EQ(parse_label_value(1), Label::kDbq);
  EXPECT_EQ(parse_label_value(0), Label::kNonDbq);
  EXPECT_EQ(parse_label_value("dbq"), Label::kDbq);
  EXPECT_EQ(parse_label_value("non_dbq"), Label::kNonDbq);
  EXPECT_FALSE(parse_label_value("skip").has_value());
  EXPECT_THROW(parse_label_value(2), Error);
  EXPECT_THROW(parse_label_value("maybe"), Error);
  EXPECT_THROW(parse_label_value(json::array()), Error);
}

TEST(AlSession, ServiceWithoutSessionIsNotReady) {
  Service s({}, nullptr);
  EXPECT_EQ(s.al_status().status, 503);
  EXPECT_EQ(s.al_next(2).status, 503);
}

// --- HTTP ------------------------------------------------------------------------------

class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    AlFixture f = al_fixture(3);
    truth_ = f.truth;
    service_ = loaded_service();
    service_->set_al_session(std::make_shared<AlSession>(f.seed, f.pool, small_session(2)));
    install_routes(server_, *service_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  std::map<std::string, Label> truth_;
  std::unique_ptr<Service> service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(Http, AllRoutes) {
  auto c = client();
  auto health = c.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ready");

  auto predict = c.Post("/v1/predict", R"({"survey_id": "s20"})", "application/json");
  ASSERT_TRUE(predict);
  EXPECT_EQ(predict->status, 200);
  EXPECT_EQ(json::parse(predict->body)["results"].size(), 20u);
  EXPECT_EQ(predict->get_header_value("Content-Type"), "application/json");

  auto missing = c.Post("/v1/predict", R"({"survey_id": "zzz"})", "application/json");
  EXPECT_EQ(missing->status, 404);
  auto bad = c.Post("/v1/predict", "{", "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"], "parse_error");

  const std::string q0 = fixture_corpus()[0].id;
  const std::string fb =
      json{{"survey_id", "s20"}, {"question_id", q0}, {"action", "applied_fix"}}.dump();
  EXPECT_EQ(c.Post("/v1/feedback", fb, "application/json")->status, 200);
  EXPECT_EQ(c.Post("/v1/feedback", fb, "application/json")->status, 409);

  auto next = c.Get("/v1/al/next?batch=2");
  ASSERT_EQ(next->status, 200);
  const json items = json::parse(next->body)["items"];
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(c.Get("/v1/al/next?batch=0")->status, 400);
  EXPECT_EQ(c.Get("/v1/al/next?batch=abc")->status, 400);
  for (const json& item : items) {
    const std::string id = item["id"];
    const json body{{"item_id", id}, {"label", to_int(truth_.at(id))}};
    EXPECT_EQ(c.Post("/v1/al/label", body.dump(), "application/json")->status, 200);
  }
  EXPECT_EQ(c.Post("/v1/al/label", json{{"item_id", "ghost"}, {"label", 1}}.dump(),
                   "application/json")
                ->status,
            404);
  auto status = c.Get("/v1/al/status");
  ASSERT_EQ(status->status, 200);
  EXPECT_EQ(json::parse(status->body)["round"], 1);

  const fs::path other = fresh_dir("http_swap");
  save_artifact(other, other_pipeline());
  auto swapped = c.Post("/v1/admin/swap", json{{"artifact_path", other.string()}}.dump(),
                        "application/json");
  ASSERT_EQ(swapped->status, 200);
  EXPECT_EQ(json::parse(c.Get("/health")->body)["model_version"],
            json::parse(swapped->body)["model_version"]);
  EXPECT_EQ(c.Post("/v1/admin/swap", R"({"artifact_path": "/nonexistent"})",
                   "application/json")
                ->status,
            500);
}

}  // namespace
}  // namespace dbq
