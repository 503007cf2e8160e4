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

// dbq: command-line entry points.
//
// Every batch subcommand writes into its own --out directory: the primary
// outputs, config.toml (the fully resolved options, loadable again with
// --config) and manifest.json (size and SHA-256 of every file). Exit status
// is 0 on success, 2 for bad input and 3 for runtime failures.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbq/dbq.hpp"
#include "dbq/service.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dbq;

constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

// --- run directory ----------------------------------------------------------

class RunDir {
 public:
  RunDir(fs::path root, bool overwrite) : root_(std::move(root)) {
    if (fs::exists(root_) && !fs::is_directory(root_)) {
      fail(ErrorCode::kInvalidArgument, root_.string() + " exists and is not a directory");
    }
    if (fs::exists(root_) && !fs::is_empty(root_)) {
      if (!overwrite) {
        fail(ErrorCode::kInvalidArgument,
             "output directory " + root_.string() + " is not empty (pass --overwrite)");
      }
      for (const auto& entry : fs::directory_iterator(root_)) fs::remove_all(entry.path());
    }
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }
  fs::path path(const std::string& rel) const { return root_ / rel; }
  void write(const std::string& rel, std::string_view content) const {
    write_file(root_ / rel, content);
  }

  void finish(const CLI::App& app) const {
    // Global options plus the subcommand that ran; unset options are left out
    // so the file loads back unchanged.
    const std::string sub = app.get_subcommands().front()->get_name() + ".";
    std::istringstream all(app.config_to_str(true, false));
    std::string config, line;
    while (std::getline(all, line)) {
      const std::string key = line.substr(0, line.find('='));
      if (line.size() >= 3 && line.compare(line.size() - 3, 3, "=\"\"") == 0) continue;
      if (key.find('.') == std::string::npos || key.rfind(sub, 0) == 0) config += line + "\n";
    }
    write("config.toml", config);
    std::vector<std::string> rels;
    for (const auto& entry : fs::recursive_directory_iterator(root_)) {
      if (!entry.is_regular_file()) continue;
      const std::string rel = fs::relative(entry.path(), root_).generic_string();
      if (rel != "manifest.json") rels.push_back(rel);
    }
    std::sort(rels.begin(), rels.end());
    json files = json::object();
    for (const std::string& rel : rels) {
      const std::string content = read_file(root_ / rel);
      files[rel] = {{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
    }
    write("manifest.json", json{{"files", files}}.dump(2) + "\n");
  }

 private:
  fs::path root_;
};

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const json& r : rows) out += r.dump() + "\n";
  return out;
}

std::string file_stem(const std::string& path) { return fs::path(path).stem().string(); }

std::string safe_name(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "item" : out;
}

std::vector<QAItem> read_labeled(const std::string& path) {
  std::vector<QAItem> items = read_corpus_file(path);
  for (const QAItem& item : items) {
    if (!item.label) {
      fail(ErrorCode::kInvalidArgument, path + ": item \"" + item.id + "\" has no label");
    }
  }
  if (items.empty()) fail(ErrorCode::kInvalidArgument, path + " holds no items");
  return items;
}

std::string report_row(const std::string& name, const EvalReport& r) {
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream ss;
    if (v) {
      ss << std::fixed << std::setprecision(4) << *v;
    } else {
      ss << "undefined";
    }
    return ss.str();
  };
  std::ostringstream ss;
  ss << std::left << std::setw(24) << name << std::setw(11) << cell(r.precision) << std::setw(11)
     << cell(r.accuracy) << std::setw(11) << cell(r.auc_roc) << cell(r.recall) << "\n";
  return ss.str();
}

std::string report_header(const std::string& first) {
  std::ostringstream ss;
  ss << std::left << std::setw(24) << first << std::setw(11) << "precision" << std::setw(11)
     << "accuracy" << std::setw(11) << "auc_roc"
     << "recall\n";
  return ss.str();
}

// --- shared option groups ------------------------------------------------------

struct RunOptions {
  std::string out;
  bool overwrite = false;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--out", o.out, "Run directory for all outputs")->required();
  cmd->add_flag("--overwrite", o.overwrite, "Clear a non-empty run directory first");
}

struct SgnsOptions {
  SgnsConfig config;
  bool no_subwords = false;
  SubwordConfig subwords;

  SgnsConfig resolved() const {
    SgnsConfig c = config;
    c.subwords = no_subwords ? std::nullopt : std::optional<SubwordConfig>(subwords);
    return c;
  }
};

void add_sgns_options(CLI::App* cmd, SgnsOptions& o) {
  cmd->add_option("--dim", o.config.dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--window", o.config.window, "Context window")->capture_default_str();
  cmd->add_option("--negatives", o.config.negatives, "Negative samples")->capture_default_str();
  cmd->add_option("--epochs", o.config.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", o.config.learning_rate, "Initial learning rate")->capture_default_str();
  cmd->add_option("--min-count", o.config.min_count, "Minimum word count")->capture_default_str();
  cmd->add_flag("--no-subwords", o.no_subwords, "Plain word2vec without character n-grams");
  cmd->add_option("--min-n", o.subwords.min_n, "Shortest n-gram")->capture_default_str();
  cmd->add_option("--max-n", o.subwords.max_n, "Longest n-gram")->capture_default_str();
  cmd->add_option("--buckets", o.subwords.buckets, "Hash buckets")->capture_default_str();
}

struct FeatureOptions {
  std::string pooling = "max";
  bool handcrafted = false;

  FeaturizeOptions resolved() const { return {parse_pooling(pooling), handcrafted}; }
};

void add_feature_options(CLI::App* cmd, FeatureOptions& o) {
  cmd->add_option("--pooling", o.pooling, "Question pooling: mean, sum, max or min")
      ->capture_default_str()
      ->check(CLI::IsMember({"mean", "sum", "max", "min"}));
  cmd->add_flag("--handcrafted", o.handcrafted, "Append the handcrafted features");
}

struct ModelOptions {
  std::string kind = "rf";
  ClassifierParams params;
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
  cmd->add_option("--model", o.kind, "Classifier: rf, logreg or gbt")
      ->capture_default_str()
      ->check(CLI::IsMember({"rf", "random_forest", "logreg", "logistic_regression", "gbt",
                             "gradient_boosted_trees"}));
  auto& f = o.params.forest;
  cmd->add_option("--n-trees", f.n_trees, "Forest size")->capture_default_str();
  cmd->add_option("--max-depth", f.max_depth, "Forest tree depth, 0 = unlimited")
      ->capture_default_str();
  cmd->add_option("--min-leaf", f.min_leaf, "Forest minimum leaf size")->capture_default_str();
  cmd->add_option("--mtry", f.mtry, "Features tried per split, 0 = sqrt(D)")
      ->capture_default_str();
  auto& l = o.params.logreg;
  cmd->add_option("--l2", l.l2, "Logistic regression L2 penalty")->capture_default_str();
  cmd->add_option("--logreg-lr", l.learning_rate, "Logistic regression step")
      ->capture_default_str();
  cmd->add_option("--logreg-epochs", l.epochs, "Logistic regression epochs")
      ->capture_default_str();
  auto& g = o.params.gbt;
  cmd->add_option("--gbt-stages", g.n_stages, "Boosting stages")->capture_default_str();
  cmd->add_option("--gbt-lr", g.learning_rate, "Boosting shrinkage")->capture_default_str();
  cmd->add_option("--gbt-depth", g.max_depth, "Boosting tree depth")->capture_default_str();
  cmd->add_option("--subsample", g.subsample, "Boosting row subsample")->capture_default_str();
}

// --- generate-corpus ------------------------------------------------------------

struct GenerateArgs {
  RunOptions run;
  SyntheticConfig config;
  double test_fraction = 0.0;
};

void cmd_generate(const CLI::App& app, const GenerateArgs& a, std::uint64_t seed) {
  if (a.test_fraction < 0.0 || a.test_fraction >= 1.0) {
    fail(ErrorCode::kInvalidArgument, "--test-fraction must be in [0, 1)");
  }
  SyntheticConfig cfg = a.config;
  cfg.seed = seed;
  std::vector<QAItem> items = generate_corpus(cfg);
  const RunDir run(a.run.out, a.run.overwrite);
  if (a.test_fraction == 0.0) {
    std::ostringstream ss;
    write_corpus(ss, items);
    run.write("corpus.jsonl", ss.str());
  } else {
    Rng rng(derive_seed(seed, 1));
    rng.shuffle(items);
    const auto n_test = static_cast<std::size_t>(
        std::llround(a.test_fraction * static_cast<double>(items.size())));
    const std::vector<QAItem> test(items.begin(), items.begin() + static_cast<long>(n_test));
    const std::vector<QAItem> train(items.begin() + static_cast<long>(n_test), items.end());
    std::ostringstream tr, te;
    write_corpus(tr, train);
    write_corpus(te, test);
    run.write("train.jsonl", tr.str());
    run.write("test.jsonl", te.str());
  }
  run.finish(app);
  std::cout << "wrote " << items.size() << " items to " << run.root().string() << "\n";
}

// --- train-embeddings -------------------------------------------------------------

struct EmbeddingArgs {
  RunOptions run;
  std::string corpus;
  SgnsOptions sgns;
};

void cmd_train_embeddings(const CLI::App& app, const EmbeddingArgs& a, std::uint64_t seed) {
  const std::vector<QAItem> items = read_corpus_file(a.corpus);
  SgnsConfig cfg = a.sgns.resolved();
  cfg.seed = seed;
  const SgnsResult r = train_sgns(training_sentences(items), cfg);
  const RunDir run(a.run.out, a.run.overwrite);
  save_embedding(run.path("embedding"), r.model);
  run.write("training.json",
            json{{"vocab_size", r.model.vocab_size()}, {"epoch_loss", r.epoch_loss}}.dump(2) +
                "\n");
  run.finish(app);
  std::cout << "vocabulary " << r.model.vocab_size() << ", dim " << r.model.dim() << "\n";
}

// --- featurize ----------------------------------------------------------------------

struct FeaturizeArgs {
  RunOptions run;
  std::string corpus;
  std::string embedding;
  FeatureOptions features;
};

void cmd_featurize(const CLI::App& app, const FeaturizeArgs& a) {
  const std::vector<QAItem> items = read_corpus_file(a.corpus);
  const EmbeddingModel model = load_embedding(a.embedding);
  const FeaturizeOptions opts = a.features.resolved();
  std::vector<json> rows;
  for (const QAItem& item : items) {
    const FeatureVector fv = featurize(model, item, opts);
    json row{{"id", item.id}, {"values", fv.values}, {"oov_tokens", fv.oov_tokens}};
    row["label"] = item.label ? json(to_int(*item.label)) : json(nullptr);
    rows.push_back(std::move(row));
  }
  const RunDir run(a.run.out, a.run.overwrite);
  run.write("features.jsonl", jsonl(rows));
  run.finish(app);
  std::cout << "featurized " << rows.size() << " items, dimension "
            << feature_dimension(model.dim(), opts.include_handcrafted) << "\n";
}

// --- train ----------------------------------------------------------------------------

struct TrainArgs {
  RunOptions run;
  std::string corpus;
  std::string embedding;
  std::vector<std::string> tests;
  SgnsOptions sgns;
  FeatureOptions features;
  ModelOptions model;
  double threshold = kDefaultThreshold;
  std::size_t background_rows = kDefaultBackgroundRows;
};

json evaluate_sets(const Pipeline& p, const std::vector<std::string>& paths, double threshold,
                   std::string* table) {
  json sets = json::array();
  *table += report_header("test_set");
  for (const std::string& path : paths) {
    const std::vector<QAItem> items = read_labeled(path);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const QAItem& item : items) {
      scores.push_back(p.probability(item));
      labels.push_back(to_int(*item.label));
    }
    const EvalReport r = evaluate_scores(scores, labels, threshold);
    json j = to_json(r);
    j["name"] = file_stem(path);
    j["n"] = items.size();
    sets.push_back(std::move(j));
    *table += report_row(file_stem(path), r);
  }
  return sets;
}

void cmd_train(const CLI::App& app, const TrainArgs& a, std::uint64_t seed) {
  const std::vector<QAItem> items = read_labeled(a.corpus);
  PipelineTrainConfig cfg;
  cfg.sgns = a.sgns.resolved();
  cfg.featurize = a.features.resolved();
  cfg.classifier = a.model.params;
  cfg.classifier.kind = parse_model_kind(a.model.kind);
  cfg.threshold = a.threshold;
  cfg.background_rows = a.background_rows;
  cfg.seed = seed;
  const Pipeline p = a.embedding.empty()
                         ? train_pipeline(items, cfg)
                         : train_pipeline_with(load_embedding(a.embedding), items, cfg);
  const RunDir run(a.run.out, a.run.overwrite);
  save_artifact(run.path("artifact"), p);
  const Pipeline loaded = load_artifact(run.path("artifact"));
  std::size_t positives = 0;
  for (const QAItem& item : items) positives += static_cast<std::size_t>(to_int(*item.label));
  json summary{{"model_version", loaded.version},
               {"model_kind", std::string(model_kind_name(p.classifier.kind()))},
               {"feature_dim", p.classifier.dim()},
               {"train_items", items.size()},
               {"train_positives", positives},
               {"sgns", to_json(cfg.sgns)},
               {"classifier", to_json(cfg.classifier)}};
  run.write("train.json", summary.dump(2) + "\n");
  std::string table;
  if (!a.tests.empty()) {
    const json sets = evaluate_sets(loaded, a.tests, a.threshold, &table);
    run.write("metrics.json",
              json{{"model_version", loaded.version}, {"threshold", a.threshold},
                   {"test_sets", sets}}
                      .dump(2) +
                  "\n");
  }
  run.finish(app);
  std::cout << "model " << loaded.version << " -> " << run.path("artifact").string() << "\n"
            << table;
}

// --- evaluate ---------------------------------------------------------------------------

struct EvaluateArgs {
  RunOptions run;
  std::string artifact;
  std::vector<std::string> tests;
  std::optional<double> threshold;
};

void cmd_evaluate(const CLI::App& app, const EvaluateArgs& a) {
  const Pipeline p = load_artifact(a.artifact);
  const double threshold = a.threshold.value_or(p.config.threshold);
  std::string table;
  const json sets = evaluate_sets(p, a.tests, threshold, &table);
  const RunDir run(a.run.out, a.run.overwrite);
  run.write("metrics.json", json{{"model_version", p.version},
                                 {"threshold", threshold},
                                 {"test_sets", sets}}
                                    .dump(2) +
                                "\n");
  run.finish(app);
  std::cout << table;
}

// --- predict ------------------------------------------------------------------------------

struct PredictArgs {
  RunOptions run;
  std::string artifact;
  std::string corpus;
};

void cmd_predict(const CLI::App& app, const PredictArgs& a) {
  const Pipeline p = load_artifact(a.artifact);
  const std::vector<QAItem> items = read_corpus_file(a.corpus);
  std::vector<json> rows;
  std::size_t flagged = 0;
  for (const QAItem& item : items) {
    const double prob = p.probability(item);
    const bool is_dbq = prob >= p.config.threshold;
    flagged += is_dbq ? 1 : 0;
    rows.push_back({{"id", item.id}, {"is_dbq", is_dbq}, {"probability", prob}});
  }
  const RunDir run(a.run.out, a.run.overwrite);
  run.write("predictions.jsonl", jsonl(rows));
  run.finish(app);
  std::cout << flagged << " of " << items.size() << " questions flagged\n";
}

// --- explain --------------------------------------------------------------------------------

struct ExplainArgs {
  RunOptions run;
  std::string artifact;
  std::string question;
  std::vector<std::string> options;
  std::string id = "q";
  std::string corpus;
  std::string item;
  std::size_t samples = 2000;
  std::string mode = "sum";
  bool quiet = false;
};

void cmd_explain(const CLI::App& app, const ExplainArgs& a, std::uint64_t seed) {
  const Pipeline p = load_artifact(a.artifact);
  std::vector<QAItem> items;
  if (!a.corpus.empty()) {
    items = read_corpus_file(a.corpus);
    if (!a.item.empty()) {
      std::erase_if(items, [&](const QAItem& q) { return q.id != a.item; });
      if (items.empty()) fail(ErrorCode::kNotFound, "no item \"" + a.item + "\" in " + a.corpus);
    }
  } else {
    items.push_back({a.id, a.question, a.options, std::nullopt});
  }
  for (const QAItem& item : items) {
    if (const auto reason = check_item(item)) {
      fail(ErrorCode::kInvalidArgument,
           "item \"" + item.id + "\" rejected: " + std::string(reject_reason_name(*reason)));
    }
  }
  if (p.background.rows() == 0) fail(ErrorCode::kArtifact, "artifact has no background set");
  const ExplainOptions opts{a.samples, seed, parse_row_aggregation(a.mode)};
  const RunDir run(a.run.out, a.run.overwrite);
  std::vector<json> rows;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const QAItem& item = items[i];
    const Explanation e =
        explain_item(p.classifier, p.embedding, item, p.config.featurize, p.background, opts);
    const TokenAttribution& t = e.attribution;
    double token_total = t.residual;
    for (double v : t.scores) token_total += v;
    for (double v : t.option_scores) token_total += v;
    json row{{"id", item.id},
             {"probability", e.probability},
             {"estimator", e.shap.estimator},
             {"samples", e.shap.samples},
             {"shap_total", e.shap.total()},
             {"token_score_total", token_total},
             {"attribution", to_json(t)}};
    rows.push_back(std::move(row));
    std::ostringstream name;
    name << "html/" << std::setw(4) << std::setfill('0') << i << "-" << safe_name(item.id)
         << ".html";
    run.write(name.str(), render_html(item, t));
    if (!a.quiet) std::cout << render_terminal(item, t) << "\n";
  }
  run.write("explanations.jsonl", jsonl(rows));
  run.finish(app);
}

// --- baseline-eval ------------------------------------------------------------------------------

struct BaselineArgs {
  RunOptions run;
  std::string corpus;
};

void cmd_baseline_eval(const CLI::App& app, const BaselineArgs& a) {
  const std::vector<QAItem> items = read_labeled(a.corpus);
  const ConjunctionLexicon& lex = ConjunctionLexicon::standard();
  json out = json::object();
  std::string table = report_header("approach");
  for (BaselineKind k :
       {BaselineKind::kApproach1, BaselineKind::kApproach2, BaselineKind::kApproach3}) {
    const EvalReport r = baseline_evaluate(k, items, lex);
    out[std::string(baseline_kind_name(k))] = to_json(r);
    table += report_row(std::string(baseline_kind_name(k)), r);
  }
  const RunDir run(a.run.out, a.run.overwrite);
  run.write("baseline.json", out.dump(2) + "\n");
  run.finish(app);
  std::cout << table;
}

// --- al-run ------------------------------------------------------------------------------------

struct AlArgs {
  RunOptions run;
  std::string corpus;
  std::string seed_set;
  std::size_t seed_positives = 4;
  std::size_t seed_negatives = 16;
  std::size_t pool_per_source = 0;
  std::size_t rounds = 5;
  std::size_t batch = 20;
  std::string strategy = "qbc";
  std::string features = "handcrafted";
  std::string embedding;
  std::string pooling = "max";
  std::size_t committee_trees = 30;
  std::size_t committee_stages = 30;
  bool interactive = false;
};

std::optional<Label> ask_terminal(const QAItem& item) {
  std::cout << "\n" << item.id << ": " << item.question << "\n";
  for (const std::string& o : item.options) std::cout << "  - " << o << "\n";
  while (true) {
    std::cout << "[d]bq, [n]on-dbq, [s]kip, [?] help > " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) fail(ErrorCode::kInvalidArgument, "labeling input ended");
    if (line == "d" || line == "1") return Label::kDbq;
    if (line == "n" || line == "0") return Label::kNonDbq;
    if (line == "s") return std::nullopt;
    std::cout << kLabelingInstruction << "\n";
  }
}

void cmd_al_run(const CLI::App& app, const AlArgs& a, std::uint64_t seed) {
  const std::vector<QAItem> corpus = read_corpus_file(a.corpus);
  std::function<std::vector<double>(const QAItem&)> featurizer;
  std::optional<EmbeddingModel> embedding;
  if (a.features == "embedding") {
    if (a.embedding.empty()) fail(ErrorCode::kInvalidArgument, "--features embedding needs --embedding");
    embedding = load_embedding(a.embedding);
    const FeaturizeOptions opts{parse_pooling(a.pooling), false};
    featurizer = [&embedding, opts](const QAItem& q) { return featurize(*embedding, q, opts).values; };
  } else {
    featurizer = [](const QAItem& q) { return handcrafted_features(q); };
  }

  Dataset labeled;
  std::vector<QAItem> rest;
  if (!a.seed_set.empty()) {
    for (const QAItem& q : read_labeled(a.seed_set)) {
      labeled.add(featurizer(q), to_int(*q.label), q.id);
    }
    rest = corpus;
  } else {
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, 10));
    rng.shuffle(order);
    std::vector<bool> taken(corpus.size(), false);
    std::size_t pos = 0, neg = 0;
    for (std::size_t i : order) {
      const QAItem& q = corpus[i];
      if (!q.label) continue;
      if (*q.label == Label::kDbq ? pos < a.seed_positives : neg < a.seed_negatives) {
        labeled.add(featurizer(q), to_int(*q.label), q.id);
        (*q.label == Label::kDbq ? pos : neg)++;
        taken[i] = true;
      }
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!taken[i]) rest.push_back(corpus[i]);
    }
  }

  std::map<std::string, Label> truth;
  for (const QAItem& q : rest) {
    if (q.label) truth[q.id] = *q.label;
  }
  const ConjunctionLexicon& lex = ConjunctionLexicon::standard();
  Pool pool;
  if (a.pool_per_source > 0) {
    pool = build_two_source_pool(rest, lex, a.pool_per_source, derive_seed(seed, 11), featurizer);
  } else {
    for (const QAItem& q : rest) {
      PoolItem p;
      p.item = q;
      p.item.label.reset();
      p.features = featurizer(q);
      p.source = source_of(q, lex);
      pool.items.push_back(std::move(p));
    }
  }
  std::optional<std::size_t> pool_positives;
  if (!a.interactive) {
    std::size_t n = 0;
    for (const PoolItem& p : pool.items) {
      const auto it = truth.find(p.item.id);
      if (it == truth.end()) {
        fail(ErrorCode::kInvalidArgument, "pool item \"" + p.item.id +
                                              "\" has no label; use --interactive to label by hand");
      }
      n += static_cast<std::size_t>(to_int(it->second));
    }
    pool_positives = n;
  }

  AlLoopConfig cfg;
  cfg.rounds = a.rounds;
  cfg.batch_per_round = a.batch;
  cfg.strategy = parse_query_strategy(a.strategy);
  cfg.seed = seed;
  cfg.committee.forest.n_trees = a.committee_trees;
  cfg.committee.gbt.n_stages = a.committee_stages;
  const Oracle oracle = a.interactive
                            ? Oracle(ask_terminal)
                            : Oracle([&truth](const QAItem& q) -> std::optional<Label> {
                                return truth.at(q.id);
                              });
  const AlLoopResult r = run_al_loop(labeled, pool, oracle, cfg);

  const RunDir run(a.run.out, a.run.overwrite);
  std::ostringstream log;
  write_round_log(log, r.rounds);
  run.write("rounds.jsonl", log.str());
  const auto ratio = r.queried_positive_ratio();
  json summary{{"strategy", std::string(query_strategy_name(cfg.strategy))},
               {"seed_size", labeled.size()},
               {"seed_positives", labeled.positives()},
               {"pool_size", pool.size()},
               {"pool_shortfall", pool.shortfall},
               {"rounds_played", r.rounds.size()},
               {"final_labeled_size", r.labeled.size()},
               {"final_labeled_positives", r.labeled.positives()},
               {"abstained", r.abstained},
               {"exhausted", r.exhausted}};
  summary["queried_positive_ratio"] = ratio ? json(*ratio) : json(nullptr);
  summary["pool_positive_ratio"] =
      pool_positives && pool.size() > 0
          ? json(static_cast<double>(*pool_positives) / static_cast<double>(pool.size()))
          : json(nullptr);
  run.write("summary.json", summary.dump(2) + "\n");
  run.finish(app);
  std::cout << "strategy " << summary["strategy"].get<std::string>() << ": queried positive ratio "
            << (ratio ? std::to_string(*ratio) : std::string("undefined"));
  if (pool_positives) std::cout << " (pool " << summary["pool_positive_ratio"].dump() << ")";
  std::cout << "\n";
}

// --- serve -------------------------------------------------------------------------------------

struct ServeArgs {
  std::string artifact;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string surveys;
  std::string feedback_log;
  long long timeout_ms = 10000;
  std::size_t explain_samples = 500;
  std::string al_seed;
  std::string al_pool;
  std::size_t al_batch = 10;
  std::string al_log;
};

void cmd_serve(const ServeArgs& a, std::uint64_t seed) {
  std::shared_ptr<const SurveyStore> store;
  if (!a.surveys.empty()) store = std::make_shared<JsonlSurveyStore>(a.surveys);
  auto feedback = std::make_shared<FeedbackLog>(a.feedback_log);
  ServiceConfig cfg;
  cfg.request_timeout = std::chrono::milliseconds(a.timeout_ms);
  cfg.explain_samples = a.explain_samples;
  cfg.explain_seed = seed;
  Service service(cfg, store, feedback);
  service.load(a.artifact);

  if (!a.al_seed.empty() || !a.al_pool.empty()) {
    if (a.al_seed.empty() || a.al_pool.empty()) {
      fail(ErrorCode::kInvalidArgument, "--al-seed and --al-pool go together");
    }
    const auto pipeline = service.models().get();
    Dataset labeled;
    for (const QAItem& q : read_labeled(a.al_seed)) {
      labeled.add(pipeline->features(q).values, to_int(*q.label), q.id);
    }
    Pool pool;
    const ConjunctionLexicon& lex = ConjunctionLexicon::standard();
    for (const QAItem& q : read_corpus_file(a.al_pool)) {
      PoolItem p;
      p.item = q;
      p.item.label.reset();
      p.features = pipeline->features(q).values;
      p.source = source_of(q, lex);
      pool.items.push_back(std::move(p));
    }
    AlSessionConfig al;
    al.batch_size = a.al_batch;
    al.seed = seed;
    al.log_path = a.al_log;
    service.set_al_session(
        std::make_shared<AlSession>(std::move(labeled), std::move(pool), al, pipeline));
  }

  httplib::Server server;
  install_routes(server, service);
  const int port = a.port == 0 ? server.bind_to_any_port(a.host) : a.port;
  if (a.port != 0 && !server.bind_to_port(a.host, a.port)) {
    fail(ErrorCode::kInternal, "cannot bind " + a.host + ":" + std::to_string(a.port));
  }
  if (port < 0) fail(ErrorCode::kInternal, "cannot bind " + a.host);
  std::cout << "model " << service.models().get()->version << " listening on " << a.host << ":"
            << port << std::endl;
  if (!server.listen_after_bind()) fail(ErrorCode::kInternal, "server stopped unexpectedly");
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse:
    case ErrorCode::kNotFound: return kExitInput;
    default: return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double-barreled question detection toolkit"};
  app.set_config("--config", "", "Read options from a TOML or INI file");
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Seed for every random choice in the run")->capture_default_str();

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate-corpus", "Write a labeled synthetic corpus");
  add_run_options(gen_cmd, gen.run);
  gen_cmd->add_option("--n", gen.config.n_items, "Number of items")->capture_default_str();
  gen_cmd->add_option("--dbq-ratio", gen.config.dbq_ratio, "Fraction of DBQ items")
      ->capture_default_str();
  gen_cmd->add_option("--conjunction-neutral-ratio", gen.config.conjunction_neutral_ratio,
                      "Neutral items that still contain a conjunction")
      ->capture_default_str();
  gen_cmd->add_option("--multi-sentence-ratio", gen.config.multi_sentence_dbq_ratio,
                      "DBQ items spread over two sentences")
      ->capture_default_str();
  gen_cmd->add_option("--no-conjunction-ratio", gen.config.no_conjunction_dbq_ratio,
                      "DBQ items with no conjunction")
      ->capture_default_str();
  gen_cmd->add_option("--test-fraction", gen.test_fraction,
                      "Hold out this fraction as test.jsonl")
      ->capture_default_str();

  EmbeddingArgs emb;
  auto* emb_cmd = app.add_subcommand("train-embeddings", "Train word vectors on a corpus");
  add_run_options(emb_cmd, emb.run);
  emb_cmd->add_option("--corpus", emb.corpus, "Corpus JSONL")->required();
  add_sgns_options(emb_cmd, emb.sgns);

  FeaturizeArgs feat;
  auto* feat_cmd = app.add_subcommand("featurize", "Write feature vectors for a corpus");
  add_run_options(feat_cmd, feat.run);
  feat_cmd->add_option("--corpus", feat.corpus, "Corpus JSONL")->required();
  feat_cmd->add_option("--embedding", feat.embedding, "Embedding directory")->required();
  add_feature_options(feat_cmd, feat.features);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier and write an artifact");
  add_run_options(train_cmd, train.run);
  train_cmd->add_option("--corpus", train.corpus, "Labeled training corpus")->required();
  train_cmd->add_option("--embedding", train.embedding,
                        "Pretrained embedding directory (trained on the corpus if absent)");
  train_cmd->add_option("--test", train.tests, "Labeled test corpus, repeatable");
  add_sgns_options(train_cmd, train.sgns);
  add_feature_options(train_cmd, train.features);
  add_model_options(train_cmd, train.model);
  train_cmd->add_option("--threshold", train.threshold, "Decision threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--background-rows", train.background_rows,
                        "Training rows kept for explanations")
      ->capture_default_str();

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score labeled test sets");
  add_run_options(eval_cmd, eval.run);
  eval_cmd->add_option("--artifact", eval.artifact, "Artifact directory")->required();
  eval_cmd->add_option("--test", eval.tests, "Labeled test corpus, repeatable")->required();
  eval_cmd->add_option("--threshold", eval.threshold, "Override the artifact threshold")
      ->check(CLI::Range(0.0, 1.0));

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Classify every item of a corpus");
  add_run_options(pred_cmd, pred.run);
  pred_cmd->add_option("--artifact", pred.artifact, "Artifact directory")->required();
  pred_cmd->add_option("--corpus", pred.corpus, "Corpus JSONL")->required();

  ExplainArgs expl;
  auto* expl_cmd = app.add_subcommand("explain", "Token-level attributions as JSON and HTML");
  add_run_options(expl_cmd, expl.run);
  expl_cmd->add_option("--artifact", expl.artifact, "Artifact directory")->required();
  auto* q_opt = expl_cmd->add_option("--question", expl.question, "Question text");
  expl_cmd->add_option("--option", expl.options, "Answer option, repeatable")->needs(q_opt);
  expl_cmd->add_option("--id", expl.id, "Id for --question")->capture_default_str();
  auto* c_opt = expl_cmd->add_option("--corpus", expl.corpus, "Corpus JSONL to explain");
  expl_cmd->add_option("--item", expl.item, "Only this item of --corpus")->needs(c_opt);
  q_opt->excludes(c_opt);
  expl_cmd->add_option("--samples", expl.samples, "Shapley permutation samples")
      ->capture_default_str();
  expl_cmd->add_option("--mode", expl.mode, "Token aggregation: sum, mean or max")
      ->capture_default_str()
      ->check(CLI::IsMember({"sum", "mean", "max"}));
  expl_cmd->add_flag("--quiet", expl.quiet, "Do not print the terminal rendering");

  BaselineArgs base;
  auto* base_cmd = app.add_subcommand("baseline-eval", "Score the rule-based baselines");
  add_run_options(base_cmd, base.run);
  base_cmd->add_option("--corpus", base.corpus, "Labeled corpus")->required();

  AlArgs al;
  auto* al_cmd = app.add_subcommand("al-run", "Run query rounds against an oracle");
  add_run_options(al_cmd, al.run);
  al_cmd->add_option("--corpus", al.corpus, "Corpus the pool is drawn from")->required();
  al_cmd->add_option("--seed-set", al.seed_set, "Labeled seed set (else drawn from --corpus)");
  al_cmd->add_option("--seed-positives", al.seed_positives, "DBQ items in a drawn seed set")
      ->capture_default_str();
  al_cmd->add_option("--seed-negatives", al.seed_negatives, "Neutral items in a drawn seed set")
      ->capture_default_str();
  al_cmd->add_option("--pool-per-source", al.pool_per_source,
                     "Items per conjunction stratum, 0 = all remaining")
      ->capture_default_str();
  al_cmd->add_option("--rounds", al.rounds, "Query rounds")->capture_default_str();
  al_cmd->add_option("--batch", al.batch, "Items per round")->capture_default_str();
  al_cmd->add_option("--strategy", al.strategy, "qbc or random")
      ->capture_default_str()
      ->check(CLI::IsMember({"qbc", "random"}));
  al_cmd->add_option("--features", al.features, "handcrafted or embedding")
      ->capture_default_str()
      ->check(CLI::IsMember({"handcrafted", "embedding"}));
  al_cmd->add_option("--embedding", al.embedding, "Embedding directory for --features embedding");
  al_cmd->add_option("--pooling", al.pooling, "Question pooling for embedding features")
      ->capture_default_str()
      ->check(CLI::IsMember({"mean", "sum", "max", "min"}));
  al_cmd->add_option("--committee-trees", al.committee_trees, "Committee forest size")
      ->capture_default_str();
  al_cmd->add_option("--committee-stages", al.committee_stages, "Committee boosting stages")
      ->capture_default_str();
  al_cmd->add_flag("--interactive", al.interactive, "Label queried items at the terminal");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP prediction service");
  serve_cmd->add_option("--artifact", serve.artifact, "Artifact directory")->required();
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "Port, 0 = any free port")->capture_default_str();
  serve_cmd->add_option("--surveys", serve.surveys, "Survey store JSONL");
  serve_cmd->add_option("--feedback-log", serve.feedback_log, "Append-only feedback JSONL");
  serve_cmd->add_option("--timeout-ms", serve.timeout_ms, "Per-request deadline")
      ->capture_default_str();
  serve_cmd->add_option("--explain-samples", serve.explain_samples,
                        "Shapley samples for explain=true")
      ->capture_default_str();
  serve_cmd->add_option("--al-seed", serve.al_seed, "Labeled seed set for the AL session");
  serve_cmd->add_option("--al-pool", serve.al_pool, "Unlabeled pool for the AL session");
  serve_cmd->add_option("--al-batch", serve.al_batch, "AL batch size")->capture_default_str();
  serve_cmd->add_option("--al-log", serve.al_log, "AL round log JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*gen_cmd) cmd_generate(app, gen, seed);
    if (*emb_cmd) cmd_train_embeddings(app, emb, seed);
    if (*feat_cmd) cmd_featurize(app, feat);
    if (*train_cmd) cmd_train(app, train, seed);
    if (*eval_cmd) cmd_evaluate(app, eval);
    if (*pred_cmd) cmd_predict(app, pred);
    if (*expl_cmd) cmd_explain(app, expl, seed);
    if (*base_cmd) cmd_baseline_eval(app, base);
    if (*al_cmd) cmd_al_run(app, al, seed);
    if (*serve_cmd) cmd_serve(serve, seed);
  } catch (const Error& e) {
    std::cerr << "dbq: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "dbq: internal: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
