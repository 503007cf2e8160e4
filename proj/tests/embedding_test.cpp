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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dbq/embedding.hpp"
#include "dbq/featurize.hpp"
#include "dbq/random.hpp"
#include "dbq/sgns.hpp"

namespace dbq {
namespace {

using Strings = std::vector<std::string>;

EmbeddingModel two_by_two() {
  EmbeddingModel m(2);
  m.add_word("food", std::vector<double>{1.0, 2.0});
  m.add_word("service", std::vector<double>{3.0, 0.0});
  m.add_word("and", std::vector<double>{0.5, 4.0});
  m.add_word("yes", std::vector<double>{1.0, -1.0});
  m.add_word("no", std::vector<double>{-1.0, 0.0});
  return m;
}

TEST(SubwordNgrams, ThreeGramsOfAnd) {
  EXPECT_EQ(subword_ngrams("and", 3, 3), (Strings{"<an", "and", "nd>"}));
}

TEST(SubwordNgrams, SingleLetterWord) { EXPECT_EQ(subword_ngrams("a", 3, 3), (Strings{"<a>"})); }

TEST(SubwordNgrams, BigramsOfGo) {
  EXPECT_EQ(subword_ngrams("go", 2, 2), (Strings{"<g", "go", "o>"}));
}

TEST(SubwordNgrams, FullWordExcludedOnRequest) {
  EXPECT_EQ(subword_ngrams("a", 3, 3, true), Strings{});
  EXPECT_EQ(subword_ngrams("go", 3, 4, true), (Strings{"<go", "go>"}));
}

TEST(SubwordNgrams, CountsCodePoints) {
  // "é" is two bytes but one character.
  const Strings grams = subword_ngrams("\xC3\xA9t\xC3\xA9", 5, 5);
  EXPECT_EQ(grams, (Strings{"<\xC3\xA9t\xC3\xA9>"}));
}

TEST(SubwordNgrams, InvalidRange) {
  EXPECT_THROW(subword_ngrams("x", 0, 2), Error);
  EXPECT_THROW(subword_ngrams("x", 3, 2), Error);
}

TEST(Fnv1a, ReferenceValues) {
  // Published FNV-1a 32-bit test vectors.
  EXPECT_EQ(fnv1a32(""), 0x811c9dc5u);
  EXPECT_EQ(fnv1a32("a"), 0xe40c292cu);
  EXPECT_EQ(fnv1a32("foobar"), 0xbf9cf968u);
}

TEST(ComposeTokenVector, InVocabularyWithoutSubwords) {
  const EmbeddingModel m = two_by_two();
  const TokenVector v = compose_token_vector(m, "food");
  EXPECT_EQ(v.values, (std::vector<double>{1.0, 2.0}));
  EXPECT_FALSE(v.oov);
}

TEST(ComposeTokenVector, OovWithoutSubwordsIsZeroAndFlagged) {
  const TokenVector v = compose_token_vector(two_by_two(), "pizza");
  EXPECT_EQ(v.values, (std::vector<double>{0.0, 0.0}));
  EXPECT_TRUE(v.oov);
}

TEST(ComposeTokenVector, AveragesWordAndBucketRows) {
  EmbeddingModel m(2);
  m.add_word("ab", std::vector<double>{3.0, 0.0});
  m.enable_subwords({3, 3, 1000});
  const Strings grams = subword_ngrams("ab", 3, 3, true);
  ASSERT_EQ(grams, (Strings{"<ab", "ab>"}));
  const std::size_t b1 = m.bucket_of(grams[0]), b2 = m.bucket_of(grams[1]);
  ASSERT_NE(b1, b2);
  m.set_bucket(b1, std::vector<double>{0.0, 1.5});
  m.set_bucket(b2, std::vector<double>{1.5, 0.0});
  const TokenVector v = compose_token_vector(m, "ab");
  EXPECT_DOUBLE_EQ(v.values[0], (3.0 + 0.0 + 1.5) / 3.0);
  EXPECT_DOUBLE_EQ(v.values[1], (0.0 + 1.5 + 0.0) / 3.0);
  EXPECT_FALSE(v.oov);
}

TEST(ComposeTokenVector, OovWithSubwordsUsesBucketsOnly) {
  EmbeddingModel m(1);
  m.enable_subwords({3, 3, 1000});
  const Strings grams = subword_ngrams("zz", 3, 3);
  m.set_bucket(m.bucket_of(grams[0]), std::vector<double>{2.0});
  m.set_bucket(m.bucket_of(grams[1]), std::vector<double>{4.0});
  const TokenVector v = compose_token_vector(m, "zz");
  EXPECT_DOUBLE_EQ(v.values[0], 3.0);
  EXPECT_TRUE(v.oov);
}

TEST(ComposeTokenVector, DeterministicAndTotal) {
  EmbeddingModel m(4);
  m.enable_subwords({3, 6, 50});
  for (const char* w : {"", "x", "hello", "\xE2\x80\x94", "a b"}) {
    const TokenVector a = compose_token_vector(m, w);
    const TokenVector b = compose_token_vector(m, w);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.values.size(), 4u);
  }
}

TEST(WordVectors, LoadsHeaderAndRows) {
  std::istringstream in("2 3\nfood 1 2 3\nservice 0.5 -1 1e-3\n");
  const EmbeddingModel m = read_word_vectors(in, "v.txt");
  EXPECT_EQ(m.vocab_size(), 2u);
  EXPECT_EQ(m.dim(), 3u);
  EXPECT_FLOAT_EQ(m.word_row(1)[2], 1e-3f);
}

TEST(WordVectors, ShortRowIsAnErrorAtItsLine) {
  std::istringstream in("2 3\nfood 1 2 3\nservice 0.5 -1\n");
  try {
    read_word_vectors(in, "v.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("v.txt:3"), std::string::npos) << e.what();
  }
}

TEST(WordVectors, EmptyFileMissingHeader) {
  std::istringstream in("");
  try {
    read_word_vectors(in, "v.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing header"), std::string::npos);
  }
}

TEST(WordVectors, NonNumericComponent) {
  std::istringstream in("1 2\nfood 1 abc\n");
  EXPECT_THROW(read_word_vectors(in), Error);
  std::istringstream comma("1 2\nfood 1,5 2\n");
  EXPECT_THROW(read_word_vectors(comma), Error);
}

TEST(WordVectors, RoundTripIsExact) {
  EmbeddingModel m(3);
  Rng rng(1);
  for (int w = 0; w < 20; ++w) {
    m.add_word("w" + std::to_string(w),
               std::vector<double>{rng.normal(), rng.normal() * 1e-5, rng.normal() * 1e5});
  }
  std::stringstream ss;
  write_word_vectors(ss, m);
  const EmbeddingModel back = read_word_vectors(ss);
  ASSERT_EQ(back.vocab_size(), m.vocab_size());
  for (std::size_t i = 0; i < m.vocab_size(); ++i) {
    EXPECT_EQ(back.words()[i], m.words()[i]);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(back.word_row(i)[k], m.word_row(i)[k]);
  }
}

TEST(Buckets, DenseAndSparseRoundTrip) {
  EmbeddingModel m(2);
  m.add_word("x", std::vector<double>{1.0, 1.0});
  m.enable_subwords({2, 4, 10});
  m.set_bucket(3, std::vector<double>{0.25, -2.0});
  m.set_bucket(7, std::vector<double>{1e-7, 3.0});
  for (BucketLayout layout : {BucketLayout::kDense, BucketLayout::kSparse}) {
    std::stringstream ss;
    write_buckets(ss, m, layout);
    EmbeddingModel back(2);
    back.add_word("x", std::vector<double>{1.0, 1.0});
    read_buckets(ss, back, "b.txt");
    EXPECT_EQ(*back.subword_config(), *m.subword_config());
    for (std::size_t b = 0; b < 10; ++b) {
      for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(back.bucket_row(b)[k], m.bucket_row(b)[k]);
    }
  }
}

TEST(Buckets, DimensionMismatchRejected) {
  EmbeddingModel m(2);
  m.enable_subwords({3, 3, 2});
  std::stringstream ss;
  write_buckets(ss, m, BucketLayout::kDense);
  EmbeddingModel other(3);
  EXPECT_THROW(read_buckets(ss, other), Error);
}

// --- pooling --------------------------------------------------------------

TEST(Pool, WorkedExample) {
  const Matrix v = Matrix::from_rows({{1, 2}, {3, 0}});
  EXPECT_EQ(pool(v, Pooling::kMean), (std::vector<double>{2, 1}));
  EXPECT_EQ(pool(v, Pooling::kSum), (std::vector<double>{4, 2}));
  EXPECT_EQ(pool(v, Pooling::kMax), (std::vector<double>{3, 2}));
  EXPECT_EQ(pool(v, Pooling::kMin), (std::vector<double>{1, 0}));
}

TEST(Pool, EmptyInputIsAnError) {
  try {
    pool(Matrix(0, 3), Pooling::kMean);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("nothing to pool"), std::string::npos);
  }
}

TEST(Pool, NamesRoundTrip) {
  for (Pooling p : {Pooling::kMean, Pooling::kSum, Pooling::kMax, Pooling::kMin}) {
    EXPECT_EQ(parse_pooling(pooling_name(p)), p);
  }
  EXPECT_THROW(parse_pooling("median"), Error);
}

TEST(Pool, LawsOnRandomSets) {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t l = 1 + rng.index(8), k = 1 + rng.index(6);
    Matrix v(l, k);
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t j = 0; j < k; ++j) v(i, j) = rng.normal() * 10.0;
    }
    std::vector<std::size_t> perm(l);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    Matrix shuffled(0, k);
    for (std::size_t i : perm) shuffled.append_row(v.row(i));

    const auto mean = pool(v, Pooling::kMean), sum = pool(v, Pooling::kSum);
    const auto mx = pool(v, Pooling::kMax), mn = pool(v, Pooling::kMin);
    EXPECT_EQ(mx, pool(shuffled, Pooling::kMax));
    EXPECT_EQ(mn, pool(shuffled, Pooling::kMin));
    const auto smean = pool(shuffled, Pooling::kMean), ssum = pool(shuffled, Pooling::kSum);
    for (std::size_t j = 0; j < k; ++j) {
      EXPECT_NEAR(smean[j], mean[j], 1e-12 * (1.0 + std::abs(mean[j])));
      EXPECT_NEAR(ssum[j], sum[j], 1e-12 * (1.0 + std::abs(sum[j])));
      EXPECT_NEAR(sum[j], static_cast<double>(l) * mean[j], 1e-12 * (1.0 + std::abs(sum[j])));
      EXPECT_LE(mn[j], mean[j] + 1e-12);
      EXPECT_LE(mean[j], mx[j] + 1e-12);
    }
    if (l == 1) {
      for (Pooling p : {Pooling::kMean, Pooling::kSum, Pooling::kMax, Pooling::kMin}) {
        const auto r = pool(v, p);
        for (std::size_t j = 0; j < k; ++j) EXPECT_EQ(r[j], v(0, j));
      }
    }
  }
}

// --- question / answer composition -----------------------------------------

std::vector<Token> toks(std::string_view text) { return embedding_tokens(text); }

TEST(EmbedQuestion, SingleTokenIsItsVector) {
  const EmbeddingModel m = two_by_two();
  EXPECT_EQ(embed_question(m, toks("food")), (std::vector<double>{1.0, 2.0}));
}

TEST(EmbedQuestion, MaxIsElementWise) {
  const EmbeddingModel m = two_by_two();
  EXPECT_EQ(embed_question(m, toks("food and service?")), (std::vector<double>{3.0, 4.0}));
}

TEST(EmbedQuestion, MeanOfTwo) {
  const EmbeddingModel m = two_by_two();
  EXPECT_EQ(embed_question(m, toks("food service"), Pooling::kMean),
            (std::vector<double>{2.0, 1.0}));
}

TEST(EmbedAnswers, MeanOfOptionMeans) {
  const EmbeddingModel m = two_by_two();
  const AnswerEmbedding a = embed_answers(m, {toks("yes"), toks("no")});
  EXPECT_EQ(a.values, (std::vector<double>{0.0, -0.5}));
  EXPECT_FALSE(a.no_options);
  // A two-token option is averaged first, then averaged with the others.
  const AnswerEmbedding b = embed_answers(m, {toks("food service"), toks("yes")});
  EXPECT_EQ(b.values, (std::vector<double>{(2.0 + 1.0) / 2.0, (1.0 - 1.0) / 2.0}));
}

TEST(EmbedAnswers, NoOptionsIsZeroAndFlagged) {
  const AnswerEmbedding a = embed_answers(two_by_two(), {});
  EXPECT_EQ(a.values, (std::vector<double>{0.0, 0.0}));
  EXPECT_TRUE(a.no_options);
}

TEST(EmbedAnswers, EmptyOptionNamesItsIndex) {
  try {
    embed_answers(two_by_two(), {toks("yes"), {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("option 1"), std::string::npos) << e.what();
  }
}

TEST(Featurize, ConcatenatesHalves) {
  const EmbeddingModel m = two_by_two();
  const QAItem item{"q", "food and service?", {"yes", "no"}, std::nullopt};
  const FeatureVector fv = featurize(m, item);
  EXPECT_EQ(fv.values, (std::vector<double>{3.0, 4.0, 0.0, -0.5}));
  EXPECT_EQ(fv.question_pooling, Pooling::kMax);
  EXPECT_EQ(fv.answer_pooling, Pooling::kMean);
  EXPECT_EQ(fv.question_token_count, 3u);
  EXPECT_EQ(fv.option_count, 2u);
}

TEST(Featurize, HandcraftedExtension) {
  const EmbeddingModel m = two_by_two();
  const QAItem item{"q", "food and service?", {"yes", "no"}, std::nullopt};
  const FeatureVector fv = featurize(m, item, {Pooling::kMax, true});
  EXPECT_EQ(fv.size(), 2 * m.dim() + kHandcraftedFeatureCount);
  EXPECT_EQ(fv.size(), feature_dimension(m.dim(), true));
  EXPECT_EQ(fv.handcrafted_count, kHandcraftedFeatureCount);
}

TEST(Featurize, IdenticalItemsGiveIdenticalVectors) {
  const EmbeddingModel m = two_by_two();
  const QAItem a{"a", "Food and service?", {"yes"}, std::nullopt};
  const QAItem b{"b", "Food and service?", {"yes"}, Label::kDbq};
  EXPECT_EQ(featurize(m, a).values, featurize(m, b).values);
}

TEST(Featurize, NoOptionsGivesZeroAnswerHalf) {
  const FeatureVector fv = featurize(two_by_two(), {"q", "food", {}, std::nullopt});
  EXPECT_TRUE(fv.no_options);
  EXPECT_EQ(fv.values, (std::vector<double>{1.0, 2.0, 0.0, 0.0}));
}

TEST(Featurize, PunctuationOnlyQuestionStillEmbeds) {
  const FeatureVector fv = featurize(two_by_two(), {"q", "?!", {}, std::nullopt});
  EXPECT_EQ(fv.question_token_count, 2u);
  EXPECT_EQ(fv.oov_tokens, 2u);
}

TEST(Featurize, ConstantLengthForFixedSettings) {
  EmbeddingModel m(3);
  m.enable_subwords({3, 4, 97});
  for (const char* q : {"a", "How are you and me?", "x y z w v u t"}) {
    EXPECT_EQ(featurize(m, {"q", q, {"yes", "no way"}, std::nullopt}).size(), 6u);
    EXPECT_EQ(featurize(m, {"q", q, {}, std::nullopt}, {Pooling::kMin, true}).size(),
              6u + kHandcraftedFeatureCount);
  }
}

// --- skip-gram ------------------------------------------------------------

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * b[k];
  return s;
}

double dotd(std::span<const float> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * b[k];
  return s;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

TEST(Sgns, CooccurringPairScoresPositively) {
  std::vector<Strings> corpus(200, Strings{"salt", "pepper"});
  SgnsConfig cfg;
  cfg.dim = 8;
  cfg.window = 1;
  cfg.negatives = 2;
  cfg.epochs = 5;
  cfg.subwords.reset();
  const SgnsResult r = train_sgns(corpus, cfg);
  const std::size_t salt = *r.model.find("salt"), pepper = *r.model.find("pepper");
  // The skip-gram score of an observed (center, context) pair.
  EXPECT_GT(dotd(r.model.word_row(salt), r.context_vectors.row(pepper)), 0.0);
  EXPECT_GT(dotd(r.model.word_row(pepper), r.context_vectors.row(salt)), 0.0);
}

std::vector<Strings> two_cluster_corpus(std::uint64_t seed, std::size_t sentences) {
  const Strings food{"pizza", "pasta", "salad", "soup", "bread"};
  const Strings tech{"laptop", "phone", "screen", "battery", "keyboard"};
  Rng rng(seed);
  std::vector<Strings> corpus;
  for (std::size_t s = 0; s < sentences; ++s) {
    const Strings& c = rng.bernoulli(0.5) ? food : tech;
    Strings sent;
    for (int i = 0; i < 6; ++i) sent.push_back(c[rng.index(c.size())]);
    corpus.push_back(std::move(sent));
  }
  return corpus;
}

TEST(Sgns, ClustersSeparate) {
  SgnsConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 8;
  cfg.window = 3;
  cfg.subwords.reset();
  const SgnsResult r = train_sgns(two_cluster_corpus(1, 400), cfg);
  auto row = [&](const char* w) { return r.model.word_row(*r.model.find(w)); };
  EXPECT_GT(cosine(row("pizza"), row("pasta")), cosine(row("pizza"), row("laptop")));
  EXPECT_GT(cosine(row("phone"), row("screen")), cosine(row("phone"), row("soup")));
}

TEST(Sgns, LossDecreasesOnStationaryCorpus) {
  SgnsConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 8;
  cfg.learning_rate = 0.005;
  cfg.subwords = SubwordConfig{3, 4, 2000};
  const SgnsResult r = train_sgns(two_cluster_corpus(2, 300), cfg);
  ASSERT_EQ(r.epoch_loss.size(), 8u);
  // Smoothed over a window of 3 epochs.
  std::vector<double> smooth;
  for (std::size_t e = 0; e + 3 <= r.epoch_loss.size(); ++e) {
    smooth.push_back((r.epoch_loss[e] + r.epoch_loss[e + 1] + r.epoch_loss[e + 2]) / 3.0);
  }
  for (std::size_t e = 1; e < smooth.size(); ++e) EXPECT_LE(smooth[e], smooth[e - 1] + 1e-9);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(Sgns, FixedSeedIsReproducible) {
  SgnsConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 2;
  cfg.subwords = SubwordConfig{3, 5, 500};
  const auto corpus = two_cluster_corpus(3, 50);
  const SgnsResult a = train_sgns(corpus, cfg), b = train_sgns(corpus, cfg);
  std::stringstream sa, sb;
  write_word_vectors(sa, a.model);
  write_buckets(sa, a.model);
  write_word_vectors(sb, b.model);
  write_buckets(sb, b.model);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  cfg.seed = 2;
  const SgnsResult c = train_sgns(corpus, cfg);
  std::stringstream sc;
  write_word_vectors(sc, c.model);
  write_buckets(sc, c.model);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Sgns, EverythingBelowMinCount) {
  SgnsConfig cfg;
  cfg.min_count = 5;
  EXPECT_THROW(train_sgns({{"a", "b"}, {"c"}}, cfg), Error);
  EXPECT_THROW(train_sgns({}, cfg), Error);
}

TEST(Sgns, DivergingLearningRateIsReported) {
  SgnsConfig cfg;
  cfg.dim = 4;
  cfg.learning_rate = 1e300;
  cfg.subwords.reset();
  try {
    train_sgns(two_cluster_corpus(4, 30), cfg);
    SUCCEED();  // clamped sigmoid may keep the loss finite
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumeric);
  }
}

TEST(Sgns, SubwordsGiveOovWordsAVector) {
  SgnsConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 2;
  cfg.subwords = SubwordConfig{3, 4, 1000};
  const SgnsResult r = train_sgns(two_cluster_corpus(5, 50), cfg);
  const TokenVector v = compose_token_vector(r.model, "pizzas");
  EXPECT_TRUE(v.oov);
  EXPECT_TRUE(std::any_of(v.values.begin(), v.values.end(), [](double x) { return x != 0.0; }));
}

TEST(Sgns, TrainingSentencesFromItems) {
  const std::vector<QAItem> items{{"1", "Food, and service?", {"Yes", "No way"}, std::nullopt}};
  EXPECT_EQ(training_sentences(items),
            (std::vector<Strings>{{"food", "and", "service"}, {"yes"}, {"no", "way"}}));
}

}  // namespace
}  // namespace dbq
