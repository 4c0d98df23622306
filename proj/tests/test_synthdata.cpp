#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hybridloss/consistency.hpp"
#include "hybridloss/synthdata.hpp"
#include "oracle_utils.hpp"

using namespace hybrid;

TEST_CASE("non-dominant generator: three labels") {
  NonDominantSpec spec;
  spec.label_count = 3;
  spec.sample_count = 100;
  spec.seed = 5;
  const NonDominantData data = generate_nondominant(spec);
  CHECK(data.distribution == LabelDistribution{0.46, 0.27, 0.27});
  CHECK(data.data.size() == 100);
  for (const auto& row : data.data.features) CHECK(row == std::vector<double>{1.0, 1.0});
}

TEST_CASE("non-dominant generator: ten labels get 0.06 each") {
  NonDominantSpec spec;
  spec.label_count = 10;
  spec.sample_count = 10;
  const NonDominantData data = generate_nondominant(spec);
  CHECK(data.distribution[0] == 0.46);
  for (std::size_t y = 1; y < 10; ++y)
    CHECK(data.distribution[y] == Catch::Approx(0.06).margin(1e-12));
}

TEST_CASE("non-dominant generator: empirical frequencies converge") {
  NonDominantSpec spec;
  spec.label_count = 4;
  spec.sample_count = 100000;
  spec.seed = 99;
  const NonDominantData data = generate_nondominant(spec);
  std::vector<double> counts(4, 0.0);
  for (std::size_t label : data.data.labels) counts[label] += 1.0;
  for (std::size_t y = 0; y < 4; ++y)
    CHECK(counts[y] / 100000.0 ==
          Catch::Approx(data.distribution[y]).margin(0.01));
}

TEST_CASE("non-dominant generator validates its spec") {
  NonDominantSpec spec;
  spec.label_count = 2;
  CHECK_THROWS_AS(generate_nondominant(spec), std::invalid_argument);
  spec.label_count = 3;
  spec.top_prob = 0.6;
  CHECK_THROWS_AS(generate_nondominant(spec), std::invalid_argument);
}

TEST_CASE("mixed generator: rho = 1 gives only the constant observation") {
  MixedSpec spec;
  spec.rho = 1.0;
  spec.sample_count = 50;
  spec.eval_size = 20;
  spec.seed = 7;
  const MixedData data = generate_mixed(spec);
  for (const auto& row : data.train.features)
    for (double x : row) CHECK(x == spec.constant_feature_value);
}

TEST_CASE("mixed generator: rho -> 0 slice has the configured cluster means") {
  MixedSpec spec;
  spec.rho = 1e-12;  // effectively all dominant draws
  spec.sample_count = 1000;
  spec.eval_size = 1;
  spec.seed = 8;
  const MixedData data = generate_mixed(spec);
  std::vector<double> mean_sum(5, 0.0), count(5, 0.0);
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    const std::size_t label = data.train.labels[i];
    double row_mean = 0.0;
    for (double x : data.train.features[i]) row_mean += x;
    mean_sum[label] += row_mean / static_cast<double>(spec.feature_dim);
    count[label] += 1.0;
  }
  for (std::size_t y = 0; y < 5; ++y) {
    REQUIRE(count[y] > 0);
    // class y (0-based) was drawn with mean 1 + (y + 1)
    CHECK(mean_sum[y] / count[y] ==
          Catch::Approx(spec.dominant_mean_base + static_cast<double>(y + 1)).margin(0.05));
  }
}

TEST_CASE("mixed generator: non-dominant slice label frequencies") {
  MixedSpec spec;
  spec.rho = 1.0;
  spec.sample_count = 1000;
  spec.eval_size = 1;
  spec.seed = 9;
  const MixedData data = generate_mixed(spec);
  double class_one = 0.0;
  for (std::size_t label : data.train.labels)
    if (label == 0) class_one += 1.0;
  CHECK(class_one / 1000.0 == Catch::Approx(0.4).margin(0.03));
}

TEST_CASE("mixed generator splits are disjoint and deterministic") {
  MixedSpec spec;
  spec.rho = 0.5;
  spec.sample_count = 40;
  spec.eval_size = 30;
  spec.seed = 10;
  const MixedData a = generate_mixed(spec);
  const MixedData b = generate_mixed(spec);
  CHECK(a.train == b.train);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
  // dominant rows are continuous draws; identical rows across splits would be
  // an astronomically unlikely accident, so treat any repeat as overlap
  for (const auto& row : a.train.features)
    for (const auto& other : a.test.features) CHECK(row != other);
}

TEST_CASE("mixed generator rejects inconsistent probabilities") {
  MixedSpec spec;
  spec.nondominant_top_prob = 0.5;  // 0.5 + 4 * 0.15 != 1
  CHECK_THROWS_AS(generate_mixed(spec), std::invalid_argument);
}

TEST_CASE("chunk corpus: zero ambiguity decodes back to gold") {
  SynthChunkSpec spec;
  spec.sentence_count = 100;
  spec.ambiguity_rate = 0.0;
  spec.seed = 11;
  const ChunkCorpus corpus = generate_chunk_corpus(spec);
  std::size_t exact = 0;
  for (const ChainInstance& sentence : corpus.corpus.sentences)
    if (viterbi(corpus.true_model, sentence).tags == sentence.gold_tags) ++exact;
  CHECK(static_cast<double>(exact) / 100.0 >= 0.99);
}

TEST_CASE("chunk corpus: gold tags are BIO-valid") {
  SynthChunkSpec spec;
  spec.sentence_count = 50;
  spec.ambiguity_rate = 0.7;
  spec.chunk_types = 2;
  spec.seed = 12;
  const ChunkCorpus corpus = generate_chunk_corpus(spec);
  for (const ChainInstance& sentence : corpus.corpus.sentences) {
    for (std::size_t j = 0; j < sentence.length(); ++j) {
      const std::string& tag = corpus.corpus.tags[sentence.gold_tags[j]];
      if (tag[0] != 'I') continue;
      REQUIRE(j > 0);
      const std::string& previous = corpus.corpus.tags[sentence.gold_tags[j - 1]];
      CHECK((previous == "B" + tag.substr(1) || previous == tag));
    }
  }
}

TEST_CASE("chunk corpus: ambiguity drives non-dominance, checked by enumeration") {
  SynthChunkSpec spec;
  spec.sentence_count = 60;
  spec.min_length = 4;
  spec.max_length = 8;  // small enough to enumerate 3^8
  spec.ambiguity_rate = 0.5;
  spec.seed = 13;
  const ChunkCorpus corpus = generate_chunk_corpus(spec);
  const DominanceProfile profile =
      dominance_profile(corpus.true_model, corpus.corpus.sentences);

  // independent ground truth: enumerate every tag sequence per sentence
  std::size_t nondominant = 0;
  for (const ChainInstance& sentence : corpus.corpus.sentences) {
    const oracle::Enumeration truth = oracle::enumerate_chain(corpus.true_model, sentence);
    const double best_prob = std::exp(truth.best_score - truth.log_partition);
    if (best_prob <= 0.5) ++nondominant;
  }
  CHECK(profile.nondominant_count == nondominant);
  CHECK(profile.nondominant_fraction() > 0.2);
}

TEST_CASE("chunk corpus is a pure function of its spec") {
  SynthChunkSpec spec;
  spec.sentence_count = 30;
  spec.ambiguity_rate = 0.4;
  spec.seed = 14;
  const ChunkCorpus a = generate_chunk_corpus(spec);
  const ChunkCorpus b = generate_chunk_corpus(spec);
  CHECK(a.corpus == b.corpus);
  CHECK(a.true_model.weights == b.true_model.weights);
}
