#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridloss/chain.hpp"
#include "hybridloss/core.hpp"
#include "hybridloss/io.hpp"
#include "hybridloss/rng.hpp"

namespace hybrid {

// ---------------------------------------------------------------------------
// Non-dominant multiclass experiment: a single observation shared by every
// instance, one label at `top_prob` < 1/2 and the remainder split equally.
// ---------------------------------------------------------------------------

struct NonDominantSpec {
  std::size_t label_count = 3;  // in [3, 10]
  double top_prob = 0.46;
  std::size_t sample_count = 10000;
  std::uint64_t seed = 0;
};

struct NonDominantData {
  FlatDataset data;
  LabelDistribution distribution;  // the exact generating distribution
};

inline NonDominantData generate_nondominant(const NonDominantSpec& spec) {
  if (spec.label_count < 3 || spec.label_count > 10)
    throw std::invalid_argument("generate_nondominant: label count must lie in [3, 10]");
  if (!(spec.top_prob > 0.0 && spec.top_prob < 0.5))
    throw std::invalid_argument("generate_nondominant: top probability must lie in (0, 1/2)");
  if (spec.sample_count == 0)
    throw std::invalid_argument("generate_nondominant: sample count must be positive");

  NonDominantData result;
  result.distribution.assign(spec.label_count,
                             (1.0 - spec.top_prob) /
                                 static_cast<double>(spec.label_count - 1));
  result.distribution[0] = spec.top_prob;

  result.data.label_count = spec.label_count;
  result.data.base_dimension = 2;
  result.data.features.assign(spec.sample_count, {1.0, 1.0});  // the constant observation
  result.data.labels.reserve(spec.sample_count);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.sample_count; ++i)
    result.data.labels.push_back(rng.categorical(result.distribution));
  return result;
}

// ---------------------------------------------------------------------------
// Mixed dominant / non-dominant experiment: with probability rho an instance
// is the constant observation with a 0.4 / 0.15 label distribution, else a
// Gaussian cluster instance whose per-dimension mean encodes its class.
// ---------------------------------------------------------------------------

struct MixedSpec {
  double rho = 0.5;  // non-dominant fraction, in (0, 1]
  std::size_t sample_count = 100;
  std::size_t feature_dim = 100;
  std::size_t label_count = 5;
  double dominant_mean_base = 1.0;  // class y (1-based) has mean base + y
  double dominant_sigma = 0.6;
  double nondominant_top_prob = 0.4;
  double nondominant_other_prob = 0.15;
  double constant_feature_value = 0.1;  // the predefined non-zero vector
  std::size_t eval_size = 1000;         // validation and test sizes
  std::uint64_t seed = 0;
};

struct MixedData {
  FlatDataset train;
  FlatDataset validation;
  FlatDataset test;
};

namespace detail {

inline void check_mixed_spec(const MixedSpec& spec) {
  if (!(spec.rho > 0.0 && spec.rho <= 1.0))
    throw std::invalid_argument("generate_mixed: rho must lie in (0, 1]");
  if (spec.label_count < 2) throw std::invalid_argument("generate_mixed: need >= 2 labels");
  if (spec.sample_count == 0 || spec.eval_size == 0)
    throw std::invalid_argument("generate_mixed: sizes must be positive");
  const double total = spec.nondominant_top_prob +
                       static_cast<double>(spec.label_count - 1) * spec.nondominant_other_prob;
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("generate_mixed: non-dominant probabilities sum to " +
                                std::to_string(total));
}

inline FlatDataset sample_mixed_split(const MixedSpec& spec, std::size_t count, Rng& rng) {
  FlatDataset split;
  split.label_count = spec.label_count;
  split.base_dimension = spec.feature_dim;
  split.features.reserve(count);
  split.labels.reserve(count);
  LabelDistribution nondominant(spec.label_count, spec.nondominant_other_prob);
  nondominant[0] = spec.nondominant_top_prob;
  for (std::size_t i = 0; i < count; ++i) {
    if (rng.bernoulli(spec.rho)) {
      split.features.emplace_back(spec.feature_dim, spec.constant_feature_value);
      split.labels.push_back(rng.categorical(nondominant));
    } else {
      const std::size_t label = rng.index(spec.label_count);
      const double mean = spec.dominant_mean_base + static_cast<double>(label + 1);
      std::vector<double> row(spec.feature_dim);
      for (double& x : row) x = rng.normal(mean, spec.dominant_sigma);
      split.features.push_back(std::move(row));
      split.labels.push_back(label);
    }
  }
  return split;
}

}  // namespace detail

/// Train, validation and test splits drawn from one seeded stream in that
/// order, so the splits are disjoint draws by construction.
inline MixedData generate_mixed(const MixedSpec& spec) {
  detail::check_mixed_spec(spec);
  Rng rng(spec.seed);
  MixedData data;
  data.train = detail::sample_mixed_split(spec, spec.sample_count, rng);
  data.validation = detail::sample_mixed_split(spec, spec.eval_size, rng);
  data.test = detail::sample_mixed_split(spec, spec.eval_size, rng);
  return data;
}

// ---------------------------------------------------------------------------
// Synthetic BIO chunking corpus. Sentences are drawn from a hidden Markov
// chain over BIO tags; a configurable fraction of token draws comes from an
// ambiguous pool shared by all tags, which carries no tag information and
// drives non-dominant posteriors. The generating chain model (in log
// parameterization, so its conditional equals the sampling posterior) is
// returned for oracle evaluation.
// ---------------------------------------------------------------------------

struct SynthChunkSpec {
  std::size_t sentence_count = 200;
  std::size_t min_length = 5;
  std::size_t max_length = 15;
  std::size_t chunk_types = 1;  // BIO over this many types
  std::size_t vocabulary_size = 60;
  double ambiguity_rate = 0.0;  // fraction of tokens drawn from the shared pool
  std::uint64_t seed = 0;
};

struct ChunkCorpus {
  TaggedCorpus corpus;
  ChainModel true_model;
};

inline ChunkCorpus generate_chunk_corpus(const SynthChunkSpec& spec) {
  if (!(spec.ambiguity_rate >= 0.0 && spec.ambiguity_rate <= 1.0))
    throw std::invalid_argument("generate_chunk_corpus: ambiguity rate must lie in [0, 1]");
  if (spec.chunk_types < 1 || spec.chunk_types > 5)
    throw std::invalid_argument("generate_chunk_corpus: chunk types must lie in [1, 5]");
  if (spec.min_length < 1 || spec.max_length < spec.min_length)
    throw std::invalid_argument("generate_chunk_corpus: bad length range");
  const std::size_t t = 1 + 2 * spec.chunk_types;  // O plus B/I per type
  const std::size_t ambiguous = std::max<std::size_t>(2, spec.vocabulary_size / 5);
  if (spec.vocabulary_size < ambiguous + t)
    throw std::invalid_argument("generate_chunk_corpus: vocabulary too small");

  ChunkCorpus result;
  static const char* kTypeNames[] = {"NP", "VP", "PP", "ADJP", "ADVP"};
  result.corpus.tags.push_back("O");
  for (std::size_t c = 0; c < spec.chunk_types; ++c) {
    result.corpus.tags.push_back(std::string("B-") + kTypeNames[c]);
    result.corpus.tags.push_back(std::string("I-") + kTypeNames[c]);
  }
  result.corpus.tokens.reserve(spec.vocabulary_size);
  for (std::size_t v = 0; v < spec.vocabulary_size; ++v)
    result.corpus.tokens.push_back("tok" + std::to_string(v));

  const auto tag_b = [](std::size_t type) { return 1 + 2 * type; };
  const auto tag_i = [](std::size_t type) { return 2 + 2 * type; };

  // tag chain in probability space
  std::vector<double> start(t, 0.0);
  start[0] = 0.5;
  for (std::size_t c = 0; c < spec.chunk_types; ++c)
    start[tag_b(c)] = 0.5 / static_cast<double>(spec.chunk_types);
  std::vector<std::vector<double>> transition(t, std::vector<double>(t, 0.0));
  const double b_share = 1.0 / static_cast<double>(spec.chunk_types);
  transition[0][0] = 0.5;
  for (std::size_t c = 0; c < spec.chunk_types; ++c) transition[0][tag_b(c)] = 0.5 * b_share;
  for (std::size_t c = 0; c < spec.chunk_types; ++c) {
    transition[tag_b(c)][tag_i(c)] = 0.5;
    transition[tag_b(c)][0] = 0.3;
    for (std::size_t d = 0; d < spec.chunk_types; ++d)
      transition[tag_b(c)][tag_b(d)] = 0.2 * b_share;
    transition[tag_i(c)][tag_i(c)] = 0.4;
    transition[tag_i(c)][0] = 0.4;
    for (std::size_t d = 0; d < spec.chunk_types; ++d)
      transition[tag_i(c)][tag_b(d)] = 0.2 * b_share;
  }

  // vocabulary partition: [0, ambiguous) shared, then per-tag clear pools
  const std::size_t clear_total = spec.vocabulary_size - ambiguous;
  const std::size_t pool_base = clear_total / t;
  std::vector<std::size_t> pool_begin(t + 1, ambiguous);
  for (std::size_t y = 0; y < t; ++y)
    pool_begin[y + 1] = pool_begin[y] + pool_base + (y < clear_total % t ? 1 : 0);

  // emission distributions per tag
  std::vector<std::vector<double>> emission(t, std::vector<double>(spec.vocabulary_size, 0.0));
  for (std::size_t y = 0; y < t; ++y) {
    const std::size_t pool_size = pool_begin[y + 1] - pool_begin[y];
    for (std::size_t v = 0; v < ambiguous; ++v)
      emission[y][v] = spec.ambiguity_rate / static_cast<double>(ambiguous);
    for (std::size_t v = pool_begin[y]; v < pool_begin[y + 1]; ++v)
      emission[y][v] = (1.0 - spec.ambiguity_rate) / static_cast<double>(pool_size);
  }

  // the same chain in log parameterization; -50 stands in for ln 0 and keeps
  // every weight finite while contributing nothing numerically
  const auto safe_log = [](double p) { return p > 0.0 ? std::log(p) : -50.0; };
  ChainModel model = ChainModel::zeros(ChainLayout{t, spec.vocabulary_size});
  for (std::size_t y = 0; y < t; ++y) {
    model.start(y) = safe_log(start[y]);
    for (std::size_t n = 0; n < t; ++n) model.transition(y, n) = safe_log(transition[y][n]);
    for (std::size_t v = 0; v < spec.vocabulary_size; ++v)
      model.emission(v, y) = safe_log(emission[y][v]);
  }
  result.true_model = std::move(model);

  Rng rng(spec.seed);
  result.corpus.sentences.reserve(spec.sentence_count);
  std::vector<FeatureVector::Entry> entry(1);
  for (std::size_t s = 0; s < spec.sentence_count; ++s) {
    const std::size_t length =
        spec.min_length + rng.index(spec.max_length - spec.min_length + 1);
    ChainInstance sentence;
    sentence.observations.reserve(length);
    sentence.gold_tags.reserve(length);
    std::size_t tag = rng.categorical(start);
    for (std::size_t j = 0; j < length; ++j) {
      if (j > 0) tag = rng.categorical(transition[tag]);
      sentence.gold_tags.push_back(tag);
      entry[0] = {rng.categorical(emission[tag]), 1.0};
      sentence.observations.emplace_back(spec.vocabulary_size, entry);
    }
    result.corpus.sentences.push_back(std::move(sentence));
  }
  return result;
}

}  // namespace hybrid
