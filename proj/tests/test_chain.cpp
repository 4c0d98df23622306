#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hybridloss/chain.hpp"
#include "hybridloss/rng.hpp"
#include "oracle_utils.hpp"

using namespace hybrid;

namespace {

ChainInstance onehot_instance(std::size_t emission_dim,
                              const std::vector<std::size_t>& tokens,
                              const std::vector<std::size_t>& tags) {
  ChainInstance instance;
  for (std::size_t token : tokens)
    instance.observations.emplace_back(
        emission_dim, std::vector<FeatureVector::Entry>{{token, 1.0}});
  instance.gold_tags = tags;
  return instance;
}

}  // namespace

TEST_CASE("sequence score of the zero model is zero") {
  const ChainModel model = ChainModel::zeros({3, 4});
  const ChainInstance instance = onehot_instance(4, {0, 1, 2}, {0, 1, 2});
  CHECK(sequence_score(model, instance, {2, 1, 0}) == 0.0);
  CHECK(sequence_score(model, instance, {0, 0, 0}) == 0.0);
}

TEST_CASE("length-one sequence score is start + emission + end") {
  Rng rng(31);
  ChainModel model = oracle::random_chain_model(rng, 3, 4);
  const ChainInstance instance = onehot_instance(4, {2}, {1});
  const double expected = model.start(1) + model.emission(2, 1) + model.end(1);
  CHECK(sequence_score(model, instance, {1}) == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("sequence score matches term-by-term accumulation") {
  Rng rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const ChainModel model = oracle::random_chain_model(rng, 3, 5);
    const ChainInstance instance = oracle::random_chain_instance(rng, 4, 3, 5);
    std::vector<std::size_t> tags(4);
    for (std::size_t& tag : tags) tag = rng.index(3);
    CHECK(sequence_score(model, instance, tags) ==
          Catch::Approx(oracle::naive_sequence_score(model, instance, tags)).margin(1e-10));
  }
}

TEST_CASE("sequence score rejects mismatched lengths") {
  const ChainModel model = ChainModel::zeros({2, 3});
  const ChainInstance instance = onehot_instance(3, {0, 1}, {0, 1});
  CHECK_THROWS_AS(sequence_score(model, instance, {0}), std::invalid_argument);
}

TEST_CASE("forward-backward on the zero model is uniform") {
  const ChainModel model = ChainModel::zeros({2, 3});
  const ChainInstance instance = onehot_instance(3, {0, 1, 2}, {0, 0, 0});
  const ChainPosterior posterior = forward_backward(model, instance);
  CHECK(posterior.log_partition == Catch::Approx(3.0 * std::log(2.0)).margin(1e-12));
  for (const auto& row : posterior.node_marginals)
    for (double p : row) CHECK(p == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("forward-backward matches enumeration") {
  Rng rng(33);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t t = 2 + rng.index(3);   // up to 4 tags
    const std::size_t L = 1 + rng.index(6);   // up to length 6
    const std::size_t dim = 3 + rng.index(3);
    const ChainModel model = oracle::random_chain_model(rng, t, dim);
    const ChainInstance instance = oracle::random_chain_instance(rng, L, t, dim);
    const ChainPosterior posterior = forward_backward(model, instance);
    const oracle::Enumeration truth = oracle::enumerate_chain(model, instance);
    CHECK(posterior.log_partition == Catch::Approx(truth.log_partition).margin(1e-8));
    for (std::size_t j = 0; j < L; ++j)
      for (std::size_t y = 0; y < t; ++y)
        CHECK(posterior.node_marginals[j][y] ==
              Catch::Approx(truth.node_marginals[j][y]).margin(1e-8));
    for (std::size_t j = 0; j + 1 < L; ++j)
      for (std::size_t e = 0; e < t * t; ++e)
        CHECK(posterior.edge_marginals[j][e] ==
              Catch::Approx(truth.edge_marginals[j][e]).margin(1e-8));
  }
}

TEST_CASE("posterior slices are normalized and consistent") {
  Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t t = 2 + rng.index(3);
    const std::size_t L = 2 + rng.index(4);
    const ChainModel model = oracle::random_chain_model(rng, t, 4);
    const ChainInstance instance = oracle::random_chain_instance(rng, L, t, 4);
    const ChainPosterior posterior = forward_backward(model, instance);
    for (std::size_t j = 0; j < L; ++j) {
      double row_sum = 0.0;
      for (double p : posterior.node_marginals[j]) row_sum += p;
      CHECK(std::fabs(row_sum - 1.0) <= 1e-9);
    }
    for (std::size_t j = 0; j + 1 < L; ++j) {
      double slice_sum = 0.0;
      for (double p : posterior.edge_marginals[j]) slice_sum += p;
      CHECK(std::fabs(slice_sum - 1.0) <= 1e-9);
      // edge marginals marginalize to the adjacent node marginals
      for (std::size_t a = 0; a < t; ++a) {
        double from_sum = 0.0;
        for (std::size_t b = 0; b < t; ++b) from_sum += posterior.edge_marginals[j][a * t + b];
        CHECK(std::fabs(from_sum - posterior.node_marginals[j][a]) <= 1e-9);
      }
      for (std::size_t b = 0; b < t; ++b) {
        double to_sum = 0.0;
        for (std::size_t a = 0; a < t; ++a) to_sum += posterior.edge_marginals[j][a * t + b];
        CHECK(std::fabs(to_sum - posterior.node_marginals[j + 1][b]) <= 1e-9);
      }
    }
  }
}

TEST_CASE("sequence log probability basics") {
  const ChainModel model = ChainModel::zeros({2, 2});
  const ChainInstance instance = onehot_instance(2, {0, 1}, {0, 0});
  CHECK(sequence_log_probability(model, instance, {1, 0}) ==
        Catch::Approx(-2.0 * std::log(2.0)).margin(1e-12));
}

TEST_CASE("sequence probabilities sum to one over all sequences") {
  Rng rng(35);
  const std::size_t t = 3, L = 4;
  const ChainModel model = oracle::random_chain_model(rng, t, 4);
  const ChainInstance instance = oracle::random_chain_instance(rng, L, t, 4);
  std::vector<std::size_t> tags(L, 0);
  double total = 0.0;
  while (true) {
    total += std::exp(sequence_log_probability(model, instance, tags));
    std::size_t j = 0;
    while (j < L && ++tags[j] == t) {
      tags[j] = 0;
      ++j;
    }
    if (j == L) break;
  }
  CHECK(total == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("a strongly peaked model concentrates on the gold path") {
  const std::size_t t = 3, dim = 4;
  ChainModel model = ChainModel::zeros({t, dim});
  const ChainInstance instance = onehot_instance(dim, {0, 1, 2, 3}, {0, 1, 2, 0});
  for (std::size_t j = 0; j < 4; ++j)
    model.emission(j, instance.gold_tags[j]) = 12.0;
  CHECK(std::exp(sequence_log_probability(model, instance, instance.gold_tags)) > 0.99);
}

TEST_CASE("viterbi of the zero model is all zeros by tie-break") {
  const ChainModel model = ChainModel::zeros({3, 2});
  const ChainInstance instance = onehot_instance(2, {0, 1, 0}, {0, 0, 0});
  const DecodeResult result = viterbi(model, instance);
  CHECK(result.tags == std::vector<std::size_t>{0, 0, 0});
  CHECK(result.score == 0.0);
}

TEST_CASE("emission-dominant viterbi is the per-position argmax") {
  Rng rng(36);
  const std::size_t t = 3, dim = 5, L = 6;
  ChainModel model = ChainModel::zeros({t, dim});
  for (std::size_t f = 0; f < dim; ++f)
    for (std::size_t y = 0; y < t; ++y) model.emission(f, y) = rng.uniform(-2.0, 2.0);
  const ChainInstance instance = oracle::random_chain_instance(rng, L, t, dim);
  const DecodeResult result = viterbi(model, instance);
  for (std::size_t j = 0; j < L; ++j) {
    ScoreVector position_scores(t, 0.0);
    for (std::size_t y = 0; y < t; ++y)
      for (const auto& [f, v] : instance.observations[j].entries())
        position_scores[y] += v * model.emission(f, y);
    CHECK(result.tags[j] == predict(position_scores));
  }
}

TEST_CASE("viterbi matches enumeration and never beats log Z") {
  Rng rng(37);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t t = 2 + rng.index(3);
    const std::size_t L = 1 + rng.index(6);
    const ChainModel model = oracle::random_chain_model(rng, t, 4);
    const ChainInstance instance = oracle::random_chain_instance(rng, L, t, 4);
    const DecodeResult result = viterbi(model, instance);
    const oracle::Enumeration truth = oracle::enumerate_chain(model, instance);
    CHECK(result.score == Catch::Approx(truth.best_score).margin(1e-10));
    CHECK(result.score ==
          Catch::Approx(oracle::naive_sequence_score(model, instance, result.tags))
              .margin(1e-10));
    CHECK(forward_backward(model, instance).log_partition >= result.score - 1e-10);
  }
}

TEST_CASE("best competitor equals viterbi when viterbi differs from gold") {
  Rng rng(38);
  int checked = 0;
  while (checked < 10) {
    const ChainModel model = oracle::random_chain_model(rng, 3, 4);
    const ChainInstance instance = oracle::random_chain_instance(rng, 4, 3, 4);
    const DecodeResult best = viterbi(model, instance);
    if (best.tags == instance.gold_tags) continue;
    const DecodeResult rival = best_competitor(model, instance, instance.gold_tags);
    CHECK(rival.tags == best.tags);
    CHECK(rival.score == best.score);
    ++checked;
  }
}

TEST_CASE("best competitor matches enumeration when viterbi equals gold") {
  Rng rng(39);
  int checked = 0;
  while (checked < 15) {
    const std::size_t t = 2 + rng.index(3);
    const std::size_t L = 1 + rng.index(6);
    const ChainModel model = oracle::random_chain_model(rng, t, 4);
    ChainInstance instance = oracle::random_chain_instance(rng, L, t, 4);
    instance.gold_tags = viterbi(model, instance).tags;  // force the equal case
    const DecodeResult rival = best_competitor(model, instance, instance.gold_tags);
    const oracle::Enumeration truth =
        oracle::enumerate_chain(model, instance, &instance.gold_tags);
    REQUIRE(truth.has_excluded);
    CHECK(rival.tags != instance.gold_tags);
    CHECK(rival.score == Catch::Approx(truth.best_excluding_score).margin(1e-8));
    ++checked;
  }
}

TEST_CASE("best competitor on a single position flips the argmax tag") {
  ChainModel model = ChainModel::zeros({2, 2});
  model.emission(0, 0) = 1.0;  // token 0 prefers tag 0
  const ChainInstance instance = onehot_instance(2, {0}, {0});
  const DecodeResult rival = best_competitor(model, instance, {0});
  CHECK(rival.tags == std::vector<std::size_t>{1});
}

TEST_CASE("best competitor requires a second sequence") {
  const ChainModel model = ChainModel::zeros({1, 2});
  const ChainInstance instance = onehot_instance(2, {0}, {0});
  CHECK_THROWS_AS(best_competitor(model, instance, {0}), std::invalid_argument);
}

TEST_CASE("competitor score never beats viterbi, equality iff different from gold") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const ChainModel model = oracle::random_chain_model(rng, 3, 4);
    const ChainInstance instance = oracle::random_chain_instance(rng, 5, 3, 4);
    const DecodeResult best = viterbi(model, instance);
    const DecodeResult rival = best_competitor(model, instance, instance.gold_tags);
    CHECK(rival.score <= best.score + 1e-12);
    if (best.tags != instance.gold_tags) CHECK(rival.score == best.score);
  }
}

TEST_CASE("chain log loss is tiny on a saturated model") {
  const std::size_t t = 2, dim = 3;
  ChainModel model = ChainModel::zeros({t, dim});
  const ChainInstance instance = onehot_instance(dim, {0, 1, 2}, {0, 1, 0});
  for (std::size_t j = 0; j < 3; ++j)
    model.emission(j, instance.gold_tags[j]) = 20.0;
  const auto [value, gradient] =
      chain_loss_and_gradient(LossSpec::log(), model, instance);
  CHECK(value < 1e-6);
  for (double g : gradient) CHECK(std::fabs(g) < 1e-6);
}

TEST_CASE("chain hinge is zero at comfortable margins") {
  const std::size_t t = 2, dim = 3;
  ChainModel model = ChainModel::zeros({t, dim});
  const ChainInstance instance = onehot_instance(dim, {0, 1, 2}, {0, 1, 0});
  for (std::size_t j = 0; j < 3; ++j)
    model.emission(j, instance.gold_tags[j]) = 5.0;
  const auto [value, gradient] =
      chain_loss_and_gradient(LossSpec::hinge(), model, instance);
  CHECK(value == 0.0);
  for (double g : gradient) CHECK(g == 0.0);
}

TEST_CASE("chain gradients match finite differences") {
  Rng rng(42);
  for (const LossSpec& spec :
       {LossSpec::log(), LossSpec::hinge(), LossSpec::hybrid(0.5)}) {
    int checked = 0;
    while (checked < 6) {
      const std::size_t t = 2 + rng.index(2);
      const std::size_t L = 2 + rng.index(3);
      ChainModel model = oracle::random_chain_model(rng, t, 3);
      const ChainInstance instance = oracle::random_chain_instance(rng, L, t, 3);
      if (spec.effective_alpha() < 1.0) {
        // stay away from hinge kinks and competitor ties
        const double gold = sequence_score(model, instance, instance.gold_tags);
        const oracle::Enumeration truth =
            oracle::enumerate_chain(model, instance, &instance.gold_tags);
        if (!truth.has_excluded) continue;
        if (std::fabs(1.0 - (gold - truth.best_excluding_score)) < 1e-2) continue;
        // competitor must be unique: gap between best-excluded and the rest
        std::vector<std::size_t> tags(L, 0);
        double second_excluding = -1e300;
        bool more = true;
        while (more) {
          if (tags != instance.gold_tags) {
            const double s = oracle::naive_sequence_score(model, instance, tags);
            if (s < truth.best_excluding_score - 1e-12)
              second_excluding = std::max(second_excluding, s);
          }
          std::size_t j = 0;
          while (j < L && ++tags[j] == t) {
            tags[j] = 0;
            ++j;
          }
          more = j < L;
        }
        if (truth.best_excluding_score - second_excluding < 1e-2) continue;
      }
      const auto [value, gradient] = chain_loss_and_gradient(spec, model, instance);
      const auto fd = oracle::finite_difference(
          [&](const std::vector<double>& w) {
            ChainModel probe{model.layout, w};
            return chain_loss_and_gradient(spec, probe, instance).first;
          },
          model.weights);
      CHECK(oracle::max_relative_error(gradient, fd) < 1e-5);
      ++checked;
    }
  }
}

TEST_CASE("gradient of log Z equals expected feature counts") {
  Rng rng(43);
  const std::size_t t = 3, L = 4, dim = 3;
  const ChainModel model = oracle::random_chain_model(rng, t, dim);
  const ChainInstance instance = oracle::random_chain_instance(rng, L, t, dim);
  const auto fd = oracle::finite_difference(
      [&](const std::vector<double>& w) {
        ChainModel probe{model.layout, w};
        return forward_backward(probe, instance).log_partition;
      },
      model.weights, 1e-6);
  const ChainPosterior posterior = forward_backward(model, instance);
  // assemble expected counts in the weight layout
  std::vector<double> expected(model.layout.parameter_count(), 0.0);
  for (std::size_t j = 0; j < L; ++j) {
    for (const auto& [f, v] : instance.observations[j].entries())
      for (std::size_t y = 0; y < t; ++y)
        expected[model.layout.emission_index(f, y)] += posterior.node_marginals[j][y] * v;
    if (j + 1 < L)
      for (std::size_t a = 0; a < t; ++a)
        for (std::size_t b = 0; b < t; ++b)
          expected[model.layout.transition_index(a, b)] +=
              posterior.edge_marginals[j][a * t + b];
  }
  for (std::size_t y = 0; y < t; ++y) {
    expected[model.layout.start_index(y)] += posterior.node_marginals[0][y];
    expected[model.layout.end_index(y)] += posterior.node_marginals[L - 1][y];
  }
  CHECK(oracle::max_relative_error(expected, fd) < 1e-6);
}
