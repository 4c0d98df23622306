#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybridloss/core.hpp"
#include "hybridloss/losses.hpp"
#include "hybridloss/numeric.hpp"

namespace hybrid {

/// Index layout of a linear-chain model's flat weight vector:
/// [emission (E x t) | transition (t x t) | start (t) | end (t)].
/// phi(x, y) concatenates emission and transition indicator counts in the
/// same layout, so gradients line up with the weights.
struct ChainLayout {
  std::size_t tag_count = 0;
  std::size_t emission_dim = 0;

  std::size_t parameter_count() const {
    return emission_dim * tag_count + tag_count * tag_count + 2 * tag_count;
  }
  std::size_t emission_index(std::size_t feature, std::size_t tag) const {
    return feature * tag_count + tag;
  }
  std::size_t transition_index(std::size_t from, std::size_t to) const {
    return emission_dim * tag_count + from * tag_count + to;
  }
  std::size_t start_index(std::size_t tag) const {
    return emission_dim * tag_count + tag_count * tag_count + tag;
  }
  std::size_t end_index(std::size_t tag) const {
    return emission_dim * tag_count + tag_count * tag_count + tag_count + tag;
  }

  bool operator==(const ChainLayout&) const = default;
};

/// Observation sequence with per-position tags.
struct ChainInstance {
  std::vector<FeatureVector> observations;  // per-position emission features
  std::vector<std::size_t> gold_tags;

  std::size_t length() const { return observations.size(); }

  bool operator==(const ChainInstance&) const = default;
};

inline void validate_chain_instance(const ChainInstance& instance, std::size_t tag_count) {
  if (instance.observations.empty())
    throw std::invalid_argument("ChainInstance: length must be >= 1");
  if (instance.gold_tags.size() != instance.observations.size())
    throw std::invalid_argument("ChainInstance: observation and tag lists differ in length");
  for (std::size_t tag : instance.gold_tags)
    if (tag >= tag_count)
      throw std::invalid_argument("ChainInstance: tag " + detail::to_text(tag) +
                                  " out of range for " + detail::to_text(tag_count) +
                                  " tags");
}

/// Linear-chain model over `layout.tag_count` tags with emission features
/// shared across tags via (feature, tag) weight pairing.
struct ChainModel {
  ChainLayout layout;
  std::vector<double> weights;

  static ChainModel zeros(ChainLayout layout) {
    ChainModel model;
    model.layout = layout;
    model.weights.assign(layout.parameter_count(), 0.0);
    return model;
  }

  double emission(std::size_t feature, std::size_t tag) const {
    return weights[layout.emission_index(feature, tag)];
  }
  double transition(std::size_t from, std::size_t to) const {
    return weights[layout.transition_index(from, to)];
  }
  double start(std::size_t tag) const { return weights[layout.start_index(tag)]; }
  double end(std::size_t tag) const { return weights[layout.end_index(tag)]; }

  double& emission(std::size_t feature, std::size_t tag) {
    return weights[layout.emission_index(feature, tag)];
  }
  double& transition(std::size_t from, std::size_t to) {
    return weights[layout.transition_index(from, to)];
  }
  double& start(std::size_t tag) { return weights[layout.start_index(tag)]; }
  double& end(std::size_t tag) { return weights[layout.end_index(tag)]; }
};

/// Forward-backward outputs: log Z plus node and edge marginals.
struct ChainPosterior {
  double log_partition = 0.0;
  std::vector<std::vector<double>> node_marginals;  // L x t
  std::vector<std::vector<double>> edge_marginals;  // (L-1) x (t*t), row-major (from, to)
};

namespace detail {

/// Per-position emission scores, L x t.
inline std::vector<std::vector<double>> emission_scores(const ChainModel& model,
                                                        const ChainInstance& instance) {
  const std::size_t t = model.layout.tag_count;
  std::vector<std::vector<double>> emit(instance.length(), std::vector<double>(t, 0.0));
  for (std::size_t j = 0; j < instance.length(); ++j) {
    const FeatureVector& obs = instance.observations[j];
    if (obs.dimension() != model.layout.emission_dim)
      throw std::invalid_argument("chain: observation dimension " +
                                  to_text(obs.dimension()) + " does not match model " +
                                  to_text(model.layout.emission_dim));
    for (const auto& [feature, value] : obs.entries())
      for (std::size_t y = 0; y < t; ++y)
        emit[j][y] += value * model.emission(feature, y);
  }
  return emit;
}

}  // namespace detail

/// Start weight + per-position emissions + transitions + end weight.
inline double sequence_score(const ChainModel& model, const ChainInstance& instance,
                             const std::vector<std::size_t>& tags) {
  if (tags.size() != instance.length())
    throw std::invalid_argument("sequence_score: tag sequence length " +
                                detail::to_text(tags.size()) +
                                " does not match instance length " +
                                detail::to_text(instance.length()));
  for (std::size_t tag : tags)
    if (tag >= model.layout.tag_count)
      throw std::invalid_argument("sequence_score: tag out of range");
  double score = model.start(tags.front()) + model.end(tags.back());
  for (std::size_t j = 0; j < tags.size(); ++j) {
    const FeatureVector& obs = instance.observations[j];
    for (const auto& [feature, value] : obs.entries())
      score += value * model.emission(feature, tags[j]);
    if (j + 1 < tags.size()) score += model.transition(tags[j], tags[j + 1]);
  }
  return score;
}

/// Sum-product dynamic program in log space.
inline ChainPosterior forward_backward(const ChainModel& model,
                                       const ChainInstance& instance) {
  const std::size_t L = instance.length();
  const std::size_t t = model.layout.tag_count;
  if (L == 0) throw std::invalid_argument("forward_backward: empty instance");
  const auto emit = detail::emission_scores(model, instance);

  std::vector<std::vector<double>> alpha(L, std::vector<double>(t));
  std::vector<std::vector<double>> beta(L, std::vector<double>(t));
  std::vector<double> buffer(t);

  for (std::size_t y = 0; y < t; ++y) alpha[0][y] = model.start(y) + emit[0][y];
  for (std::size_t j = 1; j < L; ++j)
    for (std::size_t y = 0; y < t; ++y) {
      for (std::size_t p = 0; p < t; ++p)
        buffer[p] = alpha[j - 1][p] + model.transition(p, y);
      alpha[j][y] = log_sum_exp(buffer) + emit[j][y];
    }

  for (std::size_t y = 0; y < t; ++y) beta[L - 1][y] = model.end(y);
  for (std::size_t j = L - 1; j-- > 0;)
    for (std::size_t y = 0; y < t; ++y) {
      for (std::size_t n = 0; n < t; ++n)
        buffer[n] = model.transition(y, n) + emit[j + 1][n] + beta[j + 1][n];
      beta[j][y] = log_sum_exp(buffer);
    }

  ChainPosterior posterior;
  for (std::size_t y = 0; y < t; ++y) buffer[y] = alpha[L - 1][y] + model.end(y);
  posterior.log_partition = log_sum_exp(buffer);

  posterior.node_marginals.assign(L, std::vector<double>(t));
  for (std::size_t j = 0; j < L; ++j)
    for (std::size_t y = 0; y < t; ++y)
      posterior.node_marginals[j][y] =
          std::exp(alpha[j][y] + beta[j][y] - posterior.log_partition);

  posterior.edge_marginals.assign(L >= 1 ? L - 1 : 0, std::vector<double>(t * t));
  for (std::size_t j = 0; j + 1 < L; ++j)
    for (std::size_t a = 0; a < t; ++a)
      for (std::size_t b = 0; b < t; ++b)
        posterior.edge_marginals[j][a * t + b] =
            std::exp(alpha[j][a] + model.transition(a, b) + emit[j + 1][b] +
                     beta[j + 1][b] - posterior.log_partition);
  return posterior;
}

/// Conditional log-probability of a tag sequence; never above 0.
inline double sequence_log_probability(const ChainModel& model,
                                       const ChainInstance& instance,
                                       const std::vector<std::size_t>& tags) {
  const double score = sequence_score(model, instance, tags);
  const double log_z = forward_backward(model, instance).log_partition;
  return std::min(0.0, score - log_z);
}

struct DecodeResult {
  std::vector<std::size_t> tags;
  double score = 0.0;
};

/// Max-product decoding; ties break to the lowest tag index at each step.
inline DecodeResult viterbi(const ChainModel& model, const ChainInstance& instance) {
  const std::size_t L = instance.length();
  const std::size_t t = model.layout.tag_count;
  if (L == 0) throw std::invalid_argument("viterbi: empty instance");
  const auto emit = detail::emission_scores(model, instance);

  std::vector<std::vector<double>> best(L, std::vector<double>(t));
  std::vector<std::vector<std::size_t>> back(L, std::vector<std::size_t>(t, 0));

  for (std::size_t y = 0; y < t; ++y) best[0][y] = model.start(y) + emit[0][y];
  for (std::size_t j = 1; j < L; ++j)
    for (std::size_t y = 0; y < t; ++y) {
      std::size_t arg = 0;
      double value = best[j - 1][0] + model.transition(0, y);
      for (std::size_t p = 1; p < t; ++p) {
        const double candidate = best[j - 1][p] + model.transition(p, y);
        if (candidate > value) {
          value = candidate;
          arg = p;
        }
      }
      best[j][y] = value + emit[j][y];
      back[j][y] = arg;
    }

  std::size_t last = 0;
  double final_score = best[L - 1][0] + model.end(0);
  for (std::size_t y = 1; y < t; ++y) {
    const double candidate = best[L - 1][y] + model.end(y);
    if (candidate > final_score) {
      final_score = candidate;
      last = y;
    }
  }

  DecodeResult result;
  result.score = final_score;
  result.tags.assign(L, 0);
  result.tags[L - 1] = last;
  for (std::size_t j = L - 1; j-- > 0;) result.tags[j] = back[j + 1][result.tags[j + 1]];
  return result;
}

namespace detail {

struct ListCandidate {
  double score = kNegativeInfinity;
  std::size_t prev_tag = 0;
  std::size_t prev_rank = 0;
  bool valid = false;
};

/// 2-best list Viterbi with per-state merge. Returns the two highest-scoring
/// distinct tag sequences (second may be invalid when t^L == 1).
inline std::pair<DecodeResult, DecodeResult> two_best(const ChainModel& model,
                                                      const ChainInstance& instance) {
  const std::size_t L = instance.length();
  const std::size_t t = model.layout.tag_count;
  const auto emit = emission_scores(model, instance);

  // lists[j][y][r]: rank-r candidate ending in tag y at position j
  std::vector<std::vector<std::array<ListCandidate, 2>>> lists(
      L, std::vector<std::array<ListCandidate, 2>>(t));

  auto offer = [](std::array<ListCandidate, 2>& slot, const ListCandidate& cand) {
    // keep the two best; ties prefer the earlier (lower prev_tag, then rank)
    if (!slot[0].valid || cand.score > slot[0].score) {
      slot[1] = slot[0];
      slot[0] = cand;
    } else if (!slot[1].valid || cand.score > slot[1].score) {
      slot[1] = cand;
    }
  };

  for (std::size_t y = 0; y < t; ++y)
    offer(lists[0][y], {model.start(y) + emit[0][y], 0, 0, true});

  for (std::size_t j = 1; j < L; ++j)
    for (std::size_t y = 0; y < t; ++y)
      for (std::size_t p = 0; p < t; ++p)
        for (std::size_t r = 0; r < 2; ++r) {
          const ListCandidate& prev = lists[j - 1][p][r];
          if (!prev.valid) continue;
          offer(lists[j][y],
                {prev.score + model.transition(p, y) + emit[j][y], p, r, true});
        }

  // final merge over (tag, rank) with end weights
  struct Final {
    double score;
    std::size_t tag;
    std::size_t rank;
  };
  std::array<Final, 2> finals{Final{kNegativeInfinity, 0, 0},
                              Final{kNegativeInfinity, 0, 0}};
  std::array<bool, 2> finals_valid{false, false};
  for (std::size_t y = 0; y < t; ++y)
    for (std::size_t r = 0; r < 2; ++r) {
      if (!lists[L - 1][y][r].valid) continue;
      const Final cand{lists[L - 1][y][r].score + model.end(y), y, r};
      if (!finals_valid[0] || cand.score > finals[0].score) {
        finals[1] = finals[0];
        finals_valid[1] = finals_valid[0];
        finals[0] = cand;
        finals_valid[0] = true;
      } else if (!finals_valid[1] || cand.score > finals[1].score) {
        finals[1] = cand;
        finals_valid[1] = true;
      }
    }

  auto backtrack = [&](const Final& final_cand) {
    DecodeResult result;
    result.score = final_cand.score;
    result.tags.assign(L, 0);
    std::size_t tag = final_cand.tag;
    std::size_t rank = final_cand.rank;
    result.tags[L - 1] = tag;
    for (std::size_t j = L - 1; j-- > 0;) {
      const ListCandidate& cand = lists[j + 1][tag][rank];
      tag = cand.prev_tag;
      rank = cand.prev_rank;
      result.tags[j] = tag;
    }
    return result;
  };

  std::pair<DecodeResult, DecodeResult> result;
  result.first = backtrack(finals[0]);
  if (finals_valid[1]) result.second = backtrack(finals[1]);
  else result.second.score = kNegativeInfinity;
  return result;
}

}  // namespace detail

/// Highest-scoring tag sequence different from `gold`: the Viterbi path when
/// it differs, otherwise the second-best distinct path.
inline DecodeResult best_competitor(const ChainModel& model, const ChainInstance& instance,
                                    const std::vector<std::size_t>& gold) {
  if (gold.size() != instance.length())
    throw std::invalid_argument("best_competitor: gold length does not match instance");
  if (model.layout.tag_count < 2)
    throw std::invalid_argument("best_competitor: no competitor exists (single tag sequence)");
  auto [first, second] = detail::two_best(model, instance);
  if (first.tags != gold) return first;
  return second;
}

/// Structured loss value and gradient over the flat chain weight vector.
/// Log component: log Z - gold score with expected-minus-gold feature counts.
/// Hinge component: [1 - (gold - competitor)]_+ with competitor-minus-gold
/// counts when active. Hybrid mixes by (alpha, 1 - alpha).
inline std::pair<double, std::vector<double>> chain_loss_and_gradient(
    const LossSpec& spec, const ChainModel& model, const ChainInstance& instance) {
  spec.validate();
  validate_chain_instance(instance, model.layout.tag_count);
  const double alpha = spec.effective_alpha();
  const ChainLayout& layout = model.layout;
  const std::size_t t = layout.tag_count;
  const std::size_t L = instance.length();

  std::vector<double> gradient(layout.parameter_count(), 0.0);
  double value = 0.0;
  const double gold_score = sequence_score(model, instance, instance.gold_tags);

  // out += scale * phi(x, tags)
  auto add_features = [&](const std::vector<std::size_t>& tags, double scale) {
    gradient[layout.start_index(tags.front())] += scale;
    gradient[layout.end_index(tags.back())] += scale;
    for (std::size_t j = 0; j < L; ++j) {
      for (const auto& [feature, v] : instance.observations[j].entries())
        gradient[layout.emission_index(feature, tags[j])] += scale * v;
      if (j + 1 < L) gradient[layout.transition_index(tags[j], tags[j + 1])] += scale;
    }
  };

  if (alpha > 0.0) {
    const ChainPosterior posterior = forward_backward(model, instance);
    value += alpha * std::max(0.0, posterior.log_partition - gold_score);
    for (std::size_t j = 0; j < L; ++j) {
      for (const auto& [feature, v] : instance.observations[j].entries())
        for (std::size_t y = 0; y < t; ++y)
          gradient[layout.emission_index(feature, y)] +=
              alpha * posterior.node_marginals[j][y] * v;
      if (j + 1 < L)
        for (std::size_t a = 0; a < t; ++a)
          for (std::size_t b = 0; b < t; ++b)
            gradient[layout.transition_index(a, b)] +=
                alpha * posterior.edge_marginals[j][a * t + b];
    }
    for (std::size_t y = 0; y < t; ++y) {
      gradient[layout.start_index(y)] += alpha * posterior.node_marginals[0][y];
      gradient[layout.end_index(y)] += alpha * posterior.node_marginals[L - 1][y];
    }
    add_features(instance.gold_tags, -alpha);
  }

  if (alpha < 1.0) {
    const DecodeResult competitor = best_competitor(model, instance, instance.gold_tags);
    const double slack = 1.0 - (gold_score - competitor.score);
    if (slack > 0.0) {
      value += (1.0 - alpha) * slack;
      add_features(competitor.tags, 1.0 - alpha);
      add_features(instance.gold_tags, -(1.0 - alpha));
    }
  }

  return {value, std::move(gradient)};
}

}  // namespace hybrid
