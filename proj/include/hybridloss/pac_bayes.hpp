#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridloss/chain.hpp"
#include "hybridloss/core.hpp"
#include "hybridloss/numeric.hpp"
#include "hybridloss/rng.hpp"

namespace hybrid {

/// Inputs for the explicit generalization-bound right-hand side. The bound
/// requires alpha < 1 (it carries a 1/(1-alpha) factor).
struct BoundInputs {
  double weight_norm_sq = 0.0;
  std::size_t sample_size = 0;  // m
  std::size_t label_count = 0;
  double alpha = 0.0;
  double gamma = 1.0;   // margin threshold
  double delta = 0.05;  // confidence
  std::size_t posterior_samples = 100;
  std::vector<double> empirical_margin_losses;  // per-instance [gamma - M]_+
};

struct BoundResult {
  double empirical_term = 0.0;
  double complexity_term = 0.0;
  double rhs = 0.0;
  std::string notes;
};

namespace detail {

inline std::vector<std::vector<double>> posterior_draws(const WeightVector& center,
                                                        std::size_t samples,
                                                        std::uint64_t seed,
                                                        double stddev) {
  Rng rng(seed);
  std::vector<std::vector<double>> draws(samples, center);
  for (std::vector<double>& draw : draws)
    if (stddev != 0.0)
      for (double& w : draw) w += stddev * rng.normal();
  return draws;
}

}  // namespace detail

/// Fraction of instances whose posterior-averaged margin is <= gamma, with
/// the posterior an isotropic Gaussian centered at the weights (stddev 1 by
/// default; 0 collapses the posterior onto the weights themselves, which is
/// handy for deterministic checks). Monte Carlo draws are shared across
/// instances and fixed by the seed.
inline double empirical_margin_error(const WeightVector& weights,
                                     const std::vector<FlatInstance>& dataset,
                                     double gamma, std::size_t posterior_samples,
                                     std::uint64_t seed, double posterior_stddev = 1.0) {
  if (dataset.empty()) throw std::invalid_argument("empirical_margin_error: empty dataset");
  if (posterior_samples == 0)
    throw std::invalid_argument("empirical_margin_error: need at least one sample");
  const auto draws =
      detail::posterior_draws(weights, posterior_samples, seed, posterior_stddev);
  std::size_t at_or_below = 0;
  for (const FlatInstance& instance : dataset) {
    double mean_margin = 0.0;
    for (const std::vector<double>& draw : draws)
      mean_margin += margin(score_flat(draw, instance), instance.gold_label);
    mean_margin /= static_cast<double>(posterior_samples);
    if (mean_margin <= gamma) ++at_or_below;
  }
  return static_cast<double>(at_or_below) / static_cast<double>(dataset.size());
}

/// Chain version; the margin is gold score minus the best competing
/// sequence's score under each posterior draw.
inline double empirical_margin_error(const ChainModel& model,
                                     const std::vector<ChainInstance>& dataset,
                                     double gamma, std::size_t posterior_samples,
                                     std::uint64_t seed, double posterior_stddev = 1.0) {
  if (dataset.empty()) throw std::invalid_argument("empirical_margin_error: empty dataset");
  if (posterior_samples == 0)
    throw std::invalid_argument("empirical_margin_error: need at least one sample");
  const auto draws =
      detail::posterior_draws(model.weights, posterior_samples, seed, posterior_stddev);
  std::size_t at_or_below = 0;
  ChainModel perturbed;
  perturbed.layout = model.layout;
  for (const ChainInstance& instance : dataset) {
    double mean_margin = 0.0;
    for (const std::vector<double>& draw : draws) {
      perturbed.weights = draw;
      const double gold = sequence_score(perturbed, instance, instance.gold_tags);
      const DecodeResult rival = best_competitor(perturbed, instance, instance.gold_tags);
      mean_margin += gold - rival.score;
    }
    mean_margin /= static_cast<double>(posterior_samples);
    if (mean_margin <= gamma) ++at_or_below;
  }
  return static_cast<double>(at_or_below) / static_cast<double>(dataset.size());
}

/// Per-instance [gamma - M]_+ at the unperturbed weights, for BoundInputs.
inline std::vector<double> margin_losses(const WeightVector& weights,
                                         const std::vector<FlatInstance>& dataset,
                                         double gamma) {
  std::vector<double> losses;
  losses.reserve(dataset.size());
  for (const FlatInstance& instance : dataset)
    losses.push_back(
        std::max(0.0, gamma - margin(score_flat(weights, instance), instance.gold_label)));
  return losses;
}

inline std::vector<double> margin_losses(const ChainModel& model,
                                         const std::vector<ChainInstance>& dataset,
                                         double gamma) {
  std::vector<double> losses;
  losses.reserve(dataset.size());
  for (const ChainInstance& instance : dataset) {
    const double gold = sequence_score(model, instance, instance.gold_tags);
    const DecodeResult rival = best_competitor(model, instance, instance.gold_tags);
    losses.push_back(std::max(0.0, gamma - (gold - rival.score)));
  }
  return losses;
}

/// Explicit bound right-hand side:
///   mean([gamma - M]_+) + (1/(1-alpha)) * (alpha sqrt(1/m)
///     + sqrt((KL + ln A + ln(1/(delta (1 - e^-2)))) / (2m)))
/// with KL = ||w||^2 / 2 for the unit Gaussian prior/posterior pair and
/// A(alpha, w) replaced by its zero-one-loss upper bound m + 1. The
/// substitution is recorded in the result notes.
inline BoundResult appendix_bound_rhs(const BoundInputs& inputs) {
  if (inputs.alpha == 1.0)
    throw std::invalid_argument("appendix_bound_rhs: bound undefined at alpha = 1");
  if (!(inputs.alpha >= 0.0 && inputs.alpha < 1.0))
    throw std::invalid_argument("appendix_bound_rhs: alpha must lie in [0, 1)");
  if (!(inputs.delta > 0.0 && inputs.delta <= 1.0))
    throw std::invalid_argument("appendix_bound_rhs: delta must lie in (0, 1]");
  if (inputs.sample_size == 0)
    throw std::invalid_argument("appendix_bound_rhs: sample size must be positive");
  if (!(inputs.gamma > 0.0))
    throw std::invalid_argument("appendix_bound_rhs: gamma must be positive");
  if (inputs.weight_norm_sq < 0.0)
    throw std::invalid_argument("appendix_bound_rhs: negative weight norm");

  BoundResult result;
  const double m = static_cast<double>(inputs.sample_size);
  if (!inputs.empirical_margin_losses.empty()) {
    double sum = 0.0;
    for (double loss : inputs.empirical_margin_losses) sum += loss;
    result.empirical_term = sum / static_cast<double>(inputs.empirical_margin_losses.size());
  }
  const double kl = 0.5 * inputs.weight_norm_sq;
  const double log_a = std::log(m + 1.0);
  const double log_delta = std::log(1.0 / (inputs.delta * (1.0 - std::exp(-2.0))));
  result.complexity_term = (inputs.alpha * std::sqrt(1.0 / m) +
                            std::sqrt((kl + log_a + log_delta) / (2.0 * m))) /
                           (1.0 - inputs.alpha);
  result.rhs = result.empirical_term + result.complexity_term;
  result.notes = "A(alpha,w) upper-bounded by m+1 (zero-one-loss surrogate)";
  return result;
}

}  // namespace hybrid
