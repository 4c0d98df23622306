#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridloss/chain.hpp"
#include "hybridloss/core.hpp"
#include "hybridloss/losses.hpp"
#include "hybridloss/numeric.hpp"
#include "hybridloss/rng.hpp"

namespace hybrid {

inline void validate_distribution(const LabelDistribution& q, double tolerance = 1e-9) {
  if (q.empty()) throw std::invalid_argument("LabelDistribution: empty");
  double sum = 0.0;
  for (double p : q) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("LabelDistribution: entry outside [0, 1]");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > tolerance)
    throw std::invalid_argument("LabelDistribution: entries sum to " + std::to_string(sum));
}

/// True iff every maximizer of the scores is also a maximizer of q.
/// Argmax sets are formed under `tie_tolerance` on both sides.
inline bool is_aligned(const ScoreVector& scores, const LabelDistribution& q,
                       double tie_tolerance = 1e-9) {
  if (scores.size() != q.size())
    throw std::invalid_argument("is_aligned: score length " + detail::to_text(scores.size()) +
                                " does not match distribution length " +
                                detail::to_text(q.size()));
  const double score_max = *std::max_element(scores.begin(), scores.end());
  const double q_max = *std::max_element(q.begin(), q.end());
  for (std::size_t y = 0; y < scores.size(); ++y)
    if (scores[y] >= score_max - tie_tolerance && q[y] < q_max - tie_tolerance)
      return false;
  return true;
}

/// Dominance structure of a label distribution and the mixture threshold of
/// the sufficiency condition: alpha must exceed 1 - gap / (1 - 2 q_top) when
/// no label is dominant (and anything works when one is).
struct DominanceReport {
  std::size_t top_label = 0;
  std::size_t runner_up = 0;
  double top_prob = 0.0;
  double second_prob = 0.0;
  bool dominant = false;      // top_prob > 1/2
  double gap = 0.0;           // top_prob - second_prob
  double alpha_threshold = 0.0;
};

inline DominanceReport alpha_condition(const LabelDistribution& q) {
  if (q.size() < 2) throw std::invalid_argument("alpha_condition: need at least 2 labels");
  validate_distribution(q);
  DominanceReport report;
  report.top_label = argmax_lowest(q);
  report.top_prob = q[report.top_label];
  std::size_t second = report.top_label == 0 ? 1 : 0;
  for (std::size_t y = 0; y < q.size(); ++y)
    if (y != report.top_label && q[y] > q[second]) second = y;
  report.runner_up = second;
  report.second_prob = q[second];
  report.gap = report.top_prob - report.second_prob;
  report.dominant = report.top_prob > 0.5;
  if (report.dominant) {
    report.alpha_threshold = 0.0;
  } else if (report.top_prob == 0.5) {
    // limit of the condition as q_top -> 1/2: any alpha works when the gap
    // is positive, none is certified when the top two tie at 1/2
    report.alpha_threshold = report.gap > 0.0 ? 0.0 : 1.0;
  } else {
    const double raw = 1.0 - report.gap / (1.0 - 2.0 * report.top_prob);
    report.alpha_threshold = std::clamp(raw, 0.0, 1.0);
  }
  return report;
}

/// E_{y~q}[loss(p, y)] with the losses in their probability form: the log
/// part is -ln p_y and the hinge part is [1 - ln(p_y / max_{y'!=y} p_{y'})]_+.
inline double conditional_risk(const LossSpec& spec, const std::vector<double>& p,
                               const LabelDistribution& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("conditional_risk: length mismatch");
  const double alpha = spec.effective_alpha();
  // top-2 of p for the per-label "best other" lookup
  std::size_t top = 0;
  for (std::size_t y = 1; y < p.size(); ++y)
    if (p[y] > p[top]) top = y;
  double second = -1.0;
  for (std::size_t y = 0; y < p.size(); ++y)
    if (y != top) second = std::max(second, p[y]);

  double risk = 0.0;
  for (std::size_t y = 0; y < q.size(); ++y) {
    if (q[y] == 0.0) continue;
    double term = 0.0;
    const double log_p = std::log(p[y]);
    if (alpha > 0.0) term += alpha * -log_p;
    if (alpha < 1.0) {
      const double best_other = y == top ? second : p[top];
      const double slack = 1.0 - (log_p - std::log(best_other));
      if (slack > 0.0) term += (1.0 - alpha) * slack;
    }
    risk += q[y] * term;
  }
  return risk;
}

struct SimplexMinimizer {
  std::vector<double> probabilities;
  double risk = 0.0;
};

namespace detail {

struct GridSearchState {
  const LossSpec* spec = nullptr;
  const LabelDistribution* q = nullptr;
  std::size_t resolution = 0;
  double alpha = 0.0;
  std::vector<double> log_count;  // ln(c), c = 0..resolution (ln 0 = -inf)
  std::vector<std::size_t> counts;
  std::vector<std::size_t> best_counts;
  double best_risk = 0.0;

  // Risk of the grid point counts / resolution. Integer counts keep exact
  // ties (e.g. the uniform point) exact.
  double risk_of_counts() const {
    const double log_r = log_count[resolution];
    std::size_t top = 0;
    for (std::size_t y = 1; y < counts.size(); ++y)
      if (counts[y] > counts[top]) top = y;
    std::size_t second_count = 0;
    for (std::size_t y = 0; y < counts.size(); ++y)
      if (y != top) second_count = std::max(second_count, counts[y]);

    double risk = 0.0;
    for (std::size_t y = 0; y < counts.size(); ++y) {
      const double qy = (*q)[y];
      if (qy == 0.0) continue;
      double term = 0.0;
      const double log_p = log_count[counts[y]];
      if (alpha > 0.0) term += alpha * (log_r - log_p);
      if (alpha < 1.0) {
        const std::size_t other = y == top ? second_count : counts[top];
        const double slack = 1.0 - (log_p - log_count[other]);
        if (slack > 0.0) term += (1.0 - alpha) * slack;
      }
      risk += qy * term;
    }
    return risk;
  }

  void search(std::size_t position, std::size_t remaining) {
    if (position + 1 == counts.size()) {
      counts[position] = remaining;
      const double risk = risk_of_counts();
      if (risk < best_risk) {  // strict: first (lexicographically smallest) wins ties
        best_risk = risk;
        best_counts = counts;
      }
      return;
    }
    for (std::size_t c = 0; c <= remaining; ++c) {
      counts[position] = c;
      search(position + 1, remaining - c);
    }
  }
};

}  // namespace detail

/// Brute-force minimizer of the conditional risk over a simplex grid with
/// `resolution` points per edge, followed by pairwise coordinate descent
/// down to a 1e-6 step floor. Exhaustive, hence capped at k <= 5.
inline SimplexMinimizer simplex_risk_minimizer(const LossSpec& spec,
                                               const LabelDistribution& q,
                                               std::size_t resolution = 120) {
  spec.validate();
  validate_distribution(q);
  const std::size_t k = q.size();
  if (k < 2) throw std::invalid_argument("simplex_risk_minimizer: need at least 2 labels");
  if (k > 5)
    throw std::invalid_argument(
        "simplex_risk_minimizer: exhaustive oracle is capped at k <= 5; use a random-restart "
        "sampling search for larger label sets");
  if (resolution < 50)
    throw std::invalid_argument("simplex_risk_minimizer: resolution must be >= 50 per edge");

  detail::GridSearchState state;
  state.spec = &spec;
  state.q = &q;
  state.resolution = resolution;
  state.alpha = spec.effective_alpha();
  state.log_count.resize(resolution + 1);
  state.log_count[0] = kNegativeInfinity;
  for (std::size_t c = 1; c <= resolution; ++c)
    state.log_count[c] = std::log(static_cast<double>(c));
  state.counts.assign(k, 0);
  state.best_counts.assign(k, 0);
  state.best_risk = std::numeric_limits<double>::infinity();
  state.search(0, resolution);

  std::vector<double> p(k);
  for (std::size_t y = 0; y < k; ++y)
    p[y] = static_cast<double>(state.best_counts[y]) / static_cast<double>(resolution);
  double risk = conditional_risk(spec, p, q);

  // local refinement: move mass between coordinate pairs, halving the step
  double step = 1.0 / static_cast<double>(resolution);
  std::vector<double> candidate(k);
  std::size_t moves = 0;
  const std::size_t move_cap = 100000;
  while (step >= 1e-6 && moves < move_cap) {
    bool improved = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (p[i] < step) continue;
      for (std::size_t j = 0; j < k; ++j) {
        if (j == i) continue;
        candidate = p;
        candidate[i] -= step;
        candidate[j] += step;
        const double candidate_risk = conditional_risk(spec, candidate, q);
        if (candidate_risk < risk) {
          p = candidate;
          risk = candidate_risk;
          improved = true;
          ++moves;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {std::move(p), risk};
}

struct DominancePoint {
  double gold_prob = 0.0;
  double viterbi_prob = 0.0;
};

struct DominanceProfile {
  std::vector<DominancePoint> points;
  std::size_t nondominant_count = 0;  // instances with viterbi_prob <= 1/2

  double nondominant_fraction() const {
    return points.empty() ? 0.0
                          : static_cast<double>(nondominant_count) /
                                static_cast<double>(points.size());
  }
};

/// Per instance: probability of the gold sequence and of the Viterbi
/// sequence under the model. Sort ascending for profile curves.
inline DominanceProfile dominance_profile(const ChainModel& model,
                                          const std::vector<ChainInstance>& dataset) {
  DominanceProfile profile;
  profile.points.reserve(dataset.size());
  for (const ChainInstance& instance : dataset) {
    const double log_z = forward_backward(model, instance).log_partition;
    const double gold_lp =
        std::min(0.0, sequence_score(model, instance, instance.gold_tags) - log_z);
    const DecodeResult best = viterbi(model, instance);
    const double viterbi_lp = std::min(0.0, best.score - log_z);
    DominancePoint point{std::exp(gold_lp), std::exp(viterbi_lp)};
    if (point.viterbi_prob <= 0.5) ++profile.nondominant_count;
    profile.points.push_back(point);
  }
  return profile;
}

/// Hooks a hypothesis class exposes so the regularity probe can try to
/// realize target scores / target modes on given inputs.
struct RegularityAdapter {
  // weights w with score_flat(w, x) == target, when solvable
  std::function<std::optional<WeightVector>(const FlatInstance&, const ScoreVector&)>
      solve_scores;
  // weights whose argmax at x is the target label, when solvable
  std::function<std::optional<WeightVector>(const FlatInstance&, std::size_t)> solve_mode;
};

struct RegularityReport {
  std::size_t score_trials = 0;
  std::size_t score_witnessed = 0;
  std::size_t mode_trials = 0;
  std::size_t mode_witnessed = 0;
  double max_score_residual = 0.0;

  bool scores_realizable() const {
    return score_trials > 0 && score_witnessed == score_trials;
  }
  bool modes_realizable() const { return mode_trials > 0 && mode_witnessed == mode_trials; }
};

/// Samples random target score vectors and checks, via the adapter, that
/// (1) some input realizes them and (2) every mode is realizable on every
/// input. Adapter failures are recorded as "not witnessed", never thrown.
inline RegularityReport regularity_probe(const RegularityAdapter& adapter,
                                         const std::vector<FlatInstance>& inputs,
                                         std::size_t label_count, std::size_t trials,
                                         std::uint64_t seed,
                                         double residual_tolerance = 1e-8) {
  if (inputs.empty()) throw std::invalid_argument("regularity_probe: no inputs");
  RegularityReport report;
  Rng rng(seed);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    ScoreVector target(label_count);
    for (double& g : target) g = rng.normal();
    ++report.score_trials;
    bool witnessed = false;
    for (const FlatInstance& x : inputs) {
      try {
        const auto weights = adapter.solve_scores(x, target);
        if (!weights) continue;
        const ScoreVector scores = score_flat(*weights, x);
        double residual = 0.0;
        for (std::size_t y = 0; y < label_count; ++y)
          residual = std::max(residual, std::fabs(scores[y] - target[y]));
        if (residual <= residual_tolerance) {
          witnessed = true;
          report.max_score_residual = std::max(report.max_score_residual, residual);
          break;
        }
      } catch (const std::exception&) {
        // not witnessed on this input
      }
    }
    if (witnessed) ++report.score_witnessed;
  }
  for (const FlatInstance& x : inputs)
    for (std::size_t y = 0; y < label_count; ++y) {
      ++report.mode_trials;
      try {
        const auto weights = adapter.solve_mode(x, y);
        if (weights && predict(score_flat(*weights, x)) == y) ++report.mode_witnessed;
      } catch (const std::exception&) {
        // not witnessed
      }
    }
  return report;
}

namespace detail {

/// Gaussian elimination with partial pivoting; returns false when singular.
inline bool solve_dense(std::vector<std::vector<double>> a, std::vector<double> b,
                        std::vector<double>& x) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row)
      if (std::fabs(a[row][col]) > std::fabs(a[pivot][col])) pivot = row;
    if (std::fabs(a[pivot][col]) < 1e-12) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t row = col + 1; row < n; ++row) {
      const double factor = a[row][col] / a[col][col];
      for (std::size_t j = col; j < n; ++j) a[row][j] -= factor * a[col][j];
      b[row] -= factor * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t row = n; row-- > 0;) {
    double sum = b[row];
    for (std::size_t j = row + 1; j < n; ++j) sum -= a[row][j] * x[j];
    x[row] = sum / a[row][row];
  }
  return true;
}

}  // namespace detail

/// Adapter for the linear class: solves Phi' (Phi Phi')^{-1} g through the
/// k x k Gram system, i.e. the minimum-norm weights hitting the target
/// scores when the feature rows are independent.
inline RegularityAdapter linear_least_squares_adapter() {
  RegularityAdapter adapter;
  auto solve = [](const FlatInstance& x, const ScoreVector& target)
      -> std::optional<WeightVector> {
    const std::size_t k = x.label_count();
    if (target.size() != k) return std::nullopt;
    std::vector<std::vector<double>> gram(k, std::vector<double>(k, 0.0));
    for (std::size_t a = 0; a < k; ++a) {
      std::vector<double> dense_a(x.dimension(), 0.0);
      x.features_per_label[a].add_to(1.0, dense_a);
      for (std::size_t b = 0; b < k; ++b)
        gram[a][b] = x.features_per_label[b].dot(dense_a);
    }
    std::vector<double> z;
    if (!detail::solve_dense(gram, target, z)) return std::nullopt;
    WeightVector weights(x.dimension(), 0.0);
    for (std::size_t a = 0; a < k; ++a) x.features_per_label[a].add_to(z[a], weights);
    return weights;
  };
  adapter.solve_scores = solve;
  adapter.solve_mode = [solve](const FlatInstance& x, std::size_t y)
      -> std::optional<WeightVector> {
    ScoreVector target(x.label_count(), 0.0);
    if (y >= target.size()) return std::nullopt;
    target[y] = 1.0;
    return solve(x, target);
  };
  return adapter;
}

}  // namespace hybrid
