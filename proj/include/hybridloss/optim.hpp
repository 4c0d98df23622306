#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybridloss/chain.hpp"
#include "hybridloss/core.hpp"
#include "hybridloss/losses.hpp"
#include "hybridloss/numeric.hpp"

namespace hybrid {

/// Evaluable objective: maps weights to (value, gradient).
struct Objective {
  std::size_t dimension = 0;
  std::function<double(const std::vector<double>&, std::vector<double>&)> value_and_gradient;
};

struct OptimConfig {
  double lambda = 0.0;               // (lambda/2)||w||^2 added by minimize()
  std::size_t memory = 10;           // L-BFGS history size
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-6;  // on the gradient max-norm
  double armijo_constant = 1e-4;
  double backtrack_factor = 0.5;
  std::size_t max_backtracks = 50;
  // optional per-iteration trace (iteration, value, gradient max-norm)
  std::function<void(std::size_t, double, double)> on_iteration;
};

struct OptimResult {
  std::vector<double> weights;
  double final_value = 0.0;
  double final_gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// L-BFGS with two-loop recursion and Armijo backtracking. The regularizer
/// (lambda/2)||w||^2 and its gradient are added here, so the objective should
/// supply only the data term. Curvature pairs with s'y <= 1e-10 are skipped.
/// Nondifferentiable objectives are handled by subgradients; a failed line
/// search terminates with converged = false.
inline OptimResult minimize(const Objective& objective, const OptimConfig& config,
                            std::vector<double> initial) {
  const std::size_t n = objective.dimension;
  if (initial.size() != n)
    throw std::invalid_argument("minimize: initial point length " +
                                detail::to_text(initial.size()) +
                                " does not match objective dimension " + detail::to_text(n));

  auto evaluate = [&](const std::vector<double>& w, std::vector<double>& g) {
    g.assign(n, 0.0);
    double value = objective.value_and_gradient(w, g);
    if (config.lambda != 0.0) {
      value += 0.5 * config.lambda * squared_norm(w);
      for (std::size_t i = 0; i < n; ++i) g[i] += config.lambda * w[i];
    }
    if (!std::isfinite(value) || !all_finite(g))
      throw std::runtime_error("minimize: non-finite objective or gradient at |w|_inf = " +
                               std::to_string(max_norm(w)));
    return value;
  };

  std::vector<double> w = std::move(initial);
  std::vector<double> gradient;
  double value = evaluate(w, gradient);

  std::deque<std::vector<double>> s_history, y_history;
  std::deque<double> rho_history;

  OptimResult result;
  std::vector<double> direction(n), trial(n), trial_gradient;

  for (std::size_t iteration = 0;; ++iteration) {
    const double gnorm = max_norm(gradient);
    if (config.on_iteration) config.on_iteration(iteration, value, gnorm);
    if (gnorm <= config.gradient_tolerance) {
      result.converged = true;
      result.iterations = iteration;
      break;
    }
    if (iteration >= config.max_iterations) {
      result.iterations = iteration;
      break;
    }

    // two-loop recursion
    direction = gradient;
    std::vector<double> alphas(s_history.size());
    for (std::size_t i = s_history.size(); i-- > 0;) {
      alphas[i] = rho_history[i] * dot(s_history[i], direction);
      for (std::size_t j = 0; j < n; ++j) direction[j] -= alphas[i] * y_history[i][j];
    }
    if (!s_history.empty()) {
      const double scale = dot(s_history.back(), y_history.back()) /
                           dot(y_history.back(), y_history.back());
      for (double& d : direction) d *= scale;
    }
    for (std::size_t i = 0; i < s_history.size(); ++i) {
      const double beta = rho_history[i] * dot(y_history[i], direction);
      for (std::size_t j = 0; j < n; ++j) direction[j] += (alphas[i] - beta) * s_history[i][j];
    }
    for (double& d : direction) d = -d;

    double directional = dot(direction, gradient);
    if (directional >= 0.0) {  // not a descent direction; restart from steepest
      for (std::size_t j = 0; j < n; ++j) direction[j] = -gradient[j];
      directional = -squared_norm(gradient);
      s_history.clear();
      y_history.clear();
      rho_history.clear();
    }

    double step = 1.0;
    if (s_history.empty()) {
      const double gl2 = std::sqrt(squared_norm(gradient));
      step = std::min(1.0, 1.0 / std::max(1e-12, gl2));
    }

    bool accepted = false;
    double trial_value = 0.0;
    for (std::size_t backtrack = 0; backtrack <= config.max_backtracks; ++backtrack) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = w[j] + step * direction[j];
      trial_value = evaluate(trial, trial_gradient);
      if (trial_value <= value + config.armijo_constant * step * directional) {
        accepted = true;
        break;
      }
      step *= config.backtrack_factor;
    }
    if (!accepted) {  // subgradient kink or numerically flat; stop here
      result.iterations = iteration;
      break;
    }

    std::vector<double> s(n), yv(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = trial[j] - w[j];
      yv[j] = trial_gradient[j] - gradient[j];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-10) {  // keep the inverse Hessian estimate positive definite
      s_history.push_back(std::move(s));
      y_history.push_back(std::move(yv));
      rho_history.push_back(1.0 / sy);
      if (s_history.size() > config.memory) {
        s_history.pop_front();
        y_history.pop_front();
        rho_history.pop_front();
      }
    }
    w.swap(trial);
    value = trial_value;
    gradient.swap(trial_gradient);
  }

  result.weights = std::move(w);
  result.final_value = value;
  result.final_gradient_norm = max_norm(gradient);
  return result;
}

/// Mean per-instance loss plus (lambda/2)||w||^2, assembled in dataset order.
inline Objective regularized_batch_objective(const LossSpec& spec,
                                             const std::vector<FlatInstance>& dataset,
                                             double lambda) {
  if (dataset.empty())
    throw std::invalid_argument("regularized_batch_objective: empty dataset");
  spec.validate();
  const std::size_t n = dataset.front().dimension();
  for (const FlatInstance& instance : dataset)
    if (instance.dimension() != n)
      throw std::invalid_argument("regularized_batch_objective: inconsistent dimensions");

  Objective objective;
  objective.dimension = n;
  objective.value_and_gradient = [spec, &dataset, lambda, n](const std::vector<double>& w,
                                                             std::vector<double>& gradient) {
    gradient.assign(n, 0.0);
    double value = 0.0;
    const double scale = 1.0 / static_cast<double>(dataset.size());
    for (const FlatInstance& instance : dataset) {
      const ScoreVector scores = score_flat(w, instance);
      const LossEval eval = evaluate_loss(spec, scores, instance.gold_label);
      value += scale * eval.value;
      for (std::size_t y = 0; y < scores.size(); ++y)
        if (eval.score_gradient[y] != 0.0)
          instance.features_per_label[y].add_to(scale * eval.score_gradient[y], gradient);
    }
    if (lambda != 0.0) {
      value += 0.5 * lambda * squared_norm(w);
      for (std::size_t i = 0; i < n; ++i) gradient[i] += lambda * w[i];
    }
    return value;
  };
  return objective;
}

/// Data term only (mean per-instance loss); pair with OptimConfig::lambda.
inline Objective batch_objective(const LossSpec& spec,
                                 const std::vector<FlatInstance>& dataset) {
  return regularized_batch_objective(spec, dataset, 0.0);
}

/// Chain version of the batch objective over the flat chain weight layout.
inline Objective regularized_batch_objective(const LossSpec& spec, const ChainLayout& layout,
                                             const std::vector<ChainInstance>& dataset,
                                             double lambda) {
  if (dataset.empty())
    throw std::invalid_argument("regularized_batch_objective: empty dataset");
  spec.validate();
  Objective objective;
  objective.dimension = layout.parameter_count();
  objective.value_and_gradient = [spec, layout, &dataset, lambda](
                                     const std::vector<double>& w,
                                     std::vector<double>& gradient) {
    gradient.assign(layout.parameter_count(), 0.0);
    ChainModel model;
    model.layout = layout;
    model.weights = w;
    double value = 0.0;
    const double scale = 1.0 / static_cast<double>(dataset.size());
    for (const ChainInstance& instance : dataset) {
      auto [loss, grad] = chain_loss_and_gradient(spec, model, instance);
      value += scale * loss;
      for (std::size_t i = 0; i < grad.size(); ++i) gradient[i] += scale * grad[i];
    }
    if (lambda != 0.0) {
      value += 0.5 * lambda * squared_norm(w);
      for (std::size_t i = 0; i < w.size(); ++i) gradient[i] += lambda * w[i];
    }
    return value;
  };
  return objective;
}

inline Objective batch_objective(const LossSpec& spec, const ChainLayout& layout,
                                 const std::vector<ChainInstance>& dataset) {
  return regularized_batch_objective(spec, layout, dataset, 0.0);
}

}  // namespace hybrid
