#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybridloss/core.hpp"
#include "hybridloss/numeric.hpp"

namespace hybrid {

enum class LossKind { kLog, kHinge, kHybrid };

inline const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kLog: return "log";
    case LossKind::kHinge: return "hinge";
    case LossKind::kHybrid: return "hybrid";
  }
  return "?";
}

inline LossKind loss_from_name(const std::string& name) {
  if (name == "log") return LossKind::kLog;
  if (name == "hinge") return LossKind::kHinge;
  if (name == "hybrid") return LossKind::kHybrid;
  throw std::invalid_argument("unknown loss '" + name + "' (expected log, hinge or hybrid)");
}

/// Loss selector. `alpha` is the mixture weight of the log component and is
/// meaningful for the hybrid loss; log behaves as alpha = 1, hinge as alpha = 0.
struct LossSpec {
  LossKind kind = LossKind::kLog;
  double alpha = 1.0;

  static LossSpec log() { return {LossKind::kLog, 1.0}; }
  static LossSpec hinge() { return {LossKind::kHinge, 0.0}; }
  static LossSpec hybrid(double alpha) {
    LossSpec spec{LossKind::kHybrid, alpha};
    spec.validate();
    return spec;
  }

  double effective_alpha() const {
    switch (kind) {
      case LossKind::kLog: return 1.0;
      case LossKind::kHinge: return 0.0;
      case LossKind::kHybrid: return alpha;
    }
    return alpha;
  }

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("LossSpec: alpha must lie in [0, 1]");
  }
};

/// Loss value together with a subgradient w.r.t. the score vector.
struct LossEval {
  double value = 0.0;
  std::vector<double> score_gradient;
};

/// -ln p_gold under the softmax of the scores.
/// value = log-sum-exp(f) - f_gold; gradient = softmax(f) - onehot(gold).
inline LossEval log_loss(const ScoreVector& scores, std::size_t gold) {
  if (scores.empty()) throw std::invalid_argument("log_loss: empty score vector");
  if (gold >= scores.size())
    throw std::invalid_argument("log_loss: gold label " + detail::to_text(gold) +
                                " out of range for " + detail::to_text(scores.size()) +
                                " labels");
  if (!all_finite(scores)) throw std::invalid_argument("log_loss: non-finite score");
  LossEval eval;
  eval.value = std::max(0.0, log_sum_exp(scores) - scores[gold]);
  eval.score_gradient = softmax(scores);
  eval.score_gradient[gold] -= 1.0;
  return eval;
}

/// [1 - M(f, gold)]_+ with the margin against the best competing label.
/// Subgradient is zero when 1 - M <= 0, otherwise -1 at gold and +1 at the
/// lowest-index best competitor.
inline LossEval hinge_loss(const ScoreVector& scores, std::size_t gold) {
  if (scores.size() < 2) throw std::invalid_argument("hinge_loss: need at least 2 labels");
  if (gold >= scores.size())
    throw std::invalid_argument("hinge_loss: gold label " + detail::to_text(gold) +
                                " out of range for " + detail::to_text(scores.size()) +
                                " labels");
  if (!all_finite(scores)) throw std::invalid_argument("hinge_loss: non-finite score");
  LossEval eval;
  eval.score_gradient.assign(scores.size(), 0.0);
  const std::size_t competitor = best_other_label(scores, gold);
  const double slack = 1.0 - (scores[gold] - scores[competitor]);
  if (slack > 0.0) {
    eval.value = slack;
    eval.score_gradient[gold] = -1.0;
    eval.score_gradient[competitor] = 1.0;
  }
  return eval;
}

/// alpha * log_loss + (1 - alpha) * hinge_loss, Eq.-(4)-style convex mix.
/// The hinge factor works on raw scores, which matches the probabilistic
/// form because ln(p_y / p_{y'}) = f_y - f_{y'}.
inline LossEval hybrid_loss(const ScoreVector& scores, std::size_t gold, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("hybrid_loss: alpha must lie in [0, 1]");
  if (alpha == 1.0) return log_loss(scores, gold);
  if (alpha == 0.0) return hinge_loss(scores, gold);
  LossEval log_eval = log_loss(scores, gold);
  LossEval hinge_eval = hinge_loss(scores, gold);
  LossEval eval;
  eval.value = alpha * log_eval.value + (1.0 - alpha) * hinge_eval.value;
  eval.score_gradient.resize(scores.size());
  for (std::size_t y = 0; y < scores.size(); ++y)
    eval.score_gradient[y] =
        alpha * log_eval.score_gradient[y] + (1.0 - alpha) * hinge_eval.score_gradient[y];
  return eval;
}

inline LossEval evaluate_loss(const LossSpec& spec, const ScoreVector& scores,
                              std::size_t gold) {
  spec.validate();
  switch (spec.kind) {
    case LossKind::kLog: return log_loss(scores, gold);
    case LossKind::kHinge: return hinge_loss(scores, gold);
    case LossKind::kHybrid: return hybrid_loss(scores, gold, spec.alpha);
  }
  throw std::logic_error("evaluate_loss: bad kind");
}

/// Chains the score gradient through phi:
///   weight_gradient = sum_y score_gradient[y] * phi(x, y).
/// For the log loss this is E_p[phi] - phi(x, gold).
inline std::pair<double, std::vector<double>> loss_and_weight_gradient(
    const LossSpec& spec, const WeightVector& weights, const FlatInstance& instance) {
  validate_flat_instance(instance);
  const ScoreVector scores = score_flat(weights, instance);
  const LossEval eval = evaluate_loss(spec, scores, instance.gold_label);
  std::vector<double> weight_gradient(weights.size(), 0.0);
  for (std::size_t y = 0; y < scores.size(); ++y) {
    const double g = eval.score_gradient[y];
    if (g != 0.0) instance.features_per_label[y].add_to(g, weight_gradient);
  }
  return {eval.value, std::move(weight_gradient)};
}

}  // namespace hybrid
