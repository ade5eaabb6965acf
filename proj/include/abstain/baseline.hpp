#pragma once

// Output-distribution baselines: softmax response, label-wise maximum
// probability, top-two margin, entropy and the Bayes Beta posterior.

#include "abstain/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

namespace abstain {

template <typename Derived>
double score_sr(const Eigen::MatrixBase<Derived>& p) {
    validate_probability(p, Task::multiclass);
    return 1.0 - static_cast<double>(p.maxCoeff());
}

inline double score_mp(double p) {
    require(p >= 0.0 && p <= 1.0, "label probability outside [0, 1]");
    return 1.0 - std::max(p, 1.0 - p);
}

template <typename Derived>
double score_mp_labelwise(const Eigen::MatrixBase<Derived>& p, Eigen::Index label) {
    require(label >= 0 && label < p.size(), "label index out of range");
    return score_mp(static_cast<double>(p(label)));
}

/// Instance-level aggregate of the per-label MP uncertainties.
enum class LabelAggregation { mean, max };

template <typename Derived>
double score_mp_aggregate(const Eigen::MatrixBase<Derived>& p, LabelAggregation how) {
    require(p.size() >= 1, "empty label vector");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double u = score_mp(static_cast<double>(p(i)));
        acc = how == LabelAggregation::mean ? acc + u : std::max(acc, u);
    }
    return how == LabelAggregation::mean ? acc / static_cast<double>(p.size()) : acc;
}

/// One minus the gap between the two largest probabilities.
template <typename Derived>
double score_delta(const Eigen::MatrixBase<Derived>& p) {
    require(p.size() >= 2, "delta needs at least 2 classes");
    validate_probability(p, Task::multiclass);
    double first = -1.0;
    double second = -1.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double v = static_cast<double>(p(i));
        if (v > first) {
            second = first;
            first = v;
        } else if (v > second) {
            second = v;
        }
    }
    return 1.0 - (first - second);
}

/// Natural-log entropy with 0 log 0 = 0. No clamping, so for two classes the
/// value stays a strictly increasing function of 1 - max p.
template <typename Derived>
double score_entropy(const Eigen::MatrixBase<Derived>& p) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double v = static_cast<double>(p(i));
        require(v >= 0.0, "entropy of a negative probability");
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

constexpr double kBetaClamp = 1e-6;
constexpr double kBetaShapeCap = 1e4;

/// Beta(alpha, gamma) shape pair from maximum likelihood.
struct BetaFit {
    double alpha = 1.0;
    double gamma = 1.0;
    int iterations = 0;
    bool converged = false;
    bool capped = false;        // a shape hit kBetaShapeCap
    bool used_grid = false;     // Newton failed and the bounded grid search ran
};

/// Mean log-likelihood of Beta(alpha, gamma) given the sufficient statistics
/// mean(log x) and mean(log(1 - x)).
double beta_mean_log_likelihood(double alpha, double gamma, double mean_log_x,
                                double mean_log_1mx);

/// Newton iterations on the digamma score equations (tolerance 1e-8, at most
/// 200 steps) started from the method of moments. Values are clamped to
/// [1e-6, 1 - 1e-6]. Needs at least two samples.
BetaFit fit_beta_mle(std::span<const double> samples);

double beta_log_pdf(double x, double alpha, double gamma);

struct BetaModel {
    double alpha_c = 0.0;
    double gamma_c = 0.0;
    double alpha_inc = 0.0;
    double gamma_inc = 0.0;
    double p_correct = 0.0;
    double p_incorrect = 0.0;
    bool capped = false;

    bool fitted() const {
        return alpha_c > 0.0 && gamma_c > 0.0 && alpha_inc > 0.0 && gamma_inc > 0.0;
    }
};

/// Fits the correct/incorrect Beta pair on max-probability values.
BetaModel fit_beta(std::span<const double> max_probs, std::span<const std::uint8_t> correct);

/// Multiclass: max softmax probability vs argmax correctness. Multilabel:
/// one observation per (instance, label) pair, max(p, 1 - p) vs thresholded
/// correctness.
BetaModel fit_beta(const LabeledSplit& validation);

/// 1 - P(correct | max-prob) under the fitted model.
double score_beta_value(double max_prob, const BetaModel& model);

template <typename Derived>
double score_beta(const Eigen::MatrixBase<Derived>& p, const BetaModel& model) {
    return score_beta_value(static_cast<double>(p.maxCoeff()), model);
}

} // namespace abstain
