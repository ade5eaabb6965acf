#pragma once

// Aggregators over T stochastic forward passes (rows) of C class
// probabilities (columns).

#include "abstain/core.hpp"

#include <algorithm>
#include <cmath>

namespace abstain {

struct McAggregate {
    Vector mean_probs;
    Vector variance; // unbiased, T - 1 denominator; empty when T < 2
};

template <typename Derived>
void check_mc_tensor(const Eigen::MatrixBase<Derived>& t) {
    require(t.rows() >= 1, "MC tensor needs at least one pass");
    require(t.cols() >= 2, "MC tensor needs at least 2 classes");
}

/// Column means taken relative to the first pass, so a tensor of identical
/// rows reproduces that row exactly.
template <typename Derived>
Vector pass_mean(const Eigen::MatrixBase<Derived>& t) {
    const Vector first = t.row(0).transpose().template cast<double>();
    return first + ((t.template cast<double>().rowwise() - first.transpose()).colwise().mean()).transpose();
}

template <typename Derived>
McAggregate aggregate_mc(const Eigen::MatrixBase<Derived>& t) {
    check_mc_tensor(t);
    McAggregate out;
    out.mean_probs = pass_mean(t);
    if (t.rows() >= 2) {
        const auto centered = t.rowwise() - out.mean_probs.transpose();
        out.variance = centered.colwise().squaredNorm().transpose() / static_cast<double>(t.rows() - 1);
    }
    return out;
}

/// Sampled maximum probability: 1 - max of the pass-averaged probabilities.
template <typename Derived>
double score_smp(const Eigen::MatrixBase<Derived>& t) {
    check_mc_tensor(t);
    return 1.0 - pass_mean(t).maxCoeff();
}

/// Probability variance: class-averaged unbiased variance across passes.
template <typename Derived>
double score_pv(const Eigen::MatrixBase<Derived>& t) {
    if (t.rows() < 2) fail(ErrorCode::invalid_argument, "variance needs T >= 2");
    return aggregate_mc(t).variance.mean();
}

constexpr double kBaldClamp = 1e-12;

/// Mutual information between the prediction and the dropout mask: entropy
/// of the mean distribution minus the mean per-pass entropy, clipped at 0.
template <typename Derived>
double score_bald(const Eigen::MatrixBase<Derived>& t) {
    check_mc_tensor(t);
    const auto xlogx = [](double p) {
        const double q = std::clamp(p, kBaldClamp, 1.0);
        return q * std::log(q);
    };
    const auto row_entropy = [&](const auto& row) {
        double h = 0.0;
        for (Eigen::Index c = 0; c < row.size(); ++c) h -= xlogx(static_cast<double>(row(c)));
        return h;
    };
    const double entropy_of_mean = row_entropy(pass_mean(t));
    const double first = row_entropy(t.row(0));
    double spread = 0.0;
    for (Eigen::Index r = 0; r < t.rows(); ++r) spread += row_entropy(t.row(r)) - first;
    const double mean_entropy = first + spread / static_cast<double>(t.rows());
    return std::max(0.0, entropy_of_mean - mean_entropy);
}

} // namespace abstain
