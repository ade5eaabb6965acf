#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Each is the slow, obvious version of a library routine.

#include "abstain/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

namespace oracle {

using abstain::Matrix;
using abstain::Rng;
using abstain::Vector;

// Marsaglia-Tsang gamma variate, shape >= 1.
inline double gamma_variate(double shape, Rng& rng) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

inline std::vector<double> beta_sample(double a, double b, std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    for (auto& x : out) {
        const double g1 = gamma_variate(a, rng);
        const double g2 = gamma_variate(b, rng);
        x = g1 / (g1 + g2);
    }
    return out;
}

struct GridBeta {
    double alpha = 0.0;
    double gamma = 0.0;
};

// Exhaustive search of the Beta log-likelihood over [lo, hi]^2 in steps of `step`.
inline GridBeta beta_grid_mle(const std::vector<double>& x, double lo = 0.1, double hi = 20.0, double step = 0.01) {
    double sl = 0.0, sl1 = 0.0;
    for (double v : x) {
        sl += std::log(v);
        sl1 += std::log1p(-v);
    }
    sl /= static_cast<double>(x.size());
    sl1 /= static_cast<double>(x.size());
    const int steps = static_cast<int>(std::lround((hi - lo) / step));
    std::vector<double> lg(steps + 1);
    for (int i = 0; i <= steps; ++i) lg[i] = std::lgamma(lo + i * step);
    GridBeta best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i) {
        const double a = lo + i * step;
        for (int j = 0; j <= steps; ++j) {
            const double b = lo + j * step;
            const double ll = std::lgamma(a + b) - lg[i] - lg[j] + (a - 1.0) * sl + (b - 1.0) * sl1;
            if (ll > best_ll) {
                best_ll = ll;
                best = {a, b};
            }
        }
    }
    return best;
}

// Sample covariance (n - 1 denominator) of the listed rows.
inline Matrix subset_covariance(const Matrix& x, const std::vector<int>& rows) {
    const auto d = x.cols();
    Vector mu = Vector::Zero(d);
    for (int r : rows) mu += x.row(r).transpose();
    mu /= static_cast<double>(rows.size());
    Matrix s = Matrix::Zero(d, d);
    for (int r : rows) {
        const Vector c = x.row(r).transpose() - mu;
        s += c * c.transpose();
    }
    return s / static_cast<double>(rows.size() - 1);
}

// Smallest covariance determinant over every h-subset of the rows.
inline double exhaustive_mcd_det(const Matrix& x, int h) {
    const int n = static_cast<int>(x.rows());
    std::vector<bool> pick(static_cast<std::size_t>(n), false);
    std::fill(pick.begin(), pick.begin() + h, true);
    double best = std::numeric_limits<double>::infinity();
    do {
        std::vector<int> rows;
        for (int i = 0; i < n; ++i)
            if (pick[static_cast<std::size_t>(i)]) rows.push_back(i);
        best = std::min(best, subset_covariance(x, rows).determinant());
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

struct NaiveNuq {
    double density = 0.0;
    std::vector<double> probs;
    double score = 0.0;
};

// Direct double-loop evaluation of the kernel density, the Nadaraya-Watson
// class probabilities and the resulting 2 sqrt(2/pi) tau score.
inline NaiveNuq naive_nuq(const Vector& e, const Matrix& train, const Matrix& targets, double h) {
    const int n = static_cast<int>(train.rows());
    const int d = static_cast<int>(train.cols());
    const int k = static_cast<int>(targets.cols());
    const double norm = std::pow(2.0 * std::numbers::pi, d / 2.0) * std::pow(h, d);
    NaiveNuq out;
    out.probs.assign(static_cast<std::size_t>(k), 0.0);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += (e(j) - train(i, j)) * (e(j) - train(i, j));
        const double w = std::exp(-sq / (2.0 * h * h)) / norm;
        wsum += w;
        for (int c = 0; c < k; ++c) out.probs[static_cast<std::size_t>(c)] += w * targets(i, c);
    }
    out.density = wsum / n;
    for (auto& p : out.probs) p /= wsum;
    double max_var = 0.0;
    for (double p : out.probs) max_var = std::max(max_var, p * (1.0 - p));
    const double kernel_constant = std::pow(h, d) / (2.0 * std::sqrt(std::numbers::pi));
    const double tau_sq = kernel_constant / n * max_var / out.density;
    out.score = 2.0 * std::sqrt(2.0 / std::numbers::pi) * std::sqrt(tau_sq);
    return out;
}

// Kendall's tau between two score vectors (O(n^2)); a pair tied in both counts
// as concordant, so identical orderings give exactly 1.
inline double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    long long concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = (a[i] - a[j]) * (b[i] - b[j]);
            if (s > 0) ++concordant;
            else if (s < 0) ++discordant;
            else if (a[i] == a[j] && b[i] == b[j]) ++concordant; // tied in both
            else ++discordant;
        }
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return static_cast<double>(concordant - discordant) / pairs;
}

} // namespace oracle
