#include "abstain/baseline.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>
#include <limits>

namespace abstain {
namespace {

double digamma(double x) { return Eigen::numext::digamma(x); }
double trigamma(double x) { return Eigen::numext::polygamma(1.0, x); }

double clamp_unit(double x) { return std::clamp(x, kBetaClamp, 1.0 - kBetaClamp); }

double log_beta_fn(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Coarse-to-fine log-spaced grid over [1e-2, cap] for both shapes.
BetaFit grid_search(double s1, double s2) {
    double lo_a = std::log(1e-2), hi_a = std::log(kBetaShapeCap);
    double lo_b = lo_a, hi_b = hi_a;
    double best_a = 1.0, best_b = 1.0;
    double best = -std::numeric_limits<double>::infinity();
    constexpr int steps = 60;
    for (int round = 0; round < 6; ++round) {
        for (int i = 0; i <= steps; ++i) {
            const double a = std::exp(lo_a + (hi_a - lo_a) * i / steps);
            for (int j = 0; j <= steps; ++j) {
                const double b = std::exp(lo_b + (hi_b - lo_b) * j / steps);
                const double ll = beta_mean_log_likelihood(a, b, s1, s2);
                if (ll > best) {
                    best = ll;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        const double wa = (hi_a - lo_a) / steps * 2.0;
        const double wb = (hi_b - lo_b) / steps * 2.0;
        lo_a = std::log(best_a) - wa;
        hi_a = std::min(std::log(kBetaShapeCap), std::log(best_a) + wa);
        lo_b = std::log(best_b) - wb;
        hi_b = std::min(std::log(kBetaShapeCap), std::log(best_b) + wb);
    }
    BetaFit fit;
    fit.alpha = best_a;
    fit.gamma = best_b;
    fit.used_grid = true;
    fit.capped = best_a >= kBetaShapeCap * (1 - 1e-9) || best_b >= kBetaShapeCap * (1 - 1e-9);
    return fit;
}

} // namespace

double beta_mean_log_likelihood(double alpha, double gamma, double mean_log_x,
                                double mean_log_1mx) {
    return (alpha - 1.0) * mean_log_x + (gamma - 1.0) * mean_log_1mx - log_beta_fn(alpha, gamma);
}

double beta_log_pdf(double x, double alpha, double gamma) {
    x = clamp_unit(x);
    return (alpha - 1.0) * std::log(x) + (gamma - 1.0) * std::log1p(-x) - log_beta_fn(alpha, gamma);
}

BetaFit fit_beta_mle(std::span<const double> samples) {
    require(samples.size() >= 2, "Beta MLE needs at least 2 samples");
    const double n = static_cast<double>(samples.size());
    double s1 = 0.0, s2 = 0.0, mean = 0.0;
    for (double raw : samples) {
        const double x = clamp_unit(raw);
        s1 += std::log(x);
        s2 += std::log1p(-x);
        mean += x;
    }
    s1 /= n;
    s2 /= n;
    mean /= n;
    double var = 0.0;
    for (double raw : samples) {
        const double x = clamp_unit(raw);
        var += (x - mean) * (x - mean);
    }
    var /= n;

    BetaFit fit;
    const double common = var > 0.0 ? mean * (1.0 - mean) / var - 1.0 : kBetaShapeCap;
    if (var <= 0.0 || mean * common >= kBetaShapeCap || (1.0 - mean) * common >= kBetaShapeCap) {
        // Zero or near-zero spread: the likelihood grows without bound along
        // the constant-mean ray, so pin the larger shape at the cap.
        const double scale = kBetaShapeCap / std::max(mean, 1.0 - mean);
        fit.alpha = mean * scale;
        fit.gamma = (1.0 - mean) * scale;
        fit.capped = true;
        fit.converged = true;
        return fit;
    }
    double a = std::max(mean * common, 1e-2);
    double b = std::max((1.0 - mean) * common, 1e-2);

    double ll = beta_mean_log_likelihood(a, b, s1, s2);
    for (int it = 1; it <= 200; ++it) {
        fit.iterations = it;
        const double dab = digamma(a + b);
        const double g1 = dab - digamma(a) + s1;
        const double g2 = dab - digamma(b) + s2;
        const double tab = trigamma(a + b);
        const double h11 = tab - trigamma(a);
        const double h22 = tab - trigamma(b);
        const double h12 = tab;
        const double det = h11 * h22 - h12 * h12;
        if (!(det > 0.0)) break; // Hessian must be negative definite
        double da = -(h22 * g1 - h12 * g2) / det;
        double db = -(h11 * g2 - h12 * g1) / det;

        double step = 1.0;
        double na = a + da, nb = b + db, nll = -std::numeric_limits<double>::infinity();
        for (int halve = 0; halve < 60; ++halve) {
            na = a + step * da;
            nb = b + step * db;
            if (na > 0.0 && nb > 0.0) {
                nll = beta_mean_log_likelihood(na, nb, s1, s2);
                if (nll >= ll - 1e-15) break;
            }
            step *= 0.5;
        }
        if (!(na > 0.0 && nb > 0.0)) break;
        const double change = std::max(std::abs(na - a) / (1.0 + a), std::abs(nb - b) / (1.0 + b));
        a = na;
        b = nb;
        ll = nll;
        if (a >= kBetaShapeCap || b >= kBetaShapeCap) {
            const double scale = kBetaShapeCap / std::max(a, b);
            fit.alpha = a * scale;
            fit.gamma = b * scale;
            fit.capped = true;
            fit.converged = true;
            return fit;
        }
        if (change < 1e-8) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) {
        BetaFit g = grid_search(s1, s2);
        g.iterations = fit.iterations;
        return g;
    }
    fit.alpha = a;
    fit.gamma = b;
    return fit;
}

BetaModel fit_beta(std::span<const double> max_probs, std::span<const std::uint8_t> correct) {
    require(max_probs.size() == correct.size(), "max-prob / correctness length mismatch");
    std::vector<double> good, bad;
    for (std::size_t i = 0; i < max_probs.size(); ++i)
        (correct[i] ? good : bad).push_back(max_probs[i]);
    if (good.size() < 2 || bad.size() < 2)
        fail(ErrorCode::degenerate, "degenerate validation split");
    const BetaFit fc = fit_beta_mle(good);
    const BetaFit fi = fit_beta_mle(bad);
    BetaModel m;
    m.alpha_c = fc.alpha;
    m.gamma_c = fc.gamma;
    m.alpha_inc = fi.alpha;
    m.gamma_inc = fi.gamma;
    const double total = static_cast<double>(max_probs.size());
    m.p_correct = static_cast<double>(good.size()) / total;
    m.p_incorrect = 1.0 - m.p_correct;
    m.capped = fc.capped || fi.capped;
    return m;
}

BetaModel fit_beta(const LabeledSplit& validation) {
    std::vector<double> max_probs;
    std::vector<std::uint8_t> correct;
    const auto n = static_cast<Eigen::Index>(validation.size());
    if (validation.task == Task::multiclass) {
        for (Eigen::Index i = 0; i < n; ++i) {
            max_probs.push_back(validation.probs.row(i).maxCoeff());
            correct.push_back(validation.loss(static_cast<std::size_t>(i)) == 0);
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index l = 0; l < validation.probs.cols(); ++l) {
                const double p = validation.probs(i, l);
                max_probs.push_back(std::max(p, 1.0 - p));
                correct.push_back((p >= 0.5 ? 1 : 0) == validation.label_bits(i, l));
            }
        }
    }
    return fit_beta(max_probs, correct);
}

double score_beta_value(double max_prob, const BetaModel& model) {
    require(model.fitted(), "Beta model is not fitted");
    if (model.p_correct <= 0.0) return 1.0;
    if (model.p_incorrect <= 0.0) return 0.0;
    const double log_c = beta_log_pdf(max_prob, model.alpha_c, model.gamma_c) + std::log(model.p_correct);
    const double log_i = beta_log_pdf(max_prob, model.alpha_inc, model.gamma_inc) + std::log(model.p_incorrect);
    // posterior(correct) = 1 / (1 + exp(log_i - log_c))
    const double posterior = 1.0 / (1.0 + std::exp(log_i - log_c));
    return 1.0 - posterior;
}

} // namespace abstain
