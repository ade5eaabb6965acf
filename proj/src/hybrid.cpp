#include "abstain/hybrid.hpp"

#include <cmath>
#include <limits>

namespace abstain {

std::string_view to_string(HybridVariant v) { return v == HybridVariant::huq ? "huq" : "huq2"; }

HybridConfig HybridConfig::from_validation(HybridVariant variant, std::span<const double> u_a,
                                           std::span<const double> u_e, double alpha, double delta_min,
                                           double delta_max, int c) {
    require(u_a.size() == u_e.size(), "aleatoric / epistemic score length mismatch");
    require(!u_a.empty(), "hybrid calibration needs validation scores");
    require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
    HybridConfig cfg;
    cfg.variant = variant;
    cfg.alpha = alpha;
    cfg.delta_min = delta_min;
    cfg.delta_max = delta_max;
    cfg.c = c;
    cfg.n_validation = u_a.size();
    cfg.aleatoric = RankTable(std::vector<double>(u_a.begin(), u_a.end()));
    cfg.epistemic = RankTable(std::vector<double>(u_e.begin(), u_e.end()));
    std::vector<double> id;
    for (std::size_t i = 0; i < u_a.size(); ++i)
        if (u_e[i] <= delta_min) id.push_back(u_a[i]);
    cfg.aleatoric_id = RankTable(std::move(id));
    return cfg;
}

double score_huq(double u_a, double u_e, const HybridConfig& cfg) {
    if (!cfg.fitted()) fail(ErrorCode::invalid_argument, "hybrid config is not fitted");
    const double n1 = static_cast<double>(cfg.n_validation + 1);
    if (u_e > cfg.delta_min) {
        const double total = (1.0 - cfg.alpha) * static_cast<double>(cfg.epistemic(u_e)) +
                             cfg.alpha * static_cast<double>(cfg.aleatoric(u_a));
        return 2.0 * n1 + total;
    }
    if (u_a > cfg.delta_max) return n1 + static_cast<double>(cfg.aleatoric(u_a));
    return static_cast<double>(cfg.aleatoric_id(u_a));
}

double score_huq2(double u_a, double u_e, const HybridConfig& cfg) {
    if (!cfg.fitted()) fail(ErrorCode::invalid_argument, "hybrid config is not fitted");
    if (cfg.c < 1 || cfg.c > 3) fail(ErrorCode::invalid_argument, "HUQ-2 rate c must be 1, 2 or 3");
    const double scale = static_cast<double>(cfg.c) * static_cast<double>(cfg.n_validation);
    const double r_a = static_cast<double>(cfg.aleatoric(u_a));
    const double r_e = static_cast<double>(cfg.epistemic(u_e));
    const double l_of_a = 1.0 - r_a / scale;
    const double l_of_e = 1.0 - r_e / scale;
    return (1.0 - cfg.alpha) * r_e * r_e * l_of_a + cfg.alpha * r_a * r_a * l_of_e;
}

double score_hybrid(double u_a, double u_e, const HybridConfig& cfg) {
    return cfg.variant == HybridVariant::huq ? score_huq(u_a, u_e, cfg) : score_huq2(u_a, u_e, cfg);
}

HybridObjective curve_objective(std::vector<UnitCounts> units, CurveMode mode, AucSpan span) {
    return [units = std::move(units), mode, span](std::span<const double> scores) {
        const double area = auc(build_curve(scores, units, mode), span);
        return mode == CurveMode::risk ? area : -area;
    };
}

HybridFit fit_hybrid(std::span<const double> u_a, std::span<const double> u_e, HybridVariant variant,
                     const HybridObjective& objective) {
    require(u_a.size() == u_e.size(), "aleatoric / epistemic score length mismatch");
    if (u_a.size() < kMinCalibrationSize) fail(ErrorCode::data, "insufficient calibration data");
    const std::size_t n = u_a.size();
    const std::vector<double> a(u_a.begin(), u_a.end());
    const std::vector<double> e(u_e.begin(), u_e.end());

    HybridFit best;
    best.objective = std::numeric_limits<double>::infinity();
    std::vector<double> scores(n);
    const auto consider = [&](const HybridConfig& cfg) {
        for (std::size_t i = 0; i < n; ++i) scores[i] = score_hybrid(a[i], e[i], cfg);
        const double value = objective(scores);
        ++best.evaluated;
        if (value < best.objective) {
            best.objective = value;
            best.config = cfg;
        }
    };

    for (int step = 0; step <= kAlphaSteps; ++step) {
        const double alpha = static_cast<double>(step) / kAlphaSteps;
        if (variant == HybridVariant::huq) {
            for (double qmin : kDeltaMinQuantiles) {
                const double delta_min = quantile(e, qmin);
                for (double qmax : kDeltaMaxQuantiles) {
                    const double delta_max = quantile(a, qmax);
                    consider(HybridConfig::from_validation(variant, a, e, alpha, delta_min, delta_max, 1));
                }
            }
        } else {
            const double delta_min = quantile(e, 1.0);
            const double delta_max = quantile(a, 1.0);
            for (int c = 1; c <= 3; ++c)
                consider(HybridConfig::from_validation(variant, a, e, alpha, delta_min, delta_max, c));
        }
    }
    return best;
}

} // namespace abstain
