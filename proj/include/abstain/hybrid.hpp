#pragma once

// Hybrid scorers combining an aleatoric score U_A (default: softmax
// response) with an epistemic score U_E (a density scorer) through ranks
// against the validation set.

#include "abstain/core.hpp"
#include "abstain/selective.hpp"

#include <array>
#include <functional>
#include <span>
#include <string_view>

namespace abstain {

enum class HybridVariant { huq, huq2 };

std::string_view to_string(HybridVariant v);

struct HybridConfig {
    HybridVariant variant = HybridVariant::huq;
    double alpha = 0.0;
    double delta_min = 0.0; // threshold on U_E; at or below is in-distribution
    double delta_max = 0.0; // threshold on U_A; above is ambiguous
    int c = 1;              // HUQ-2 weight decay rate
    std::size_t n_validation = 0;
    RankTable aleatoric;    // U_A over the validation set
    RankTable aleatoric_id; // U_A over validation rows with U_E <= delta_min
    RankTable epistemic;    // U_E over the validation set

    bool fitted() const { return n_validation > 0 && !aleatoric.empty() && !epistemic.empty(); }

    /// Builds the rank tables from validation scores for fixed hyperparameters.
    static HybridConfig from_validation(HybridVariant variant, std::span<const double> u_a,
                                        std::span<const double> u_e, double alpha, double delta_min,
                                        double delta_max, int c);
};

/// Three-region rule. Regions are offset so that clean in-distribution
/// scores < ambiguous in-distribution scores < out-of-distribution scores.
double score_huq(double u_a, double u_e, const HybridConfig& cfg);

/// (1 - alpha) R_E^2 l(U_A) + alpha R_A^2 l(U_E), l(u) = 1 - R(u) / (c N).
double score_huq2(double u_a, double u_e, const HybridConfig& cfg);

/// Dispatches on cfg.variant.
double score_hybrid(double u_a, double u_e, const HybridConfig& cfg);

/// Lower is better.
using HybridObjective = std::function<double(std::span<const double> scores)>;

/// Objective from per-unit counts: risk-curve area is minimized; accuracy and
/// F1 areas are maximized.
HybridObjective curve_objective(std::vector<UnitCounts> units, CurveMode mode, AucSpan span);

inline constexpr std::array<double, 8> kDeltaMinQuantiles{0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0};
inline constexpr std::array<double, 6> kDeltaMaxQuantiles{0.0, 0.5, 0.7, 0.8, 0.9, 0.95};
inline constexpr int kAlphaSteps = 20; // alpha in {0, 0.05, ..., 1}
inline constexpr std::size_t kMinCalibrationSize = 20;

struct HybridFit {
    HybridConfig config;
    double objective = 0.0;
    std::size_t evaluated = 0;
};

/// Grid search on validation scores. HUQ searches alpha x delta_min x
/// delta_max; HUQ-2 searches alpha x c. Ties keep the earliest grid point
/// (smallest alpha, then smallest quantiles, then smallest c).
HybridFit fit_hybrid(std::span<const double> u_a, std::span<const double> u_e, HybridVariant variant,
                     const HybridObjective& objective);

} // namespace abstain
