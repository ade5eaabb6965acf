#pragma once

// Rejection curves and their areas. Units (instances or instance-label
// pairs) are rejected most-uncertain first; ties leave in original index
// order. A curve has one point per rejected unit, from full coverage down to
// a single retained unit.

#include "abstain/core.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace abstain {

enum class CurveMode { risk, accuracy, f1_micro };
enum class AucSpan { full, first_50 };

std::string_view to_string(CurveMode mode);
std::string_view to_string(AucSpan span);
AucSpan parse_span(std::string_view s);

/// Confusion counts carried by one rejectable unit.
struct UnitCounts {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    int tn = 0;

    int errors() const { return fp + fn; }
    int total() const { return tp + fp + fn + tn; }
};

/// Unit with a single 0/1 loss (multiclass instance).
inline UnitCounts unit_from_loss(int loss) {
    UnitCounts u;
    (loss ? u.fp : u.tp) = 1;
    return u;
}

/// Unit for one binary (prediction, truth) pair.
inline UnitCounts unit_from_pair(int predicted, int truth) {
    UnitCounts u;
    if (predicted && truth) u.tp = 1;
    else if (predicted) u.fp = 1;
    else if (truth) u.fn = 1;
    else u.tn = 1;
    return u;
}

struct RejectionCurve {
    CurveMode mode = CurveMode::risk;
    std::vector<double> coverage; // strictly decreasing from 1
    std::vector<double> value;

    std::size_t size() const { return coverage.size(); }
    /// Linear interpolation between neighbouring points.
    double value_at(double coverage) const;
};

/// Metric over a pooled set of counts. F1 with no positives at all is 1.
double curve_metric(const UnitCounts& pooled, CurveMode mode);

/// Indices sorted by descending score, ties by ascending index.
std::vector<std::size_t> rejection_order(std::span<const double> scores);

/// Curve obtained by rejecting units in the given order.
RejectionCurve curve_from_order(std::span<const std::size_t> order, std::span<const UnitCounts> units,
                                CurveMode mode);

RejectionCurve build_curve(std::span<const double> scores, std::span<const UnitCounts> units, CurveMode mode);

/// Risk curve from per-unit 0/1 losses.
RejectionCurve build_risk_curve(std::span<const double> scores, std::span<const int> losses);

/// Best-possible rejection order: most errors first; then fewer true
/// positives; false positives before false negatives; then index.
std::vector<std::size_t> oracle_order(std::span<const UnitCounts> units);

/// Trapezoidal area over coverage divided by the covered span, so a flat
/// curve at v has area v. first_50 keeps coverage in [0.5, 1].
double auc(const RejectionCurve& curve, AucSpan span);

struct NormalizedAuc {
    double raw = 0.0;
    double rand = 0.0;
    double oracle = 0.0;
    double normalized = 0.0; // NaN when degenerate
    AucSpan span = AucSpan::full;
    bool degenerate = false; // oracle and random areas coincide (e.g. no errors)
};

/// (raw - rand) / (oracle - rand).
NormalizedAuc normalize_auc(double raw, double rand, double oracle, AucSpan span);

/// Builds the score curve plus the random (flat at the full-set metric) and
/// oracle references and normalizes.
NormalizedAuc normalized_auc(std::span<const double> scores, std::span<const UnitCounts> units, CurveMode mode,
                             AucSpan span);

struct LabelwiseCurves {
    RejectionCurve accuracy;
    RejectionCurve f1;
};

/// Units are (instance, label) pairs in row-major order.
std::vector<UnitCounts> pair_units(const Matrix& probs, const IntMatrix& truth, double threshold = 0.5);
/// Units are instances carrying the summed counts of their labels.
std::vector<UnitCounts> instance_units(const Matrix& probs, const IntMatrix& truth, double threshold = 0.5);

/// Label-wise selective prediction: `pair_scores` is n x L, one score per
/// (instance, label); pairs are pooled and rejected globally.
LabelwiseCurves evaluate_labelwise(const Matrix& pair_scores, const Matrix& probs, const IntMatrix& truth);

/// Instance-wise selective prediction on multilabel data: whole instances are
/// rejected by `instance_scores`; metrics pool the remaining label pairs.
RejectionCurve evaluate_instancewise_multilabel(std::span<const double> instance_scores, const Matrix& probs,
                                                const IntMatrix& truth, CurveMode mode);

} // namespace abstain
