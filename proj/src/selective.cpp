#include "abstain/selective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace abstain {

std::string_view to_string(CurveMode mode) {
    switch (mode) {
    case CurveMode::risk: return "risk";
    case CurveMode::accuracy: return "accuracy";
    case CurveMode::f1_micro: return "f1_micro";
    }
    return "unknown";
}

std::string_view to_string(AucSpan span) { return span == AucSpan::full ? "full" : "first50"; }

AucSpan parse_span(std::string_view s) {
    if (s == "full") return AucSpan::full;
    if (s == "first50" || s == "first_50") return AucSpan::first_50;
    fail(ErrorCode::usage, "unknown span '" + std::string(s) + "' (expected full or first50)");
}

double RejectionCurve::value_at(double c) const {
    require(!coverage.empty(), "empty rejection curve");
    if (c >= coverage.front()) return value.front();
    if (c <= coverage.back()) return value.back();
    for (std::size_t i = 0; i + 1 < coverage.size(); ++i) {
        const double hi = coverage[i], lo = coverage[i + 1];
        if (c <= hi && c >= lo) {
            const double t = (hi - c) / (hi - lo);
            return value[i] + t * (value[i + 1] - value[i]);
        }
    }
    return value.back();
}

double curve_metric(const UnitCounts& p, CurveMode mode) {
    switch (mode) {
    case CurveMode::risk:
        return p.total() == 0 ? 0.0 : static_cast<double>(p.errors()) / p.total();
    case CurveMode::accuracy:
        return p.total() == 0 ? 1.0 : static_cast<double>(p.tp + p.tn) / p.total();
    case CurveMode::f1_micro: {
        const int denom = 2 * p.tp + p.fp + p.fn;
        return denom == 0 ? 1.0 : 2.0 * p.tp / denom;
    }
    }
    return 0.0;
}

std::vector<std::size_t> rejection_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

RejectionCurve curve_from_order(std::span<const std::size_t> order, std::span<const UnitCounts> units,
                                CurveMode mode) {
    require(order.size() == units.size(), "rejection order length mismatch");
    require(!units.empty(), "rejection curve needs at least one unit");
    const std::size_t n = units.size();
    RejectionCurve curve;
    curve.mode = mode;
    curve.coverage.resize(n);
    curve.value.resize(n);
    // Walk from the last-rejected unit backwards, accumulating what remains.
    UnitCounts remaining;
    for (std::size_t k = n; k-- > 0;) {
        const UnitCounts& u = units[order[k]];
        remaining.tp += u.tp;
        remaining.fp += u.fp;
        remaining.fn += u.fn;
        remaining.tn += u.tn;
        curve.coverage[k] = static_cast<double>(n - k) / static_cast<double>(n);
        curve.value[k] = curve_metric(remaining, mode);
    }
    return curve;
}

RejectionCurve build_curve(std::span<const double> scores, std::span<const UnitCounts> units, CurveMode mode) {
    if (scores.size() != units.size())
        fail(ErrorCode::invalid_argument, "score / unit length mismatch (" + std::to_string(scores.size()) +
                                              " vs " + std::to_string(units.size()) + ")");
    const auto order = rejection_order(scores);
    return curve_from_order(order, units, mode);
}

RejectionCurve build_risk_curve(std::span<const double> scores, std::span<const int> losses) {
    std::vector<UnitCounts> units;
    units.reserve(losses.size());
    for (int l : losses) units.push_back(unit_from_loss(l));
    return build_curve(scores, units, CurveMode::risk);
}

std::vector<std::size_t> oracle_order(std::span<const UnitCounts> units) {
    std::vector<std::size_t> order(units.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = units[a];
        const auto& y = units[b];
        if (x.errors() != y.errors()) return x.errors() > y.errors();
        if (x.tp != y.tp) return x.tp < y.tp;
        return x.fp > y.fp;
    });
    return order;
}

double auc(const RejectionCurve& curve, AucSpan span) {
    require(curve.size() >= 1, "AUC of an empty curve");
    const double lowest = curve.coverage.back();
    const double lower = span == AucSpan::first_50 ? std::max(0.5, lowest) : lowest;
    const double width = curve.coverage.front() - lower;
    if (width <= 0.0) return curve.value.front();
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const double hi = curve.coverage[i];
        double lo = curve.coverage[i + 1];
        if (hi <= lower) break;
        double v_lo = curve.value[i + 1];
        if (lo < lower) {
            const double t = (hi - lower) / (hi - lo);
            v_lo = curve.value[i] + t * (curve.value[i + 1] - curve.value[i]);
            lo = lower;
        }
        area += 0.5 * (hi - lo) * (curve.value[i] + v_lo);
    }
    return area / width;
}

NormalizedAuc normalize_auc(double raw, double rand, double oracle, AucSpan span) {
    NormalizedAuc out;
    out.raw = raw;
    out.rand = rand;
    out.oracle = oracle;
    out.span = span;
    if (std::abs(oracle - rand) <= 1e-15) {
        out.degenerate = true;
        out.normalized = std::numeric_limits<double>::quiet_NaN();
    } else {
        out.normalized = (raw - rand) / (oracle - rand);
    }
    return out;
}

NormalizedAuc normalized_auc(std::span<const double> scores, std::span<const UnitCounts> units, CurveMode mode,
                             AucSpan span) {
    const RejectionCurve curve = build_curve(scores, units, mode);
    const auto order = oracle_order(units);
    const RejectionCurve oracle = curve_from_order(order, units, mode);
    // Random rejection keeps the full-set metric in expectation.
    const double rand = curve.value.front();
    return normalize_auc(auc(curve, span), rand, auc(oracle, span), span);
}

std::vector<UnitCounts> pair_units(const Matrix& probs, const IntMatrix& truth, double threshold) {
    require(probs.rows() == truth.rows() && probs.cols() == truth.cols(), "probability / truth shape mismatch");
    std::vector<UnitCounts> units;
    units.reserve(static_cast<std::size_t>(probs.size()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i)
        for (Eigen::Index l = 0; l < probs.cols(); ++l)
            units.push_back(unit_from_pair(probs(i, l) >= threshold ? 1 : 0, truth(i, l)));
    return units;
}

std::vector<UnitCounts> instance_units(const Matrix& probs, const IntMatrix& truth, double threshold) {
    require(probs.rows() == truth.rows() && probs.cols() == truth.cols(), "probability / truth shape mismatch");
    std::vector<UnitCounts> units(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        UnitCounts& u = units[static_cast<std::size_t>(i)];
        for (Eigen::Index l = 0; l < probs.cols(); ++l) {
            const UnitCounts p = unit_from_pair(probs(i, l) >= threshold ? 1 : 0, truth(i, l));
            u.tp += p.tp;
            u.fp += p.fp;
            u.fn += p.fn;
            u.tn += p.tn;
        }
    }
    return units;
}

LabelwiseCurves evaluate_labelwise(const Matrix& pair_scores, const Matrix& probs, const IntMatrix& truth) {
    if (pair_scores.rows() != probs.rows() || pair_scores.cols() != probs.cols())
        fail(ErrorCode::invalid_argument, "label-wise score matrix shape mismatch");
    const auto units = pair_units(probs, truth);
    std::vector<double> scores;
    scores.reserve(units.size());
    for (Eigen::Index i = 0; i < pair_scores.rows(); ++i)
        for (Eigen::Index l = 0; l < pair_scores.cols(); ++l) scores.push_back(pair_scores(i, l));
    const auto order = rejection_order(scores);
    return {curve_from_order(order, units, CurveMode::accuracy), curve_from_order(order, units, CurveMode::f1_micro)};
}

RejectionCurve evaluate_instancewise_multilabel(std::span<const double> instance_scores, const Matrix& probs,
                                                const IntMatrix& truth, CurveMode mode) {
    const auto units = instance_units(probs, truth);
    return build_curve(instance_scores, units, mode);
}

} // namespace abstain
