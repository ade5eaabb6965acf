#include "abstain/hybrid.hpp"

#include "doctest.h"

#include <limits>

using namespace abstain;
using doctest::Approx;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::vector<UnitCounts> losses_to_units(const std::vector<int>& losses) {
    std::vector<UnitCounts> u;
    for (int l : losses) u.push_back(unit_from_loss(l));
    return u;
}

} // namespace

TEST_SUITE("hybrid") {

TEST_CASE("HUQ three-region fixture") {
    const std::vector<double> ua{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    const std::vector<double> ue{1, 2, 3, 4, 5, 6};
    const auto cfg = HybridConfig::from_validation(HybridVariant::huq, ua, ue, 0.5, 4.0, 0.25, 1);
    CHECK(score_huq(0.15, 2.0, cfg) == Approx(2.0));
    CHECK(score_huq(0.05, 1.0, cfg) == Approx(1.0));
    CHECK(score_huq(0.35, 3.0, cfg) == Approx(11.0));
    CHECK(score_huq(0.7, 4.0, cfg) == Approx(14.0));
    CHECK(score_huq(0.15, 4.5, cfg) == Approx(17.5));
    CHECK(score_huq(0.55, 10.0, cfg) == Approx(20.5));
    CHECK(score_hybrid(0.55, 10.0, cfg) == score_huq(0.55, 10.0, cfg));
}

TEST_CASE("HUQ-2 fixture") {
    const std::vector<double> ua{0.1, 0.2, 0.3, 0.4, 0.5};
    const std::vector<double> ue{5, 4, 3, 2, 1};
    const auto cfg = HybridConfig::from_validation(HybridVariant::huq2, ua, ue, 0.5, kInf, kInf, 2);
    CHECK(score_huq2(0.25, 2.5, cfg) == Approx(6.3));
    CHECK(score_huq2(0.05, 0.5, cfg) == Approx(0.9));
    CHECK(score_huq2(0.6, 0.5, cfg) == Approx(16.4));
    CHECK(score_huq2(0.3, 5.0, cfg) == Approx(11.0));
    CHECK(score_huq2(0.45, 6.0, cfg) == Approx(14.0));
}

TEST_CASE("HUQ-2 weight vanishes at rank c N") {
    const std::vector<double> v{1, 2, 3};
    const auto cfg = HybridConfig::from_validation(HybridVariant::huq2, v, v, 0.0, kInf, kInf, 1);
    // U_A of 2.5 has rank 3 = c N, so the U_E term is multiplied by zero.
    CHECK(score_huq2(2.5, 3.0, cfg) == Approx(0.0));

    auto bad = cfg;
    bad.c = 4;
    CHECK_THROWS_AS(score_huq2(1.0, 1.0, bad), Error);
    bad.c = 0;
    CHECK_THROWS_AS(score_huq2(1.0, 1.0, bad), Error);
}

TEST_CASE("HUQ reduces to a pure scorer at the grid corners") {
    Rng rng(3);
    std::vector<double> ua(50), ue(50), ta(200), te(200);
    for (auto& x : ua) x = rng.uniform();
    for (auto& x : ue) x = rng.normal();
    for (auto& x : ta) x = rng.uniform();
    for (auto& x : te) x = rng.normal();

    const auto pure_a = HybridConfig::from_validation(HybridVariant::huq, ua, ue, 1.0, kInf, -kInf, 1);
    const auto pure_e = HybridConfig::from_validation(HybridVariant::huq, ua, ue, 0.0, -kInf, 0.0, 1);
    for (std::size_t i = 0; i < ta.size(); ++i)
        for (std::size_t j = 0; j < ta.size(); ++j) {
            if (ta[i] < ta[j]) CHECK(score_huq(ta[i], te[i], pure_a) <= score_huq(ta[j], te[j], pure_a));
            if (te[i] < te[j]) CHECK(score_huq(ta[i], te[i], pure_e) <= score_huq(ta[j], te[j], pure_e));
        }
}

TEST_CASE("uncalibrated config is rejected") {
    HybridConfig cfg;
    CHECK_THROWS_AS(score_huq(0.1, 0.1, cfg), Error);
    CHECK_THROWS_AS(score_huq2(0.1, 0.1, cfg), Error);
}

TEST_CASE("fit_hybrid grid search") {
    Rng rng(11);
    const std::size_t n = 120;
    std::vector<double> ua(n), ue(n);
    std::vector<int> losses(n);
    // Errors come from two sources: high U_A (ambiguity) and high U_E (OOD).
    for (std::size_t i = 0; i < n; ++i) {
        ua[i] = rng.uniform();
        ue[i] = rng.uniform();
        const bool ambiguous = ua[i] > 0.8 && rng.uniform() < 0.8;
        const bool ood = ue[i] > 0.85;
        losses[i] = (ambiguous || ood) ? 1 : 0;
    }
    const auto objective = curve_objective(losses_to_units(losses), CurveMode::risk, AucSpan::full);

    SUBCASE("HUQ beats both pure scorers and every grid point") {
        const auto fit = fit_hybrid(ua, ue, HybridVariant::huq, objective);
        CHECK(fit.evaluated == (kAlphaSteps + 1) * kDeltaMinQuantiles.size() * kDeltaMaxQuantiles.size());
        CHECK(fit.objective <= objective(ua));
        CHECK(fit.objective <= objective(ue));
        CHECK(fit.objective < std::min(objective(ua), objective(ue)));

        std::vector<double> s(n);
        for (int step = 0; step <= kAlphaSteps; step += 5)
            for (double qmin : kDeltaMinQuantiles)
                for (double qmax : kDeltaMaxQuantiles) {
                    const auto cfg = HybridConfig::from_validation(
                        HybridVariant::huq, ua, ue, step / double(kAlphaSteps), quantile(ue, qmin), quantile(ua, qmax), 1);
                    for (std::size_t i = 0; i < n; ++i) s[i] = score_huq(ua[i], ue[i], cfg);
                    CHECK(fit.objective <= objective(s));
                }

        // The fitted config reproduces its objective.
        for (std::size_t i = 0; i < n; ++i) s[i] = score_hybrid(ua[i], ue[i], fit.config);
        CHECK(objective(s) == fit.objective);
    }

    SUBCASE("HUQ-2 searches alpha and c") {
        const auto fit = fit_hybrid(ua, ue, HybridVariant::huq2, objective);
        CHECK(fit.evaluated == (kAlphaSteps + 1) * 3);
        CHECK(fit.config.c >= 1);
        CHECK(fit.config.c <= 3);
    }

    SUBCASE("too few calibration rows") {
        std::vector<double> a(19, 0.5), e(19, 0.5);
        try {
            fit_hybrid(a, e, HybridVariant::huq, objective);
            FAIL("expected an error");
        } catch (const Error& err) {
            CHECK(err.code() == ErrorCode::data);
        }
    }
}

TEST_CASE("fit_hybrid matches a perfect aleatoric scorer") {
    const std::size_t n = 40;
    std::vector<double> ua(n), ue(n);
    std::vector<int> losses(n);
    Rng rng(2);
    for (std::size_t i = 0; i < n; ++i) {
        ua[i] = static_cast<double>(i) / n;
        ue[i] = rng.uniform();
        losses[i] = i >= 30 ? 1 : 0;
    }
    const auto objective = curve_objective(losses_to_units(losses), CurveMode::risk, AucSpan::full);
    const auto fit = fit_hybrid(ua, ue, HybridVariant::huq, objective);
    CHECK(fit.objective == Approx(objective(ua)).epsilon(1e-12));
}

}
