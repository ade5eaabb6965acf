#include "abstain/mc.hpp"

#include "doctest.h"

#include <numbers>

using namespace abstain;
using doctest::Approx;

namespace {
Matrix mat(int rows, int cols, std::initializer_list<double> v) {
    Matrix m(rows, cols);
    auto it = v.begin();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = *it++;
    return m;
}
} // namespace

TEST_SUITE("mc_aggregators") {

TEST_CASE("sampled maximum probability") {
    CHECK(score_smp(mat(2, 2, {0.6, 0.4, 0.8, 0.2})) == Approx(0.3));
    CHECK(score_smp(mat(3, 2, {1, 0, 1, 0, 1, 0})) == 0.0);
    CHECK(score_smp(Matrix::Constant(4, 5, 0.2)) == Approx(0.8));
}

TEST_CASE("probability variance") {
    CHECK(score_pv(Matrix::Constant(6, 3, 1.0 / 3)) == 0.0);
    const Matrix m = mat(2, 2, {1, 0, 0, 1});
    CHECK(score_pv(m) == Approx(0.5));
    const Matrix t = mat(4, 3, {0.2, 0.3, 0.5, 0.6, 0.3, 0.1, 0.1, 0.1, 0.8, 0.4, 0.4, 0.2});
    Matrix swapped = t;
    swapped.row(0).swap(swapped.row(3));
    swapped.row(1).swap(swapped.row(2));
    CHECK(score_pv(swapped) == Approx(score_pv(t)).epsilon(1e-14));
    CHECK_THROWS_AS(score_pv(mat(1, 2, {0.5, 0.5})), Error);
}

TEST_CASE("BALD") {
    const Matrix dup = mat(1, 3, {0.2, 0.5, 0.3}).replicate(7, 1);
    CHECK(score_bald(dup) == 0.0);
    CHECK(score_pv(dup) == 0.0);
    CHECK(score_bald(mat(2, 2, {1, 0, 0, 1})) == Approx(std::numbers::ln2));
    for (int t : {1, 2, 9}) CHECK(score_bald(Matrix::Constant(t, 4, 0.25)) == Approx(0.0).epsilon(1e-15));
}

TEST_CASE("aggregate keeps the mean of identical passes exact") {
    const Matrix dup = mat(1, 3, {0.1, 0.7, 0.2}).replicate(20, 1);
    const auto agg = aggregate_mc(dup);
    CHECK(agg.mean_probs == dup.row(0).transpose());
    CHECK(agg.variance.isZero(0.0));
}

}
