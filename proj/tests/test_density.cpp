#include "abstain/density.hpp"
#include "abstain/synth.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <numbers>

using namespace abstain;
using doctest::Approx;

namespace {

// Class 0: the four unit points around the origin; class 1: the same set
// shifted by (4, 0).
void diamond(Matrix& x, IntVector& y) {
    x.resize(8, 2);
    x << 1, 0, -1, 0, 0, 1, 0, -1, 5, 0, 3, 0, 4, 1, 4, -1;
    y.resize(8);
    y << 0, 0, 0, 0, 1, 1, 1, 1;
}

Matrix gaussian_cloud(int n, int d, double scale, Rng& rng, double offset = 0.0) {
    Matrix x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = offset + scale * rng.normal();
    return x;
}

} // namespace

TEST_SUITE("density_scorers") {

TEST_CASE("MD fit on the diamond fixture") {
    Matrix x;
    IntVector y;
    diamond(x, y);
    const auto m = fit_md(x, y, 2);
    CHECK(m.centroids.row(0).norm() == Approx(0.0));
    CHECK(m.centroids(1, 0) == Approx(4.0));
    CHECK(m.centroids(1, 1) == Approx(0.0));
    CHECK(m.ridge == 0.0);

    // Pooled covariance: each class scatters diag(2, 2); denominator n - C = 6.
    const double a = 4.0 / 6.0, b = 0.0, c = 0.0, d = 4.0 / 6.0;
    const double det = a * d - b * c;
    Matrix inv(2, 2);
    inv << d / det, -b / det, -c / det, a / det;
    CHECK((m.precision - inv).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("MD is invariant to duplicating the train set") {
    Matrix x;
    IntVector y;
    diamond(x, y);
    Matrix x2(16, 2);
    x2 << x, x;
    IntVector y2(16);
    y2 << y, y;
    const auto m = fit_md(x, y, 2);
    const auto m2 = fit_md(x2, y2, 2);
    CHECK(m.centroids == m2.centroids);
    // Same scatter per point; only the n - C denominator differs.
    const Matrix cov = m.precision.inverse() * 6.0;
    const Matrix cov2 = m2.precision.inverse() * 14.0 / 2.0;
    CHECK((cov - cov2).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("MD scores") {
    Matrix x;
    IntVector y;
    diamond(x, y);
    const auto m = fit_md(x, y, 2);
    CHECK(score_md(m.centroids.row(0).transpose(), m) == Approx(0.0));
    Vector mid(2);
    mid << 2, 0;
    const Vector d0 = mid - m.centroids.row(0).transpose();
    const Vector d1 = mid - m.centroids.row(1).transpose();
    CHECK(d0.dot(m.precision * d0) == Approx(d1.dot(m.precision * d1)));
    CHECK(score_md(mid, m) == Approx(d0.dot(m.precision * d0)));
    CHECK(score_md(mid, m) == Approx(6.0));

    Rng rng(2);
    for (int k = 0; k < 20; ++k) {
        Vector e(2);
        e << 3 * rng.normal(), 3 * rng.normal();
        double best = 1e300;
        for (int c = 0; c < 2; ++c) {
            double q = 0.0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    q += (e(i) - m.centroids(c, i)) * m.precision(i, j) * (e(j) - m.centroids(c, j));
            best = std::min(best, q);
        }
        CHECK(score_md(e, m) == Approx(best).epsilon(1e-12));
    }
    Vector wrong(3);
    wrong.setZero();
    CHECK_THROWS_AS(score_md(wrong, m), Error);
}

TEST_CASE("MD regularizes singular and reports missing classes") {
    Matrix same = Matrix::Ones(6, 3);
    IntVector y(6);
    y << 0, 0, 0, 1, 1, 1;
    const auto m = fit_md(same, y, 2);
    CHECK(m.ridge > 0.0);
    CHECK(m.precision.allFinite());

    IntVector only0 = IntVector::Zero(6);
    try {
        fit_md(same, only0, 2);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
}

TEST_CASE("DDU priors and covariances") {
    Matrix x;
    IntVector y;
    diamond(x, y);
    const auto m = fit_ddu(x, y, 2);
    CHECK(m.priors(0) == Approx(0.5));
    CHECK(m.priors(1) == Approx(0.5));
    // Per-class covariance: diag(2, 2) / (4 - 1).
    const Matrix cov = m.precisions[0].inverse();
    CHECK(cov(0, 0) == Approx(2.0 / 3.0));
    CHECK(cov(1, 1) == Approx(2.0 / 3.0));
    CHECK(std::abs(cov(0, 1)) < 1e-12);

    Rng rng(5);
    Matrix z = gaussian_cloud(100, 2, 1.0, rng);
    IntVector lab(100);
    for (int i = 0; i < 100; ++i) lab(i) = i < 80 ? 0 : 1;
    z.bottomRows(20).array() += 5.0;
    const auto m2 = fit_ddu(z, lab, 2);
    CHECK(m2.priors(0) == Approx(0.8));
    CHECK(m2.priors(1) == Approx(0.2));
}

TEST_CASE("DDU closed-form density") {
    const auto m = DduModel::from_parameters(Matrix::Zero(1, 2), {Matrix::Identity(2, 2)}, Vector::Ones(1));
    const Vector e = Vector::Zero(2);
    CHECK(std::exp(ddu_joint_log_density(e, m)(0)) == Approx(1.0 / (2.0 * std::numbers::pi)));
    CHECK(score_ddu(e, m) == Approx(1.8379).epsilon(1e-4));
    CHECK(score_ddu(e, m) == Approx(std::log(2.0 * std::numbers::pi)));

    double last = score_ddu(e, m);
    for (double r : {1.0, 2.0, 5.0, 20.0, 100.0}) {
        Vector far(2);
        far << r, -r;
        const double s = score_ddu(far, m);
        CHECK(s > last);
        last = s;
    }

    Vector half(2);
    half << 0.5, 0.5;
    const auto twin = DduModel::from_parameters(Matrix::Zero(2, 2), {Matrix::Identity(2, 2), Matrix::Identity(2, 2)},
                                                half);
    for (double r : {0.0, 1.0, 3.0}) {
        Vector p(2);
        p << r, 0.5 * r;
        CHECK(score_ddu(p, twin) == Approx(score_ddu(p, m)).epsilon(1e-12));
    }
}

TEST_CASE("fast MCD matches exhaustive search on small fixtures") {
    for (int n = 5; n <= 12; ++n) {
        Rng rng(static_cast<std::uint64_t>(n) * 31);
        Matrix x = gaussian_cloud(n, 2, 1.0, rng);
        x(0, 0) += 8.0;
        McdOptions o;
        o.seed = 9;
        const auto fast = fast_mcd(x, o);
        const int h = static_cast<int>(mcd_subset_size(static_cast<std::size_t>(n), 2, o.fraction));
        CHECK(fast.subset.size() == static_cast<std::size_t>(h));
        CHECK(fast.covariance.determinant() <= 1.05 * oracle::exhaustive_mcd_det(x, h));
    }
}

TEST_CASE("MCD resists outliers") {
    Rng rng(4);
    Matrix x(22, 2);
    x.topRows(20) = gaussian_cloud(20, 2, 0.1, rng);
    x.row(20) << 30, 30;
    x.row(21) << 31, 29;
    const Vector clean = x.topRows(20).colwise().mean().transpose();
    const Vector plain = x.colwise().mean().transpose();
    const auto r = fast_mcd(x, {});
    CHECK((r.location - clean).norm() < 0.1);
    CHECK((plain - clean).norm() > 0.5);
    CHECK(std::find(r.subset.begin(), r.subset.end(), 20u) == r.subset.end());
}

TEST_CASE("MCD on identical points is regularized") {
    const Matrix x = Matrix::Constant(10, 3, 2.5);
    const auto r = fast_mcd(x, {});
    CHECK(r.regularized());
    CHECK(r.precision.allFinite());
}

TEST_CASE("RDE scores") {
    SynthSpec spec;
    spec.n_train = 300;
    spec.n_validation = 30;
    spec.n_test = 200;
    spec.dim = 4;
    const auto ds = generate(spec);
    RdeOptions o;
    o.seed = 3;
    o.mcd_starts = 50;
    const auto m = fit_rde(ds.train, o);
    CHECK(m.components() >= 1);
    CHECK(m.components() <= 64);

    for (int c = 0; c < m.num_classes(); ++c)
        CHECK(score_rde_projected(m.centroids.row(c).transpose(), m) == Approx(0.0).epsilon(1e-6));

    std::vector<double> train_scores;
    for (Eigen::Index i = 0; i < ds.train.embeddings.rows(); ++i)
        train_scores.push_back(score_rde(ds.train.embeddings.row(i).transpose(), m));
    const Vector far = Vector::Constant(4, 40.0);
    CHECK(score_rde(far, m) > quantile(train_scores, 0.99));

    // Shuffled train rows give the same model.
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(ds.train.size()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Rng rng(1);
    rng.shuffle(perm);
    const Matrix xs = ds.train.embeddings(perm, Eigen::all);
    const IntVector ys = ds.train.labels(perm);
    const auto ms = fit_rde(xs, ys, 3, o);
    for (Eigen::Index i = 0; i < 20; ++i) {
        const Vector e = ds.test.embeddings.row(i).transpose();
        CHECK(score_rde(e, ms) == Approx(score_rde(e, m)).epsilon(1e-9));
    }

    RdeOptions too_many = o;
    too_many.components = 500;
    CHECK_THROWS_AS(fit_rde(ds.train, too_many), Error);
}

TEST_CASE("kernel PCA median heuristic") {
    Matrix x(4, 1);
    x << 0, 1, 3, 7;
    // Pairwise distances 1, 3, 7, 2, 6, 4: median (3 + 4) / 2.
    CHECK(median_pairwise_distance(x) == Approx(3.5));
    const auto kp = fit_kernel_pca(x, 0);
    CHECK(kp.gamma == Approx(1.0 / (2.0 * 3.5 * 3.5)));
}

TEST_CASE("NUQ kernel constant and bandwidth rule") {
    CHECK(nuq_kernel_constant(1.0, 2) == Approx(1.0 / (2.0 * std::sqrt(std::numbers::pi))));
    CHECK(nuq_kernel_constant(1.0, 2) == Approx(0.2821).epsilon(1e-4));
    CHECK(nuq_kernel_constant(2.0, 1) == Approx(1.0 / std::sqrt(std::numbers::pi)));
    Matrix x(3, 1);
    x << 0, 1, 3;
    // Distances 1, 3, 2: median 2.
    CHECK(nuq_auto_bandwidth(x) == Approx(2.0 / std::sqrt(2.0)));
}

TEST_CASE("NUQ matches the naive double loop") {
    Rng rng(12);
    const Matrix train = gaussian_cloud(5, 1, 1.0, rng);
    Matrix targets = Matrix::Zero(5, 2);
    for (int i = 0; i < 5; ++i) targets(i, i % 2) = 1.0;
    const auto m = fit_nuq(train, targets);
    for (double e : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
        Vector v(1);
        v << e;
        const auto slow = oracle::naive_nuq(v, train, targets, m.bandwidth());
        const auto fast = evaluate_nuq(v, m);
        CHECK(std::abs(fast.score - slow.score) <= 1e-10);
        CHECK(std::abs(fast.density - slow.density) <= 1e-10);
    }
}

TEST_CASE("NUQ with a single label is certain") {
    Rng rng(1);
    const Matrix train = gaussian_cloud(10, 2, 1.0, rng);
    Matrix targets = Matrix::Zero(10, 3);
    targets.col(1).setOnes();
    const auto m = fit_nuq(train, targets);
    CHECK(score_nuq(train.row(3).transpose(), m) == 0.0);
}

TEST_CASE("NUQ variance scales with the train size") {
    Rng rng(8);
    const Matrix train = gaussian_cloud(15, 2, 1.0, rng);
    Matrix targets = Matrix::Zero(15, 2);
    for (int i = 0; i < 15; ++i) targets(i, rng.index(2)) = 1.0;
    Matrix train2(30, 2), targets2(30, 2);
    train2 << train, train;
    targets2 << targets, targets;
    const auto m = fit_nuq(train, targets, 0.8);
    const auto m2 = fit_nuq(train2, targets2, 0.8);
    Vector e(2);
    e << 0.3, -0.2;
    const auto a = evaluate_nuq(e, m), b = evaluate_nuq(e, m2);
    CHECK(b.density == Approx(a.density).epsilon(1e-12));
    CHECK(b.tau_sq / a.tau_sq == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("NUQ flags density underflow") {
    Matrix train(3, 2);
    train << 0, 0, 1, 0, 0, 1;
    Matrix targets(3, 2);
    targets << 1, 0, 0, 1, 1, 0;
    const auto m = fit_nuq(train, targets, 0.05);
    Vector far(2);
    far << 100, 100;
    const auto r = evaluate_nuq(far, m);
    CHECK(r.underflow);
    CHECK(std::isinf(r.score));
    CHECK(r.score > 0);
}

TEST_CASE("multilabel splits pool every row into one density class") {
    SynthSpec spec;
    spec.task = Task::multilabel;
    spec.n_train = 200;
    spec.n_validation = 20;
    spec.n_test = 20;
    const auto ds = generate(spec);
    int c = 0;
    const IntVector cls = density_classes(ds.train, &c);
    CHECK(c == 1);
    CHECK(cls.isZero());
    const auto md = fit_md(ds.train);
    CHECK(md.num_classes() == 1);
    const auto nuq = fit_nuq(ds.train);
    CHECK(nuq.targets().cols() == spec.num_labels);
}

}
