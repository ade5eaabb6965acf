#include "abstain/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace abstain {
namespace {

struct SubsetFit {
    std::vector<std::size_t> subset;
    Vector location;
    Matrix covariance;
    Precision<double> precision;
};

SubsetFit fit_subset(const Matrix& x, std::vector<std::size_t> subset) {
    std::sort(subset.begin(), subset.end());
    SubsetFit f;
    const Matrix rows = x(subset, Eigen::all);
    f.location = row_mean(rows);
    const double denom = static_cast<double>(std::max<std::size_t>(subset.size() - 1, 1));
    f.covariance = scatter(rows, f.location) / denom;
    f.precision = regularized_precision(f.covariance);
    f.subset = std::move(subset);
    return f;
}

// One concentration step: the h rows closest to the current fit.
std::vector<std::size_t> concentrate(const Matrix& x, const SubsetFit& fit, std::size_t h) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<double> dist(n);
    const Matrix centered = x.rowwise() - fit.location.transpose();
    const Matrix projected = centered * fit.precision.precision;
    for (std::size_t i = 0; i < n; ++i)
        dist[i] = centered.row(static_cast<Eigen::Index>(i)).dot(projected.row(static_cast<Eigen::Index>(i)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    order.resize(h);
    return order;
}

bool lexicographic_less(const Matrix& x, Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (x(a, j) < x(b, j)) return true;
        if (x(a, j) > x(b, j)) return false;
    }
    return false;
}

double median_of(std::vector<double> v) {
    require(!v.empty(), "median of empty sample");
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

} // namespace

double median_pairwise_distance(const Matrix& x) {
    require(x.rows() >= 2, "pairwise distances need at least 2 rows");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(x.rows() * (x.rows() - 1) / 2));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).norm());
    return median_of(std::move(d));
}

KernelPca fit_kernel_pca(const Matrix& x, int components) {
    require(x.rows() >= 3, "kernel PCA needs at least 3 rows");
    require(components >= 0, "component count must be non-negative");
    KernelPca kp;
    kp.support = x;
    const double width = median_pairwise_distance(x);
    kp.gamma = width > 0.0 ? 1.0 / (2.0 * width * width) : 1.0;

    const Matrix k = (-kp.gamma * pairwise_squared_distances(x, x)).array().exp().matrix();
    kp.column_means = k.colwise().mean().transpose();
    kp.grand_mean = kp.column_means.mean();
    Matrix centered = k;
    centered.rowwise() -= kp.column_means.transpose();
    centered.colwise() -= kp.column_means;
    centered.array() += kp.grand_mean;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(centered);
    const Vector& values = eig.eigenvalues(); // ascending
    const double top = values(values.size() - 1);
    int available = 0;
    for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
        if (!(top > 0.0) || values(i) <= 1e-12 * top) break;
        ++available;
    }
    if (available == 0) fail(ErrorCode::degenerate, "kernel matrix has no positive component");
    if (components > available)
        fail(ErrorCode::invalid_argument, "requested " + std::to_string(components) +
                                              " kernel PCA components but only " + std::to_string(available) +
                                              " are feasible");
    const int keep = components == 0 ? available : components;
    kp.eigenvalues.resize(keep);
    kp.coefficients.resize(x.rows(), keep);
    for (int j = 0; j < keep; ++j) {
        const Eigen::Index src = values.size() - 1 - j;
        kp.eigenvalues(j) = values(src);
        Vector v = eig.eigenvectors().col(src);
        // Fix the sign so the largest-magnitude entry is positive.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        kp.coefficients.col(j) = v / std::sqrt(values(src));
    }
    return kp;
}

Vector KernelPca::project(const Eigen::Ref<const Vector>& x) const {
    require(x.size() == support.cols(), "embedding dimension does not match kernel PCA support");
    const Vector d2 = (support.rowwise() - x.transpose()).rowwise().squaredNorm();
    Vector kx = (-gamma * d2).array().exp().matrix();
    const double mean = kx.mean();
    kx -= column_means;
    kx.array() += grand_mean - mean;
    return coefficients.transpose() * kx;
}

Matrix KernelPca::project_rows(const Matrix& x) const {
    require(x.cols() == support.cols(), "embedding dimension does not match kernel PCA support");
    Matrix kx = (-gamma * pairwise_squared_distances(x, support)).array().exp().matrix();
    const Vector row_means = kx.rowwise().mean();
    kx.rowwise() -= column_means.transpose();
    kx.colwise() -= row_means;
    kx.array() += grand_mean;
    return kx * coefficients;
}

std::size_t mcd_subset_size(std::size_t n, std::size_t k, double fraction) {
    require(fraction > 0.0 && fraction <= 1.0, "MCD fraction must lie in (0, 1]");
    const std::size_t lower = (n + k + 2) / 2; // ceil((n + k + 1) / 2)
    const auto h = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return std::min(n, std::max(lower, h));
}

McdResult fast_mcd(const Matrix& x, const McdOptions& options) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto k = static_cast<std::size_t>(x.cols());
    require(k >= 1, "MCD needs at least one dimension");
    require(n >= k + 1, "MCD needs at least k + 1 rows");
    const std::size_t h = mcd_subset_size(n, k, options.fraction);

    Rng rng(options.seed);
    std::vector<SubsetFit> candidates;
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    const int starts = h == n ? 1 : std::max(1, options.starts);
    for (int s = 0; s < starts; ++s) {
        // Partial Fisher-Yates for a random (k + 1)-subset.
        for (std::size_t i = 0; i < k + 1; ++i) std::swap(pool[i], pool[i + rng.index(n - i)]);
        SubsetFit fit = fit_subset(x, std::vector<std::size_t>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k + 1)));
        for (int step = 0; step < 2; ++step) fit = fit_subset(x, concentrate(x, fit, h));
        candidates.push_back(std::move(fit));
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const SubsetFit& a, const SubsetFit& b) {
        return a.precision.log_det < b.precision.log_det;
    });
    // Drop duplicate subsets before refining.
    std::vector<SubsetFit> best;
    for (auto& c : candidates) {
        if (static_cast<int>(best.size()) >= options.keep_best) break;
        const bool seen = std::any_of(best.begin(), best.end(), [&](const SubsetFit& b) { return b.subset == c.subset; });
        if (!seen) best.push_back(std::move(c));
    }

    McdResult out;
    out.log_det = std::numeric_limits<double>::infinity();
    for (auto& fit : best) {
        int it = 0;
        for (; it < options.max_iterations; ++it) {
            SubsetFit next = fit_subset(x, concentrate(x, fit, h));
            const bool same = next.subset == fit.subset;
            const double change = std::abs(next.precision.log_det - fit.precision.log_det);
            const bool better = next.precision.log_det <= fit.precision.log_det;
            if (better) fit = std::move(next);
            if (same || !better || change < options.tolerance) break;
        }
        if (fit.precision.log_det < out.log_det) {
            out.location = fit.location;
            out.covariance = fit.covariance;
            out.precision = fit.precision.precision;
            out.log_det = fit.precision.log_det;
            out.ridge = fit.precision.ridge;
            out.subset = fit.subset;
            out.iterations = it + 2;
        }
    }
    return out;
}

RdeModel fit_rde(const Matrix& embeddings, const IntVector& classes, int num_classes,
                 const RdeOptions& options) {
    require(embeddings.rows() == classes.size(), "embedding / class count mismatch");
    const auto n = embeddings.rows();

    // Canonical row order so the fit does not depend on input order.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (lexicographic_less(embeddings, a, b)) return true;
        if (lexicographic_less(embeddings, b, a)) return false;
        return classes(a) < classes(b);
    });
    const Matrix x = embeddings(order, Eigen::all);
    const IntVector y = classes(order);

    std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(num_classes));
    for (Eigen::Index i = 0; i < n; ++i) {
        require(y(i) >= 0 && y(i) < num_classes, "class id out of range");
        groups[static_cast<std::size_t>(y(i))].push_back(i);
    }
    std::size_t smallest = std::numeric_limits<std::size_t>::max();
    for (int c = 0; c < num_classes; ++c) {
        if (groups[static_cast<std::size_t>(c)].empty())
            fail(ErrorCode::degenerate, "class " + std::to_string(c) + " absent from train");
        smallest = std::min(smallest, groups[static_cast<std::size_t>(c)].size());
    }

    std::vector<Eigen::Index> support_rows(static_cast<std::size_t>(n));
    std::iota(support_rows.begin(), support_rows.end(), Eigen::Index{0});
    if (static_cast<std::size_t>(n) > options.support_cap) {
        Rng rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
        rng.shuffle(support_rows);
        support_rows.resize(options.support_cap);
        std::sort(support_rows.begin(), support_rows.end());
    }
    const Matrix support = x(support_rows, Eigen::all);

    const long limit = std::min<long>(static_cast<long>(support.rows()) - 2, static_cast<long>(smallest) - 2);
    if (limit < 1) fail(ErrorCode::invalid_argument, "too few train rows per class for RDE");
    int k = options.components;
    if (k > limit)
        fail(ErrorCode::invalid_argument, "RDE component count " + std::to_string(k) +
                                              " larger than feasible (" + std::to_string(limit) + ")");
    KernelPca kp;
    if (k <= 0) {
        kp = fit_kernel_pca(support, 0);
        k = static_cast<int>(std::min<long>({64L, limit, static_cast<long>(kp.components())}));
        kp.coefficients.conservativeResize(Eigen::NoChange, k);
        kp.eigenvalues.conservativeResize(k);
    } else {
        kp = fit_kernel_pca(support, k);
    }

    const Matrix z = kp.project_rows(x);
    RdeModel m;
    m.projection = std::move(kp);
    m.centroids.resize(num_classes, k);
    for (int c = 0; c < num_classes; ++c) {
        McdOptions mo;
        mo.fraction = options.mcd_fraction;
        mo.starts = options.mcd_starts;
        mo.seed = options.seed + static_cast<std::uint64_t>(c);
        const McdResult r = fast_mcd(z(groups[static_cast<std::size_t>(c)], Eigen::all), mo);
        m.centroids.row(c) = r.location.transpose();
        m.precisions.push_back(r.precision);
        m.ridges.push_back(r.ridge);
    }
    return m;
}

RdeModel fit_rde(const LabeledSplit& train, const RdeOptions& options) {
    require(train.has_embeddings(), "RDE needs train embeddings");
    int c = 0;
    const IntVector classes = density_classes(train, &c);
    return fit_rde(train.embeddings, classes, c, options);
}

double score_rde_projected(const Eigen::Ref<const Vector>& z, const RdeModel& model) {
    require(z.size() == model.components(), "projected dimension mismatch");
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < model.num_classes(); ++c)
        best = std::min(best, squared_mahalanobis(z, model.centroids.row(c).transpose(),
                                                  model.precisions[static_cast<std::size_t>(c)]));
    return std::max(best, 0.0);
}

double score_rde(const Eigen::Ref<const Vector>& e, const RdeModel& model) {
    if (e.size() != model.dim())
        fail(ErrorCode::invalid_argument, "embedding dimension does not match RDE model");
    return score_rde_projected(model.projection.project(e), model);
}

} // namespace abstain
