#include "abstain/synth.hpp"

#include <algorithm>
#include <cmath>

namespace abstain {
namespace {

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

Matrix orthonormal_directions(int count, int dim, Rng& rng) {
    Matrix dirs(count, dim);
    for (int i = 0; i < count; ++i) {
        Vector v(dim);
        for (int j = 0; j < dim; ++j) v(j) = rng.normal();
        for (int k = 0; k < std::min(i, dim); ++k) v -= v.dot(dirs.row(k).transpose()) * dirs.row(k).transpose();
        const double norm = v.norm();
        dirs.row(i) = (norm > 1e-12 ? v / norm : v).transpose();
    }
    return dirs;
}

Vector softmax(const Vector& z) {
    const Vector e = (z.array() - z.maxCoeff()).exp().matrix();
    return e / e.sum();
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Float-rounded probability row. For two classes the smaller entry is taken
// as 1 - larger, which is exact in binary floating point.
Vector quantize_probabilities(const Vector& p) {
    Vector q(p.size());
    if (p.size() == 2) {
        const Eigen::Index hi = p(0) >= p(1) ? 0 : 1;
        const float top = static_cast<float>(p(hi));
        q(hi) = top;
        q(1 - hi) = static_cast<double>(1.0f - top);
        return q;
    }
    for (Eigen::Index i = 0; i < p.size(); ++i) q(i) = to_float(p(i));
    return q;
}

struct Standardizer {
    Vector mean;
    Vector scale;

    explicit Standardizer(const Matrix& x) {
        mean = x.colwise().mean().transpose();
        scale = ((x.rowwise() - mean.transpose()).colwise().squaredNorm() / static_cast<double>(x.rows()))
                    .transpose()
                    .cwiseSqrt();
        for (Eigen::Index j = 0; j < scale.size(); ++j)
            if (!(scale(j) > 1e-12)) scale(j) = 1.0;
    }

    // Standardized features with a trailing bias column.
    Matrix design(const Matrix& x) const {
        Matrix out(x.rows(), x.cols() + 1);
        out.leftCols(x.cols()) = (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
        out.col(x.cols()).setOnes();
        return out;
    }
};

// Multinomial logistic regression by full-batch gradient descent.
Matrix fit_softmax_probe(const Matrix& design, const IntVector& labels, int classes) {
    const auto n = design.rows();
    Matrix w = Matrix::Zero(design.cols(), classes);
    Matrix onehot = Matrix::Zero(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels(i)) = 1.0;
    constexpr double lr = 0.5;
    constexpr double l2 = 1e-4;
    for (int it = 0; it < 500; ++it) {
        Matrix logits = design * w;
        for (Eigen::Index i = 0; i < n; ++i) logits.row(i) = softmax(logits.row(i).transpose()).transpose();
        const Matrix grad = design.transpose() * (logits - onehot) / static_cast<double>(n) + l2 * w;
        w -= lr * grad;
    }
    return w;
}

// Independent per-label logistic regressions.
Matrix fit_sigmoid_probes(const Matrix& design, const IntMatrix& bits) {
    const auto n = design.rows();
    Matrix w = Matrix::Zero(design.cols(), bits.cols());
    const Matrix y = bits.cast<double>();
    constexpr double lr = 0.5;
    constexpr double l2 = 1e-4;
    for (int it = 0; it < 500; ++it) {
        Matrix p = (design * w).unaryExpr([](double z) { return sigmoid(z); });
        const Matrix grad = design.transpose() * (p - y) / static_cast<double>(n) + l2 * w;
        w -= lr * grad;
    }
    return w;
}

struct Geometry {
    Matrix centroids;  // C x d
    Vector ood_center;
    Matrix label_weights; // L x d, multilabel truth model
    Vector label_bias;
};

Geometry make_geometry(const SynthSpec& spec, Rng& rng) {
    Geometry g;
    const int c = spec.num_classes;
    const int d = spec.dim;
    const Matrix dirs = orthonormal_directions(c + 1, d, rng);
    // Orthonormal directions scaled so neighbouring centroids sit `spacing` apart.
    g.centroids = dirs.topRows(c) * (spec.spacing / std::sqrt(2.0));
    const Vector centre = g.centroids.colwise().mean().transpose();
    Vector outward = g.centroids.row(0).transpose() - centre;
    if (outward.norm() < 1e-12) outward = dirs.row(0).transpose();
    outward.normalize();
    Vector side = dirs.row(c % std::max(d, 1)).transpose();
    side -= side.dot(outward) * outward;
    if (side.norm() > 1e-12) side.normalize();
    // Beyond class 0 and off to the side: far from every cluster, yet on the
    // confident side of the class-0 decision region.
    g.ood_center = g.centroids.row(0).transpose() +
                   spec.ood_displacement * spec.spacing * (0.8 * outward + 0.6 * side).normalized();

    g.label_weights.resize(spec.num_labels, d);
    g.label_bias.resize(spec.num_labels);
    for (int l = 0; l < spec.num_labels; ++l) {
        for (int j = 0; j < d; ++j) g.label_weights(l, j) = rng.normal() * 1.5;
        g.label_bias(l) = -1.0 + 0.5 * rng.normal();
    }
    return g;
}

struct RawSplit {
    Matrix x;
    IntVector labels;
    IntMatrix bits;
    std::vector<std::uint8_t> ood;
};

RawSplit sample_split(const SynthSpec& spec, const Geometry& g, std::size_t n, bool with_ood, Rng& rng) {
    const int c = spec.num_classes;
    const int d = spec.dim;
    RawSplit s;
    s.x.resize(static_cast<Eigen::Index>(n), d);
    s.labels.resize(static_cast<Eigen::Index>(n));
    s.ood.assign(n, 0);
    const std::size_t n_ood = with_ood ? ood_count(n, spec.ood_fraction) : 0;

    // OOD rows get random positions in the split.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    for (std::size_t k = 0; k < n_ood; ++k) s.ood[idx[k]] = 1;

    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        Vector centre;
        int y = static_cast<int>(rng.index(static_cast<std::size_t>(c)));
        centre = s.ood[i] ? g.ood_center : Vector(g.centroids.row(y).transpose());
        for (int j = 0; j < d; ++j) s.x(r, j) = to_float(centre(j) + rng.normal());
        if (!s.ood[i] && spec.task == Task::multiclass && c >= 2) {
            // Boundary band: flip to the competing class at the overlap rate.
            const Vector dist = (g.centroids.rowwise() - s.x.row(r)).rowwise().norm();
            int first = 0, second = 1;
            if (dist(second) < dist(first)) std::swap(first, second);
            for (int k = 2; k < c; ++k) {
                if (dist(k) < dist(first)) {
                    second = first;
                    first = k;
                } else if (dist(k) < dist(second)) {
                    second = k;
                }
            }
            const bool in_band = dist(second) - dist(first) < spec.band_width;
            if (in_band && rng.bernoulli(spec.overlap)) y = (y == first) ? second : first;
        }
        s.labels(r) = y;
    }
    if (spec.task == Task::multilabel) {
        s.bits.resize(static_cast<Eigen::Index>(n), spec.num_labels);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            for (int l = 0; l < spec.num_labels; ++l) {
                const double p = s.ood[i] ? 0.3 : sigmoid(g.label_weights.row(l).dot(s.x.row(r)) / std::sqrt(d) * 2.0 +
                                                         g.label_bias(l));
                s.bits(r, l) = rng.bernoulli(p) ? 1 : 0;
            }
        }
    }
    return s;
}

LabeledSplit finish_split(const SynthSpec& spec, RawSplit raw, SplitRole role, const Standardizer& stdz,
                          const Matrix& weights, Rng& rng) {
    LabeledSplit out;
    out.role = role;
    out.task = spec.task;
    out.embeddings = std::move(raw.x);
    out.ood = std::move(raw.ood);
    const Matrix logits = stdz.design(out.embeddings) * weights;
    const auto n = logits.rows();
    const auto k = logits.cols();
    out.probs.resize(n, k);
    out.mc.reserve(static_cast<std::size_t>(n));
    const auto to_probs = [&](const Vector& z) {
        if (spec.task == Task::multiclass) return quantize_probabilities(softmax(z));
        Vector p(z.size());
        for (Eigen::Index j = 0; j < z.size(); ++j) p(j) = to_float(sigmoid(z(j)));
        return p;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector z = logits.row(i).transpose();
        out.probs.row(i) = to_probs(z).transpose();
        Matrix t(spec.mc_passes, k);
        for (int p = 0; p < spec.mc_passes; ++p) {
            Vector zt = z;
            for (Eigen::Index j = 0; j < k; ++j) zt(j) += spec.mc_noise * rng.normal();
            t.row(p) = to_probs(zt).transpose();
        }
        out.mc.push_back(std::move(t));
    }
    if (spec.task == Task::multiclass) {
        out.labels = std::move(raw.labels);
    } else {
        out.label_bits = std::move(raw.bits);
    }
    return out;
}

} // namespace

void SynthSpec::validate() const {
    require(num_classes >= 2, "synthetic spec needs at least 2 classes");
    require(dim >= 1, "synthetic spec needs dim >= 1");
    require(spacing > 0.0, "centroid spacing must be > 0");
    require(overlap >= 0.0 && overlap <= 1.0, "overlap fraction must lie in [0, 1]");
    require(ood_fraction >= 0.0 && ood_fraction <= 1.0, "ood fraction must lie in [0, 1]");
    require(band_width >= 0.0, "band width must be >= 0");
    require(ood_displacement >= 0.0, "ood displacement must be >= 0");
    require(mc_passes >= 1, "mc_passes must be >= 1");
    require(mc_noise >= 0.0, "mc_noise must be >= 0");
    if (task == Task::multilabel) require(num_labels >= 1, "multilabel spec needs at least one label");
    const auto c = static_cast<std::size_t>(num_classes);
    if (n_train < c || n_validation < c || n_test < c)
        fail(ErrorCode::invalid_argument, "infeasible spec: every split needs at least C rows");
}

const LabeledSplit& SynthDataset::split(SplitRole role) const {
    switch (role) {
    case SplitRole::train: return train;
    case SplitRole::validation: return validation;
    case SplitRole::test: return test;
    }
    return test;
}

std::size_t ood_count(std::size_t n, double fraction) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

SynthDataset generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const Geometry g = make_geometry(spec, rng);

    RawSplit train = sample_split(spec, g, spec.n_train, false, rng);
    RawSplit validation = sample_split(spec, g, spec.n_validation, true, rng);
    RawSplit test = sample_split(spec, g, spec.n_test, true, rng);

    const Standardizer stdz(train.x);
    const Matrix design = stdz.design(train.x);
    const Matrix weights = spec.task == Task::multiclass ? fit_softmax_probe(design, train.labels, spec.num_classes)
                                                         : fit_sigmoid_probes(design, train.bits);

    SynthDataset ds;
    ds.spec = spec;
    ds.train = finish_split(spec, std::move(train), SplitRole::train, stdz, weights, rng);
    ds.validation = finish_split(spec, std::move(validation), SplitRole::validation, stdz, weights, rng);
    ds.test = finish_split(spec, std::move(test), SplitRole::test, stdz, weights, rng);
    return ds;
}

} // namespace abstain
