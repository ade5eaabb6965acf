#include "abstain/density.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace abstain {
namespace {

std::vector<std::vector<Eigen::Index>> group_rows(const IntVector& classes, int num_classes) {
    std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(num_classes));
    for (Eigen::Index i = 0; i < classes.size(); ++i) {
        const int c = classes(i);
        require(c >= 0 && c < num_classes, "class id out of range");
        groups[static_cast<std::size_t>(c)].push_back(i);
    }
    std::string missing;
    for (int c = 0; c < num_classes; ++c)
        if (groups[static_cast<std::size_t>(c)].empty())
            missing += (missing.empty() ? "" : ", ") + std::to_string(c);
    if (!missing.empty()) fail(ErrorCode::degenerate, "classes absent from train: " + missing);
    return groups;
}

void check_dim(Eigen::Index got, int want) {
    if (got != want)
        fail(ErrorCode::invalid_argument, "embedding dimension " + std::to_string(got) +
                                              " does not match model dimension " + std::to_string(want));
}

} // namespace

IntVector density_classes(const LabeledSplit& split, int* num_classes) {
    if (split.task == Task::multiclass) {
        *num_classes = split.num_classes();
        return split.labels;
    }
    *num_classes = 1;
    return IntVector::Zero(static_cast<Eigen::Index>(split.size()));
}

MdModel fit_md(const Matrix& embeddings, const IntVector& classes, int num_classes) {
    require(embeddings.rows() == classes.size(), "embedding / class count mismatch");
    require(embeddings.cols() >= 1, "embeddings need at least one dimension");
    const auto groups = group_rows(classes, num_classes);
    const auto d = embeddings.cols();

    MdModel m;
    m.centroids.resize(num_classes, d);
    Matrix pooled = Matrix::Zero(d, d);
    for (int c = 0; c < num_classes; ++c) {
        const auto& rows = groups[static_cast<std::size_t>(c)];
        if (rows.size() < 2)
            fail(ErrorCode::degenerate, "class " + std::to_string(c) + " has fewer than 2 train embeddings");
        const Matrix x = embeddings(rows, Eigen::all);
        const Vector mu = row_mean(x);
        m.centroids.row(c) = mu.transpose();
        pooled += scatter(x, mu);
    }
    const auto dof = embeddings.rows() - num_classes;
    pooled /= static_cast<double>(dof);
    const auto p = regularized_precision(pooled);
    m.precision = p.precision;
    m.ridge = p.ridge;
    return m;
}

MdModel fit_md(const LabeledSplit& train) {
    require(train.has_embeddings(), "MD needs train embeddings");
    int c = 0;
    const IntVector classes = density_classes(train, &c);
    return fit_md(train.embeddings, classes, c);
}

double score_md(const Eigen::Ref<const Vector>& e, const MdModel& model) {
    check_dim(e.size(), model.dim());
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < model.num_classes(); ++c)
        best = std::min(best, squared_mahalanobis(e, model.centroids.row(c).transpose(), model.precision));
    return std::max(best, 0.0);
}

DduModel DduModel::from_parameters(const Matrix& means, const std::vector<Matrix>& covariances,
                                   const Vector& priors) {
    require(static_cast<Eigen::Index>(covariances.size()) == means.rows(), "one covariance per class");
    require(priors.size() == means.rows(), "one prior per class");
    DduModel m;
    m.means = means;
    m.priors = priors;
    m.log_dets.resize(means.rows());
    for (std::size_t c = 0; c < covariances.size(); ++c) {
        require(covariances[c].rows() == means.cols() && covariances[c].cols() == means.cols(),
                "covariance shape mismatch");
        const auto p = regularized_precision(covariances[c]);
        m.precisions.push_back(p.precision);
        m.log_dets(static_cast<Eigen::Index>(c)) = p.log_det;
        m.ridges.push_back(p.ridge);
    }
    return m;
}

DduModel fit_ddu(const Matrix& embeddings, const IntVector& classes, int num_classes) {
    require(embeddings.rows() == classes.size(), "embedding / class count mismatch");
    const auto groups = group_rows(classes, num_classes);
    const auto d = embeddings.cols();
    Matrix means(num_classes, d);
    std::vector<Matrix> covs;
    Vector priors(num_classes);
    for (int c = 0; c < num_classes; ++c) {
        const auto& rows = groups[static_cast<std::size_t>(c)];
        const Matrix x = embeddings(rows, Eigen::all);
        const Vector mu = row_mean(x);
        means.row(c) = mu.transpose();
        const double denom = static_cast<double>(std::max<std::size_t>(rows.size() - 1, 1));
        covs.push_back(scatter(x, mu) / denom);
        priors(c) = static_cast<double>(rows.size()) / static_cast<double>(embeddings.rows());
    }
    return DduModel::from_parameters(means, covs, priors);
}

DduModel fit_ddu(const LabeledSplit& train) {
    require(train.has_embeddings(), "DDU needs train embeddings");
    int c = 0;
    const IntVector classes = density_classes(train, &c);
    return fit_ddu(train.embeddings, classes, c);
}

Vector ddu_joint_log_density(const Eigen::Ref<const Vector>& e, const DduModel& model) {
    check_dim(e.size(), model.dim());
    const double d = static_cast<double>(model.dim());
    const double log_two_pi = std::log(2.0 * std::numbers::pi);
    Vector out(model.num_classes());
    for (int c = 0; c < model.num_classes(); ++c) {
        const double m2 = squared_mahalanobis(e, model.means.row(c).transpose(),
                                              model.precisions[static_cast<std::size_t>(c)]);
        const double prior = model.priors(c);
        out(c) = prior > 0.0 ? -0.5 * (d * log_two_pi + model.log_dets(c) + m2) + std::log(prior)
                             : -std::numeric_limits<double>::infinity();
    }
    return out;
}

double score_ddu(const Eigen::Ref<const Vector>& e, const DduModel& model) {
    const Vector joint = ddu_joint_log_density(e, model);
    const double top = joint.maxCoeff();
    if (!std::isfinite(top)) return std::numeric_limits<double>::infinity();
    const double lse = top + std::log((joint.array() - top).exp().sum());
    return -lse;
}

} // namespace abstain
