#include "abstain/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace abstain {

double nuq_kernel_constant(double bandwidth, int dim) {
    return std::pow(bandwidth, dim) / (2.0 * std::sqrt(std::numbers::pi));
}

NuqModel::NuqModel(Matrix train, Matrix targets, double bandwidth)
    : train_(std::move(train)), targets_(std::move(targets)) {
    require(train_.rows() >= 1, "NUQ needs a non-empty train set");
    require(targets_.rows() == train_.rows(), "NUQ target rows must match train rows");
    set_bandwidth(bandwidth);
}

void NuqModel::set_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorCode::invalid_argument, "NUQ bandwidth must be > 0");
    bandwidth_ = h;
    kernel_constant_ = nuq_kernel_constant(h, dim());
}

double nuq_auto_bandwidth(const Matrix& train) {
    const Eigen::Index rows = std::min<Eigen::Index>(train.rows(), 2000);
    const double median = median_pairwise_distance(train.topRows(rows));
    if (!(median > 0.0)) fail(ErrorCode::degenerate, "automatic NUQ bandwidth is zero (identical train points)");
    return median / std::sqrt(2.0);
}

NuqModel fit_nuq(const Matrix& embeddings, const Matrix& targets, std::optional<double> h) {
    require(embeddings.rows() >= 1, "NUQ needs a non-empty train set");
    if (h && !(*h > 0.0)) fail(ErrorCode::invalid_argument, "NUQ bandwidth must be > 0");
    const double bw = h ? *h : nuq_auto_bandwidth(embeddings);
    return NuqModel(embeddings, targets, bw);
}

NuqModel fit_nuq(const LabeledSplit& train, std::optional<double> h) {
    require(train.has_embeddings(), "NUQ needs train embeddings");
    Matrix targets;
    if (train.task == Task::multiclass) {
        targets = Matrix::Zero(static_cast<Eigen::Index>(train.size()), train.num_classes());
        for (Eigen::Index i = 0; i < targets.rows(); ++i) targets(i, train.labels(i)) = 1.0;
    } else {
        targets = train.label_bits.cast<double>();
    }
    return fit_nuq(train.embeddings, targets, h);
}

NuqEvaluation evaluate_nuq(const Eigen::Ref<const Vector>& e, const NuqModel& model) {
    if (e.size() != model.dim()) fail(ErrorCode::invalid_argument, "embedding dimension does not match NUQ model");
    const double h = model.bandwidth();
    const double d = static_cast<double>(model.dim());
    const double n = static_cast<double>(model.size());

    // log K_h(e - x_i) for the normalized Gaussian kernel.
    const Vector d2 = (model.train().rowwise() - e.transpose()).rowwise().squaredNorm();
    const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi) - d * std::log(h);
    const Vector log_k = (-d2 / (2.0 * h * h)).array() + log_norm;
    const double top = log_k.maxCoeff();
    const Vector w = (log_k.array() - top).exp().matrix();
    const double wsum = w.sum();

    NuqEvaluation out;
    const double log_density = top + std::log(wsum) - std::log(n);
    out.density = std::exp(log_density);
    out.class_probs = (model.targets().transpose() * w) / wsum;
    if (!(log_density >= std::log(kNuqDensityFloor))) {
        out.underflow = true;
        out.tau_sq = std::numeric_limits<double>::infinity();
        out.score = std::numeric_limits<double>::infinity();
        return out;
    }
    const double max_var = (out.class_probs.array() * (1.0 - out.class_probs.array())).maxCoeff();
    if (max_var <= 0.0) {
        out.tau_sq = 0.0;
        out.score = 0.0;
        return out;
    }
    out.tau_sq = std::exp(std::log(model.kernel_constant()) - std::log(n) + std::log(max_var) - log_density);
    out.score = 2.0 * std::sqrt(2.0 / std::numbers::pi) * std::sqrt(out.tau_sq);
    return out;
}

double score_nuq(const Eigen::Ref<const Vector>& e, const NuqModel& model) {
    return evaluate_nuq(e, model).score;
}

} // namespace abstain
