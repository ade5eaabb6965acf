#pragma once

// Density scorers fit on training embeddings: Mahalanobis distance (MD),
// robust density estimation (RDE: RBF kernel PCA + per-class MCD), a
// one-Gaussian-per-class mixture (DDU) and the Nadaraya-Watson based
// nonparametric epistemic score (NUQ).

#include "abstain/core.hpp"
#include "abstain/linalg.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace abstain {

/// Class ids used to fit the class-conditional density scorers. Multiclass
/// splits use their labels; multilabel splits pool every row into class 0.
IntVector density_classes(const LabeledSplit& split, int* num_classes);

// -- Mahalanobis distance ---------------------------------------------------

struct MdModel {
    Matrix centroids;   // C x d
    Matrix precision;   // d x d, shared
    double ridge = 0.0; // > 0 when the pooled covariance was regularized

    int dim() const { return static_cast<int>(centroids.cols()); }
    int num_classes() const { return static_cast<int>(centroids.rows()); }
};

/// Class centroids plus the pooled within-class covariance (denominator n - C).
MdModel fit_md(const Matrix& embeddings, const IntVector& classes, int num_classes);
MdModel fit_md(const LabeledSplit& train);

/// Squared Mahalanobis distance to the closest centroid.
double score_md(const Eigen::Ref<const Vector>& e, const MdModel& model);

// -- Deep deterministic uncertainty (GMM, one component per class) ----------

struct DduModel {
    Matrix means;                  // C x d
    std::vector<Matrix> precisions;
    Vector log_dets;               // log det of each (regularized) covariance
    Vector priors;                 // training label frequencies
    std::vector<double> ridges;

    int dim() const { return static_cast<int>(means.cols()); }
    int num_classes() const { return static_cast<int>(means.rows()); }

    /// Builds a model from explicit means, covariances and priors.
    static DduModel from_parameters(const Matrix& means, const std::vector<Matrix>& covariances,
                                    const Vector& priors);
};

DduModel fit_ddu(const Matrix& embeddings, const IntVector& classes, int num_classes);
DduModel fit_ddu(const LabeledSplit& train);

/// Per-class log N(e; mu_c, Sigma_c) + log p(c).
Vector ddu_joint_log_density(const Eigen::Ref<const Vector>& e, const DduModel& model);

/// Negative log mixture density (log-sum-exp over classes).
double score_ddu(const Eigen::Ref<const Vector>& e, const DduModel& model);

// -- Robust density estimation ---------------------------------------------

/// RBF kernel PCA fit on a (possibly subsampled) support set.
struct KernelPca {
    Matrix support;        // m x d
    double gamma = 1.0;    // k(x, y) = exp(-gamma |x - y|^2)
    Matrix coefficients;   // m x k, eigenvectors scaled by 1 / sqrt(eigenvalue)
    Vector eigenvalues;    // k leading eigenvalues of the centered kernel
    Vector column_means;   // m, column means of the uncentered kernel
    double grand_mean = 0.0;

    int components() const { return static_cast<int>(coefficients.cols()); }
    int dim() const { return static_cast<int>(support.cols()); }

    Vector project(const Eigen::Ref<const Vector>& x) const;
    Matrix project_rows(const Matrix& x) const;
};

/// Median of the pairwise Euclidean distances between the rows of x.
double median_pairwise_distance(const Matrix& x);

/// Kernel PCA with RBF width gamma = 1 / (2 median^2). `components` = 0 keeps
/// every numerically positive component.
KernelPca fit_kernel_pca(const Matrix& x, int components);

struct McdResult {
    Vector location;
    Matrix covariance;            // covariance of the selected subset (h - 1 denominator)
    Matrix precision;
    double log_det = 0.0;         // log det of `covariance` (+ ridge when regularized)
    double ridge = 0.0;
    std::vector<std::size_t> subset; // sorted row indices of the h-subset
    int iterations = 0;

    bool regularized() const { return ridge > 0.0; }
};

struct McdOptions {
    double fraction = 0.75;
    int starts = 200;
    int keep_best = 10;
    int max_iterations = 100;
    double tolerance = 1e-9; // on the change of log det between C-steps
    std::uint64_t seed = 0;
};

/// h with fraction * n clamped to [ceil((n + k + 1) / 2), n].
std::size_t mcd_subset_size(std::size_t n, std::size_t k, double fraction);

/// FAST-MCD: random (k + 1)-subset starts refined by concentration steps.
McdResult fast_mcd(const Matrix& x, const McdOptions& options = {});

struct RdeOptions {
    int components = 0;        // 0 = min(64, n - 2, smallest class - 2)
    double mcd_fraction = 0.75;
    std::size_t support_cap = 800;
    int mcd_starts = 200;
    std::uint64_t seed = 0;
};

struct RdeModel {
    KernelPca projection;
    Matrix centroids;               // C x k (MCD locations)
    std::vector<Matrix> precisions; // per class, k x k
    std::vector<double> ridges;

    int components() const { return projection.components(); }
    int dim() const { return projection.dim(); }
    int num_classes() const { return static_cast<int>(centroids.rows()); }
};

RdeModel fit_rde(const Matrix& embeddings, const IntVector& classes, int num_classes,
                 const RdeOptions& options = {});
RdeModel fit_rde(const LabeledSplit& train, const RdeOptions& options = {});

double score_rde(const Eigen::Ref<const Vector>& e, const RdeModel& model);
/// Same score for a point already in the projected space.
double score_rde_projected(const Eigen::Ref<const Vector>& z, const RdeModel& model);

// -- Nonparametric uncertainty quantification ------------------------------

class NuqModel {
public:
    NuqModel() = default;
    /// `targets` holds one 0/1 indicator column per class (one-hot labels for
    /// multiclass, truth bits for multilabel).
    NuqModel(Matrix train, Matrix targets, double bandwidth);

    const Matrix& train() const { return train_; }
    const Matrix& targets() const { return targets_; }
    double bandwidth() const { return bandwidth_; }
    /// h^d / (2 sqrt(pi)).
    double kernel_constant() const { return kernel_constant_; }
    std::size_t size() const { return static_cast<std::size_t>(train_.rows()); }
    int dim() const { return static_cast<int>(train_.cols()); }

    void set_bandwidth(double h);

private:
    Matrix train_;
    Matrix targets_;
    double bandwidth_ = 1.0;
    double kernel_constant_ = 0.0;
};

double nuq_kernel_constant(double bandwidth, int dim);

/// Median pairwise distance / sqrt(2), over at most the first 2000 rows.
double nuq_auto_bandwidth(const Matrix& train);

/// Bandwidth `h`, or the automatic rule when empty.
NuqModel fit_nuq(const LabeledSplit& train, std::optional<double> h = std::nullopt);
NuqModel fit_nuq(const Matrix& embeddings, const Matrix& targets, std::optional<double> h = std::nullopt);

struct NuqEvaluation {
    double density = 0.0;   // RBF kernel density estimate
    Vector class_probs;     // Nadaraya-Watson estimates
    double tau_sq = 0.0;
    double score = 0.0;     // 2 sqrt(2/pi) tau, or +inf on underflow
    bool underflow = false;
};

/// Densities below this are reported as underflow.
inline constexpr double kNuqDensityFloor = 1e-300;

NuqEvaluation evaluate_nuq(const Eigen::Ref<const Vector>& e, const NuqModel& model);
double score_nuq(const Eigen::Ref<const Vector>& e, const NuqModel& model);

} // namespace abstain
