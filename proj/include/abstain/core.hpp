#pragma once

// Shared types for the abstain toolkit: splits, rank tables, errors and the
// deterministic random stream. Every scorer in the library reports a single
// real where a larger value means a more uncertain prediction.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace abstain {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;
using IntMatrix = Eigen::MatrixXi;

enum class ErrorCode {
    invalid_argument,
    degenerate,
    usage,
    data,
    magic_mismatch,
    version_mismatch,
    checksum_mismatch,
    row_count_mismatch,
    io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);
inline void require(bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::invalid_argument, what);
}

enum class Task { multiclass, multilabel };
enum class SplitRole { train, validation, test };

std::string_view to_string(Task task);
std::string_view to_string(SplitRole role);
Task parse_task(std::string_view s);
SplitRole parse_split_role(std::string_view s);

constexpr double kSumTolerance = 1e-6;

/// Throws unless `p` is a valid probability vector for `task`: C >= 2, entries
/// in [0, 1], and (multiclass only) entries summing to one within 1e-6.
template <typename Derived>
void validate_probability(const Eigen::MatrixBase<Derived>& p, Task task) {
    require(p.size() >= 2, "probability vector needs at least 2 entries");
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double v = static_cast<double>(p(i));
        require(std::isfinite(v) && v >= 0.0 && v <= 1.0,
                "probability entry outside [0, 1]");
    }
    if (task == Task::multiclass) {
        require(std::abs(static_cast<double>(p.sum()) - 1.0) <= kSumTolerance,
                "multiclass probabilities must sum to 1");
    }
}

/// T x C matrix of per-pass class probabilities for one instance.
using McSampleTensor = Matrix;

/// A train, validation or test split. Rows of `embeddings`, `probs`, `mc` and
/// the label containers all refer to the same instance index.
struct LabeledSplit {
    SplitRole role = SplitRole::train;
    Task task = Task::multiclass;
    Matrix embeddings;              // n x d, may be empty
    Matrix probs;                   // n x C (softmax or per-label sigmoid)
    std::vector<McSampleTensor> mc; // n tensors of T x C, may be empty
    IntVector labels;               // multiclass: n class ids
    IntMatrix label_bits;           // multilabel: n x C truth bits
    std::vector<std::uint8_t> ood;  // generator ground truth, may be empty

    std::size_t size() const { return static_cast<std::size_t>(probs.rows()); }
    int num_classes() const { return static_cast<int>(probs.cols()); }
    int dim() const { return static_cast<int>(embeddings.cols()); }
    int mc_passes() const { return mc.empty() ? 0 : static_cast<int>(mc.front().rows()); }
    bool has_embeddings() const { return embeddings.size() > 0; }
    bool has_mc() const { return !mc.empty(); }

    /// Argmax prediction (multiclass).
    int predicted(std::size_t i) const;
    /// 1 if the argmax prediction disagrees with the label (multiclass).
    int loss(std::size_t i) const;

    /// Checks the shape and label invariants; throws Error on violation.
    void validate() const;
};

/// Sorted copy of one scorer's validation scores, queried by rank.
class RankTable {
public:
    RankTable() = default;
    explicit RankTable(std::vector<double> values);

    /// Number of entries strictly below `u`, plus one. Ties get the minimum rank.
    std::size_t operator()(double u) const;

    std::size_t size() const { return sorted_.size(); }
    bool empty() const { return sorted_.empty(); }
    const std::vector<double>& values() const { return sorted_; }

private:
    std::vector<double> sorted_;
};

/// Free-function form of RankTable lookup over an already sorted table.
std::size_t rank(double u, std::span<const double> sorted_table);

/// Deterministic random stream. The engine is mt19937_64 (fully specified by
/// the standard); the variate transforms are written out here because the
/// standard library distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

/// Worker count from ABSTAIN_THREADS (default: hardware concurrency, min 1).
unsigned thread_count();

/// Runs body(i) for i in [0, n) across thread_count() workers. Each index is
/// visited exactly once, so writing results by index keeps output ordered.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Order-statistic quantile (no interpolation): the ceil(q*n)-th smallest value,
/// with q = 0 mapped to the minimum.
double quantile(std::vector<double> values, double q);

} // namespace abstain
