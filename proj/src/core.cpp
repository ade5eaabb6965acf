#include "abstain/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <thread>

namespace abstain {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::degenerate: return "degenerate input";
    case ErrorCode::usage: return "usage error";
    case ErrorCode::data: return "data error";
    case ErrorCode::magic_mismatch: return "magic mismatch";
    case ErrorCode::version_mismatch: return "version mismatch";
    case ErrorCode::checksum_mismatch: return "checksum mismatch";
    case ErrorCode::row_count_mismatch: return "row-count disagreement";
    case ErrorCode::io: return "i/o error";
    }
    return "unknown";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

std::string_view to_string(Task task) {
    return task == Task::multiclass ? "multiclass" : "multilabel";
}

std::string_view to_string(SplitRole role) {
    switch (role) {
    case SplitRole::train: return "train";
    case SplitRole::validation: return "validation";
    case SplitRole::test: return "test";
    }
    return "unknown";
}

Task parse_task(std::string_view s) {
    if (s == "multiclass") return Task::multiclass;
    if (s == "multilabel") return Task::multilabel;
    fail(ErrorCode::invalid_argument, "unknown task '" + std::string(s) + "'");
}

SplitRole parse_split_role(std::string_view s) {
    if (s == "train") return SplitRole::train;
    if (s == "validation") return SplitRole::validation;
    if (s == "test") return SplitRole::test;
    fail(ErrorCode::invalid_argument, "unknown split '" + std::string(s) + "'");
}

int LabeledSplit::predicted(std::size_t i) const {
    Eigen::Index best = 0;
    probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    return static_cast<int>(best);
}

int LabeledSplit::loss(std::size_t i) const {
    return predicted(i) != labels(static_cast<Eigen::Index>(i)) ? 1 : 0;
}

void LabeledSplit::validate() const {
    const auto n = probs.rows();
    const auto c = probs.cols();
    require(c >= 2, "split needs at least 2 classes");
    if (has_embeddings()) {
        require(embeddings.rows() == n, "embedding rows disagree with probability rows");
        require(embeddings.allFinite(), "embeddings must be finite");
    }
    if (task == Task::multiclass) {
        require(labels.size() == n, "label count disagrees with probability rows");
        for (Eigen::Index i = 0; i < n; ++i)
            require(labels(i) >= 0 && labels(i) < c, "class label out of range");
    } else {
        require(label_bits.rows() == n && label_bits.cols() == c,
                "label bit matrix shape disagrees with probabilities");
        require((label_bits.array() == 0 || label_bits.array() == 1).all(),
                "multilabel truth must be 0/1");
    }
    for (Eigen::Index i = 0; i < n; ++i) validate_probability(probs.row(i), task);
    if (has_mc()) {
        require(static_cast<Eigen::Index>(mc.size()) == n, "MC tensor count disagrees with rows");
        const auto t = mc.front().rows();
        for (const auto& m : mc) {
            require(m.rows() == t && m.cols() == c, "ragged MC tensor");
            for (Eigen::Index r = 0; r < t; ++r) validate_probability(m.row(r), task);
        }
    }
    if (!ood.empty()) require(static_cast<Eigen::Index>(ood.size()) == n, "ood flag count mismatch");
}

RankTable::RankTable(std::vector<double> values) : sorted_(std::move(values)) {
    std::sort(sorted_.begin(), sorted_.end());
}

std::size_t RankTable::operator()(double u) const { return rank(u, sorted_); }

std::size_t rank(double u, std::span<const double> sorted_table) {
    if (sorted_table.empty()) fail(ErrorCode::invalid_argument, "empty rank table");
    const auto it = std::lower_bound(sorted_table.begin(), sorted_table.end(), u);
    return static_cast<std::size_t>(it - sorted_table.begin()) + 1;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
    require(n > 0, "Rng::index needs n > 0");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
}

unsigned thread_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ABSTAIN_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const unsigned workers = std::min<std::size_t>(thread_count(), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double quantile(std::vector<double> values, double q) {
    require(!values.empty(), "quantile of empty sample");
    require(q >= 0.0 && q <= 1.0, "quantile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    if (k == 0) k = 1;
    return values[std::min(k, n) - 1];
}

} // namespace abstain
