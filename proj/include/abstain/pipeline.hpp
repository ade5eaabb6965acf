#pragma once

// The four pipeline stages behind the command-line tool: generate a dataset,
// fit the density and Beta models, score a split (calibrating the hybrids on
// validation), and evaluate / report rejection curves.

#include "abstain/io.hpp"
#include "abstain/selective.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace abstain {

// -- scorer catalog ---------------------------------------------------------

enum class ScoreLevel { instance, label };

struct ScorerInfo {
    std::string name;
    ScoreLevel level = ScoreLevel::instance;
};

/// Every scorer name reachable for a task, in output order.
std::vector<ScorerInfo> scorer_catalog(Task task);

/// Resolves a comma-separated list ("all" expands to the catalog). Unknown
/// names raise a usage error listing the available ones.
std::vector<std::string> resolve_methods(const std::string& list, Task task);

// -- stages -----------------------------------------------------------------

struct GenSynthOptions {
    io::fs::path spec_path; // empty: defaults
    io::fs::path out_dir;
    std::optional<std::uint64_t> seed;
};

io::DatasetManifest run_gen_synth(const GenSynthOptions& o);

inline const std::vector<std::string> kFittableModels{"md", "rde", "ddu", "nuq", "beta"};

struct FitOptions {
    io::fs::path manifest;
    std::string methods = "md,rde,ddu,nuq,beta";
    io::fs::path out;
    std::optional<std::uint64_t> seed;
    int rde_components = 0;
    std::optional<double> nuq_bandwidth;
};

io::ModelBundle run_fit(const FitOptions& o);

enum class HybridObjectiveKind { rc_auc, fr_auc };

struct ScoreOptions {
    io::fs::path manifest;
    io::fs::path models;
    std::string methods = "all";
    SplitRole split = SplitRole::test;
    std::optional<SplitRole> calibrate = SplitRole::validation;
    std::optional<HybridObjectiveKind> objective; // default: rc_auc, fr_auc for multilabel
    AucSpan objective_span = AucSpan::first_50;
    io::fs::path out;
    std::optional<std::uint64_t> seed;
};

/// Writes the score table and, when hybrids are requested, the fitted
/// hybrid configurations to hybrid_configs.json next to it.
std::vector<io::ScoreRow> run_score(const ScoreOptions& o);

enum class EvalMode { instance, label };

struct EvaluateOptions {
    io::fs::path scores;
    io::fs::path manifest;
    SplitRole split = SplitRole::test;
    EvalMode mode = EvalMode::instance;
    std::vector<AucSpan> spans{AucSpan::first_50, AucSpan::full};
    io::fs::path out;
    io::fs::path curves_dir; // empty: no curve files
    std::optional<std::uint64_t> seed;
};

struct MetricEntry {
    std::string method;
    std::string metric; // rc_auc, accuracy_auc, fr_auc
    NormalizedAuc value;
};

std::vector<MetricEntry> run_evaluate(const EvaluateOptions& o);

struct ReportOptions {
    io::fs::path metrics;
    io::fs::path curves_dir; // empty: the "curves" directory next to metrics
    io::fs::path out;        // .html; a .svg of the curves is written alongside
    std::optional<std::uint64_t> seed;
};

void run_report(const ReportOptions& o);

// Report building blocks, exposed for testing.

std::string metric_name(CurveMode mode);

/// Rank of each value among `values` (higher is better), 0 for best, 1 for
/// second; NaN entries get no rank (-1).
std::vector<int> podium(const std::vector<double>& values);

std::string render_curves_svg(const std::vector<std::pair<std::string, RejectionCurve>>& curves,
                              const std::string& title);

} // namespace abstain
