// abstain: selective-prediction benchmark pipeline.
//
//   abstain gen-synth --spec spec.json --out data/
//   abstain fit --manifest data/manifest.json --methods md,rde,ddu,nuq,beta --out models.bin
//   abstain score --manifest data/manifest.json --models models.bin --methods all --split test --out scores.csv
//   abstain evaluate --scores scores.csv --manifest data/manifest.json --mode instance --out metrics.json curves/
//   abstain report --metrics metrics.json --out report.html
//
// Exit status: 0 on success, 1 on usage errors, 2 on data errors.

#include "abstain/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

namespace {

using namespace abstain;

int exit_code(ErrorCode code) { return code == ErrorCode::usage ? 1 : 2; }

template <typename T>
std::optional<T> opt(const CLI::Option* o, const T& v) {
    return o->count() ? std::optional<T>(v) : std::nullopt;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective prediction with hybrid uncertainty scores"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::uint64_t seed = 0;

    GenSynthOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-synth", "Generate a synthetic dataset and its manifest");
    gen_cmd->add_option("--spec", gen.spec_path, "Synthetic spec (JSON); defaults when omitted")->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
    auto* gen_seed = gen_cmd->add_option("--seed", seed, "Overrides the spec seed");

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit density models on train and Beta on validation");
    fit_cmd->add_option("--manifest", fit.manifest, "Dataset manifest")->required();
    fit_cmd->add_option("--methods", fit.methods, "Comma-separated subset of md,rde,ddu,nuq,beta")
        ->capture_default_str();
    fit_cmd->add_option("--out", fit.out, "Model file")->required();
    fit_cmd->add_option("--rde-components", fit.rde_components, "Kernel PCA components for RDE (0 = auto)")
        ->check(CLI::NonNegativeNumber);
    double bandwidth = 0.0;
    auto* bw = fit_cmd->add_option("--nuq-bandwidth", bandwidth, "NUQ kernel bandwidth (default: median rule)")
                   ->check(CLI::PositiveNumber);
    auto* fit_seed = fit_cmd->add_option("--seed", seed, "Seed for RDE subsampling and MCD starts");

    ScoreOptions score;
    std::string score_split = "test", calibrate = "validation", objective, objective_span = "first50";
    auto* score_cmd = app.add_subcommand("score", "Score a split with the selected uncertainty scorers");
    score_cmd->add_option("--manifest", score.manifest, "Dataset manifest")->required();
    score_cmd->add_option("--models", score.models, "Fitted models from `fit`");
    score_cmd->add_option("--methods", score.methods, "Comma-separated scorer names or 'all'")->capture_default_str();
    score_cmd->add_option("--split", score_split, "Split to score")
        ->check(CLI::IsMember({"train", "validation", "test"}))
        ->capture_default_str();
    score_cmd->add_option("--calibrate", calibrate, "Split used to calibrate the hybrids ('none' disables)")
        ->check(CLI::IsMember({"train", "validation", "test", "none"}))
        ->capture_default_str();
    score_cmd->add_option("--objective", objective, "Hybrid calibration objective: rc_auc or fr_auc")
        ->check(CLI::IsMember({"rc_auc", "fr_auc"}));
    score_cmd->add_option("--objective-span", objective_span, "AUC span of the objective: first50 or full")
        ->check(CLI::IsMember({"first50", "full"}))
        ->capture_default_str();
    score_cmd->add_option("--out", score.out, "Score table (CSV)")->required();
    auto* score_seed = score_cmd->add_option("--seed", seed, "Accepted for uniformity; scoring is deterministic");

    EvaluateOptions eval;
    std::string eval_split = "test", mode = "instance", span = "both";
    io::fs::path curves_positional;
    auto* eval_cmd = app.add_subcommand("evaluate", "Build rejection curves and normalized AUCs");
    eval_cmd->add_option("--scores", eval.scores, "Score table from `score`")->required();
    eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest supplying the ground truth")->required();
    eval_cmd->add_option("--split", eval_split, "Split the scores refer to")
        ->check(CLI::IsMember({"train", "validation", "test"}))
        ->capture_default_str();
    eval_cmd->add_option("--mode", mode, "instance or label")
        ->check(CLI::IsMember({"instance", "label"}))
        ->capture_default_str();
    eval_cmd->add_option("--span", span, "full, first50 or both")
        ->check(CLI::IsMember({"full", "first50", "both"}))
        ->capture_default_str();
    eval_cmd->add_option("--out", eval.out, "Metrics file (JSON)")->required();
    eval_cmd->add_option("--curves", eval.curves_dir, "Directory for curve CSVs");
    eval_cmd->add_option("curves_dir", curves_positional, "Directory for curve CSVs (same as --curves)");
    auto* eval_seed = eval_cmd->add_option("--seed", seed, "Accepted for uniformity; evaluation is deterministic");

    ReportOptions report;
    auto* report_cmd = app.add_subcommand("report", "Render the comparison table and rejection-curve plots");
    report_cmd->add_option("--metrics", report.metrics, "Metrics from `evaluate`")->required();
    report_cmd->add_option("--curves", report.curves_dir, "Curve directory (default: curves/ next to the metrics)");
    report_cmd->add_option("--out", report.out, "HTML report; the curves also go to a .svg alongside")->required();
    auto* report_seed = report_cmd->add_option("--seed", seed, "Accepted for uniformity");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*gen_cmd) {
            gen.seed = opt(gen_seed, seed);
            run_gen_synth(gen);
        } else if (*fit_cmd) {
            fit.seed = opt(fit_seed, seed);
            fit.nuq_bandwidth = opt(bw, bandwidth);
            run_fit(fit);
        } else if (*score_cmd) {
            score.seed = opt(score_seed, seed);
            score.split = parse_split_role(score_split);
            score.calibrate = calibrate == "none" ? std::nullopt : std::optional(parse_split_role(calibrate));
            if (objective == "rc_auc") score.objective = HybridObjectiveKind::rc_auc;
            else if (objective == "fr_auc") score.objective = HybridObjectiveKind::fr_auc;
            else if (!objective.empty()) fail(ErrorCode::usage, "--objective must be rc_auc or fr_auc");
            score.objective_span = parse_span(objective_span);
            run_score(score);
        } else if (*eval_cmd) {
            eval.seed = opt(eval_seed, seed);
            eval.split = parse_split_role(eval_split);
            if (mode == "instance") eval.mode = EvalMode::instance;
            else if (mode == "label") eval.mode = EvalMode::label;
            else fail(ErrorCode::usage, "--mode must be instance or label");
            if (span == "both") eval.spans = {AucSpan::first_50, AucSpan::full};
            else eval.spans = {parse_span(span)};
            if (eval.curves_dir.empty()) eval.curves_dir = curves_positional;
            run_evaluate(eval);
        } else if (*report_cmd) {
            report.seed = opt(report_seed, seed);
            run_report(report);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "abstain: %s\n", e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "abstain: %s\n", e.what());
        return 2;
    }
    return 0;
}
