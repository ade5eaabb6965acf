#include "abstain/pipeline.hpp"

#include "abstain/baseline.hpp"
#include "abstain/density.hpp"
#include "abstain/hybrid.hpp"
#include "abstain/mc.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace abstain {
namespace {

const std::vector<std::string> kEpistemic{"md", "rde", "ddu", "nuq"};

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : sep) + s;
    return out;
}

std::vector<std::string> split_list(const std::string& list) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(list);
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool is_hybrid(const std::string& name) { return starts_with(name, "huq-") || starts_with(name, "huq2-"); }

// "huq2-md" -> {huq2, "md"}
std::pair<HybridVariant, std::string> hybrid_parts(const std::string& name) {
    if (starts_with(name, "huq2-")) return {HybridVariant::huq2, name.substr(5)};
    return {HybridVariant::huq, name.substr(4)};
}

std::string aleatoric_scorer(Task task) { return task == Task::multiclass ? "sr" : "mp-mean"; }

// Everything the scorers of one split may need.
struct Context {
    const LabeledSplit* split = nullptr;
    const io::ModelBundle* models = nullptr;
    std::map<std::string, std::vector<double>> instance_cache;
};

std::vector<double> per_row(std::size_t n, const std::function<double(Eigen::Index)>& f) {
    std::vector<double> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = f(static_cast<Eigen::Index>(i)); });
    return out;
}

template <typename T>
const T& need_model(const std::optional<T>& m, const char* name) {
    if (!m) fail(ErrorCode::data, std::string("models file has no fitted '") + name + "' model; run fit with it first");
    return *m;
}

void need_embeddings(const LabeledSplit& s, const std::string& method) {
    if (!s.has_embeddings()) fail(ErrorCode::data, "method '" + method + "' needs embeddings");
}

std::vector<double> epistemic_scores(const std::string& name, const LabeledSplit& s, const io::ModelBundle& m) {
    need_embeddings(s, name);
    const Matrix& e = s.embeddings;
    if (name == "md") {
        const auto& model = need_model(m.md, "md");
        return per_row(s.size(), [&](Eigen::Index i) { return score_md(e.row(i).transpose(), model); });
    }
    if (name == "rde") {
        const auto& model = need_model(m.rde, "rde");
        return per_row(s.size(), [&](Eigen::Index i) { return score_rde(e.row(i).transpose(), model); });
    }
    if (name == "ddu") {
        const auto& model = need_model(m.ddu, "ddu");
        return per_row(s.size(), [&](Eigen::Index i) { return score_ddu(e.row(i).transpose(), model); });
    }
    const auto& model = need_model(m.nuq, "nuq");
    return per_row(s.size(), [&](Eigen::Index i) { return score_nuq(e.row(i).transpose(), model); });
}

void need_mc(const LabeledSplit& s, const std::string& method, int min_passes) {
    if (s.mc_passes() < min_passes)
        fail(ErrorCode::data, "method '" + method + "' needs MC tensors with at least " + std::to_string(min_passes) +
                                  " passes");
}

std::vector<double> instance_scores(const std::string& name, Context& ctx) {
    if (auto it = ctx.instance_cache.find(name); it != ctx.instance_cache.end()) return it->second;
    const LabeledSplit& s = *ctx.split;
    const Matrix& p = s.probs;
    std::vector<double> out;
    if (name == "sr") out = per_row(s.size(), [&](Eigen::Index i) { return score_sr(p.row(i)); });
    else if (name == "entropy") out = per_row(s.size(), [&](Eigen::Index i) { return score_entropy(p.row(i)); });
    else if (name == "delta") out = per_row(s.size(), [&](Eigen::Index i) { return score_delta(p.row(i)); });
    else if (name == "mp-mean")
        out = per_row(s.size(), [&](Eigen::Index i) { return score_mp_aggregate(p.row(i), LabelAggregation::mean); });
    else if (name == "mp-max")
        out = per_row(s.size(), [&](Eigen::Index i) { return score_mp_aggregate(p.row(i), LabelAggregation::max); });
    else if (name == "beta") {
        const auto& model = need_model(ctx.models->beta, "beta");
        out = per_row(s.size(), [&](Eigen::Index i) { return score_beta(p.row(i), model); });
    } else if (name == "smp") {
        need_mc(s, name, 1);
        out = per_row(s.size(), [&](Eigen::Index i) { return score_smp(s.mc[static_cast<std::size_t>(i)]); });
    } else if (name == "pv") {
        need_mc(s, name, 2);
        out = per_row(s.size(), [&](Eigen::Index i) { return score_pv(s.mc[static_cast<std::size_t>(i)]); });
    } else if (name == "bald") {
        need_mc(s, name, 1);
        out = per_row(s.size(), [&](Eigen::Index i) { return score_bald(s.mc[static_cast<std::size_t>(i)]); });
    } else if (std::find(kEpistemic.begin(), kEpistemic.end(), name) != kEpistemic.end()) {
        out = epistemic_scores(name, s, *ctx.models);
    } else {
        fail(ErrorCode::usage, "no instance-level scorer '" + name + "'");
    }
    ctx.instance_cache[name] = out;
    return out;
}

Matrix label_scores(const std::string& name, const Context& ctx) {
    const LabeledSplit& s = *ctx.split;
    const Matrix& p = s.probs;
    if (name == "mp") return p.unaryExpr([](double v) { return score_mp(v); });
    if (name == "beta") {
        const auto& model = need_model(ctx.models->beta, "beta");
        return p.unaryExpr([&](double v) { return score_beta_value(std::max(v, 1.0 - v), model); });
    }
    fail(ErrorCode::usage, "no label-level scorer '" + name + "'");
}

// Whether the inputs of a scorer are present (used to expand "all").
bool available(const ScorerInfo& info, const LabeledSplit& s, const io::ModelBundle& m) {
    const auto& n = info.name;
    const auto model_present = [&](const std::string& e) {
        if (!s.has_embeddings()) return false;
        if (e == "md") return m.md.has_value();
        if (e == "rde") return m.rde.has_value();
        if (e == "ddu") return m.ddu.has_value();
        return m.nuq.has_value();
    };
    if (n == "beta") return m.beta.has_value();
    if (n == "smp" || n == "bald") return s.mc_passes() >= 1;
    if (n == "pv") return s.mc_passes() >= 2;
    if (std::find(kEpistemic.begin(), kEpistemic.end(), n) != kEpistemic.end()) return model_present(n);
    if (is_hybrid(n)) return model_present(hybrid_parts(n).second);
    return true;
}

std::vector<UnitCounts> calibration_units(const LabeledSplit& s) {
    if (s.task == Task::multilabel) return instance_units(s.probs, s.label_bits);
    std::vector<UnitCounts> units;
    units.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) units.push_back(unit_from_loss(s.loss(i)));
    return units;
}

std::vector<UnitCounts> evaluation_units(const LabeledSplit& s, EvalMode mode) {
    if (mode == EvalMode::label) return pair_units(s.probs, s.label_bits);
    return calibration_units(s);
}

std::string span_name(AucSpan span) { return span == AucSpan::full ? "full" : "first50"; }

} // namespace

std::vector<ScorerInfo> scorer_catalog(Task task) {
    std::vector<ScorerInfo> out;
    const auto add = [&](const std::string& n, ScoreLevel level = ScoreLevel::instance) { out.push_back({n, level}); };
    if (task == Task::multiclass) {
        for (const char* n : {"sr", "entropy", "delta", "beta", "smp", "pv", "bald"}) add(n);
    } else {
        add("mp", ScoreLevel::label);
        add("beta", ScoreLevel::label);
        add("mp-mean");
        add("mp-max");
    }
    for (const auto& e : kEpistemic) add(e);
    for (const char* v : {"huq-", "huq2-"})
        for (const auto& e : kEpistemic) add(v + e);
    return out;
}

std::vector<std::string> resolve_methods(const std::string& list, Task task) {
    const auto catalog = scorer_catalog(task);
    std::vector<std::string> names;
    for (const auto& c : catalog) names.push_back(c.name);
    std::vector<std::string> out;
    for (const auto& item : split_list(list)) {
        if (item == "all") {
            for (const auto& n : names)
                if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
            continue;
        }
        if (std::find(names.begin(), names.end(), item) == names.end())
            fail(ErrorCode::usage, "unknown method '" + item + "' for " + std::string(to_string(task)) +
                                       " data; available: " + join(names));
        if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
    }
    if (out.empty()) fail(ErrorCode::usage, "no methods given; available: " + join(names));
    return out;
}

io::DatasetManifest run_gen_synth(const GenSynthOptions& o) {
    SynthSpec spec;
    if (!o.spec_path.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(io::read_text(o.spec_path));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::data, "'" + o.spec_path.string() + "': " + e.what());
        }
        spec = io::synth_spec_from_json(j);
    }
    if (o.seed) spec.seed = *o.seed;
    try {
        spec.validate();
    } catch (const Error& e) {
        fail(ErrorCode::data, e.what());
    }
    return io::write_dataset(o.out_dir, generate(spec));
}

io::ModelBundle run_fit(const FitOptions& o) {
    const auto manifest = io::read_manifest(o.manifest);
    std::vector<std::string> methods;
    for (const auto& m : split_list(o.methods)) {
        if (m == "all") {
            methods = kFittableModels;
            break;
        }
        if (std::find(kFittableModels.begin(), kFittableModels.end(), m) == kFittableModels.end())
            fail(ErrorCode::usage, "unknown model '" + m + "'; available: " + join(kFittableModels));
        if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    }
    if (methods.empty()) fail(ErrorCode::usage, "no models given; available: " + join(kFittableModels));

    const bool needs_train = methods.size() > 1 || methods.front() != "beta";
    LabeledSplit train;
    if (needs_train) {
        train = io::load_split(manifest, SplitRole::train);
        if (!train.has_embeddings()) fail(ErrorCode::data, "density models need train embeddings");
    }
    io::ModelBundle bundle;
    for (const auto& m : methods) {
        if (m == "md") bundle.md = fit_md(train);
        else if (m == "ddu") bundle.ddu = fit_ddu(train);
        else if (m == "nuq") bundle.nuq = fit_nuq(train, o.nuq_bandwidth);
        else if (m == "rde") {
            RdeOptions ro;
            ro.components = o.rde_components;
            ro.seed = o.seed.value_or(manifest.seed);
            bundle.rde = fit_rde(train, ro);
        } else if (m == "beta") {
            if (!manifest.has_split(SplitRole::validation))
                fail(ErrorCode::data, "Beta calibration needs a validation split in the manifest");
            bundle.beta = fit_beta(io::load_split(manifest, SplitRole::validation));
        }
    }
    io::write_models(o.out, bundle);
    return bundle;
}

std::vector<io::ScoreRow> run_score(const ScoreOptions& o) {
    const auto manifest = io::read_manifest(o.manifest);
    const auto catalog = scorer_catalog(manifest.task);
    const auto requested = resolve_methods(o.methods, manifest.task);
    const auto explicit_list = split_list(o.methods);
    const bool expand_all = std::find(explicit_list.begin(), explicit_list.end(), "all") != explicit_list.end();
    const io::ModelBundle models = o.models.empty() ? io::ModelBundle{} : io::read_models(o.models);
    const LabeledSplit split = io::load_split(manifest, o.split);

    const auto info_of = [&](const std::string& n) {
        return *std::find_if(catalog.begin(), catalog.end(), [&](const ScorerInfo& c) { return c.name == n; });
    };
    std::vector<std::string> methods;
    for (const auto& n : requested) {
        const bool named = std::find(explicit_list.begin(), explicit_list.end(), n) != explicit_list.end();
        if (expand_all && !named && !available(info_of(n), split, models)) continue;
        methods.push_back(n);
    }

    Context ctx{&split, &models, {}};
    std::optional<LabeledSplit> calibration;
    Context cal_ctx;
    nlohmann::json configs = nlohmann::json::object();
    const CurveMode objective_mode =
        o.objective.value_or(manifest.task == Task::multiclass ? HybridObjectiveKind::rc_auc
                                                               : HybridObjectiveKind::fr_auc) == HybridObjectiveKind::rc_auc
            ? CurveMode::risk
            : CurveMode::f1_micro;

    std::vector<io::ScoreRow> rows;
    for (const auto& name : methods) {
        const ScorerInfo info = info_of(name);
        if (info.level == ScoreLevel::label) {
            const Matrix s = label_scores(name, ctx);
            for (Eigen::Index i = 0; i < s.rows(); ++i)
                for (Eigen::Index l = 0; l < s.cols(); ++l)
                    rows.push_back({static_cast<std::size_t>(i), static_cast<int>(l), name, s(i, l)});
            continue;
        }
        std::vector<double> scores;
        if (is_hybrid(name)) {
            if (!o.calibrate) fail(ErrorCode::usage, "hybrid method '" + name + "' needs --calibrate");
            if (!calibration) {
                if (!manifest.has_split(*o.calibrate))
                    fail(ErrorCode::data, "calibration needs a '" + std::string(to_string(*o.calibrate)) +
                                              "' split in the manifest");
                calibration = io::load_split(manifest, *o.calibrate);
                cal_ctx = Context{&*calibration, &models, {}};
            }
            const auto [variant, epi] = hybrid_parts(name);
            const std::string ale = aleatoric_scorer(manifest.task);
            const auto cal_a = instance_scores(ale, cal_ctx);
            const auto cal_e = instance_scores(epi, cal_ctx);
            const auto fit =
                fit_hybrid(cal_a, cal_e, variant, curve_objective(calibration_units(*calibration), objective_mode,
                                                                  o.objective_span));
            auto j = io::to_json(fit.config);
            j["aleatoric_scorer"] = ale;
            j["epistemic_scorer"] = epi;
            j["objective"] = fit.objective;
            configs[name] = j;
            const auto u_a = instance_scores(ale, ctx);
            const auto u_e = instance_scores(epi, ctx);
            scores.resize(u_a.size());
            for (std::size_t i = 0; i < u_a.size(); ++i) scores[i] = score_hybrid(u_a[i], u_e[i], fit.config);
        } else {
            scores = instance_scores(name, ctx);
        }
        for (std::size_t i = 0; i < scores.size(); ++i) rows.push_back({i, -1, name, scores[i]});
    }

    io::write_score_table(o.out, rows);
    if (!configs.empty()) {
        const auto dir = o.out.has_parent_path() ? o.out.parent_path() : io::fs::path(".");
        io::write_text(dir / "hybrid_configs.json", configs.dump(2) + "\n");
    }
    return rows;
}

std::string metric_name(CurveMode mode) {
    switch (mode) {
    case CurveMode::risk: return "rc_auc";
    case CurveMode::accuracy: return "accuracy_auc";
    case CurveMode::f1_micro: return "fr_auc";
    }
    return "";
}

std::vector<MetricEntry> run_evaluate(const EvaluateOptions& o) {
    const auto manifest = io::read_manifest(o.manifest);
    if (o.mode == EvalMode::label && manifest.task == Task::multiclass)
        fail(ErrorCode::usage, "--mode label needs a multilabel manifest");
    const LabeledSplit split = io::load_split(manifest, o.split);
    const auto table = io::read_score_table(o.scores);

    // Scorers in first-appearance order, keeping only rows of the wanted level.
    const bool want_label = o.mode == EvalMode::label;
    const std::size_t n = split.size();
    const std::size_t labels = want_label ? static_cast<std::size_t>(split.num_classes()) : 1;
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> scores;
    std::map<std::string, std::vector<std::uint8_t>> seen;
    for (const auto& r : table) {
        if ((r.label >= 0) != want_label) continue;
        if (r.instance >= n || (want_label && static_cast<std::size_t>(r.label) >= labels))
            fail(ErrorCode::data, "score row for scorer '" + r.scorer + "' is outside the split");
        if (!scores.count(r.scorer)) {
            order.push_back(r.scorer);
            scores[r.scorer].assign(n * labels, 0.0);
            seen[r.scorer].assign(n * labels, 0);
        }
        const std::size_t unit = r.instance * labels + (want_label ? static_cast<std::size_t>(r.label) : 0);
        if (seen[r.scorer][unit]) fail(ErrorCode::data, "duplicate score row for scorer '" + r.scorer + "'");
        seen[r.scorer][unit] = 1;
        scores[r.scorer][unit] = r.score;
    }
    if (order.empty())
        fail(ErrorCode::data, std::string("score table has no ") + (want_label ? "label" : "instance") + "-level rows");
    for (const auto& name : order)
        if (std::find(seen[name].begin(), seen[name].end(), 0) != seen[name].end())
            fail(ErrorCode::data, "scorer '" + name + "' is missing rows for some units");

    const auto units = evaluation_units(split, o.mode);
    std::vector<CurveMode> modes;
    if (manifest.task == Task::multiclass) modes = {CurveMode::risk};
    else modes = {CurveMode::accuracy, CurveMode::f1_micro};

    if (!o.curves_dir.empty()) io::fs::create_directories(o.curves_dir);
    std::vector<MetricEntry> entries;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& name : order) {
        const auto& s = scores[name];
        for (CurveMode mode : modes) {
            if (!o.curves_dir.empty()) {
                const auto curve = build_curve(s, units, mode);
                std::ostringstream csv;
                csv << "coverage,value\n";
                for (std::size_t k = 0; k < curve.size(); ++k)
                    csv << io::format_double(curve.coverage[k]) << ',' << io::format_double(curve.value[k]) << '\n';
                io::write_text(o.curves_dir / (name + "__" + metric_name(mode) + ".csv"), csv.str());
            }
            for (AucSpan span : o.spans) {
                MetricEntry e{name, metric_name(mode), normalized_auc(s, units, mode, span)};
                nlohmann::json j;
                j["method"] = e.method;
                j["metric"] = e.metric;
                j["span"] = span_name(span);
                j["raw"] = e.value.raw;
                j["rand"] = e.value.rand;
                j["oracle"] = e.value.oracle;
                j["normalized"] = e.value.degenerate ? nlohmann::json(nullptr) : nlohmann::json(e.value.normalized);
                j["degenerate"] = e.value.degenerate;
                rows.push_back(j);
                entries.push_back(std::move(e));
            }
        }
    }
    nlohmann::json doc;
    doc["format_version"] = io::kFormatVersion;
    doc["task"] = std::string(to_string(manifest.task));
    doc["split"] = std::string(to_string(o.split));
    doc["mode"] = want_label ? "label" : "instance";
    doc["units"] = units.size();
    doc["entries"] = rows;
    io::write_text(o.out, doc.dump(2) + "\n");
    return entries;
}

} // namespace abstain
