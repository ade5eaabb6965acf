#include "abstain/io.hpp"

#include "binary.hpp"

#include <cmath>
#include <limits>

namespace abstain::io {
namespace {

using detail::ByteReader;
using detail::ByteWriter;

void put_matrices(ByteWriter& w, const std::vector<Matrix>& ms) {
    w.u32(static_cast<std::uint32_t>(ms.size()));
    for (const auto& m : ms) w.matrix(m);
}

std::vector<Matrix> get_matrices(ByteReader& r) {
    const auto n = r.u32();
    std::vector<Matrix> out;
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(r.matrix());
    return out;
}

void put_doubles(ByteWriter& w, const std::vector<double>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) w.f64(x);
}

std::vector<double> get_doubles(ByteReader& r) {
    const auto n = r.u32();
    r.need(static_cast<std::size_t>(n) * 8);
    std::vector<double> out(n);
    for (auto& x : out) x = r.f64();
    return out;
}

void put_md(ByteWriter& w, const MdModel& m) {
    w.matrix(m.centroids);
    w.matrix(m.precision);
    w.f64(m.ridge);
}

MdModel get_md(ByteReader& r) {
    MdModel m;
    m.centroids = r.matrix();
    m.precision = r.matrix();
    m.ridge = r.f64();
    return m;
}

void put_ddu(ByteWriter& w, const DduModel& m) {
    w.matrix(m.means);
    put_matrices(w, m.precisions);
    w.vector(m.log_dets);
    w.vector(m.priors);
    put_doubles(w, m.ridges);
}

DduModel get_ddu(ByteReader& r) {
    DduModel m;
    m.means = r.matrix();
    m.precisions = get_matrices(r);
    m.log_dets = r.vector();
    m.priors = r.vector();
    m.ridges = get_doubles(r);
    return m;
}

void put_rde(ByteWriter& w, const RdeModel& m) {
    const KernelPca& p = m.projection;
    w.matrix(p.support);
    w.f64(p.gamma);
    w.matrix(p.coefficients);
    w.vector(p.eigenvalues);
    w.vector(p.column_means);
    w.f64(p.grand_mean);
    w.matrix(m.centroids);
    put_matrices(w, m.precisions);
    put_doubles(w, m.ridges);
}

RdeModel get_rde(ByteReader& r) {
    RdeModel m;
    KernelPca& p = m.projection;
    p.support = r.matrix();
    p.gamma = r.f64();
    p.coefficients = r.matrix();
    p.eigenvalues = r.vector();
    p.column_means = r.vector();
    p.grand_mean = r.f64();
    m.centroids = r.matrix();
    m.precisions = get_matrices(r);
    m.ridges = get_doubles(r);
    return m;
}

void put_nuq(ByteWriter& w, const NuqModel& m) {
    w.matrix(m.train());
    w.matrix(m.targets());
    w.f64(m.bandwidth());
}

NuqModel get_nuq(ByteReader& r) {
    Matrix train = r.matrix();
    Matrix targets = r.matrix();
    const double h = r.f64();
    return NuqModel(std::move(train), std::move(targets), h);
}

void put_beta(ByteWriter& w, const BetaModel& m) {
    for (double v : {m.alpha_c, m.gamma_c, m.alpha_inc, m.gamma_inc, m.p_correct, m.p_incorrect}) w.f64(v);
    w.u32(m.capped ? 1 : 0);
}

BetaModel get_beta(ByteReader& r) {
    BetaModel m;
    m.alpha_c = r.f64();
    m.gamma_c = r.f64();
    m.alpha_inc = r.f64();
    m.gamma_inc = r.f64();
    m.p_correct = r.f64();
    m.p_incorrect = r.f64();
    m.capped = r.u32() != 0;
    return m;
}

template <typename T, typename Put>
void section(ByteWriter& w, const char* tag, const std::optional<T>& model, Put put) {
    if (!model) return;
    ByteWriter body;
    put(body, *model);
    w.str(tag);
    w.u64(body.data().size());
    w.bytes(body.data().data(), body.data().size());
}

// JSON has no infinity; +inf (NUQ underflow) is stored as the string "inf".
nlohmann::json real_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double real_from_json(const nlohmann::json& x) {
    if (!x.is_string()) return x.get<double>();
    const auto s = x.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    fail(ErrorCode::data, "bad real '" + s + "'");
}

nlohmann::json table_to_json(const RankTable& t) {
    nlohmann::json a = nlohmann::json::array();
    for (double v : t.values()) a.push_back(real_to_json(v));
    return a;
}

RankTable table_from_json(const nlohmann::json& a) {
    std::vector<double> v;
    v.reserve(a.size());
    for (const auto& x : a) v.push_back(real_from_json(x));
    return RankTable(std::move(v));
}

} // namespace

void write_models(const fs::path& path, const ModelBundle& b) {
    ByteWriter w;
    w.magic(kModelMagic);
    w.u32(kFormatVersion);
    ByteWriter sections;
    section(sections, "md", b.md, put_md);
    section(sections, "rde", b.rde, put_rde);
    section(sections, "ddu", b.ddu, put_ddu);
    section(sections, "nuq", b.nuq, put_nuq);
    section(sections, "beta", b.beta, put_beta);
    const std::uint32_t count = (b.md ? 1 : 0) + (b.rde ? 1 : 0) + (b.ddu ? 1 : 0) + (b.nuq ? 1 : 0) + (b.beta ? 1 : 0);
    w.u32(count);
    w.bytes(sections.data().data(), sections.data().size());
    detail::write_file_bytes(path.string(), w.data());
}

ModelBundle read_models(const fs::path& path) {
    const auto bytes = detail::read_file_bytes(path.string());
    ByteReader r(bytes.data(), bytes.size(), path.string());
    if (!r.magic(kModelMagic)) fail(ErrorCode::magic_mismatch, "'" + path.string() + "': not a model file");
    const auto version = r.u32();
    if (version != kFormatVersion)
        fail(ErrorCode::version_mismatch, "'" + path.string() + "': unsupported version " + std::to_string(version));
    const auto count = r.u32();
    ModelBundle b;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string tag = r.str();
        const auto size = r.u64();
        r.need(size);
        const std::size_t start = r.position();
        ByteReader body(bytes.data() + start, size, path.string() + ":" + tag);
        if (tag == "md") b.md = get_md(body);
        else if (tag == "rde") b.rde = get_rde(body);
        else if (tag == "ddu") b.ddu = get_ddu(body);
        else if (tag == "nuq") b.nuq = get_nuq(body);
        else if (tag == "beta") b.beta = get_beta(body);
        // Unknown sections are skipped.
        r.skip(size);
    }
    return b;
}

nlohmann::json to_json(const HybridConfig& cfg) {
    return {
        {"variant", std::string(to_string(cfg.variant))},
        {"alpha", cfg.alpha},
        {"delta_min", real_to_json(cfg.delta_min)},
        {"delta_max", real_to_json(cfg.delta_max)},
        {"c", cfg.c},
        {"n_validation", cfg.n_validation},
        {"aleatoric", table_to_json(cfg.aleatoric)},
        {"aleatoric_id", table_to_json(cfg.aleatoric_id)},
        {"epistemic", table_to_json(cfg.epistemic)},
    };
}

HybridConfig hybrid_config_from_json(const nlohmann::json& j) {
    try {
        HybridConfig cfg;
        const auto variant = j.at("variant").get<std::string>();
        if (variant == "huq") cfg.variant = HybridVariant::huq;
        else if (variant == "huq2") cfg.variant = HybridVariant::huq2;
        else fail(ErrorCode::data, "unknown hybrid variant '" + variant + "'");
        cfg.alpha = j.at("alpha").get<double>();
        cfg.delta_min = real_from_json(j.at("delta_min"));
        cfg.delta_max = real_from_json(j.at("delta_max"));
        cfg.c = j.at("c").get<int>();
        cfg.n_validation = j.at("n_validation").get<std::size_t>();
        cfg.aleatoric = table_from_json(j.at("aleatoric"));
        cfg.aleatoric_id = table_from_json(j.at("aleatoric_id"));
        cfg.epistemic = table_from_json(j.at("epistemic"));
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::data, std::string("malformed hybrid config: ") + e.what());
    }
}

} // namespace abstain::io
