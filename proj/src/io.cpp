#include "abstain/io.hpp"

#include "binary.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace abstain::io {

namespace detail {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::io, "short write to '" + path + "'");
}

} // namespace detail

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 8;

struct MatrixHeader {
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
};

MatrixHeader read_header(ByteReader& r, const std::array<char, 8>& magic, const std::string& path) {
    if (!r.magic(magic)) fail(ErrorCode::magic_mismatch, "'" + path + "': bad magic");
    r.need(kHeaderBytes - 8, ErrorCode::row_count_mismatch);
    const auto version = r.u32();
    if (version != kFormatVersion)
        fail(ErrorCode::version_mismatch, "'" + path + "': unsupported version " + std::to_string(version));
    MatrixHeader h;
    h.rows = r.u64();
    h.cols = r.u64();
    return h;
}

void check_payload(const ByteReader& r, const MatrixHeader& h, const std::string& path) {
    const std::uint64_t want = h.rows * h.cols * 4;
    if (r.remaining() != want)
        fail(ErrorCode::row_count_mismatch, "'" + path + "': row-count disagreement (header says " +
                                                std::to_string(h.rows) + " rows, payload holds " +
                                                std::to_string(r.remaining() / std::max<std::uint64_t>(h.cols * 4, 1)) +
                                                ")");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

long parse_long(const std::string& s, const fs::path& path) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::data, "'" + path.string() + "': malformed integer '" + s + "'");
    }
}

double parse_double(const std::string& s, const fs::path& path) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::data, "'" + path.string() + "': malformed number '" + s + "'");
    }
}

} // namespace

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_matrix(const fs::path& path, const Matrix& m) {
    ByteWriter w;
    w.magic(kMatrixMagic);
    w.u32(kFormatVersion);
    w.u64(static_cast<std::uint64_t>(m.rows()));
    w.u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
    detail::write_file_bytes(path.string(), w.data());
}

Matrix read_matrix(const fs::path& path) {
    const auto bytes = detail::read_file_bytes(path.string());
    ByteReader r(bytes.data(), bytes.size(), path.string());
    const auto h = read_header(r, kMatrixMagic, path.string());
    check_payload(r, h, path.string());
    Matrix m(static_cast<Eigen::Index>(h.rows), static_cast<Eigen::Index>(h.cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<double>(r.f32());
    return m;
}

void write_mc(const fs::path& path, const std::vector<McSampleTensor>& mc) {
    const std::uint32_t t = mc.empty() ? 0 : static_cast<std::uint32_t>(mc.front().rows());
    const std::uint32_t c = mc.empty() ? 0 : static_cast<std::uint32_t>(mc.front().cols());
    ByteWriter w;
    w.magic(kMcMagic);
    w.u32(kFormatVersion);
    w.u64(mc.size());
    w.u64(static_cast<std::uint64_t>(t) * c);
    w.u32(t);
    w.u32(c);
    for (const auto& m : mc) {
        require(m.rows() == t && m.cols() == c, "ragged MC tensor");
        for (Eigen::Index p = 0; p < m.rows(); ++p)
            for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(p, j)));
    }
    detail::write_file_bytes(path.string(), w.data());
}

std::vector<McSampleTensor> read_mc(const fs::path& path) {
    const auto bytes = detail::read_file_bytes(path.string());
    ByteReader r(bytes.data(), bytes.size(), path.string());
    const auto h = read_header(r, kMcMagic, path.string());
    r.need(8, ErrorCode::row_count_mismatch);
    const auto t = r.u32();
    const auto c = r.u32();
    if (static_cast<std::uint64_t>(t) * c != h.cols)
        fail(ErrorCode::data, "'" + path.string() + "': MC header T*C disagrees with column count");
    check_payload(r, h, path.string());
    std::vector<McSampleTensor> out;
    out.reserve(h.rows);
    for (std::uint64_t i = 0; i < h.rows; ++i) {
        McSampleTensor m(t, c);
        for (std::uint32_t p = 0; p < t; ++p)
            for (std::uint32_t j = 0; j < c; ++j) m(p, j) = static_cast<double>(r.f32());
        out.push_back(std::move(m));
    }
    return out;
}

void write_labels(const fs::path& path, const LabeledSplit& split) {
    std::ostringstream out;
    const bool has_ood = !split.ood.empty();
    if (split.task == Task::multiclass) {
        out << "id,label,ood\n";
        for (std::size_t i = 0; i < split.size(); ++i)
            out << i << ',' << split.labels(static_cast<Eigen::Index>(i)) << ',' << (has_ood ? int(split.ood[i]) : 0)
                << '\n';
    } else {
        out << "id";
        for (int l = 0; l < split.num_classes(); ++l) out << ",l" << l;
        out << ",ood\n";
        for (std::size_t i = 0; i < split.size(); ++i) {
            out << i;
            for (int l = 0; l < split.num_classes(); ++l) out << ',' << split.label_bits(static_cast<Eigen::Index>(i), l);
            out << ',' << (has_ood ? int(split.ood[i]) : 0) << '\n';
        }
    }
    write_text(path, out.str());
}

std::size_t read_labels(const fs::path& path, Task task, int num_classes, LabeledSplit& split) {
    const auto rows = read_csv(path);
    if (rows.empty()) fail(ErrorCode::data, "'" + path.string() + "': missing header");
    const std::size_t want_cols = task == Task::multiclass ? 3 : static_cast<std::size_t>(num_classes) + 2;
    if (rows.front().size() != want_cols) fail(ErrorCode::data, "'" + path.string() + "': unexpected header");
    const std::size_t n = rows.size() - 1;
    split.ood.assign(n, 0);
    if (task == Task::multiclass) split.labels.resize(static_cast<Eigen::Index>(n));
    else split.label_bits.resize(static_cast<Eigen::Index>(n), num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        if (row.size() != want_cols) fail(ErrorCode::data, "'" + path.string() + "': ragged row " + std::to_string(i));
        if (static_cast<std::size_t>(parse_long(row[0], path)) != i)
            fail(ErrorCode::data, "'" + path.string() + "': ids must be 0..n-1 in order");
        if (task == Task::multiclass) {
            split.labels(static_cast<Eigen::Index>(i)) = static_cast<int>(parse_long(row[1], path));
        } else {
            for (int l = 0; l < num_classes; ++l)
                split.label_bits(static_cast<Eigen::Index>(i), l) = static_cast<int>(parse_long(row[1 + l], path));
        }
        split.ood[i] = static_cast<std::uint8_t>(parse_long(row.back(), path) != 0);
    }
    return n;
}

std::string sha256_file(const fs::path& path) {
    const auto bytes = detail::read_file_bytes(path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        fail(ErrorCode::io, "SHA-256 failed for '" + path.string() + "'");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["format_version"] = m.format_version;
    j["task"] = std::string(to_string(m.task));
    j["num_classes"] = m.num_classes;
    j["dim"] = m.dim;
    j["mc_passes"] = m.mc_passes;
    j["seed"] = m.seed;
    nlohmann::json splits = nlohmann::json::object();
    for (const auto& [name, f] : m.splits) {
        nlohmann::json s;
        s["embeddings"] = f.embeddings;
        s["probs"] = f.probs;
        s["mc"] = f.mc;
        s["labels"] = f.labels;
        s["sha256"] = f.sha256;
        splits[name] = s;
    }
    j["splits"] = splits;
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j, const fs::path& directory) {
    try {
        DatasetManifest m;
        m.format_version = j.at("format_version").get<std::uint32_t>();
        if (m.format_version != kFormatVersion)
            fail(ErrorCode::version_mismatch, "manifest format version " + std::to_string(m.format_version));
        m.task = parse_task(j.at("task").get<std::string>());
        m.num_classes = j.at("num_classes").get<int>();
        m.dim = j.at("dim").get<int>();
        m.mc_passes = j.at("mc_passes").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& [name, s] : j.at("splits").items()) {
            parse_split_role(name);
            SplitFiles f;
            f.embeddings = s.at("embeddings").get<std::string>();
            f.probs = s.at("probs").get<std::string>();
            f.mc = s.value("mc", std::string{});
            f.labels = s.at("labels").get<std::string>();
            f.sha256 = s.at("sha256").get<std::map<std::string, std::string>>();
            m.splits[name] = f;
        }
        m.directory = directory;
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::data, std::string("malformed manifest: ") + e.what());
    }
}

DatasetManifest read_manifest(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::data, "'" + path.string() + "': " + e.what());
    }
    return manifest_from_json(j, path.parent_path());
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
    write_text(path, to_json(m).dump(2) + "\n");
}

DatasetManifest write_dataset(const fs::path& dir, const SynthDataset& ds) {
    fs::create_directories(dir);
    DatasetManifest m;
    m.task = ds.spec.task;
    m.num_classes = ds.train.num_classes();
    m.dim = ds.train.dim();
    m.mc_passes = ds.train.mc_passes();
    m.seed = ds.spec.seed;
    m.directory = dir;
    for (SplitRole role : {SplitRole::train, SplitRole::validation, SplitRole::test}) {
        const LabeledSplit& s = ds.split(role);
        const std::string name(to_string(role));
        SplitFiles f;
        f.embeddings = name + "_embeddings.bin";
        f.probs = name + "_probs.bin";
        f.mc = s.has_mc() ? name + "_mc.bin" : "";
        f.labels = name + "_labels.csv";
        write_matrix(dir / f.embeddings, s.embeddings);
        write_matrix(dir / f.probs, s.probs);
        if (s.has_mc()) write_mc(dir / f.mc, s.mc);
        write_labels(dir / f.labels, s);
        for (const auto* file : {&f.embeddings, &f.probs, &f.mc, &f.labels})
            if (!file->empty()) f.sha256[*file] = sha256_file(dir / *file);
        m.splits[name] = f;
    }
    write_manifest(dir / "manifest.json", m);
    write_text(dir / "spec.json", to_json(ds.spec).dump(2) + "\n");
    return m;
}

LabeledSplit load_split(const DatasetManifest& m, SplitRole role) {
    const std::string name(to_string(role));
    const auto it = m.splits.find(name);
    if (it == m.splits.end()) fail(ErrorCode::data, "manifest has no '" + name + "' split");
    const SplitFiles& f = it->second;
    for (const auto* file : {&f.embeddings, &f.probs, &f.mc, &f.labels}) {
        if (file->empty()) continue;
        const fs::path p = m.directory / *file;
        if (!fs::exists(p)) fail(ErrorCode::data, "missing data file '" + p.string() + "'");
        const auto want = f.sha256.find(*file);
        if (want == f.sha256.end()) fail(ErrorCode::checksum_mismatch, "no checksum recorded for '" + *file + "'");
        if (sha256_file(p) != want->second) fail(ErrorCode::checksum_mismatch, "checksum mismatch for '" + p.string() + "'");
    }
    LabeledSplit s;
    s.role = role;
    s.task = m.task;
    s.embeddings = read_matrix(m.directory / f.embeddings);
    s.probs = read_matrix(m.directory / f.probs);
    if (!f.mc.empty()) s.mc = read_mc(m.directory / f.mc);
    const std::size_t n_labels = read_labels(m.directory / f.labels, m.task, m.num_classes, s);
    const auto n = static_cast<std::size_t>(s.probs.rows());
    if (static_cast<std::size_t>(s.embeddings.rows()) != n || n_labels != n || (!s.mc.empty() && s.mc.size() != n))
        fail(ErrorCode::row_count_mismatch, "row-count disagreement across files of split '" + name + "'");
    if (s.probs.cols() != m.num_classes || (s.has_embeddings() && s.embeddings.cols() != m.dim))
        fail(ErrorCode::data, "split '" + name + "' shape disagrees with manifest");
    try {
        s.validate();
    } catch (const Error& e) {
        fail(ErrorCode::data, "split '" + name + "': " + e.what());
    }
    return s;
}

nlohmann::json to_json(const SynthSpec& s) {
    return {
        {"seed", s.seed},
        {"n_train", s.n_train},
        {"n_validation", s.n_validation},
        {"n_test", s.n_test},
        {"num_classes", s.num_classes},
        {"dim", s.dim},
        {"spacing", s.spacing},
        {"overlap", s.overlap},
        {"band_width", s.band_width},
        {"ood_fraction", s.ood_fraction},
        {"ood_displacement", s.ood_displacement},
        {"task", std::string(to_string(s.task))},
        {"num_labels", s.num_labels},
        {"mc_passes", s.mc_passes},
        {"mc_noise", s.mc_noise},
    };
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        s.seed = j.value("seed", s.seed);
        s.n_train = j.value("n_train", s.n_train);
        s.n_validation = j.value("n_validation", s.n_validation);
        s.n_test = j.value("n_test", s.n_test);
        s.num_classes = j.value("num_classes", s.num_classes);
        s.dim = j.value("dim", s.dim);
        s.spacing = j.value("spacing", s.spacing);
        s.overlap = j.value("overlap", s.overlap);
        s.band_width = j.value("band_width", s.band_width);
        s.ood_fraction = j.value("ood_fraction", s.ood_fraction);
        s.ood_displacement = j.value("ood_displacement", s.ood_displacement);
        s.task = parse_task(j.value("task", std::string(to_string(s.task))));
        s.num_labels = j.value("num_labels", s.num_labels);
        s.mc_passes = j.value("mc_passes", s.mc_passes);
        s.mc_noise = j.value("mc_noise", s.mc_noise);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::data, std::string("malformed synthetic spec: ") + e.what());
    }
    if (s.task == Task::multilabel && !j.contains("num_classes")) s.num_classes = 3;
    return s;
}

void write_score_table(const fs::path& path, const std::vector<ScoreRow>& rows) {
    std::ostringstream out;
    out << "instance,label,scorer,score\n";
    for (const auto& r : rows) out << r.instance << ',' << r.label << ',' << r.scorer << ',' << format_double(r.score) << '\n';
    write_text(path, out.str());
}

std::vector<ScoreRow> read_score_table(const fs::path& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows.front() != std::vector<std::string>{"instance", "label", "scorer", "score"})
        fail(ErrorCode::data, "'" + path.string() + "': expected header instance,label,scorer,score");
    std::vector<ScoreRow> out;
    out.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 4) fail(ErrorCode::data, "'" + path.string() + "': ragged row " + std::to_string(i));
        ScoreRow row;
        row.instance = static_cast<std::size_t>(parse_long(r[0], path));
        row.label = static_cast<int>(parse_long(r[1], path));
        row.scorer = r[2];
        row.score = parse_double(r[3], path);
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace abstain::io
