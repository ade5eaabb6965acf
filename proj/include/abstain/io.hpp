#pragma once

// On-disk formats.
//
// Matrix files (embeddings, probabilities): little-endian, header
//   8-byte magic "ABSTMAT\0" | u32 version | u64 rows | u64 cols
// followed by rows * cols float32 values in row-major order.
//
// MC tensor files use magic "ABSTMCT\0", the same header with
// cols = T * C, then a header extension u32 T | u32 C. Row i holds pass 0's
// C probabilities, then pass 1's, and so on.
//
// Labels and score tables are CSV with a header row.

#include "abstain/core.hpp"
#include "abstain/density.hpp"
#include "abstain/baseline.hpp"
#include "abstain/hybrid.hpp"
#include "abstain/synth.hpp"

#include "json.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace abstain::io {

namespace fs = std::filesystem;

inline constexpr std::array<char, 8> kMatrixMagic{'A', 'B', 'S', 'T', 'M', 'A', 'T', '\0'};
inline constexpr std::array<char, 8> kMcMagic{'A', 'B', 'S', 'T', 'M', 'C', 'T', '\0'};
inline constexpr std::array<char, 8> kModelMagic{'A', 'B', 'S', 'T', 'M', 'D', 'L', '\0'};
inline constexpr std::uint32_t kFormatVersion = 1;

void write_matrix(const fs::path& path, const Matrix& m);
Matrix read_matrix(const fs::path& path);

void write_mc(const fs::path& path, const std::vector<McSampleTensor>& mc);
std::vector<McSampleTensor> read_mc(const fs::path& path);

/// Multiclass: id,label,ood. Multilabel: id,l0,...,l{C-1},ood.
void write_labels(const fs::path& path, const LabeledSplit& split);
/// Fills labels / label_bits / ood of `split`; returns the row count.
std::size_t read_labels(const fs::path& path, Task task, int num_classes, LabeledSplit& split);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

struct SplitFiles {
    std::string embeddings;
    std::string probs;
    std::string mc;      // empty when absent
    std::string labels;
    std::map<std::string, std::string> sha256; // file name -> digest
};

struct DatasetManifest {
    std::uint32_t format_version = kFormatVersion;
    Task task = Task::multiclass;
    int num_classes = 0;
    int dim = 0;
    int mc_passes = 0;
    std::uint64_t seed = 0;
    std::map<std::string, SplitFiles> splits; // keyed by split role name
    fs::path directory;                      // where relative paths resolve

    bool has_split(SplitRole role) const { return splits.count(std::string(to_string(role))) > 0; }
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j, const fs::path& directory);

DatasetManifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const DatasetManifest& m);

/// Writes the three splits plus manifest.json and spec.json into `dir`.
DatasetManifest write_dataset(const fs::path& dir, const SynthDataset& ds);

/// Verifies checksums and row counts, then loads one split.
LabeledSplit load_split(const DatasetManifest& m, SplitRole role);

nlohmann::json to_json(const SynthSpec& s);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

// -- score tables -----------------------------------------------------------

struct ScoreRow {
    std::size_t instance = 0;
    int label = -1; // -1 for instance-level rows
    std::string scorer;
    double score = 0.0;
};

/// Header: instance,label,scorer,score. Scores print with 17 significant
/// digits; the +inf sentinel prints as "inf".
void write_score_table(const fs::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_score_table(const fs::path& path);

std::string format_double(double v);

// -- fitted models ----------------------------------------------------------

struct ModelBundle {
    std::optional<MdModel> md;
    std::optional<RdeModel> rde;
    std::optional<DduModel> ddu;
    std::optional<NuqModel> nuq;
    std::optional<BetaModel> beta;
};

/// Versioned binary container of tagged sections.
void write_models(const fs::path& path, const ModelBundle& bundle);
ModelBundle read_models(const fs::path& path);

nlohmann::json to_json(const HybridConfig& cfg);
HybridConfig hybrid_config_from_json(const nlohmann::json& j);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

} // namespace abstain::io
