#include "abstain/io.hpp"

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <sys/wait.h>

#ifndef ABSTAIN_CLI_PATH
#error "ABSTAIN_CLI_PATH must name the abstain binary"
#endif

using namespace abstain;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "abstain_cli_test";

int run(const std::string& args) {
    const std::string cmd = std::string("\"") + ABSTAIN_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// Generates one small dataset per task the first time it is needed.
const fs::path& dataset(Task task) {
    static std::map<Task, fs::path> made;
    auto it = made.find(task);
    if (it != made.end()) return it->second;
    const fs::path dir = kDir / std::string(to_string(task));
    fs::remove_all(dir);
    fs::create_directories(dir);
    SynthSpec s;
    s.task = task;
    s.n_train = 150;
    s.n_validation = 60;
    s.n_test = 80;
    s.dim = 3;
    s.num_labels = 4;
    s.mc_passes = 5;
    io::write_text(dir / "spec.in.json", io::to_json(s).dump());
    REQUIRE(run("gen-synth --spec " + q(dir / "spec.in.json") + " --out " + q(dir / "data")) == 0);
    return made[task] = dir;
}

} // namespace

TEST_SUITE("io_cli") {

TEST_CASE("usage errors exit 1") {
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("fit --out x.bin") == 1);
    CHECK(run("evaluate --scores a --manifest b --out c --mode sideways") == 1);
    CHECK(run("score --manifest m --out s --objective-span most") == 1);
    CHECK(run("--help") == 0);
}

TEST_CASE("data errors exit 2") {
    fs::create_directories(kDir);
    CHECK(run("fit --manifest " + q(kDir / "nope.json") + " --out " + q(kDir / "m.bin")) == 2);
    io::write_text(kDir / "broken.json", "{ not json");
    CHECK(run("fit --manifest " + q(kDir / "broken.json") + " --out " + q(kDir / "m.bin")) == 2);
    CHECK(run("report --metrics " + q(kDir / "broken.json") + " --out " + q(kDir / "r.html")) == 2);
}

TEST_CASE("multiclass pipeline end to end") {
    const auto& dir = dataset(Task::multiclass);
    const auto manifest = q(dir / "data" / "manifest.json");
    REQUIRE(run("fit --manifest " + manifest + " --out " + q(dir / "models.bin") + " --seed 3") == 0);
    REQUIRE(run("score --manifest " + manifest + " --models " + q(dir / "models.bin") +
                " --methods all --out " + q(dir / "scores.csv") + " --seed 3") == 0);
    CHECK(fs::exists(dir / "hybrid_configs.json"));
    REQUIRE(run("evaluate --scores " + q(dir / "scores.csv") + " --manifest " + manifest + " --out " +
                q(dir / "metrics.json") + " " + q(dir / "curves") + " --seed 3") == 0);
    REQUIRE(run("report --metrics " + q(dir / "metrics.json") + " --out " + q(dir / "report.html") +
                " --seed 3") == 0);
    CHECK(fs::exists(dir / "report.svg"));

    std::set<std::string> scored;
    for (const auto& r : io::read_score_table(dir / "scores.csv")) scored.insert(r.scorer);
    const auto metrics = nlohmann::json::parse(io::read_text(dir / "metrics.json"));
    std::set<std::string> evaluated;
    for (const auto& e : metrics["entries"]) evaluated.insert(e["method"].get<std::string>());
    CHECK(evaluated == scored);
    for (const char* m : {"sr", "entropy", "md", "rde", "ddu", "nuq", "beta", "bald", "huq-md", "huq2-nuq"})
        CHECK(scored.count(m) == 1);
    CHECK(metrics["entries"].size() == 2 * scored.size());

    // Label mode needs multilabel data; unknown scorers are usage errors.
    CHECK(run("evaluate --scores " + q(dir / "scores.csv") + " --manifest " + manifest +
              " --mode label --out " + q(dir / "m2.json")) == 1);
    CHECK(run("score --manifest " + manifest + " --models " + q(dir / "models.bin") +
              " --methods sr,wizard --out " + q(dir / "s2.csv")) == 1);
    // A density scorer without fitted models is a data error.
    CHECK(run("score --manifest " + manifest + " --methods md --out " + q(dir / "s3.csv")) == 2);
}

TEST_CASE("multilabel label-wise evaluation") {
    const auto& dir = dataset(Task::multilabel);
    const auto manifest = q(dir / "data" / "manifest.json");
    REQUIRE(run("score --manifest " + manifest + " --methods mp,beta --calibrate none --out " +
                q(dir / "scores.csv")) != 0); // beta needs fitted models
    REQUIRE(run("score --manifest " + manifest + " --methods mp,mp-mean --out " + q(dir / "scores.csv")) == 0);
    const auto rows = io::read_score_table(dir / "scores.csv");
    const auto labelled = std::count_if(rows.begin(), rows.end(), [](const io::ScoreRow& r) { return r.label >= 0; });
    CHECK(labelled == 80 * 4);
    REQUIRE(run("evaluate --scores " + q(dir / "scores.csv") + " --manifest " + manifest +
                " --mode label --span full --out " + q(dir / "metrics.json")) == 0);
    const auto metrics = nlohmann::json::parse(io::read_text(dir / "metrics.json"));
    std::set<std::string> names;
    for (const auto& e : metrics["entries"]) {
        names.insert(e["metric"].get<std::string>());
        CHECK(e["span"] == "full");
        CHECK(e["method"] == "mp");
    }
    CHECK(names == std::set<std::string>{"accuracy_auc", "fr_auc"});
}

}
