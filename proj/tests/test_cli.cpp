#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fare/cli.hpp"

using namespace fare;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"fare"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

// Balanced CSV dataset for quick end-to-end runs.
const std::string& blob_csv() {
    static std::string path = [] {
        auto csv = std::filesystem::temp_directory_path() / "fare_cli_blobs.csv";
        std::ofstream out(csv);
        out << "x1,x2,grp,label\n";
        fare::RandomSource rng(212121);
        for (int i = 0; i < 400; ++i) {
            int a = i % 2;
            int y = (i / 2) % 2;
            out << ((y == 1 ? 1.0 : -1.0) + rng.normal()) << ',' << 0.5 * rng.normal() << ','
                << a << ',' << y << '\n';
        }
        return csv.string();
    }();
    return path;
}

const std::string& blob_schema() {
    static std::string path = [] {
        auto schema = std::filesystem::temp_directory_path() / "fare_cli_blobs_schema.json";
        std::ofstream out(schema);
        out << R"({"label_column": "label", "positive_label_value": "1",
                   "protected_column": "grp", "protected_one_value": "1"})";
        return schema.string();
    }();
    return path;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("alpha outside [0, 1] is a config error") {
    CHECK(run_cli({"run", "--dataset", "synthetic", "--alpha", "1.5", "--trials", "1",
                   "--batch-size", "20", "--rounds", "1", "--strategy", "passive"}) == 1);
}

TEST_CASE("unknown flags are config errors") {
    CHECK(run_cli({"run", "--dataset", "synthetic", "--频道", "x"}) == 1);
    CHECK(run_cli({"run", "--nonsense"}) == 1);
    CHECK(run_cli({"nonsense"}) == 1);
}

TEST_CASE("label budget beyond the pool fails before any work") {
    CHECK(run_cli({"run", "--dataset", "synthetic", "--batch-size", "4000", "--rounds", "2",
                   "--trials", "1", "--strategy", "passive"}) == 1);
}

TEST_CASE("missing dataset file is a runtime error") {
    auto schema = std::filesystem::temp_directory_path() / "fare_cli_schema.json";
    std::ofstream(schema) << R"({"label_column":"y","positive_label_value":"1",
                                 "protected_column":"a","protected_one_value":"1"})";
    CHECK(run_cli({"run", "--dataset", "/nonexistent.csv", "--schema", schema.string(),
                   "--trials", "1", "--batch-size", "5", "--rounds", "1", "--strategy",
                   "passive"}) == 2);
}

TEST_CASE("happy path writes the documented outputs") {
    auto dir = temp_dir("fare_cli_run");
    int code = run_cli({"run", "--dataset", blob_csv(), "--schema", blob_schema(), "--metric",
                        "tprp", "--alpha", "0.2", "--batch-size", "40", "--rounds", "2", "--k",
                        "2", "--sigma", "0.1", "--trials", "1", "--seed", "7", "--strategy",
                        "fare", "--strategy", "passive", "--out", dir.string()});
    CHECK(code == 0);
    CHECK(std::filesystem::exists(dir / "raw.jsonl"));
    CHECK(std::filesystem::exists(dir / "aggregate.csv"));
    CHECK(std::filesystem::exists(dir / "run_meta.json"));

    nlohmann::json meta;
    std::ifstream(dir / "run_meta.json") >> meta;
    CHECK(meta.at("config").at("seed") == 7);
    CHECK(meta.at("config").at("metric") == "tprp");
}

TEST_CASE("report recomputes the aggregate byte-for-byte") {
    auto dir = temp_dir("fare_cli_report");
    REQUIRE(run_cli({"run", "--dataset", blob_csv(), "--schema", blob_schema(), "--alpha", "0.2",
                     "--batch-size", "40", "--rounds", "2", "--k", "2", "--trials", "1",
                     "--seed", "3", "--strategy", "passive", "--out", dir.string()}) == 0);
    auto rebuilt = dir / "rebuilt.csv";
    CHECK(run_cli({"report", "--raw", (dir / "raw.jsonl").string(), "--out",
                   rebuilt.string()}) == 0);
    CHECK(slurp(dir / "aggregate.csv") == slurp(rebuilt));
}

TEST_CASE("dataset synth emits the full CSV") {
    auto path = std::filesystem::temp_directory_path() / "fare_synth.csv";
    std::filesystem::remove(path);
    CHECK(run_cli({"dataset", "synth", "--seed", "11", "--out", path.string()}) == 0);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x1,x2,a,y");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 10100);

    // Same seed, same bytes.
    auto again = std::filesystem::temp_directory_path() / "fare_synth2.csv";
    std::filesystem::remove(again);
    CHECK(run_cli({"dataset", "synth", "--seed", "11", "--out", again.string()}) == 0);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("bounds coverage writes a JSON report") {
    auto path = std::filesystem::temp_directory_path() / "fare_coverage.json";
    std::filesystem::remove(path);
    CHECK(run_cli({"bounds", "coverage", "--n", "50", "--trials", "5", "--delta", "0.2",
                   "--seed", "1", "--out", path.string()}) == 0);
    nlohmann::json report;
    std::ifstream(path) >> report;
    CHECK(report.at("n") == 50);
    CHECK(report.at("trials") == 5);
    CHECK(report.at("coverage").get<double>() >= 0.0);
}

TEST_CASE("config file supplies defaults and flags override them") {
    auto dir = temp_dir("fare_cli_config");
    auto cfg_path = std::filesystem::temp_directory_path() / "fare_cfg.json";
    {
        std::ofstream out(cfg_path);
        out << R"({"dataset": ")" << blob_csv() << R"(", "schema": ")" << blob_schema()
            << R"(", "alpha": 0.2, "batch_size": 40, "rounds": 2,
                   "k": 2, "trials": 1, "seed": 5, "strategies": ["passive"]})";
    }
    CHECK(run_cli({"run", "--config", cfg_path.string(), "--out", dir.string()}) == 0);

    // Override the seed on the command line; the metadata reflects it.
    auto dir2 = temp_dir("fare_cli_config2");
    CHECK(run_cli({"run", "--config", cfg_path.string(), "--seed", "9", "--out",
                   dir2.string()}) == 0);
    nlohmann::json meta;
    std::ifstream(dir2 / "run_meta.json") >> meta;
    CHECK(meta.at("config").at("seed") == 9);
}

TEST_SUITE_END();
