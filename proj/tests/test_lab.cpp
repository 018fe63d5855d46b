#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "rdslab/lab.hpp"

using namespace rdslab;

namespace {
std::string tmp_dir(const std::string& tag) {
    const auto p = std::filesystem::temp_directory_path() /
                   ("rdslab_test_" + tag);
    std::filesystem::remove_all(p);
    return p.string();
}
}  // namespace

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config schema rejects unknown fields with their path") {
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"tuple":{"family":"cat_pair"},"bogus":1})", "mixing"),
        doctest::Contains("bogus"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(
            R"({"tuple":{"family":"cat_pair"},"params":{"nope":2}})", "mixing"),
        doctest::Contains("params.nope"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"tuple":{"family":"cat_pair"}})", "no-such-kind"),
        doctest::Contains("experiment"), ConfigError);
}

TEST_CASE("defaults are materialized into the resolved config") {
    const ExperimentConfig cfg =
        parse_config(R"({"tuple":{"family":"cat_pair"}})", "mixing");
    const std::string resolved = cfg.resolved_json();
    CHECK(resolved.find("\"lattice\"") != std::string::npos);
    CHECK(resolved.find("\"floor\"") != std::string::npos);
    CHECK(resolved.find("\"nmax\"") != std::string::npos);
}

TEST_CASE("experiment runs are deterministic across worker counts") {
    const std::string config = R"({
        "tuple": {"family": "cat_pair_shear", "params": {"K": 0.1}},
        "seed": 11,
        "params": {"nmax": 8, "lattice": 64, "words": 6}
    })";
    const std::string dir1 = tmp_dir("det1");
    const std::string dir2 = tmp_dir("det2");

    setenv("RDSLAB_THREADS", "1", 1);
    ExperimentConfig c1 = parse_config(config, "mixing", dir1);
    const RunManifest m1 = run_experiment(c1);
    setenv("RDSLAB_THREADS", "4", 1);
    ExperimentConfig c2 = parse_config(config, "mixing", dir2);
    const RunManifest m2 = run_experiment(c2);
    unsetenv("RDSLAB_THREADS");

    CHECK(m1.config_hash == m2.config_hash);
    REQUIRE(m1.artifacts.size() == m2.artifacts.size());
    for (std::size_t i = 0; i < m1.artifacts.size(); ++i) {
        CHECK(m1.artifacts[i].first == m2.artifacts[i].first);
        if (m1.artifacts[i].first == "resolved_config.json") continue;
        CHECK(m1.artifacts[i].second == m2.artifacts[i].second);
    }
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("manifest lists every artifact and report renders") {
    const std::string dir = tmp_dir("rep");
    const ExperimentConfig cfg = parse_config(
        R"({"tuple":{"family":"single_cat"},
            "params":{"n":30},"seed":3})",
        "tempered", dir);
    const RunManifest man = run_experiment(cfg);
    for (const auto& [name, sha] : man.artifacts) {
        CHECK(std::filesystem::exists(std::filesystem::path(dir) / name));
        (void)sha;
    }
    const std::string rep = report_run(dir);
    CHECK(rep.find("tempered.csv") != std::string::npos);
    CHECK_THROWS_AS(report_run(tmp_dir("empty")), ConfigError);
    std::filesystem::remove_all(dir);
}
