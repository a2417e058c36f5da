#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "sbm/commands.hpp"
#include "sbm/io.hpp"
#include "sbm/run_config.hpp"

using namespace sbm;
using namespace sbm::cli;
namespace fs = std::filesystem;

namespace {

const char* kIniText = R"(# Tavis-Cummings trajectory run
[model]
model = tc
omega = 2.0
lambda = 0.5
kappa = 1.0

[space]
n_spins = 2
fock_cutoff = 6

[run]
unravelling = counting
target = omega
initial = dicke(1, 0)
dt = 1e-3
t_final = 0.5
n_traj = 32
master_seed = 42
sample_stride = 100
phi = 0

[outputs]
directory = out
)";

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("sbm_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("ini parsing") {
    const auto config = parse_config_text(kIniText);
    CHECK(config.model.model == models::Model::TavisCummings);
    CHECK(config.model.omega == 2.0);
    CHECK(config.model.lambda == 0.5);
    CHECK(config.space.n_spins == 2);
    CHECK(config.space.fock_cutoff == 6);
    CHECK(config.run.unravelling == RunUnravelling::Counting);
    CHECK(config.run.initial.kind == InitialKind::Dicke);
    CHECK(config.run.initial.m_z == 1.0);
    CHECK(config.run.n_traj == 32);
    CHECK(config.run.master_seed == 42);
    CHECK(config.outputs.directory == "out");

    SUBCASE("unknown keys and sections are rejected") {
        CHECK_THROWS(parse_config_text("[model]\nmodle = tc\n"));
        CHECK_THROWS(parse_config_text("[mdoel]\nmodel = tc\n"));
        CHECK_THROWS(parse_config_text("[run]\ndt = 1e-3\nextra = 1\n"));
    }
    SUBCASE("malformed values are rejected") {
        CHECK_THROWS(parse_config_text("[model]\nomega = abc\n"));
        CHECK_THROWS(parse_config_text("[run]\ndt = 0\n"));
        CHECK_THROWS(parse_config_text("[run]\ninitial = squeezed(1)\n"));
        CHECK_THROWS(parse_config_text("[space]\nn_spins = 0\n"));
        CHECK_THROWS(parse_config_text("no sections here"));
        CHECK_THROWS(parse_config_text(""));
    }
}

TEST_CASE("json config parses to the same structure") {
    nlohmann::json j;
    j["model"] = {{"model", "tc"}, {"omega", 2.0}, {"lambda", 0.5}, {"kappa", 1.0}};
    j["space"] = {{"n_spins", 2}, {"fock_cutoff", 6}};
    j["run"] = {{"unravelling", "counting"}, {"target", "omega"},
                {"initial", "dicke(1,0)"},  {"dt", 1e-3},
                {"t_final", 0.5},           {"n_traj", 32},
                {"master_seed", 42},        {"sample_stride", 100},
                {"phi", 0.0}};
    j["outputs"] = {{"directory", "out"}};
    const auto from_json = parse_config_text(j.dump());
    const auto from_ini = parse_config_text(kIniText);
    CHECK(from_json == from_ini);
}

TEST_CASE("config round-trips through its JSON echo") {
    const auto config = parse_config_text(kIniText);
    const auto echoed = config_from_json(config_to_json(config));
    CHECK(echoed == config);
    CHECK(config_hash(echoed) == config_hash(config));
}

TEST_CASE("git blob hashing matches the reference value") {
    // `echo -n 'hello' | git hash-object --stdin`
    CHECK(io::git_blob_sha1("hello") == "b6fc4c620b67d95f953a5c1c1230aaab5db5a1b0");
}

TEST_CASE("cmd_qfi emits reproducible files") {
    auto config = parse_config_text(kIniText);
    config.run.t_final = 0.2;
    const auto dir = temp_dir("qfi");
    CommandOptions options;
    options.out_dir = dir;

    const auto result = cmd_qfi(config, options);
    REQUIRE(result.files.size() == 2);
    const auto csv_path = result.files[0];
    CHECK(csv_path.filename() == "fisher_se.csv");
    const std::string first = io::read_file(csv_path);
    CHECK(first.find("t,F_SE,F_total,I_E,F_S,stderr_total") != std::string::npos);
    CHECK(first.find("# config " + config_hash(config)) == 0);

    // bit-identical on re-run
    cmd_qfi(config, options);
    CHECK(io::read_file(csv_path) == first);

    // manifest echo re-parses to an equal config
    CHECK(config_from_json(result.manifest.at("config")) == config);
    CHECK(result.manifest.at("schema") == 1);

    SUBCASE("empty grid is an error") {
        config.run.t_final = 1e-9;
        CHECK_THROWS(cmd_qfi(config, options));
    }
}

TEST_CASE("cmd_trajectories emits fisher series, condition-II data and dumps") {
    auto config = parse_config_text(kIniText);
    config.run.n_traj = 8;
    config.run.t_final = 0.2;
    config.outputs.dump_records = true;
    config.outputs.dump_limit = 2;
    const auto dir = temp_dir("traj");
    CommandOptions options;
    options.out_dir = dir;

    const auto result = cmd_trajectories(config, options);
    CHECK(fs::exists(dir / "fisher_trajectories.csv"));
    CHECK(fs::exists(dir / "condition2.csv"));
    CHECK(fs::exists(dir / "trajectory_000000.csv"));
    CHECK(fs::exists(dir / "trajectory_000001.csv"));
    CHECK_FALSE(fs::exists(dir / "trajectory_000002.csv"));
    CHECK(fs::exists(dir / "manifest.json"));

    // per-step dump: header + 200 steps
    const std::string dump = io::read_file(dir / "trajectory_000000.csv");
    std::size_t lines = 0;
    for (char c : dump) lines += c == '\n';
    CHECK(lines == 202);  // comment + header + 200 rows

    // identical re-run reproduces the ensemble CSV bit for bit
    const std::string fisher_csv = io::read_file(dir / "fisher_trajectories.csv");
    cmd_trajectories(config, options);
    CHECK(io::read_file(dir / "fisher_trajectories.csv") == fisher_csv);

    SUBCASE("n_traj = 0 is rejected") {
        config.run.n_traj = 0;
        CHECK_THROWS(cmd_trajectories(config, options));
    }
    SUBCASE("unravelling none is rejected") {
        config.run.unravelling = RunUnravelling::None;
        CHECK_THROWS(cmd_trajectories(config, options));
    }
}

TEST_CASE("cmd_oracle writes the comparison report") {
    auto config = parse_config_text(kIniText);
    config.space.n_spins = 1;
    config.space.fock_cutoff = 2;
    config.run.initial = InitialState{InitialKind::Dicke, 0.5, 0, 0, 0};
    config.run.dt = 0.05;
    config.run.t_final = 0.4;  // M = 8
    const auto dir = temp_dir("oracle");
    CommandOptions options;
    options.out_dir = dir;

    const auto result = cmd_oracle(config, options);
    const auto report = nlohmann::json::parse(io::read_file(dir / "oracle.json"));
    CHECK(report.at("n_steps") == 8);
    CHECK(std::abs(report.at("total_probability").get<double>() - 1.0) < 0.05);
    CHECK(report.at("f_counting_exact").get<double>() > 0.0);
    CHECK(std::abs(report.at("discrepancy").get<double>()) <
          0.05 * report.at("f_se_two_sided").get<double>());

    SUBCASE("bounds are enforced through the command") {
        config.run.t_final = 2.0;  // M = 40
        CHECK_THROWS(cmd_oracle(config, options));
    }
}

TEST_CASE("cmd_meanfield writes branch table and flow") {
    auto config = parse_config_text(kIniText);
    config.model.model = models::Model::GeneralizedDicke;
    config.model.omega = 1.0;
    config.model.delta_boson = 1.0;
    config.run.dt = 1e-3;
    config.run.t_final = 1.0;
    config.run.sample_stride = 100;
    config.meanfield.present = true;
    config.meanfield.lambda_min = 0.4;
    config.meanfield.lambda_max = 1.2;
    config.meanfield.lambda_count = 5;
    config.meanfield.flow_lambda = 1.1;
    config.meanfield.m_x = -0.8;
    config.meanfield.m_z = 0.6;
    const auto dir = temp_dir("meanfield");
    CommandOptions options;
    options.out_dir = dir;

    cmd_meanfield(config, options);
    const std::string branches = io::read_file(dir / "branches.csv");
    CHECK(branches.find("lambda,branch,m_x,m_y,m_z,m_q,m_p,stability,n_marginal") !=
          std::string::npos);
    CHECK(branches.find("superradiant+") != std::string::npos);
    CHECK(fs::exists(dir / "flow.csv"));

    SUBCASE("missing meanfield section is an error") {
        config.meanfield.present = false;
        CHECK_THROWS(cmd_meanfield(config, options));
    }
}

TEST_CASE("cmd_check_class reports closure") {
    auto config = parse_config_text(kIniText);
    config.space.n_spins = 3;
    config.space.fock_cutoff = 4;
    config.run.unravelling = RunUnravelling::Homodyne;
    config.run.n_random = 25;
    config.run.dt = 0.05;
    const auto dir = temp_dir("class");
    CommandOptions options;
    options.out_dir = dir;

    cmd_check_class(config, options);
    const auto report =
        nlohmann::json::parse(io::read_file(dir / "class_closure.json"));
    CHECK(report.at("pass") == true);
    CHECK(report.at("worst_violation_kj").get<double>() < 1e-8);
}
