// run_config.hpp — batch run configuration: a sectioned key = value file or
// the equivalent JSON document. The schema is strict: unknown sections or
// keys are rejected before any computation starts.

#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

#include "sbm/models.hpp"

namespace sbm::cli {

enum class InitialKind { Dicke, Coherent };

struct InitialState {
    InitialKind kind = InitialKind::Dicke;
    double m_z = 0.0;     // dicke(M_z, n)
    double theta = 0.0;   // coherent(theta, phi, n)
    double phi = 0.0;
    int n = 0;

    bool operator==(const InitialState&) const = default;
};

struct ModelSection {
    models::Model model = models::Model::TavisCummings;
    double omega = 0.0;
    double delta_spin = 0.0;
    double delta_boson = 0.0;
    double lambda = 0.0;
    double kappa = 1.0;
    double gamma = 1.0;

    bool operator==(const ModelSection&) const = default;
};

struct SpaceSection {
    int n_spins = 1;
    int fock_cutoff = 15;

    bool operator==(const SpaceSection&) const = default;
};

enum class RunUnravelling { Counting, Homodyne, None };

struct RunSection {
    RunUnravelling unravelling = RunUnravelling::None;
    models::ParamTarget target = models::ParamTarget::Omega;
    InitialState initial;
    double dt = 1e-3;
    double t_final = 1.0;
    int n_traj = 1;
    std::uint64_t master_seed = 0;
    int sample_stride = 1;
    double phi = 0.0;      // homodyne local-oscillator phase
    int n_random = 100;    // check-class sample count

    bool operator==(const RunSection&) const = default;
};

struct OutputsSection {
    std::string directory = "out";
    std::string format = "csv";
    bool dump_records = false;
    int dump_limit = 8;  // 0 dumps every trajectory

    bool operator==(const OutputsSection&) const = default;
};

struct MeanFieldSection {
    bool present = false;
    double lambda_min = 0.0;
    double lambda_max = 2.0;
    int lambda_count = 21;
    double flow_lambda = 1.0;
    double m_x = -1.0, m_y = 0.0, m_z = 0.0, m_q = 0.0, m_p = 0.0;

    bool operator==(const MeanFieldSection&) const = default;
};

struct RunConfig {
    ModelSection model;
    SpaceSection space;
    RunSection run;
    OutputsSection outputs;
    MeanFieldSection meanfield;

    bool operator==(const RunConfig&) const = default;

    models::ModelParams model_params() const;
    hilbert::CompositeSpace composite_space() const;
    Vector initial_state() const;
};

// Dispatches on content: documents starting with '{' parse as JSON, anything
// else as the sectioned key = value format.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

// Canonical JSON serialization (sorted keys) hashed as a git blob; embedded
// in every output file so data can be traced back to its configuration.
std::string config_hash(const RunConfig& config);

}  // namespace sbm::cli
