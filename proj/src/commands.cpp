#include "sbm/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "sbm/fisher.hpp"
#include "sbm/io.hpp"
#include "sbm/meanfield.hpp"
#include "sbm/trajectories.hpp"

namespace sbm::cli {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct Emitter {
    fs::path directory;
    std::string hash;
    json manifest;
    std::vector<fs::path> files;
    std::chrono::steady_clock::time_point started;

    Emitter(const RunConfig& config, const CommandOptions& options,
            const std::string& command) {
        directory = options.out_dir.value_or(fs::path(config.outputs.directory));
        fs::create_directories(directory);
        hash = config_hash(config);
        started = std::chrono::steady_clock::now();
        manifest["schema"] = 1;
        manifest["command"] = command;
        manifest["config"] = config_to_json(config);
        manifest["config_hash"] = hash;
        manifest["threads"] = options.threads;
        manifest["files"] = json::array();
    }

    fs::path write_table(const std::string& name, io::CsvTable table) {
        table.comment = "config " + hash;
        const fs::path path = directory / name;
        io::write_csv(path, table);
        manifest["files"].push_back(
            {{"name", name}, {"sha1", io::git_blob_sha1(io::read_file(path))}});
        files.push_back(path);
        return path;
    }

    fs::path write_json(const std::string& name, json content) {
        content["config_hash"] = hash;
        const fs::path path = directory / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path.string());
        out << content.dump(2) << "\n";
        out.close();
        manifest["files"].push_back(
            {{"name", name}, {"sha1", io::git_blob_sha1(io::read_file(path))}});
        files.push_back(path);
        return path;
    }

    CommandResult finish() {
        const auto elapsed = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
        manifest["wall_time_s"] = elapsed;
        const fs::path path = directory / "manifest.json";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path.string());
        out << manifest.dump(2) << "\n";
        out.close();
        files.push_back(path);
        return CommandResult{directory, files, manifest};
    }
};

std::vector<double> output_grid(const RunSection& run) {
    const int n_steps = static_cast<int>(std::llround(run.t_final / run.dt));
    if (n_steps < 1) throw std::invalid_argument("cmd: empty time grid");
    std::vector<double> grid;
    grid.push_back(0.0);
    for (int j = run.sample_stride; j <= n_steps; j += run.sample_stride) {
        grid.push_back(j * run.dt);
    }
    if (std::llround(grid.back() / run.dt) != n_steps) grid.push_back(n_steps * run.dt);
    return grid;
}

io::CsvTable fisher_table(const fisher::FisherSeries& series) {
    io::CsvTable table;
    table.header = {"t", "F_SE", "F_total", "I_E", "F_S", "stderr_total"};
    auto cell = [&](const std::vector<double>& column, std::size_t i) {
        return i < column.size() ? io::format_double(column[i])
                                 : std::string("nan");
    };
    for (std::size_t i = 0; i < series.t.size(); ++i) {
        table.rows.push_back({io::format_double(series.t[i]), cell(series.f_se, i),
                              cell(series.f_total, i), cell(series.i_e, i),
                              cell(series.f_s, i), cell(series.stderr_total, i)});
    }
    return table;
}

traj::Unravelling to_traj_unravelling(RunUnravelling u) {
    switch (u) {
        case RunUnravelling::Counting: return traj::Unravelling::Counting;
        case RunUnravelling::Homodyne: return traj::Unravelling::Homodyne;
        default:
            throw std::invalid_argument("cmd: this command needs run.unravelling "
                                        "set to counting or homodyne");
    }
}

RunConfig with_seed_override(RunConfig config, const CommandOptions& options) {
    if (options.seed_override) config.run.master_seed = *options.seed_override;
    return config;
}

}  // namespace

CommandResult cmd_qfi(const RunConfig& raw_config, const CommandOptions& options) {
    const RunConfig config = with_seed_override(raw_config, options);
    Emitter emit(config, options, "qfi");

    const auto space = config.composite_space();
    const auto params = config.model_params();
    const auto initial = config.initial_state();
    const auto grid = output_grid(config.run);

    const auto series = fisher::qfi_system_environment(initial, space, params,
                                                       config.run.target, grid);
    emit.write_table("fisher_se.csv", fisher_table(series));
    return emit.finish();
}

CommandResult cmd_trajectories(const RunConfig& raw_config,
                               const CommandOptions& options) {
    const RunConfig config = with_seed_override(raw_config, options);
    if (config.run.n_traj < 1) {
        throw std::invalid_argument("cmd_trajectories: run.n_traj must be >= 1");
    }
    Emitter emit(config, options, "trajectories");

    const auto space = config.composite_space();
    const auto params = config.model_params();
    const auto initial = config.initial_state();
    const auto unravelling = to_traj_unravelling(config.run.unravelling);

    const auto ops = traj::make_step_operators(space, params, config.run.target,
                                               config.run.dt, unravelling);
    traj::EnsembleConfig ens;
    ens.n_traj = config.run.n_traj;
    ens.master_seed = config.run.master_seed;
    ens.dt = config.run.dt;
    ens.t_final = config.run.t_final;
    ens.sample_stride = config.run.sample_stride;

    traj::EnsembleOptions ens_options;
    ens_options.n_threads = options.threads;
    ens_options.class_violation = [&space, &params](const Vector& psi) {
        return fisher::class_violation(psi, space, params.model);
    };

    const auto ensemble = traj::run_ensemble(initial, ops, ens, ens_options);

    auto series = fisher::trajectory_fisher(ensemble);
    const auto se = fisher::qfi_system_environment(initial, space, params,
                                                   config.run.target,
                                                   series.t);
    series.f_se = se.f_se;
    emit.write_table("fisher_trajectories.csv", fisher_table(series));

    // condition (II) diagnostics: the inset trajectory plus the ensemble
    // maximum at every sample time
    const auto cond2 = fisher::check_condition_II(ensemble);
    io::CsvTable table2;
    table2.header = {"t", "im_overlap_traj0", "max_abs_im_overlap"};
    for (std::size_t s = 0; s < ensemble.sample_times.size(); ++s) {
        const double column_max = ensemble.b.col(s).abs().maxCoeff();
        table2.rows.push_back({io::format_double(ensemble.sample_times[s]),
                               io::format_double(ensemble.b(0, s)),
                               io::format_double(column_max)});
    }
    emit.write_table("condition2.csv", table2);

    emit.manifest["ensemble"] = {
        {"n_traj", config.run.n_traj},
        {"max_abs_im_overlap", cond2.ensemble_max},
        {"mean_total_outcome",
         [&] {
             double sum = 0;
             for (double v : ensemble.total_outcome) sum += v;
             return sum / ensemble.total_outcome.size();
         }()}};

    if (config.outputs.dump_records) {
        // per-trajectory dumps re-run the requested streams at full sampling
        // resolution so every step appears with its outcome
        int limit = config.outputs.dump_limit;
        if (limit <= 0 || limit > config.run.n_traj) limit = config.run.n_traj;
        traj::EnsembleConfig dump_cfg = ens;
        dump_cfg.sample_stride = 1;
        const bool counting = unravelling == traj::Unravelling::Counting;
        for (int k = 0; k < limit; ++k) {
            const auto one = traj::run_trajectory(initial, ops, dump_cfg, k, true);
            io::CsvTable table;
            table.header = {"step", "t", "outcome", "A", "B", "phi_norm_sq"};
            for (std::size_t s = 1; s < one.sample_times.size(); ++s) {
                const double outcome =
                    counting
                        ? static_cast<double>(one.counting_record.bits[s - 1])
                        : one.homodyne_record.currents[s - 1];
                table.rows.push_back({std::to_string(s),
                                      io::format_double(one.sample_times[s]),
                                      io::format_double(outcome),
                                      io::format_double(one.a[s]),
                                      io::format_double(one.b[s]),
                                      io::format_double(one.phi_norm_sq[s])});
            }
            char name[64];
            std::snprintf(name, sizeof(name), "trajectory_%06d.csv", k);
            emit.write_table(name, table);
        }
    }
    return emit.finish();
}

CommandResult cmd_oracle(const RunConfig& raw_config, const CommandOptions& options) {
    const RunConfig config = with_seed_override(raw_config, options);
    Emitter emit(config, options, "oracle");

    const auto space = config.composite_space();
    const auto params = config.model_params();
    const auto initial = config.initial_state();
    const int n_steps =
        static_cast<int>(std::llround(config.run.t_final / config.run.dt));

    const auto exact = fisher::enumerate_counting_records(
        initial, space, params, config.run.target, n_steps, config.run.dt);

    double f_se = 0.0;
    if (n_steps > 0) {
        const std::vector<double> grid{n_steps * config.run.dt};
        f_se = fisher::qfi_system_environment(initial, space, params,
                                              config.run.target, grid)
                   .f_se.front();
    }

    json report;
    report["n_steps"] = n_steps;
    report["dt"] = config.run.dt;
    report["total_probability"] = exact.total_probability;
    report["f_counting_exact"] = exact.f_total;
    report["i_e_exact"] = exact.i_e;
    report["f_s_exact"] = exact.f_s;
    report["f_se_two_sided"] = f_se;
    report["discrepancy"] = exact.f_total - f_se;
    emit.write_json("oracle.json", report);
    return emit.finish();
}

CommandResult cmd_meanfield(const RunConfig& raw_config,
                            const CommandOptions& options) {
    const RunConfig config = with_seed_override(raw_config, options);
    if (!config.meanfield.present) {
        throw std::invalid_argument("cmd_meanfield: missing [meanfield] section");
    }
    if (config.meanfield.lambda_count < 1) {
        throw std::invalid_argument("cmd_meanfield: lambda_count must be >= 1");
    }
    Emitter emit(config, options, "meanfield");

    const auto& mf = config.meanfield;
    auto params = config.model_params();

    io::CsvTable table;
    table.header = {"lambda", "branch",      "m_x", "m_y", "m_z", "m_q", "m_p",
                    "stability", "n_marginal"};
    for (int i = 0; i < mf.lambda_count; ++i) {
        const double lambda =
            mf.lambda_count == 1
                ? mf.lambda_min
                : mf.lambda_min + (mf.lambda_max - mf.lambda_min) * i /
                                      (mf.lambda_count - 1);
        params.lambda = lambda;
        for (const auto& branch : meanfield::stationary_branches(params)) {
            table.rows.push_back(
                {io::format_double(lambda), branch.name,
                 io::format_double(branch.state.m_x),
                 io::format_double(branch.state.m_y),
                 io::format_double(branch.state.m_z),
                 io::format_double(branch.state.m_q),
                 io::format_double(branch.state.m_p),
                 branch.stability == meanfield::Stability::Stable ? "stable"
                                                                  : "unstable",
                 std::to_string(branch.n_marginal)});
        }
    }
    emit.write_table("branches.csv", table);

    params.lambda = mf.flow_lambda;
    meanfield::MeanFieldState start{mf.m_x, mf.m_y, mf.m_z, mf.m_q, mf.m_p};
    const auto grid = output_grid(config.run);
    const auto flow = meanfield::integrate_meanfield(start, params, grid,
                                                     config.run.dt);
    io::CsvTable flow_table;
    flow_table.header = {"t", "m_x", "m_y", "m_z", "m_q", "m_p"};
    for (const auto& point : flow) {
        flow_table.rows.push_back({io::format_double(point.t),
                                   io::format_double(point.state.m_x),
                                   io::format_double(point.state.m_y),
                                   io::format_double(point.state.m_z),
                                   io::format_double(point.state.m_q),
                                   io::format_double(point.state.m_p)});
    }
    emit.write_table("flow.csv", flow_table);
    return emit.finish();
}

CommandResult cmd_check_class(const RunConfig& raw_config,
                              const CommandOptions& options) {
    const RunConfig config = with_seed_override(raw_config, options);
    Emitter emit(config, options, "check-class");

    const auto space = config.composite_space();
    const auto params = config.model_params();
    const auto unravelling = to_traj_unravelling(config.run.unravelling);

    const auto report = fisher::class_closure_test(
        space, params, unravelling, config.run.n_random, config.run.master_seed,
        config.run.dt);

    json out;
    out["n_random"] = config.run.n_random;
    out["dt"] = config.run.dt;
    out["worst_violation_k0"] = report.worst_violation_k0;
    out["worst_violation_k1"] = report.worst_violation_k1;
    out["worst_violation_kj"] = report.worst_violation_kj;
    out["pass"] = report.pass;
    emit.write_json("class_closure.json", out);
    return emit.finish();
}

}  // namespace sbm::cli
