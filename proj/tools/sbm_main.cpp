// sbm — batch front-end for the spin-boson continuous-monitoring toolkit.
//
//   sbm qfi          --config run.ini [--out dir] [--threads k] [--seed s]
//   sbm trajectories --config run.ini ...
//   sbm oracle       --config run.ini ...
//   sbm meanfield    --config run.ini ...
//   sbm check-class  --config run.ini ...

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <thread>

#include "sbm/commands.hpp"

namespace {

struct Cli {
    std::string config_path;
    std::string out_dir;
    int threads = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--config", cli.config_path, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", cli.out_dir, "output directory (overrides config)");
    cmd->add_option("--threads", cli.threads,
                    "worker threads (default: machine parallelism)");
    cmd->add_option("--seed", cli.seed, "master seed override")
        ->each([&cli](const std::string&) { cli.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-monitoring Fisher information for open spin-boson models"};
    app.require_subcommand(1);

    Cli cli;
    auto* qfi = app.add_subcommand("qfi", "system-environment QFI series");
    auto* trajectories =
        app.add_subcommand("trajectories", "trajectory ensemble + Fisher estimators");
    auto* oracle = app.add_subcommand("oracle", "exact record enumeration report");
    auto* meanfield = app.add_subcommand("meanfield", "mean-field branches and flow");
    auto* check_class = app.add_subcommand("check-class", "class closure probe");
    for (auto* cmd : {qfi, trajectories, oracle, meanfield, check_class}) {
        add_common(cmd, cli);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const auto config = sbm::cli::parse_config_file(cli.config_path);
        sbm::cli::CommandOptions options;
        if (!cli.out_dir.empty()) options.out_dir = cli.out_dir;
        options.threads = cli.threads > 0
                              ? cli.threads
                              : static_cast<int>(std::thread::hardware_concurrency());
        if (options.threads < 1) options.threads = 1;
        if (cli.seed_set) options.seed_override = cli.seed;

        sbm::cli::CommandResult result;
        if (app.got_subcommand(qfi)) {
            result = sbm::cli::cmd_qfi(config, options);
        } else if (app.got_subcommand(trajectories)) {
            result = sbm::cli::cmd_trajectories(config, options);
        } else if (app.got_subcommand(oracle)) {
            result = sbm::cli::cmd_oracle(config, options);
        } else if (app.got_subcommand(meanfield)) {
            result = sbm::cli::cmd_meanfield(config, options);
        } else {
            result = sbm::cli::cmd_check_class(config, options);
        }
        for (const auto& file : result.files) {
            std::printf("wrote %s\n", file.string().c_str());
        }
        return 0;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
}
