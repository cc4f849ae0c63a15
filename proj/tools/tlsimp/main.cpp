// Command-line front end: runs experiments from JSON configs and reshapes
// results into plot-ready tables.

#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "tlsimp/experiment.hpp"

namespace {

struct RunArgs {
    std::string config;
    std::string out;
    std::int64_t seed = -1;
    int threads = -1;
};

void add_run_options(CLI::App* cmd, RunArgs& args) {
    cmd->add_option("--config,-c", args.config, "Experiment config (JSON)")->required();
    cmd->add_option("--out,-o", args.out, "Output directory (default: config output_dir)");
    cmd->add_option("--seed", args.seed, "Override the config seed")->check(CLI::NonNegativeNumber);
    cmd->add_option("--threads", args.threads, "Sweep worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
}

int run(const RunArgs& args, const std::string& expected_kind) {
    tlsimp::RunOverrides ov;
    if (args.seed >= 0) ov.seed = static_cast<std::uint64_t>(args.seed);
    if (args.threads >= 0) ov.threads = static_cast<unsigned>(args.threads);
    if (!expected_kind.empty()) ov.expected_kind = expected_kind;
    const auto report = tlsimp::run_file(args.config, args.out, ov);
    std::cout << report.kind << ": wrote " << report.outputs.size() << " files to " << report.out_dir.string()
              << " (config " << report.config_hash << ", seed " << report.seed << ", " << report.wall_time_s
              << " s)\n";
    for (const auto& line : report.summary) std::cout << "  " << line << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-tone intermodulation simulation, harmonic-balance reconstruction and resonator analysis"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Run the experiment named by the config's kind");
    add_run_options(run_cmd, run_args);

    std::map<std::string, RunArgs> kind_args;
    std::map<std::string, CLI::App*> kind_cmds;
    for (const auto& kind : tlsimp::experiment_kinds()) {
        auto* cmd = app.add_subcommand(kind, "Run a '" + kind + "' config");
        add_run_options(cmd, kind_args[kind]);
        kind_cmds[kind] = cmd;
    }

    std::string plot_in;
    std::string plot_out;
    auto* plot_cmd = app.add_subcommand("plot-data", "Reshape a result JSON into series,x,y,z rows");
    plot_cmd->add_option("--input,-i", plot_in, "Result JSON written by a run")->required();
    plot_cmd->add_option("--output,-o", plot_out, "Destination CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run_cmd->parsed()) return run(run_args, "");
        for (const auto& [kind, cmd] : kind_cmds) {
            if (cmd->parsed()) return run(kind_args[kind], kind);
        }
        if (plot_cmd->parsed()) {
            const auto rows = tlsimp::emit_plot_data(plot_in, plot_out);
            std::cout << "plot-data: wrote " << rows << " rows to " << plot_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return tlsimp::exit_code_for(e);
    }
    return 1;
}
