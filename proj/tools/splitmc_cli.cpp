#include <string>

#include <CLI11.hpp>

#include "splitmc/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"stochastic splitting experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string seeds_flag;
    bool quiet = false;

    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", config_path, "configuration document (JSON)")->required();
        if (with_out) sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seeds", seeds_flag, "seed count or comma-separated list");
        sub->add_flag("--quiet", quiet, "suppress progress output");
    };

    CLI::App* check = app.add_subcommand("check", "validate a configuration without iterating");
    add_common(check, false);
    CLI::App* runcmd = app.add_subcommand("run", "run a seed ensemble and write traces + summary");
    add_common(runcmd, true);
    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid and write a comparison table");
    add_common(sweep, true);

    CLI11_PARSE(app, argc, argv);

    if (check->parsed()) return splitmc::cli::cmd_check(config_path, quiet);
    if (runcmd->parsed()) return splitmc::cli::cmd_run(config_path, out_dir, seeds_flag, quiet);
    if (sweep->parsed()) return splitmc::cli::cmd_sweep(config_path, out_dir, seeds_flag, quiet);
    return 1;
}
