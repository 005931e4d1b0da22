#include <iostream>

#include "CLI11.hpp"
#include "opecalib/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Off-policy evaluation experiments with estimated behaviour policies"};
    app.require_subcommand(1, 1);
    opecalib::RunOptions options;
    std::string config, out;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    for (const char* name : {"generate", "sweep", "calibrate", "evaluate"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "TOML experiment config")->required();
        sub->add_option("--out", out, "output directory (overrides out_dir)");
        sub->add_option("--seed", seed, "master seed (overrides seed)");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const auto* sub = app.get_subcommands().front();
    options.config_path = config;
    if (sub->count("--out")) options.out_dir = out;
    if (sub->count("--seed")) options.seed = seed;
    if (sub->count("--jobs")) options.jobs = jobs;
    return opecalib::run_command(sub->get_name(), options, std::cout, std::cerr);
}
