#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opecalib/config.hpp"

namespace opecalib {

struct RunOptions {
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
};

// Resolved settings shared by every command.
struct RunContext {
    ExperimentConfig config;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    Provenance provenance() const { return {config.hash, seed}; }
};

RunContext make_context(const RunOptions& options);

// Fits the [models.<name>] recipe on `train`. Not valid for the target and
// true kinds, which need the test set or the generating policy.
std::unique_ptr<PolicyModel> fit_model(const ModelConfig& model, const TrajectoryDataset& train, std::uint64_t seed);

// Each returns the list of files written, relative to the output directory.
std::vector<std::string> cmd_generate(const RunContext& ctx);
std::vector<std::string> cmd_sweep(const RunContext& ctx);
std::vector<std::string> cmd_calibrate(const RunContext& ctx);
std::vector<std::string> cmd_evaluate(const RunContext& ctx);

// Runs a command by name and maps failures to exit codes: 0 success, 2
// config or validation error, 3 estimator failure, 1 anything else.
int run_command(const std::string& command, const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace opecalib
