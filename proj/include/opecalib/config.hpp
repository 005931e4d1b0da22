#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opecalib/estimators.hpp"
#include "opecalib/fqi.hpp"
#include "opecalib/knn_policy.hpp"
#include "opecalib/nav.hpp"
#include "opecalib/parametric_models.hpp"
#include "opecalib/protocol.hpp"
#include "opecalib/sweep.hpp"

namespace opecalib {

// A behaviour-model recipe from a [models.<name>] table.
struct ModelConfig {
    std::string name;
    std::string kind;  // knn, approx_knn, softmax_linear, mlp, target, true
    KnnOptions knn;
    SoftmaxLinearOptions linear;
    MlpOptions mlp;
};

struct GenerateConfig {
    std::size_t n = 500;
    nav::PolicySpec policy;
    std::string output = "dataset.jsonl";
};

struct SweepConfig {
    std::vector<nav::PolicySpec> behaviours;
    nav::PolicySpec evaluation = nav::default_sweep_evaluation();
    std::vector<nav::SweepPoint> grid;  // empty: default grid
    std::size_t n_eval = 200;
    std::size_t repeats = 10;
    double alpha = 0.5;
    double prob_floor = kDefaultProbFloor;
    std::optional<std::filesystem::path> eval_dataset;
};

struct CalibrateConfig {
    std::optional<std::filesystem::path> dataset;  // split into train/test when set
    nav::PolicySpec behaviour;                      // generating policy otherwise
    std::size_t n_train = 200;
    std::size_t n_test = 200;
    std::size_t target_k = 150;
    std::size_t samples = 500;
    std::size_t strata = 4;
    std::optional<std::vector<double>> edges;
    std::vector<std::string> models;
};

struct EvaluateConfig {
    std::optional<std::filesystem::path> dataset;
    nav::PolicySpec behaviour;
    std::size_t n = 1000;
    SplitKind split = SplitKind::Random;
    std::vector<ActionId> withheld{nav::Stay};
    std::string model = "knn";
    // "fitted": pi_e is the model fitted on D1. "behaviour": pi_e is the
    // behaviour model fitted on D2 itself.
    std::string evaluation_policy = "fitted";
    Estimator estimator = Estimator::StepPHWIS;
    std::string q_model = "zero";  // zero or fqi
    RegressorConfig fqi_regressor;
    std::optional<std::size_t> fqi_iterations;
    std::size_t bootstrap_n = kBootstrapTrajectories;
    std::size_t bootstrap_k = kBootstrapResamples;
    std::size_t repeats = 1;
    double prob_floor = kDefaultProbFloor;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    std::size_t jobs = 1;
    nav::NavConfig nav;
    GenerateConfig generate;
    SweepConfig sweep;
    CalibrateConfig calibrate;
    EvaluateConfig evaluate;
    std::map<std::string, ModelConfig> models;

    // FNV-1a of the config file bytes.
    std::string hash;
};

// Throws ValidationError on TOML syntax errors, unknown keys, wrong value
// types and out-of-range values. Relative dataset paths resolve against
// `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

nav::PolicySpec parse_policy_name(const std::string& name);

}  // namespace opecalib
