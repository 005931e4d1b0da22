#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "opecalib/estimators.hpp"
#include "opecalib/provenance.hpp"

namespace opecalib {

enum class SplitKind { Random, Intervention };

std::string_view split_kind_name(SplitKind kind);
SplitKind parse_split_kind(std::string_view name);

// D1 defines the policy under evaluation (its behaviour policy becomes the
// evaluation policy and its returns the on-policy truth); D2 is the logged
// data the estimators run on.
struct SplitResult {
    TrajectoryDataset d1;
    TrajectoryDataset d2;
    std::vector<std::size_t> d1_indices;  // ascending, into the source dataset
    std::vector<std::size_t> d2_indices;
    SplitKind kind;
    std::uint64_t seed;
};

// |D1| = ceil(n/2), |D2| = floor(n/2), uniformly at random.
SplitResult random_split(const TrajectoryDataset& dataset, std::uint64_t seed);

// D2 is a random half (rounded down) of the trajectories that never take a
// withheld action; D1 is everything else.
SplitResult intervention_split(const TrajectoryDataset& dataset, std::span<const ActionId> withheld,
                               std::uint64_t seed);

inline constexpr std::size_t kBootstrapTrajectories = 200;
inline constexpr std::size_t kBootstrapResamples = 500;

struct BootstrapOptions {
    std::size_t n = kBootstrapTrajectories;  // trajectories per resample, drawn with replacement
    std::size_t k = kBootstrapResamples;     // resamples
    double gamma = 1.0;
    std::uint64_t seed = 0;
    double prob_floor = kDefaultProbFloor;
    std::size_t jobs = 1;
    // Consecutive estimator failures tolerated on one resample before giving up.
    std::size_t max_attempts = 100;
};

struct BootstrapResult {
    std::vector<double> samples;
    double mse = 0.0;
    double truth = 0.0;
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t failures = 0;  // resamples redrawn after an EstimatorError
};

using ResampleEstimator = std::function<double(const TrajectoryDataset& resample)>;

// Resample j draws from stream (seed, j), so the result is independent of
// `jobs`. D2 is put in canonical order first, so it is also independent of
// the order of its trajectories.
BootstrapResult bootstrap_mse(const TrajectoryDataset& d2, const ResampleEstimator& estimator, double truth,
                              const BootstrapOptions& options);

// Off-policy version: policy and Q-model evaluations on D2 are computed once
// and shared across resamples. `q_model` is required for AM and PHWDR.
BootstrapResult bootstrap_mse(const TrajectoryDataset& d2, const PolicyModel& pi_e, const PolicyModel& pi_b,
                              Estimator estimator, double truth, const BootstrapOptions& options,
                              const QModel* q_model = nullptr);

// idx,value
std::string bootstrap_csv(const BootstrapResult& result, const std::optional<Provenance>& provenance = {});
// {"mse", "truth", "n", "k", "failures"}
nlohmann::ordered_json bootstrap_summary(const BootstrapResult& result);

// Mean total variation between the two policies over the probe states.
double policy_tv_distance(const PolicyModel& p1, const PolicyModel& p2, std::span<const StateVector> probe_states);

// Every logged state of a dataset, in trajectory then step order.
std::vector<StateVector> logged_states(const TrajectoryDataset& dataset);

}  // namespace opecalib
