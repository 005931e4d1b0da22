#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "opecalib/ball_tree.hpp"
#include "opecalib/kernel.hpp"
#include "opecalib/provenance.hpp"
#include "opecalib/trajectory.hpp"

namespace opecalib {

inline constexpr std::size_t kTargetNeighbours = 150;
inline constexpr std::size_t kCalibrationSamples = 500;
inline constexpr std::size_t kDefaultStrata = 4;

// 1/2 sum_a |p(a) - q(a)|
double total_variation(const DiscreteDistribution& p, const DiscreteDistribution& q);

// Reference behaviour distribution at a state: the unsmoothed action
// histogram of its k nearest held-out (state, action) pairs. Points at exactly
// zero distance from the query are excluded so a test state never votes for
// itself. Held-out pairs are indexed in a canonical order, which makes the
// result independent of how the test set is ordered.
class TargetDistribution {
public:
    TargetDistribution(const TrajectoryDataset& test_set, WeightedKernel kernel, std::size_t k = kTargetNeighbours);

    DiscreteDistribution at(StateView state) const;

    std::size_t k() const noexcept { return k_; }
    std::size_t action_count() const noexcept { return action_count_; }

private:
    std::size_t k_;
    std::size_t action_count_;
    std::vector<ActionId> actions_;
    std::unique_ptr<BallTree> tree_;
};

DiscreteDistribution target_distribution(const TrajectoryDataset& test_set, StateView state,
                                         const WeightedKernel& kernel, std::size_t k = kTargetNeighbours);

// Exposes a TargetDistribution as a policy, for self-comparison runs.
class TargetPolicyModel final : public PolicyModel {
public:
    explicit TargetPolicyModel(std::shared_ptr<const TargetDistribution> target) : target_(std::move(target)) {}
    std::size_t action_count() const override { return target_->action_count(); }
    DiscreteDistribution action_probabilities(StateView state) const override { return target_->at(state); }
    std::string kind() const override { return "target"; }

private:
    std::shared_ptr<const TargetDistribution> target_;
};

struct StratumSummary {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n = 0;
    double mean_tv = 0.0;
};

struct CalibrationReport {
    std::string model_name;
    std::vector<StratumSummary> strata;  // empty strata are omitted
    std::size_t total = 0;
};

struct CalibrationOptions {
    // Severity bin edges. Unset: equal-count quantile bins when the test set
    // carries severity, a single unbounded stratum otherwise.
    std::optional<std::vector<double>> edges;
    std::size_t quantile_bins = kDefaultStrata;
    std::size_t sample_count = kCalibrationSamples;  // per stratum
    std::uint64_t seed = 0;
};

// Edges of `bins` equal-count bins over `values` (min and max included).
std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins);

CalibrationReport calibration_report(const PolicyModel& model, const std::string& model_name,
                                     const TrajectoryDataset& test_set, const TargetDistribution& target,
                                     const CalibrationOptions& options);
CalibrationReport calibration_report(const PolicyModel& model, const std::string& model_name,
                                     const TrajectoryDataset& test_set, const WeightedKernel& kernel,
                                     const CalibrationOptions& options, std::size_t target_k = kTargetNeighbours);

// stratum_lo,stratum_hi,n,mean_tv
std::string calibration_csv(const CalibrationReport& report, const std::optional<Provenance>& provenance = {});
nlohmann::ordered_json to_json(const CalibrationReport& report);

// Mean over every logged step of |pi(a_t|s_t) - pi_hat(a_t|s_t)| at the taken action.
double avg_abs_policy_error(const PolicyModel& model, const TrajectoryDataset& dataset,
                            const PolicyModel& true_policy);

}  // namespace opecalib
