#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace opecalib {

using StateVector = std::vector<double>;
using StateView = std::span<const double>;
using ActionId = int;

// Probability vector over a finite action set. Construction validates that
// every entry is non-negative and that the entries sum to one within 1e-9.
class DiscreteDistribution {
public:
    static constexpr double kSumTolerance = 1e-9;

    explicit DiscreteDistribution(std::vector<double> probs);

    static DiscreteDistribution uniform(std::size_t action_count);
    static DiscreteDistribution point_mass(std::size_t action_count, ActionId action);

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t a) const { return probs_[a]; }
    std::span<const double> probs() const noexcept { return probs_; }

    bool operator==(const DiscreteDistribution&) const = default;

private:
    std::vector<double> probs_;
};

struct Step {
    StateVector state;
    ActionId action = 0;
    double reward = 0.0;

    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::string id;
    std::vector<Step> steps;
    std::optional<StateVector> terminal;
    // One severity value per step when present.
    std::optional<std::vector<double>> severity;

    std::size_t length() const noexcept { return steps.size(); }
    bool operator==(const Trajectory&) const = default;
};

// Immutable, validated bag of trajectories sharing a state dimension and an
// action count.
class TrajectoryDataset {
public:
    TrajectoryDataset(std::vector<Trajectory> trajectories, std::size_t action_count);

    std::size_t size() const noexcept { return trajectories_.size(); }
    std::size_t action_count() const noexcept { return action_count_; }
    std::size_t state_dim() const noexcept { return state_dim_; }
    std::size_t step_count() const noexcept { return step_count_; }
    std::size_t max_length() const noexcept;
    bool has_severity() const noexcept;

    const Trajectory& operator[](std::size_t i) const { return trajectories_[i]; }
    const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
    auto begin() const noexcept { return trajectories_.begin(); }
    auto end() const noexcept { return trajectories_.end(); }

    bool operator==(const TrajectoryDataset&) const = default;

private:
    std::vector<Trajectory> trajectories_;
    std::size_t action_count_ = 0;
    std::size_t state_dim_ = 0;
    std::size_t step_count_ = 0;
};

// Maps a state to a distribution over actions. Implementations must be safe
// for concurrent const calls.
class PolicyModel {
public:
    virtual ~PolicyModel() = default;
    virtual std::size_t action_count() const = 0;
    virtual DiscreteDistribution action_probabilities(StateView state) const = 0;
    virtual std::string kind() const = 0;
};

// Adapts a callable into a PolicyModel.
class FunctionPolicy final : public PolicyModel {
public:
    using Fn = std::function<DiscreteDistribution(StateView)>;

    FunctionPolicy(std::size_t action_count, Fn fn, std::string kind = "function")
        : action_count_(action_count), fn_(std::move(fn)), kind_(std::move(kind)) {}

    std::size_t action_count() const override { return action_count_; }
    DiscreteDistribution action_probabilities(StateView state) const override;
    std::string kind() const override { return kind_; }

private:
    std::size_t action_count_;
    Fn fn_;
    std::string kind_;
};

double return_of(const Trajectory& trajectory, double gamma);

// On-policy Monte-Carlo value: the mean discounted return.
double monte_carlo_value(const TrajectoryDataset& dataset, double gamma);

// Mean of (truth - sample)^2.
double mse_of_samples(std::span<const double> samples, double truth);

struct LengthGroup {
    std::size_t length = 0;
    std::vector<std::size_t> indices;  // into the source dataset, ascending
    double weight = 0.0;               // |group| / n
};

std::map<std::size_t, LengthGroup> group_by_length(const TrajectoryDataset& dataset);

// Copy of the trajectories at `indices`, in the given order (repeats allowed).
TrajectoryDataset subset(const TrajectoryDataset& dataset, std::span<const std::size_t> indices);

// Total order on trajectory content (steps, then terminal, severity, id).
bool trajectory_less(const Trajectory& a, const Trajectory& b);

// Same trajectories sorted by trajectory_less; used where results must not
// depend on input ordering.
TrajectoryDataset canonical_order(const TrajectoryDataset& dataset);

}  // namespace opecalib
