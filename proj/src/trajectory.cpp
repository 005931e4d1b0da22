#include "opecalib/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "opecalib/error.hpp"

namespace opecalib {

using detail::require;

DiscreteDistribution::DiscreteDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    require(!probs_.empty(), "distribution over an empty action set");
    double sum = 0.0;
    for (double p : probs_) {
        require(std::isfinite(p) && p >= 0.0, "distribution entry is negative or not finite");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= kSumTolerance,
            "distribution entries sum to " + std::to_string(sum) + ", not 1");
}

DiscreteDistribution DiscreteDistribution::uniform(std::size_t action_count) {
    require(action_count > 0, "uniform distribution over zero actions");
    return DiscreteDistribution(std::vector<double>(action_count, 1.0 / double(action_count)));
}

DiscreteDistribution DiscreteDistribution::point_mass(std::size_t action_count, ActionId action) {
    require(action >= 0 && std::size_t(action) < action_count, "point mass action out of range");
    std::vector<double> p(action_count, 0.0);
    p[std::size_t(action)] = 1.0;
    return DiscreteDistribution(std::move(p));
}

TrajectoryDataset::TrajectoryDataset(std::vector<Trajectory> trajectories, std::size_t action_count)
    : trajectories_(std::move(trajectories)), action_count_(action_count) {
    require(!trajectories_.empty(), "no trajectories");
    require(action_count_ > 0, "action count must be positive");
    state_dim_ = trajectories_.front().steps.empty() ? 0 : trajectories_.front().steps.front().state.size();
    require(state_dim_ > 0, "state dimension must be positive");
    for (const auto& traj : trajectories_) {
        require(!traj.steps.empty(), "trajectory '" + traj.id + "' has no steps");
        for (const auto& step : traj.steps) {
            require(step.state.size() == state_dim_,
                    "trajectory '" + traj.id + "' has inconsistent state dimension");
            require(std::all_of(step.state.begin(), step.state.end(), [](double v) { return std::isfinite(v); }),
                    "trajectory '" + traj.id + "' has a non-finite state entry");
            require(step.action >= 0 && std::size_t(step.action) < action_count_,
                    "trajectory '" + traj.id + "' has an action outside [0, " + std::to_string(action_count_) + ")");
            require(std::isfinite(step.reward), "trajectory '" + traj.id + "' has a non-finite reward");
        }
        if (traj.terminal)
            require(traj.terminal->size() == state_dim_,
                    "trajectory '" + traj.id + "' has a terminal state of the wrong dimension");
        if (traj.severity)
            require(traj.severity->size() == traj.steps.size(),
                    "trajectory '" + traj.id + "' needs one severity value per step");
        step_count_ += traj.steps.size();
    }
}

std::size_t TrajectoryDataset::max_length() const noexcept {
    std::size_t longest = 0;
    for (const auto& t : trajectories_) longest = std::max(longest, t.length());
    return longest;
}

bool TrajectoryDataset::has_severity() const noexcept {
    return std::all_of(trajectories_.begin(), trajectories_.end(),
                       [](const Trajectory& t) { return t.severity.has_value(); });
}

DiscreteDistribution FunctionPolicy::action_probabilities(StateView state) const {
    auto d = fn_(state);
    require(d.size() == action_count_, "policy returned a distribution of the wrong size");
    return d;
}

double return_of(const Trajectory& trajectory, double gamma) {
    require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    double total = 0.0;
    double discount = 1.0;
    for (const auto& step : trajectory.steps) {
        total += discount * step.reward;
        discount *= gamma;
    }
    return total;
}

double monte_carlo_value(const TrajectoryDataset& dataset, double gamma) {
    double total = 0.0;
    for (const auto& traj : dataset) total += return_of(traj, gamma);
    return total / double(dataset.size());
}

double mse_of_samples(std::span<const double> samples, double truth) {
    require(!samples.empty(), "mse of an empty sample set");
    double total = 0.0;
    for (double s : samples) total += (truth - s) * (truth - s);
    return total / double(samples.size());
}

std::map<std::size_t, LengthGroup> group_by_length(const TrajectoryDataset& dataset) {
    std::map<std::size_t, LengthGroup> groups;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        auto& g = groups[dataset[i].length()];
        g.length = dataset[i].length();
        g.indices.push_back(i);
    }
    for (auto& [len, g] : groups) g.weight = double(g.indices.size()) / double(dataset.size());
    return groups;
}

TrajectoryDataset subset(const TrajectoryDataset& dataset, std::span<const std::size_t> indices) {
    std::vector<Trajectory> picked;
    picked.reserve(indices.size());
    for (auto i : indices) {
        require(i < dataset.size(), "subset index out of range");
        picked.push_back(dataset[i]);
    }
    return TrajectoryDataset(std::move(picked), dataset.action_count());
}

bool trajectory_less(const Trajectory& a, const Trajectory& b) {
    auto step_key = [](const Step& s) { return std::tie(s.state, s.action, s.reward); };
    const auto n = std::min(a.steps.size(), b.steps.size());
    for (std::size_t t = 0; t < n; ++t) {
        if (step_key(a.steps[t]) < step_key(b.steps[t])) return true;
        if (step_key(b.steps[t]) < step_key(a.steps[t])) return false;
    }
    const auto a_len = a.steps.size();
    const auto b_len = b.steps.size();
    return std::tie(a_len, a.terminal, a.severity, a.id) < std::tie(b_len, b.terminal, b.severity, b.id);
}

TrajectoryDataset canonical_order(const TrajectoryDataset& dataset) {
    std::vector<Trajectory> sorted = dataset.trajectories();
    std::stable_sort(sorted.begin(), sorted.end(), trajectory_less);
    return TrajectoryDataset(std::move(sorted), dataset.action_count());
}

}  // namespace opecalib
