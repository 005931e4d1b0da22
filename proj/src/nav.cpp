#include "opecalib/nav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "opecalib/error.hpp"
#include "opecalib/parallel.hpp"

namespace opecalib::nav {

using detail::require;

namespace {

constexpr std::array<Point, kActionCount> kMoves{{{0.0, 1.0}, {0.0, -1.0}, {-1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}}};

double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

Point as_point(StateView s) {
    require(s.size() == 2, "navigation states are two-dimensional");
    return {s[0], s[1]};
}

}  // namespace

void NavConfig::validate() const {
    require(side > 0.0, "nav: map side must be positive");
    require(goal_radius > 0.0 && penalty_radius > 0.0, "nav: reward radii must be positive");
    require(horizon >= 1, "nav: horizon must be at least 1");
    require(noise_sd >= 0.0, "nav: noise standard deviation must be non-negative");
    require(gamma >= 0.0 && gamma <= 1.0, "nav: gamma must lie in [0, 1]");
    require(distance(goal_centre, penalty_centre) > goal_radius + penalty_radius,
            "nav: goal and penalty regions overlap");
}

double reward_at(const NavConfig& config, StateView state) {
    const auto p = as_point(state);
    if (distance(p, config.goal_centre) <= config.goal_radius) return config.goal_reward;
    if (distance(p, config.penalty_centre) <= config.penalty_radius) return config.penalty_reward;
    return 0.0;
}

Point move(const NavConfig& config, StateView state, ActionId action) {
    require(action >= 0 && std::size_t(action) < kActionCount, "nav: invalid action id " + std::to_string(action));
    const auto p = as_point(state);
    const auto& m = kMoves[std::size_t(action)];
    return {std::clamp(p[0] + m[0], 0.0, config.side), std::clamp(p[1] + m[1], 0.0, config.side)};
}

Transition step(const NavConfig& config, StateView state, ActionId action, Rng& rng) {
    auto p = as_point(state);
    require(action >= 0 && std::size_t(action) < kActionCount, "nav: invalid action id " + std::to_string(action));
    const auto& m = kMoves[std::size_t(action)];
    p[0] += m[0];
    p[1] += m[1];
    if (config.noise_sd > 0.0) {
        std::normal_distribution<double> noise(0.0, config.noise_sd);
        p[0] += noise(rng);
        p[1] += noise(rng);
    }
    Transition out;
    out.next = {std::clamp(p[0], 0.0, config.side), std::clamp(p[1], 0.0, config.side)};
    out.reward = reward_at(config, out.next);
    return out;
}

double severity(const NavConfig& config, StateView state) { return distance(as_point(state), config.penalty_centre); }

std::string PolicySpec::name() const {
    std::ostringstream s;
    if (kind == PolicyKind::SoftmaxToGoal)
        s << "softmax_t" << temperature;
    else
        s << "epsilon_e" << epsilon;
    return s.str();
}

NavPolicy::NavPolicy(PolicySpec spec, NavConfig config) : spec_(spec), config_(config) {
    if (spec_.kind == PolicyKind::SoftmaxToGoal)
        require(spec_.temperature > 0.0 && std::isfinite(spec_.temperature), "nav: temperature must be positive");
    else
        require(spec_.epsilon >= 0.0 && spec_.epsilon <= 1.0, "nav: epsilon must lie in [0, 1]");
}

DiscreteDistribution NavPolicy::action_probabilities(StateView state) const {
    std::array<double, kActionCount> dist{};
    for (std::size_t a = 0; a < kActionCount; ++a)
        dist[a] = distance(move(config_, state, ActionId(a)), config_.goal_centre);
    std::vector<double> p(kActionCount);
    if (spec_.kind == PolicyKind::SoftmaxToGoal) {
        const double best = *std::min_element(dist.begin(), dist.end());
        double total = 0.0;
        for (std::size_t a = 0; a < kActionCount; ++a) total += p[a] = std::exp(-(dist[a] - best) / spec_.temperature);
        for (auto& v : p) v /= total;
    } else {
        const auto best = std::size_t(std::min_element(dist.begin(), dist.end()) - dist.begin());
        for (std::size_t a = 0; a < kActionCount; ++a) p[a] = spec_.epsilon / double(kActionCount);
        p[best] += 1.0 - spec_.epsilon;
    }
    return DiscreteDistribution(std::move(p));
}

std::unique_ptr<NavPolicy> true_nav_policy(const PolicySpec& spec, const NavConfig& config) {
    return std::make_unique<NavPolicy>(spec, config);
}

ActionId sample_action(const DiscreteDistribution& dist, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double cumulative = 0.0;
    for (std::size_t a = 0; a < dist.size(); ++a) {
        cumulative += dist[a];
        if (u < cumulative) return ActionId(a);
    }
    // Rounding left u above the last partial sum; take the last supported action.
    for (std::size_t a = dist.size(); a-- > 0;)
        if (dist[a] > 0.0) return ActionId(a);
    return ActionId(dist.size() - 1);
}

Trajectory rollout(const NavConfig& config, const PolicyModel& policy, Rng& rng, std::string id) {
    require(policy.action_count() == kActionCount, "nav: policy must act over five actions");
    Trajectory traj;
    traj.id = std::move(id);
    traj.severity.emplace();
    StateVector state{config.start[0], config.start[1]};
    for (std::size_t t = 0; t < config.horizon; ++t) {
        const auto action = sample_action(policy.action_probabilities(state), rng);
        auto tr = step(config, state, action, rng);
        traj.severity->push_back(severity(config, state));
        traj.steps.push_back(Step{std::move(state), action, tr.reward});
        state = std::move(tr.next);
    }
    traj.terminal = std::move(state);
    return traj;
}

TrajectoryDataset generate_dataset(const NavConfig& config, const PolicyModel& policy, std::size_t n,
                                   std::uint64_t seed, std::size_t jobs) {
    config.validate();
    require(n >= 1, "nav: need at least one trajectory");
    std::vector<Trajectory> trajectories(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        Rng rng = make_rng(seed, i);
        char id[32];
        std::snprintf(id, sizeof id, "nav-%06zu", i);
        trajectories[i] = rollout(config, policy, rng, id);
    });
    return TrajectoryDataset(std::move(trajectories), kActionCount);
}

}  // namespace opecalib::nav
