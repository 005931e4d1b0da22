#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>

#include "opecalib/rng.hpp"
#include "opecalib/trajectory.hpp"

namespace opecalib::nav {

// Unit moves in the four coordinate directions, or stay. The y axis points
// up, so the start corner (0.5, 9.5) is the top left of the default map.
enum Action : ActionId { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };
inline constexpr std::size_t kActionCount = 5;

using Point = std::array<double, 2>;

struct NavConfig {
    double side = 10.0;  // map is [0, side]^2
    Point start{0.5, 9.5};
    Point goal_centre{9.5, 9.5};
    double goal_radius = 1.5;
    double goal_reward = 1.0;
    Point penalty_centre{0.5, 0.5};
    double penalty_radius = 1.5;
    double penalty_reward = -1.0;
    double noise_sd = 0.25;
    std::size_t horizon = 15;
    double gamma = 1.0;

    // Throws ValidationError on non-positive radii or side, zero horizon,
    // negative noise, gamma outside [0, 1], or overlapping reward regions.
    void validate() const;
};

struct Transition {
    StateVector next;
    double reward = 0.0;
};

// Reward earned for being at `state`: goal reward inside the goal disc,
// penalty inside the penalty disc, zero elsewhere.
double reward_at(const NavConfig& config, StateView state);

// Noiseless post-move position, clipped to the map.
Point move(const NavConfig& config, StateView state, ActionId action);

// next = clip(state + move + N(0, sd^2 I)); the reward is that of `next`.
Transition step(const NavConfig& config, StateView state, ActionId action, Rng& rng);

// Euclidean distance to the penalty centre; the synthetic severity scalar.
double severity(const NavConfig& config, StateView state);

enum class PolicyKind { SoftmaxToGoal, EpsilonGoal };

struct PolicySpec {
    PolicyKind kind = PolicyKind::SoftmaxToGoal;
    double temperature = 0.5;  // softmax-toward-goal
    double epsilon = 0.2;      // epsilon-goal-directed

    std::string name() const;
};

// Goal-seeking policies scored by the noiseless post-move distance to the
// goal centre. Softmax: p(a) proportional to exp(-distance_a / temperature).
// Epsilon: the closest move (lowest action id on ties) gets 1 - epsilon and
// epsilon is spread uniformly over all actions.
class NavPolicy final : public PolicyModel {
public:
    NavPolicy(PolicySpec spec, NavConfig config);

    std::size_t action_count() const override { return kActionCount; }
    DiscreteDistribution action_probabilities(StateView state) const override;
    std::string kind() const override { return "nav_" + spec_.name(); }
    const PolicySpec& spec() const noexcept { return spec_; }

private:
    PolicySpec spec_;
    NavConfig config_;
};

std::unique_ptr<NavPolicy> true_nav_policy(const PolicySpec& spec, const NavConfig& config);

ActionId sample_action(const DiscreteDistribution& dist, Rng& rng);

// One horizon-length episode from the start corner.
Trajectory rollout(const NavConfig& config, const PolicyModel& policy, Rng& rng, std::string id = {});

// n rollouts; trajectory i draws from stream (seed, i), so the result does
// not depend on `jobs`.
TrajectoryDataset generate_dataset(const NavConfig& config, const PolicyModel& policy, std::size_t n,
                                   std::uint64_t seed, std::size_t jobs = 1);

}  // namespace opecalib::nav
