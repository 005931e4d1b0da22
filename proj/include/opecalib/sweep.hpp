#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opecalib/estimators.hpp"
#include "opecalib/nav.hpp"
#include "opecalib/provenance.hpp"

namespace opecalib::nav {

struct SweepPoint {
    std::size_t k = 1;
    std::size_t train_size = 1;  // number of (state, action) training pairs
};

// Fits a behaviour model from training data for neighbour count k.
using BehaviourFitter = std::function<std::unique_ptr<PolicyModel>(const TrajectoryDataset& train, std::size_t k)>;

// Epsilon-goal, epsilon = 0.5.
inline PolicySpec default_sweep_evaluation() { return {PolicyKind::EpsilonGoal, 0.5, 0.5}; }

struct SweepOptions {
    NavConfig nav;
    PolicySpec behaviour;
    PolicySpec evaluation = default_sweep_evaluation();
    std::vector<SweepPoint> grid;
    std::size_t n_eval = 200;   // evaluation trajectories per repeat
    std::size_t repeats = 10;
    double alpha = 0.5;         // kNN smoothing
    double prob_floor = kDefaultProbFloor;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    // Replaces the kNN behaviour model when set.
    BehaviourFitter fitter;
    // Fixed evaluation trajectories, reused by every repeat, instead of fresh rollouts.
    std::optional<TrajectoryDataset> eval_dataset;
};

struct SweepRow {
    std::size_t k = 0;
    std::size_t train_size = 0;
    double avg_abs_err = 0.0;
    double frac_err_mean = 0.0;
    double frac_err_std = 0.0;  // sample standard deviation over valid repeats
    std::size_t repeats = 0;    // repeats with a usable reference value
    std::size_t flagged = 0;    // repeats where the reference value was ~0
};

// Behaviour-model error against OPE error. For every grid point and repeat:
// fit a kNN behaviour model on train_size pairs, measure its average absolute
// error at the taken actions of the evaluation trajectories, and compare
// step-WIS under the fitted model with step-WIS under the true behaviour
// policy on those same trajectories.
std::vector<SweepRow> figure1_sweep(const SweepOptions& options);

// Twelve points spanning fine to maximally coarse models.
std::vector<SweepPoint> default_sweep_grid();

// k,train_size,avg_abs_err,frac_err_mean,frac_err_std,repeats
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::optional<Provenance>& provenance = {});

// First `steps` logged steps, in trajectory order; the last trajectory may be cut short.
TrajectoryDataset truncate_to_steps(const TrajectoryDataset& dataset, std::size_t steps);

}  // namespace opecalib::nav
