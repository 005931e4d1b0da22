#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "opecalib/trajectory.hpp"

namespace opecalib {

inline constexpr double kDefaultProbFloor = 1e-3;

// Cumulative importance ratios rho[i][t] = prod_{u<=t} pi_e(a_u|s_u) / pi_b(a_u|s_u)
// for trajectory i. Behaviour probabilities below the floor are clipped up to
// it before dividing; floor_hits counts those clips.
struct WeightTable {
    std::vector<std::vector<double>> rho;
    std::size_t floor_hits = 0;
};

// Probability of the action actually taken at every step, under each policy.
struct TakenProbabilities {
    std::vector<std::vector<double>> evaluation;
    std::vector<std::vector<double>> behaviour;
};

TakenProbabilities taken_probabilities(const TrajectoryDataset& dataset, const PolicyModel& pi_e,
                                       const PolicyModel& pi_b);

WeightTable weights_from_probabilities(const TakenProbabilities& probs, double prob_floor = kDefaultProbFloor);

WeightTable cumulative_weights(const TrajectoryDataset& dataset, const PolicyModel& pi_e, const PolicyModel& pi_b,
                               double prob_floor = kDefaultProbFloor);

// Action-value model used by the model-based and doubly robust estimators.
class QModel {
public:
    virtual ~QModel() = default;
    virtual std::size_t action_count() const = 0;
    virtual double q(StateView state, ActionId action) const = 0;
};

// sum_a pi(a|s) q(s, a)
double state_value(const QModel& model, const PolicyModel& policy, StateView state);

class ConstantQModel final : public QModel {
public:
    ConstantQModel(std::size_t action_count, double value) : action_count_(action_count), value_(value) {}
    std::size_t action_count() const override { return action_count_; }
    double q(StateView, ActionId) const override { return value_; }

private:
    std::size_t action_count_;
    double value_;
};

class ZeroQModel final : public QModel {
public:
    explicit ZeroQModel(std::size_t action_count) : action_count_(action_count) {}
    std::size_t action_count() const override { return action_count_; }
    double q(StateView, ActionId) const override { return 0.0; }

private:
    std::size_t action_count_;
};

// Model values along the logged data: q[i][t] = Q(s_t, a_t), v[i][t] = V(s_t)
// with V taken under the evaluation policy.
struct ControlVariates {
    std::vector<std::vector<double>> q;
    std::vector<std::vector<double>> v;
};

ControlVariates control_variates(const TrajectoryDataset& dataset, const PolicyModel& pi_e, const QModel& model);

struct EstimateReport {
    std::string estimator;
    double value = 0.0;
    std::size_t n = 0;
    std::map<std::size_t, std::size_t> length_counts;
    // Effective sample size (sum rho_t)^2 / sum rho_t^2 per timestep, and its minimum.
    std::vector<double> ess;
    double ess_min = 0.0;
    std::size_t floor_hits = 0;
};

// {"estimator", "value", "n", "ess_min", "floor_hits"}
nlohmann::ordered_json to_json(const EstimateReport& report);

// (1/n) sum_i rho_{T_i-1} R(H_i)
EstimateReport estimate_is(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma);

// (1/n) sum_i sum_t gamma^t rho_t r_t
EstimateReport estimate_step_is(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma);

// Step-wise self-normalised IS. All trajectories must share one length.
EstimateReport estimate_step_wis(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma);

// (1/n) sum_i sum_a pi_e(a|s_0) Q(s_0, a)
EstimateReport estimate_am(const TrajectoryDataset& dataset, const PolicyModel& pi_e, const QModel& model);
EstimateReport estimate_am(const TrajectoryDataset& dataset, const ControlVariates& cv);

// Weighted doubly robust value of a group of equal-length trajectories, with
// self-normalised step weights and w_{-1} = 1/|group|.
double estimate_wdr_fixed_length(const TrajectoryDataset& group, const WeightTable& weights,
                                 const ControlVariates& cv, double gamma);
double estimate_wdr_fixed_length(const TrajectoryDataset& group, const WeightTable& weights,
                                 const PolicyModel& pi_e, const QModel& model, double gamma);

// Per-horizon estimators: sum_l W_l * (estimate restricted to length-l trajectories).
EstimateReport estimate_phwis(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma);
EstimateReport estimate_step_phwis(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma);
EstimateReport estimate_phwdr(const TrajectoryDataset& dataset, const WeightTable& weights,
                              const ControlVariates& cv, double gamma);
EstimateReport estimate_phwdr(const TrajectoryDataset& dataset, const WeightTable& weights,
                              const PolicyModel& pi_e, const QModel& model, double gamma);

enum class Estimator { IS, StepIS, StepWIS, AM, PHWIS, StepPHWIS, PHWDR };

std::string_view estimator_name(Estimator e);
Estimator parse_estimator(std::string_view name);
bool uses_control_variates(Estimator e);

// Dispatches to the named estimator. `cv` is required for AM and PHWDR.
EstimateReport run_estimator(Estimator e, const TrajectoryDataset& dataset, const WeightTable& weights,
                             const ControlVariates* cv, double gamma);

}  // namespace opecalib
