#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opecalib/ball_tree.hpp"
#include "opecalib/estimators.hpp"

namespace opecalib {

// Supervised regressor from states to scalars, refit on every FQI iteration.
class Regressor {
public:
    virtual ~Regressor() = default;
    virtual void fit(const std::vector<StateVector>& inputs, const std::vector<double>& targets) = 0;
    virtual double predict(StateView state) const = 0;
};

// Mean target of the k nearest training inputs (Euclidean). In exact-fit
// mode a query that coincides with training inputs returns the mean target
// of exactly those inputs, which makes the regressor exact on tabular data.
class KnnRegressor final : public Regressor {
public:
    explicit KnnRegressor(std::size_t k, bool exact_fit = false);
    void fit(const std::vector<StateVector>& inputs, const std::vector<double>& targets) override;
    double predict(StateView state) const override;

private:
    std::size_t k_;
    bool exact_fit_;
    std::unique_ptr<BallTree> tree_;
    std::vector<double> targets_;
};

struct RegressorConfig {
    std::string kind = "knn";
    std::size_t k = 10;
    bool exact_fit = false;
};

using RegressorFactory = std::function<std::unique_ptr<Regressor>()>;
RegressorFactory make_regressor_factory(const RegressorConfig& config);

// Q as one regressor per action. Actions absent from the data score 0.
class FittedQModel final : public QModel {
public:
    explicit FittedQModel(std::vector<std::unique_ptr<Regressor>> per_action);
    std::size_t action_count() const override { return per_action_.size(); }
    double q(StateView state, ActionId action) const override;

private:
    std::vector<std::unique_ptr<Regressor>> per_action_;
};

struct FqiOptions {
    double gamma = 1.0;
    // Unset: the longest trajectory length in the data.
    std::optional<std::size_t> iterations;
    RegressorConfig regressor;
    RegressorFactory factory;  // overrides `regressor` when set
};

// Fitted Q iteration for the evaluation policy: starting from Q = 0, repeatedly
// regress r_t + gamma * sum_a pi_e(a|s_{t+1}) Q(s_{t+1}, a) on (s_t, a_t). The
// last step of each trajectory has no successor and regresses r_t alone.
std::shared_ptr<FittedQModel> fitted_q_iteration(const TrajectoryDataset& data, const PolicyModel& pi_e,
                                                 const FqiOptions& options);

}  // namespace opecalib
