#include "opecalib/fqi.hpp"

#include <algorithm>
#include <cmath>

#include "opecalib/error.hpp"

namespace opecalib {

using detail::require;

KnnRegressor::KnnRegressor(std::size_t k, bool exact_fit) : k_(k), exact_fit_(exact_fit) {
    require(k_ >= 1, "kNN regressor: k must be at least 1");
}

void KnnRegressor::fit(const std::vector<StateVector>& inputs, const std::vector<double>& targets) {
    require(!inputs.empty() && inputs.size() == targets.size(), "kNN regressor: need matching, nonempty data");
    tree_ = std::make_unique<BallTree>(inputs, WeightedKernel::euclidean(inputs.front().size()));
    targets_ = targets;
}

double KnnRegressor::predict(StateView state) const {
    require(tree_ != nullptr, "kNN regressor: predict before fit");
    const std::size_t n = tree_->size();
    std::size_t want = std::min(k_, n);
    auto found = tree_->query(state, want);
    if (exact_fit_) {
        // Widen until the zero-distance block is complete.
        while (found.back().distance == 0.0 && want < n) {
            want = std::min(n, want * 2);
            found = tree_->query(state, want);
        }
        const auto zeros = std::size_t(std::count_if(found.begin(), found.end(),
                                                     [](const Neighbour& nb) { return nb.distance == 0.0; }));
        if (zeros > 0) {
            double s = 0.0;
            for (std::size_t i = 0; i < zeros; ++i) s += targets_[found[i].index];
            return s / double(zeros);
        }
        found.resize(std::min(k_, found.size()));
    }
    double s = 0.0;
    for (const auto& nb : found) s += targets_[nb.index];
    return s / double(found.size());
}

RegressorFactory make_regressor_factory(const RegressorConfig& config) {
    if (config.kind == "knn") {
        const auto k = config.k;
        const auto exact = config.exact_fit;
        require(k >= 1, "regressor k must be at least 1");
        return [k, exact] { return std::make_unique<KnnRegressor>(k, exact); };
    }
    throw ValidationError("unknown regressor kind '" + config.kind + "' (expected knn)");
}

FittedQModel::FittedQModel(std::vector<std::unique_ptr<Regressor>> per_action) : per_action_(std::move(per_action)) {
    require(!per_action_.empty(), "Q model needs at least one action");
}

double FittedQModel::q(StateView state, ActionId action) const {
    require(action >= 0 && std::size_t(action) < per_action_.size(), "Q model: action out of range");
    const auto& r = per_action_[std::size_t(action)];
    return r ? r->predict(state) : 0.0;
}

std::shared_ptr<FittedQModel> fitted_q_iteration(const TrajectoryDataset& data, const PolicyModel& pi_e,
                                                 const FqiOptions& options) {
    require(options.gamma >= 0.0 && options.gamma <= 1.0, "FQI: gamma must lie in [0, 1]");
    require(pi_e.action_count() == data.action_count(), "FQI: policy action count does not match the data");
    const std::size_t iterations = options.iterations.value_or(data.max_length());
    require(iterations >= 1, "FQI: need at least one iteration");
    const auto factory = options.factory ? options.factory : make_regressor_factory(options.regressor);
    const std::size_t A = data.action_count();

    struct Transition {
        const StateVector* state;
        ActionId action;
        double reward;
        const StateVector* next;  // null at the end of a trajectory
    };
    std::vector<Transition> transitions;
    for (const auto& traj : data)
        for (std::size_t t = 0; t < traj.length(); ++t)
            transitions.push_back({&traj.steps[t].state, traj.steps[t].action, traj.steps[t].reward,
                                   t + 1 < traj.length() ? &traj.steps[t + 1].state : nullptr});

    // Evaluation-policy probabilities at successor states never change.
    std::vector<std::vector<double>> next_probs(transitions.size());
    for (std::size_t j = 0; j < transitions.size(); ++j)
        if (transitions[j].next) {
            const auto p = pi_e.action_probabilities(*transitions[j].next);
            next_probs[j].assign(p.probs().begin(), p.probs().end());
        }

    std::vector<std::vector<StateVector>> inputs(A);
    std::vector<std::vector<std::size_t>> members(A);
    for (std::size_t j = 0; j < transitions.size(); ++j) {
        const auto a = std::size_t(transitions[j].action);
        inputs[a].push_back(*transitions[j].state);
        members[a].push_back(j);
    }

    std::shared_ptr<FittedQModel> current;
    std::vector<std::vector<double>> targets(A);
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t a = 0; a < A; ++a) {
            targets[a].clear();
            for (auto j : members[a]) {
                const auto& tr = transitions[j];
                double y = tr.reward;
                if (tr.next && current) {
                    double v = 0.0;
                    for (std::size_t b = 0; b < A; ++b)
                        if (next_probs[j][b] > 0.0) v += next_probs[j][b] * current->q(*tr.next, ActionId(b));
                    y += options.gamma * v;
                }
                if (!std::isfinite(y))
                    throw EstimatorError("FQI diverged: non-finite regression target at iteration " +
                                         std::to_string(it + 1));
                targets[a].push_back(y);
            }
        }
        std::vector<std::unique_ptr<Regressor>> regressors(A);
        for (std::size_t a = 0; a < A; ++a) {
            if (inputs[a].empty()) continue;
            regressors[a] = factory();
            regressors[a]->fit(inputs[a], targets[a]);
        }
        current = std::make_shared<FittedQModel>(std::move(regressors));
    }
    return current;
}

}  // namespace opecalib
