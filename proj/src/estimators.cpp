#include "opecalib/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "opecalib/error.hpp"

namespace opecalib {

using detail::require;

namespace {

void check_shape(const TrajectoryDataset& dataset, const WeightTable& weights) {
    require(weights.rho.size() == dataset.size(), "weight table does not match the dataset");
    for (std::size_t i = 0; i < dataset.size(); ++i)
        require(weights.rho[i].size() == dataset[i].length(), "weight table row length does not match trajectory");
}

void check_shape(const TrajectoryDataset& dataset, const ControlVariates& cv) {
    require(cv.q.size() == dataset.size() && cv.v.size() == dataset.size(),
            "control variates do not match the dataset");
    for (std::size_t i = 0; i < dataset.size(); ++i)
        require(cv.q[i].size() == dataset[i].length() && cv.v[i].size() == dataset[i].length(),
                "control variate row length does not match trajectory");
}

void check_gamma(double gamma) { require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]"); }

EstimateReport make_report(std::string name, const TrajectoryDataset& dataset, const WeightTable& weights) {
    EstimateReport r;
    r.estimator = std::move(name);
    r.n = dataset.size();
    for (const auto& t : dataset) ++r.length_counts[t.length()];
    r.floor_hits = weights.floor_hits;
    const std::size_t horizon = dataset.max_length();
    r.ess.assign(horizon, 0.0);
    for (std::size_t t = 0; t < horizon; ++t) {
        double sum = 0.0, sum_sq = 0.0;
        for (const auto& row : weights.rho) {
            if (t >= row.size()) continue;
            sum += row[t];
            sum_sq += row[t] * row[t];
        }
        r.ess[t] = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
    }
    r.ess_min = horizon ? *std::min_element(r.ess.begin(), r.ess.end()) : 0.0;
    return r;
}

// Per-timestep weight sums over the trajectories at `indices`.
std::vector<double> step_normalisers(const WeightTable& weights, std::span<const std::size_t> indices,
                                     std::size_t length) {
    std::vector<double> sums(length, 0.0);
    for (auto i : indices)
        for (std::size_t t = 0; t < length; ++t) sums[t] += weights.rho[i][t];
    for (std::size_t t = 0; t < length; ++t)
        if (!(sums[t] > 0.0))
            throw EstimatorError("importance weights sum to zero at step " + std::to_string(t) +
                                 " for trajectories of length " + std::to_string(length));
    return sums;
}

double group_step_wis(const TrajectoryDataset& dataset, const WeightTable& weights,
                      std::span<const std::size_t> indices, std::size_t length, double gamma) {
    const auto sums = step_normalisers(weights, indices, length);
    double value = 0.0;
    for (auto i : indices) {
        double discount = 1.0;
        for (std::size_t t = 0; t < length; ++t) {
            const double w = weights.rho[i][t] / sums[t];
            value += discount * w * dataset[i].steps[t].reward;
            discount *= gamma;
        }
    }
    return value;
}

double group_wdr(const TrajectoryDataset& dataset, const WeightTable& weights, const ControlVariates& cv,
                 std::span<const std::size_t> indices, std::size_t length, double gamma) {
    const auto sums = step_normalisers(weights, indices, length);
    const double w_initial = 1.0 / double(indices.size());
    double value = 0.0;
    for (auto i : indices) {
        double discount = 1.0;
        double w_prev = w_initial;
        for (std::size_t t = 0; t < length; ++t) {
            const double w = weights.rho[i][t] / sums[t];
            value += discount * w * dataset[i].steps[t].reward - discount * (w * cv.q[i][t] - w_prev * cv.v[i][t]);
            w_prev = w;
            discount *= gamma;
        }
    }
    return value;
}

double group_phwis(const TrajectoryDataset& dataset, const WeightTable& weights,
                   std::span<const std::size_t> indices, std::size_t length, double gamma) {
    double norm = 0.0;
    for (auto i : indices) norm += weights.rho[i][length - 1];
    if (!(norm > 0.0))
        throw EstimatorError("full-trajectory weights sum to zero for the length-" + std::to_string(length) +
                             " group");
    double value = 0.0;
    for (auto i : indices) value += weights.rho[i][length - 1] / norm * return_of(dataset[i], gamma);
    return value;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

std::size_t common_length(const TrajectoryDataset& dataset) {
    const auto len = dataset[0].length();
    for (const auto& t : dataset)
        if (t.length() != len)
            throw EstimatorError("trajectories have different lengths; use a per-horizon estimator (phwis, "
                                 "step_phwis, phwdr)");
    return len;
}

}  // namespace

TakenProbabilities taken_probabilities(const TrajectoryDataset& dataset, const PolicyModel& pi_e,
                                       const PolicyModel& pi_b) {
    require(pi_e.action_count() == dataset.action_count() && pi_b.action_count() == dataset.action_count(),
            "policy action count does not match the dataset");
    TakenProbabilities out;
    out.evaluation.resize(dataset.size());
    out.behaviour.resize(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (const auto& step : dataset[i].steps) {
            const auto a = std::size_t(step.action);
            out.evaluation[i].push_back(pi_e.action_probabilities(step.state)[a]);
            out.behaviour[i].push_back(pi_b.action_probabilities(step.state)[a]);
        }
    }
    return out;
}

WeightTable weights_from_probabilities(const TakenProbabilities& probs, double prob_floor) {
    require(prob_floor > 0.0 && prob_floor <= 0.1, "probability floor must lie in (0, 0.1]");
    require(probs.evaluation.size() == probs.behaviour.size(), "probability tables disagree in size");
    WeightTable table;
    table.rho.resize(probs.evaluation.size());
    for (std::size_t i = 0; i < probs.evaluation.size(); ++i) {
        const auto& pe = probs.evaluation[i];
        const auto& pb = probs.behaviour[i];
        require(pe.size() == pb.size(), "probability tables disagree in trajectory length");
        double rho = 1.0;
        table.rho[i].reserve(pe.size());
        for (std::size_t t = 0; t < pe.size(); ++t) {
            double denom = pb[t];
            if (denom < prob_floor) {
                denom = prob_floor;
                ++table.floor_hits;
            }
            rho *= pe[t] / denom;
            table.rho[i].push_back(rho);
        }
    }
    return table;
}

WeightTable cumulative_weights(const TrajectoryDataset& dataset, const PolicyModel& pi_e, const PolicyModel& pi_b,
                               double prob_floor) {
    return weights_from_probabilities(taken_probabilities(dataset, pi_e, pi_b), prob_floor);
}

double state_value(const QModel& model, const PolicyModel& policy, StateView state) {
    const auto probs = policy.action_probabilities(state);
    double v = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) v += probs[a] * model.q(state, ActionId(a));
    return v;
}

ControlVariates control_variates(const TrajectoryDataset& dataset, const PolicyModel& pi_e, const QModel& model) {
    require(model.action_count() == dataset.action_count(), "Q model action count does not match the dataset");
    ControlVariates cv;
    cv.q.resize(dataset.size());
    cv.v.resize(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (const auto& step : dataset[i].steps) {
            const double q = model.q(step.state, step.action);
            const double v = state_value(model, pi_e, step.state);
            if (!std::isfinite(q) || !std::isfinite(v))
                throw EstimatorError("Q model produced a non-finite value on trajectory '" + dataset[i].id + "'");
            cv.q[i].push_back(q);
            cv.v[i].push_back(v);
        }
    }
    return cv;
}

nlohmann::ordered_json to_json(const EstimateReport& report) {
    return {{"estimator", report.estimator},
            {"value", report.value},
            {"n", report.n},
            {"ess_min", report.ess_min},
            {"floor_hits", report.floor_hits}};
}

EstimateReport estimate_is(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma) {
    check_gamma(gamma);
    check_shape(dataset, weights);
    auto report = make_report("is", dataset, weights);
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        total += weights.rho[i].back() * return_of(dataset[i], gamma);
    report.value = total / double(dataset.size());
    return report;
}

EstimateReport estimate_step_is(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma) {
    check_gamma(gamma);
    check_shape(dataset, weights);
    auto report = make_report("step_is", dataset, weights);
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        double discount = 1.0;
        for (std::size_t t = 0; t < dataset[i].length(); ++t) {
            total += discount * weights.rho[i][t] * dataset[i].steps[t].reward;
            discount *= gamma;
        }
    }
    report.value = total / double(dataset.size());
    return report;
}

EstimateReport estimate_step_wis(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma) {
    check_gamma(gamma);
    check_shape(dataset, weights);
    const auto length = common_length(dataset);
    auto report = make_report("step_wis", dataset, weights);
    report.value = group_step_wis(dataset, weights, all_indices(dataset.size()), length, gamma);
    return report;
}

EstimateReport estimate_am(const TrajectoryDataset& dataset, const ControlVariates& cv) {
    check_shape(dataset, cv);
    EstimateReport report;
    report.estimator = "am";
    report.n = dataset.size();
    for (const auto& t : dataset) ++report.length_counts[t.length()];
    report.ess_min = double(dataset.size());
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) total += cv.v[i][0];
    report.value = total / double(dataset.size());
    return report;
}

EstimateReport estimate_am(const TrajectoryDataset& dataset, const PolicyModel& pi_e, const QModel& model) {
    return estimate_am(dataset, control_variates(dataset, pi_e, model));
}

double estimate_wdr_fixed_length(const TrajectoryDataset& group, const WeightTable& weights,
                                 const ControlVariates& cv, double gamma) {
    check_gamma(gamma);
    check_shape(group, weights);
    check_shape(group, cv);
    return group_wdr(group, weights, cv, all_indices(group.size()), common_length(group), gamma);
}

double estimate_wdr_fixed_length(const TrajectoryDataset& group, const WeightTable& weights,
                                 const PolicyModel& pi_e, const QModel& model, double gamma) {
    return estimate_wdr_fixed_length(group, weights, control_variates(group, pi_e, model), gamma);
}

EstimateReport estimate_phwis(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma) {
    check_gamma(gamma);
    check_shape(dataset, weights);
    auto report = make_report("phwis", dataset, weights);
    double value = 0.0;
    for (const auto& [length, group] : group_by_length(dataset))
        value += group.weight * group_phwis(dataset, weights, group.indices, length, gamma);
    report.value = value;
    return report;
}

EstimateReport estimate_step_phwis(const TrajectoryDataset& dataset, const WeightTable& weights, double gamma) {
    check_gamma(gamma);
    check_shape(dataset, weights);
    auto report = make_report("step_phwis", dataset, weights);
    double value = 0.0;
    for (const auto& [length, group] : group_by_length(dataset))
        value += group.weight * group_step_wis(dataset, weights, group.indices, length, gamma);
    report.value = value;
    return report;
}

EstimateReport estimate_phwdr(const TrajectoryDataset& dataset, const WeightTable& weights,
                              const ControlVariates& cv, double gamma) {
    check_gamma(gamma);
    check_shape(dataset, weights);
    check_shape(dataset, cv);
    auto report = make_report("phwdr", dataset, weights);
    double value = 0.0;
    for (const auto& [length, group] : group_by_length(dataset))
        value += group.weight * group_wdr(dataset, weights, cv, group.indices, length, gamma);
    report.value = value;
    return report;
}

EstimateReport estimate_phwdr(const TrajectoryDataset& dataset, const WeightTable& weights,
                              const PolicyModel& pi_e, const QModel& model, double gamma) {
    return estimate_phwdr(dataset, weights, control_variates(dataset, pi_e, model), gamma);
}

std::string_view estimator_name(Estimator e) {
    switch (e) {
        case Estimator::IS: return "is";
        case Estimator::StepIS: return "step_is";
        case Estimator::StepWIS: return "step_wis";
        case Estimator::AM: return "am";
        case Estimator::PHWIS: return "phwis";
        case Estimator::StepPHWIS: return "step_phwis";
        case Estimator::PHWDR: return "phwdr";
    }
    return "unknown";
}

Estimator parse_estimator(std::string_view name) {
    for (auto e : {Estimator::IS, Estimator::StepIS, Estimator::StepWIS, Estimator::AM, Estimator::PHWIS,
                   Estimator::StepPHWIS, Estimator::PHWDR})
        if (estimator_name(e) == name) return e;
    throw ValidationError("unknown estimator '" + std::string(name) +
                          "' (expected is, step_is, step_wis, am, phwis, step_phwis or phwdr)");
}

bool uses_control_variates(Estimator e) { return e == Estimator::AM || e == Estimator::PHWDR; }

EstimateReport run_estimator(Estimator e, const TrajectoryDataset& dataset, const WeightTable& weights,
                             const ControlVariates* cv, double gamma) {
    if (uses_control_variates(e)) require(cv != nullptr, std::string(estimator_name(e)) + " needs a Q model");
    switch (e) {
        case Estimator::IS: return estimate_is(dataset, weights, gamma);
        case Estimator::StepIS: return estimate_step_is(dataset, weights, gamma);
        case Estimator::StepWIS: return estimate_step_wis(dataset, weights, gamma);
        case Estimator::AM: return estimate_am(dataset, *cv);
        case Estimator::PHWIS: return estimate_phwis(dataset, weights, gamma);
        case Estimator::StepPHWIS: return estimate_step_phwis(dataset, weights, gamma);
        case Estimator::PHWDR: return estimate_phwdr(dataset, weights, *cv, gamma);
    }
    throw ValidationError("unknown estimator");
}

}  // namespace opecalib
