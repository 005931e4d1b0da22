#include "opecalib/protocol.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "opecalib/calibration.hpp"
#include "opecalib/error.hpp"
#include "opecalib/parallel.hpp"
#include "opecalib/rng.hpp"

namespace opecalib {

using detail::require;

namespace {

SplitResult make_split(const TrajectoryDataset& dataset, std::vector<std::size_t> d1, std::vector<std::size_t> d2,
                       SplitKind kind, std::uint64_t seed) {
    std::sort(d1.begin(), d1.end());
    std::sort(d2.begin(), d2.end());
    auto first = subset(dataset, d1);
    auto second = subset(dataset, d2);
    return SplitResult{std::move(first), std::move(second), std::move(d1), std::move(d2), kind, seed};
}

// Runs `attempt(rng)` for every resample slot, redrawing on EstimatorError.
template <class Attempt>
BootstrapResult run_bootstrap(const Attempt& attempt, double truth, const BootstrapOptions& options) {
    require(options.n >= 1, "bootstrap: resample size must be at least 1");
    require(options.k >= 1, "bootstrap: need at least one resample");
    require(options.max_attempts >= 1, "bootstrap: max_attempts must be at least 1");
    BootstrapResult result;
    result.samples.assign(options.k, 0.0);
    result.truth = truth;
    result.n = options.n;
    result.k = options.k;
    std::vector<std::size_t> failures(options.k, 0);
    parallel_for(options.k, options.jobs, [&](std::size_t j) {
        const auto stream = derive_seed(options.seed, j);
        for (std::size_t a = 0;; ++a) {
            if (a == options.max_attempts)
                throw EstimatorError("bootstrap: estimator failed " + std::to_string(a) +
                                     " times in a row on resample " + std::to_string(j));
            Rng rng(derive_seed(stream, a));
            try {
                result.samples[j] = attempt(rng);
                return;
            } catch (const EstimatorError&) {
                ++failures[j];
            }
        }
    });
    result.failures = std::accumulate(failures.begin(), failures.end(), std::size_t{0});
    result.mse = mse_of_samples(result.samples, truth);
    return result;
}

std::vector<std::size_t> draw_indices(std::size_t population, std::size_t n, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, population - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

template <class T>
std::vector<T> pick_rows(const std::vector<T>& rows, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(rows[i]);
    return out;
}

}  // namespace

std::string_view split_kind_name(SplitKind kind) { return kind == SplitKind::Random ? "random" : "intervention"; }

SplitKind parse_split_kind(std::string_view name) {
    if (name == "random") return SplitKind::Random;
    if (name == "intervention") return SplitKind::Intervention;
    throw ValidationError("unknown split kind '" + std::string(name) + "' (expected random or intervention)");
}

SplitResult random_split(const TrajectoryDataset& dataset, std::uint64_t seed) {
    require(dataset.size() >= 2, "random split needs at least two trajectories");
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = (dataset.size() + 1) / 2;
    return make_split(dataset, {order.begin(), order.begin() + std::ptrdiff_t(half)},
                      {order.begin() + std::ptrdiff_t(half), order.end()}, SplitKind::Random, seed);
}

SplitResult intervention_split(const TrajectoryDataset& dataset, std::span<const ActionId> withheld,
                               std::uint64_t seed) {
    require(!withheld.empty(), "intervention split needs at least one withheld action");
    std::vector<std::size_t> never, users;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const bool uses = std::any_of(dataset[i].steps.begin(), dataset[i].steps.end(), [&](const Step& s) {
            return std::find(withheld.begin(), withheld.end(), s.action) != withheld.end();
        });
        (uses ? users : never).push_back(i);
    }
    if (never.size() < 2)
        throw ValidationError("intervention split: " + std::to_string(never.size()) +
                              " trajectories avoid the withheld actions, need at least 2");
    Rng rng = make_rng(seed, 0);
    std::shuffle(never.begin(), never.end(), rng);
    const std::size_t half = never.size() / 2;
    std::vector<std::size_t> d2(never.begin(), never.begin() + std::ptrdiff_t(half));
    std::vector<std::size_t> d1 = users;
    d1.insert(d1.end(), never.begin() + std::ptrdiff_t(half), never.end());
    return make_split(dataset, std::move(d1), std::move(d2), SplitKind::Intervention, seed);
}

BootstrapResult bootstrap_mse(const TrajectoryDataset& d2, const ResampleEstimator& estimator, double truth,
                              const BootstrapOptions& options) {
    const auto data = canonical_order(d2);
    return run_bootstrap(
        [&](Rng& rng) {
            const auto idx = draw_indices(data.size(), options.n, rng);
            return estimator(subset(data, idx));
        },
        truth, options);
}

BootstrapResult bootstrap_mse(const TrajectoryDataset& d2, const PolicyModel& pi_e, const PolicyModel& pi_b,
                              Estimator estimator, double truth, const BootstrapOptions& options,
                              const QModel* q_model) {
    if (uses_control_variates(estimator))
        require(q_model != nullptr, std::string(estimator_name(estimator)) + " needs a Q model");
    const auto data = canonical_order(d2);
    const auto probs = taken_probabilities(data, pi_e, pi_b);
    std::optional<ControlVariates> cv;
    if (q_model) cv = control_variates(data, pi_e, *q_model);
    return run_bootstrap(
        [&](Rng& rng) {
            const auto idx = draw_indices(data.size(), options.n, rng);
            const auto resample = subset(data, idx);
            const TakenProbabilities picked{pick_rows(probs.evaluation, idx), pick_rows(probs.behaviour, idx)};
            const auto weights = weights_from_probabilities(picked, options.prob_floor);
            if (!cv) return run_estimator(estimator, resample, weights, nullptr, options.gamma).value;
            const ControlVariates picked_cv{pick_rows(cv->q, idx), pick_rows(cv->v, idx)};
            return run_estimator(estimator, resample, weights, &picked_cv, options.gamma).value;
        },
        truth, options);
}

std::string bootstrap_csv(const BootstrapResult& result, const std::optional<Provenance>& provenance) {
    std::ostringstream out;
    out << provenance_comment(provenance);
    out << "idx,value\n";
    for (std::size_t j = 0; j < result.samples.size(); ++j) out << j << ',' << format_double(result.samples[j]) << '\n';
    return out.str();
}

nlohmann::ordered_json bootstrap_summary(const BootstrapResult& result) {
    return {{"mse", result.mse}, {"truth", result.truth}, {"n", result.n}, {"k", result.k}, {"failures", result.failures}};
}

double policy_tv_distance(const PolicyModel& p1, const PolicyModel& p2, std::span<const StateVector> probe_states) {
    require(!probe_states.empty(), "policy distance needs at least one probe state");
    require(p1.action_count() == p2.action_count(), "policy distance: action counts differ");
    double total = 0.0;
    for (const auto& s : probe_states) total += total_variation(p1.action_probabilities(s), p2.action_probabilities(s));
    return total / double(probe_states.size());
}

std::vector<StateVector> logged_states(const TrajectoryDataset& dataset) {
    std::vector<StateVector> out;
    out.reserve(dataset.step_count());
    for (const auto& traj : dataset)
        for (const auto& step : traj.steps) out.push_back(step.state);
    return out;
}

}  // namespace opecalib
