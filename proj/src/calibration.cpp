#include "opecalib/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>

#include "opecalib/error.hpp"
#include "opecalib/rng.hpp"

namespace opecalib {

using detail::require;

namespace {

struct PoolEntry {
    const StateVector* state;
    ActionId action;
    double severity;
};

bool pool_less(const PoolEntry& a, const PoolEntry& b) {
    return std::tie(*a.state, a.action, a.severity) < std::tie(*b.state, b.action, b.severity);
}

// Every logged step of the dataset in canonical order.
std::vector<PoolEntry> canonical_pool(const TrajectoryDataset& dataset) {
    std::vector<PoolEntry> pool;
    pool.reserve(dataset.step_count());
    for (const auto& traj : dataset)
        for (std::size_t t = 0; t < traj.length(); ++t)
            pool.push_back({&traj.steps[t].state, traj.steps[t].action,
                            traj.severity ? (*traj.severity)[t] : std::numeric_limits<double>::quiet_NaN()});
    std::stable_sort(pool.begin(), pool.end(), pool_less);
    return pool;
}

}  // namespace

double total_variation(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    require(p.size() == q.size(), "total variation: distributions over " + std::to_string(p.size()) + " and " +
                                      std::to_string(q.size()) + " actions");
    double s = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) s += std::abs(p[a] - q[a]);
    return std::min(1.0, 0.5 * s);
}

TargetDistribution::TargetDistribution(const TrajectoryDataset& test_set, WeightedKernel kernel, std::size_t k)
    : k_(k), action_count_(test_set.action_count()) {
    require(k_ >= 1, "target distribution: k must be at least 1");
    require(test_set.step_count() >= k_, "target distribution: test set has " +
                                             std::to_string(test_set.step_count()) + " pairs, need at least " +
                                             std::to_string(k_));
    const auto pool = canonical_pool(test_set);
    std::vector<StateVector> states;
    states.reserve(pool.size());
    actions_.reserve(pool.size());
    for (const auto& e : pool) {
        states.push_back(*e.state);
        actions_.push_back(e.action);
    }
    tree_ = std::make_unique<BallTree>(states, std::move(kernel));
}

DiscreteDistribution TargetDistribution::at(StateView state) const {
    const std::size_t n = tree_->size();
    std::size_t want = k_;
    std::vector<Neighbour> found;
    for (;;) {
        if (want > n)
            throw ValidationError("target distribution: fewer than " + std::to_string(k_) +
                                  " held-out neighbours remain after excluding self-matches");
        found = tree_->query(state, want);
        const auto zeros = std::size_t(std::count_if(found.begin(), found.end(),
                                                     [](const Neighbour& nb) { return nb.distance == 0.0; }));
        if (want - zeros >= k_) {
            std::vector<double> counts(action_count_, 0.0);
            for (std::size_t i = zeros; i < zeros + k_; ++i) counts[std::size_t(actions_[found[i].index])] += 1.0;
            for (auto& c : counts) c /= double(k_);
            return DiscreteDistribution(std::move(counts));
        }
        want = k_ + zeros;
    }
}

DiscreteDistribution target_distribution(const TrajectoryDataset& test_set, StateView state,
                                         const WeightedKernel& kernel, std::size_t k) {
    return TargetDistribution(test_set, kernel, k).at(state);
}

std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins) {
    require(!values.empty(), "quantile edges of an empty set");
    require(bins >= 1, "need at least one bin");
    std::sort(values.begin(), values.end());
    std::vector<double> edges;
    edges.reserve(bins + 1);
    for (std::size_t j = 0; j <= bins; ++j) {
        const std::size_t pos = std::min(values.size() - 1, j * values.size() / bins);
        edges.push_back(j == bins ? values.back() : values[pos]);
    }
    return edges;
}

CalibrationReport calibration_report(const PolicyModel& model, const std::string& model_name,
                                     const TrajectoryDataset& test_set, const TargetDistribution& target,
                                     const CalibrationOptions& options) {
    require(model.action_count() == test_set.action_count(), "calibration: model action count does not match");
    require(options.sample_count >= 1, "calibration: sample count must be at least 1");
    const auto pool = canonical_pool(test_set);
    const bool stratified = options.edges.has_value() || test_set.has_severity();

    std::vector<double> edges;
    if (options.edges) {
        require(test_set.has_severity(), "calibration: severity strata requested but the test set has no severity");
        edges = *options.edges;
        require(edges.size() >= 2 && std::is_sorted(edges.begin(), edges.end()),
                "calibration: strata edges must be ascending with at least two entries");
    } else if (stratified) {
        std::vector<double> sev;
        sev.reserve(pool.size());
        for (const auto& e : pool) sev.push_back(e.severity);
        edges = quantile_edges(std::move(sev), options.quantile_bins);
    } else {
        edges = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    }

    CalibrationReport report;
    report.model_name = model_name;
    const std::size_t strata = edges.size() - 1;
    for (std::size_t j = 0; j < strata; ++j) {
        const double lo = edges[j], hi = edges[j + 1];
        const bool last = j + 1 == strata;
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (!stratified) {
                members.push_back(i);
                continue;
            }
            const double s = pool[i].severity;
            if (s >= lo && (s < hi || (last && s <= hi))) members.push_back(i);
        }
        if (members.empty()) continue;

        const std::size_t take = std::min(options.sample_count, members.size());
        Rng rng = make_rng(options.seed, j);
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
            std::swap(members[i], members[pick(rng)]);
        }
        double total = 0.0;
        for (std::size_t i = 0; i < take; ++i) {
            const auto& state = *pool[members[i]].state;
            total += total_variation(model.action_probabilities(state), target.at(state));
        }
        report.strata.push_back({lo, hi, take, total / double(take)});
        report.total += take;
    }
    return report;
}

CalibrationReport calibration_report(const PolicyModel& model, const std::string& model_name,
                                     const TrajectoryDataset& test_set, const WeightedKernel& kernel,
                                     const CalibrationOptions& options, std::size_t target_k) {
    const TargetDistribution target(test_set, kernel, target_k);
    return calibration_report(model, model_name, test_set, target, options);
}

std::string calibration_csv(const CalibrationReport& report, const std::optional<Provenance>& provenance) {
    std::ostringstream out;
    out << provenance_comment(provenance);
    out << "stratum_lo,stratum_hi,n,mean_tv\n";
    for (const auto& s : report.strata)
        out << format_double(s.lo) << ',' << format_double(s.hi) << ',' << s.n << ',' << format_double(s.mean_tv)
            << '\n';
    return out.str();
}

nlohmann::ordered_json to_json(const CalibrationReport& report) {
    auto strata = nlohmann::ordered_json::array();
    for (const auto& s : report.strata) {
        // JSON has no infinities; unbounded edges are written as null.
        auto edge = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); };
        strata.push_back({{"stratum_lo", edge(s.lo)}, {"stratum_hi", edge(s.hi)}, {"n", s.n}, {"mean_tv", s.mean_tv}});
    }
    return {{"model", report.model_name}, {"total", report.total}, {"strata", strata}};
}

double avg_abs_policy_error(const PolicyModel& model, const TrajectoryDataset& dataset,
                            const PolicyModel& true_policy) {
    double total = 0.0;
    for (const auto& traj : dataset)
        for (const auto& step : traj.steps) {
            const auto a = std::size_t(step.action);
            total += std::abs(true_policy.action_probabilities(step.state)[a] - model.action_probabilities(step.state)[a]);
        }
    return total / double(dataset.step_count());
}

}  // namespace opecalib
