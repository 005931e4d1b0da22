#include <random>

#include "doctest.h"
#include "opecalib/error.hpp"
#include "opecalib/fqi.hpp"
#include "opecalib/knn_policy.hpp"
#include "opecalib/nav.hpp"
#include "opecalib/protocol.hpp"
#include "oracles.hpp"

using namespace opecalib;

namespace {

TrajectoryDataset nav_data(std::size_t n, std::uint64_t seed) {
    const nav::NavConfig cfg;
    return nav::generate_dataset(cfg, nav::NavPolicy({}, cfg), n, seed);
}

bool uses(const Trajectory& t, ActionId a) {
    return std::any_of(t.steps.begin(), t.steps.end(), [&](const Step& s) { return s.action == a; });
}

}  // namespace

TEST_CASE("random split partitions the data") {
    const auto data = nav_data(9, 1);
    const auto split = random_split(data, 4);
    CHECK(split.d1.size() == 5);
    CHECK(split.d2.size() == 4);
    std::vector<std::size_t> all = split.d1_indices;
    all.insert(all.end(), split.d2_indices.begin(), split.d2_indices.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 9; ++i) CHECK(all[i] == i);
    for (std::size_t i = 0; i < 4; ++i) CHECK(split.d2[i] == data[split.d2_indices[i]]);
    CHECK(random_split(data, 4).d1_indices == split.d1_indices);

    const auto pair = random_split(nav_data(2, 2), 0);
    CHECK(pair.d1.size() == 1);
    CHECK(pair.d2.size() == 1);
    CHECK_THROWS_AS(random_split(nav_data(1, 2), 0), ValidationError);
}

TEST_CASE("random split assigns each trajectory to D1 half the time") {
    const auto data = nav_data(10, 3);
    std::vector<std::size_t> hits(10, 0);
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
        for (auto i : random_split(data, seed).d1_indices) ++hits[i];
    for (auto h : hits) CHECK(std::abs(double(h) / 1000.0 - 0.5) <= 0.05);
}

TEST_CASE("intervention split") {
    const auto data = nav_data(200, 4);
    const std::vector<ActionId> stay{nav::Stay};
    const auto split = intervention_split(data, stay, 7);
    std::size_t never = 0;
    for (const auto& t : data) never += !uses(t, nav::Stay);
    CHECK(split.d2.size() == never / 2);
    CHECK(split.d1.size() + split.d2.size() == data.size());
    for (const auto& t : split.d2) CHECK(!uses(t, nav::Stay));
    MESSAGE(never << " of 200 trajectories never stay");

    // Exactly two never-users.
    std::vector<StateVector> xs{{0.0}, {1.0}, {2.0}, {3.0}};
    const auto tiny = oracle::pairs_dataset(xs, {1, 0, 1, 1}, 2);
    const std::vector<ActionId> one{1};
    const auto two = intervention_split(oracle::pairs_dataset(xs, {1, 0, 0, 1}, 2), one, 0);
    CHECK(two.d2.size() == 1);
    CHECK(two.d1.size() == 3);
    CHECK_THROWS_AS(intervention_split(tiny, one, 0), ValidationError);
    const std::vector<ActionId> both{0, 1};
    CHECK_THROWS_AS(intervention_split(tiny, both, 0), ValidationError);
}

TEST_CASE("bootstrap of a constant estimator") {
    const auto data = nav_data(20, 5);
    BootstrapOptions options;
    options.n = 10;
    options.k = 25;
    const auto result = bootstrap_mse(data, [](const TrajectoryDataset&) { return 2.5; }, 1.0, options);
    CHECK(result.samples.size() == 25);
    CHECK(result.mse == 2.25);
    CHECK(result.failures == 0);
}

TEST_CASE("bootstrap is seeded and independent of jobs and order") {
    const auto data = nav_data(60, 6);
    const nav::NavConfig cfg;
    const nav::NavPolicy pi_b({}, cfg);
    const nav::NavPolicy pi_e({nav::PolicyKind::EpsilonGoal, 0.5, 0.3}, cfg);
    BootstrapOptions options;
    options.n = 40;
    options.k = 50;
    options.seed = 9;
    const auto a = bootstrap_mse(data, pi_e, pi_b, Estimator::StepPHWIS, 0.5, options);
    options.jobs = 3;
    const auto b = bootstrap_mse(data, pi_e, pi_b, Estimator::StepPHWIS, 0.5, options);
    std::vector<Trajectory> reversed(data.begin(), data.end());
    std::reverse(reversed.begin(), reversed.end());
    const auto c = bootstrap_mse(TrajectoryDataset(reversed, 5), pi_e, pi_b, Estimator::StepPHWIS, 0.5, options);
    CHECK(a.samples == b.samples);
    CHECK(a.samples == c.samples);
    CHECK(a.mse == c.mse);
    CHECK(a.mse == mse_of_samples(a.samples, 0.5));
    CHECK(bootstrap_csv(a) == bootstrap_csv(b));
    options.seed = 10;
    CHECK(bootstrap_mse(data, pi_e, pi_b, Estimator::StepPHWIS, 0.5, options).samples != a.samples);

    // The generic path on the same estimator gives the same numbers.
    options.seed = 9;
    const auto generic = bootstrap_mse(
        data,
        [&](const TrajectoryDataset& r) {
            return run_estimator(Estimator::StepPHWIS, r, cumulative_weights(r, pi_e, pi_b), nullptr, 1.0).value;
        },
        0.5, options);
    for (std::size_t j = 0; j < a.samples.size(); ++j)
        CHECK(generic.samples[j] == doctest::Approx(a.samples[j]).epsilon(1e-12));

    CHECK_THROWS_AS(bootstrap_mse(data, pi_e, pi_b, Estimator::PHWDR, 0.5, options), ValidationError);
}

TEST_CASE("bootstrap redraws failed resamples") {
    const auto data = nav_data(30, 7);
    BootstrapOptions options;
    options.n = 5;
    options.k = 100;
    // Fails whenever the first drawn trajectory starts with a move up.
    const auto flaky = [](const TrajectoryDataset& r) {
        if (r[0].steps[0].action == nav::Up) throw EstimatorError("flaky");
        return monte_carlo_value(r, 1.0);
    };
    const auto result = bootstrap_mse(data, flaky, 0.0, options);
    CHECK(result.samples.size() == 100);
    CHECK(result.failures > 0);
    CHECK(bootstrap_summary(result)["failures"] == result.failures);

    const auto never = [](const TrajectoryDataset&) -> double { throw EstimatorError("always"); };
    options.max_attempts = 3;
    CHECK_THROWS_AS(bootstrap_mse(data, never, 0.0, options), EstimatorError);
}

TEST_CASE("bootstrap MSE shrinks with more trajectories") {
    const nav::NavConfig cfg;
    const nav::NavPolicy pi({}, cfg);
    const auto d2 = nav::generate_dataset(cfg, pi, 400, 8);
    const double truth = monte_carlo_value(nav::generate_dataset(cfg, pi, 20000, 9, 4), 1.0);
    BootstrapOptions options;
    options.k = 300;
    options.seed = 1;
    options.n = 50;
    const auto small = bootstrap_mse(d2, pi, pi, Estimator::StepPHWIS, truth, options);
    options.n = 200;
    const auto large = bootstrap_mse(d2, pi, pi, Estimator::StepPHWIS, truth, options);
    MESSAGE("mse n=50 " << small.mse << ", n=200 " << large.mse);
    CHECK(large.mse < small.mse);
}

TEST_CASE("fitted Q iteration reproduces backward induction") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto mdp = oracle::TabularMdp::deterministic(seed, 2, 2, 4);
        const auto pi = oracle::random_policy(seed + 50, 2, 2);
        // Every action sequence once covers every reachable (s, t, a).
        std::vector<Trajectory> ts;
        for (const auto& w : oracle::enumerate(mdp, pi)) ts.push_back(w.trajectory);
        const TrajectoryDataset data(std::move(ts), 2);
        // The time index is a state feature, so Q_t is representable.
        const auto policy = oracle::as_policy(pi);
        for (double gamma : {1.0, 0.7, 0.0}) {
            FqiOptions options;
            options.gamma = gamma;
            options.regressor = RegressorConfig{"knn", 1, true};
            const auto q_hat = fitted_q_iteration(data, policy, options);
            const auto q = oracle::q_values(mdp, pi, gamma);
            for (const auto& t : data)
                for (std::size_t step = 0; step < t.length(); ++step) {
                    const auto& s = t.steps[step].state;
                    for (ActionId a = 0; a < 2; ++a) {
                        // Only logged (s, a) pairs are identified.
                        bool logged = false;
                        for (const auto& u : data)
                            logged = logged || (u.steps[step].state == s && u.steps[step].action == a);
                        if (!logged) continue;
                        const double want =
                            gamma == 0.0 ? mdp.reward[std::size_t(s[0])][std::size_t(a)]
                                         : q[step][std::size_t(s[0])][std::size_t(a)];
                        CHECK(std::abs(q_hat->q(s, a) - want) <= 1e-8);
                    }
                }
        }
    }
    FqiOptions none;
    none.iterations = 0;
    const auto mdp = oracle::TabularMdp::deterministic(1, 2, 2, 2);
    const auto pi = oracle::random_policy(1, 2, 2);
    CHECK_THROWS_AS(fitted_q_iteration(oracle::sample_dataset(mdp, pi, 5, 1), oracle::as_policy(pi), none),
                    ValidationError);
}

TEST_CASE("policy distance") {
    const nav::NavConfig cfg;
    const auto probe = logged_states(nav_data(10, 11));
    CHECK(probe.size() == 150);
    const nav::NavPolicy a({}, cfg), b({nav::PolicyKind::EpsilonGoal, 0.5, 0.4}, cfg);
    CHECK(policy_tv_distance(a, a, probe) == 0.0);
    const double ab = policy_tv_distance(a, b, probe);
    CHECK(ab == policy_tv_distance(b, a, probe));
    CHECK(ab > 0.0);
    CHECK(ab <= 1.0);
    const FunctionPolicy up(5, [](StateView) { return DiscreteDistribution::point_mass(5, nav::Up); });
    const FunctionPolicy down(5, [](StateView) { return DiscreteDistribution::point_mass(5, nav::Down); });
    CHECK(policy_tv_distance(up, down, probe) == 1.0);
    CHECK_THROWS_AS(policy_tv_distance(a, b, {}), ValidationError);
}

TEST_CASE("intervention splits give more distant fitted policies") {
    const auto data = nav_data(1000, 12);
    const std::vector<ActionId> stay{nav::Stay};
    KnnOptions knn;
    knn.k = 50;
    auto distance = [&](const SplitResult& s) {
        const auto p1 = fit_knn_policy(s.d1, knn);
        const auto p2 = fit_knn_policy(s.d2, knn);
        return policy_tv_distance(p1, p2, logged_states(s.d2));
    };
    const double random = distance(random_split(data, 1));
    const double intervention = distance(intervention_split(data, stay, 1));
    MESSAGE("random " << random << ", intervention " << intervention);
    CHECK(random < intervention);
}
