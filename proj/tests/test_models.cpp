#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "opecalib/ball_tree.hpp"
#include "opecalib/error.hpp"
#include "opecalib/kernel.hpp"
#include "opecalib/knn_policy.hpp"
#include "opecalib/model_io.hpp"
#include "opecalib/nav.hpp"
#include "opecalib/parametric_models.hpp"
#include "opecalib/projection_index.hpp"
#include "oracles.hpp"

using namespace opecalib;

namespace {

std::vector<StateVector> uniform_points(std::uint64_t seed, std::size_t n, std::size_t dim, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<StateVector> pts(n, StateVector(dim));
    for (auto& p : pts)
        for (auto& x : p) x = u(rng);
    return pts;
}

// Integer lattice points, so exact distance ties are common.
std::vector<StateVector> lattice_points(std::uint64_t seed, std::size_t n, std::size_t dim) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(0, 4);
    std::vector<StateVector> pts(n, StateVector(dim));
    for (auto& p : pts)
        for (auto& x : p) x = u(rng);
    return pts;
}

double relative_error(const Eigen::VectorXd& analytic, const std::vector<double>& numeric) {
    const Eigen::Map<const Eigen::VectorXd> n(numeric.data(), Eigen::Index(numeric.size()));
    const double scale = std::max({analytic.norm(), n.norm(), 1e-8});
    return (analytic - n).norm() / scale;
}

double accuracy(const PolicyModel& model, const std::vector<StateVector>& xs, const std::vector<ActionId>& ys) {
    std::size_t right = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto p = model.action_probabilities(xs[i]);
        const auto best = std::max_element(p.probs().begin(), p.probs().end()) - p.probs().begin();
        right += best == ys[i];
    }
    return double(right) / double(xs.size());
}

}  // namespace

TEST_CASE("kernel distance") {
    const auto plain = WeightedKernel::euclidean(3);
    const std::vector<std::size_t> informative{1};
    const auto weighted = WeightedKernel::with_informative(3, informative);
    const StateVector a{1.0, 2.0, 3.0};
    CHECK(plain.distance(a, a) == 0.0);
    CHECK(weighted.distance(a, StateVector{1.0, 3.0, 3.0}) == 2.0);
    CHECK(weighted.distance(a, StateVector{2.0, 2.0, 3.0}) == 1.0);
    CHECK(plain.distance(a, StateVector{2.0, 4.0, 5.0}) == 9.0);
    CHECK_THROWS_AS(plain.distance(a, StateVector{1.0, 2.0}), ValidationError);
    CHECK_THROWS_AS(WeightedKernel({1.0, 0.0}), ValidationError);
    const std::vector<std::size_t> outside{3};
    CHECK_THROWS_AS(WeightedKernel::with_informative(3, outside), ValidationError);

    const WeightedKernel k({0.5, 2.0, 1.5});
    const auto pts = uniform_points(1, 300, 3, -5.0, 5.0);
    for (std::size_t i = 0; i + 2 < pts.size(); i += 3) {
        const auto &x = pts[i], &y = pts[i + 1], &z = pts[i + 2];
        CHECK(k.distance(x, y) == k.distance(y, x));
        CHECK(k.distance(x, y) > 0.0);
        CHECK(std::sqrt(k.distance(x, z)) <= std::sqrt(k.distance(x, y)) + std::sqrt(k.distance(y, z)) + 1e-12);
    }
}

TEST_CASE("ball tree matches a linear scan") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> w(0.2, 3.0);
    for (std::uint64_t round = 0; round < 4; ++round) {
        const std::size_t dim = 1 + round;
        std::vector<double> weights(dim);
        for (auto& x : weights) x = w(rng);
        const WeightedKernel kernel(weights);
        const auto pts = round % 2 ? lattice_points(round, 1500, dim) : uniform_points(round, 1500, dim, -3.0, 3.0);
        const auto queries = round % 2 ? lattice_points(100 + round, 150, dim) : uniform_points(100 + round, 150, dim, -4.0, 4.0);
        const BallTree tree(pts, kernel, 1 + 7 * round);
        for (std::size_t qi = 0; qi < queries.size(); ++qi) {
            const std::size_t k = 1 + qi % 25;
            const auto got = tree.query(queries[qi], k);
            const auto want = oracle::linear_knn(pts, kernel, queries[qi], k);
            REQUIRE(got == want);
        }
    }
}

TEST_CASE("ball tree edge cases") {
    const auto pts = uniform_points(3, 50, 2, 0.0, 1.0);
    const BallTree tree(pts, WeightedKernel::euclidean(2), 4);
    const auto self = tree.query(pts[7], 1);
    CHECK(self[0].index == 7);
    CHECK(self[0].distance == 0.0);
    const auto all = tree.query(StateVector{0.5, 0.5}, 50);
    std::vector<std::size_t> idx;
    for (const auto& n : all) idx.push_back(n.index);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < 50; ++i) CHECK(idx[i] == i);
    CHECK_THROWS_AS(tree.query(StateVector{0.5, 0.5}, 51), ValidationError);
    CHECK_THROWS_AS(tree.query(StateVector{0.5, 0.5}, 0), ValidationError);
    CHECK_THROWS_AS(BallTree({}, WeightedKernel::euclidean(2)), ValidationError);

    std::vector<StateVector> dup(10, StateVector{1.0, 1.0});
    const BallTree ties(dup, WeightedKernel::euclidean(2), 3);
    const auto t = ties.query(StateVector{0.0, 0.0}, 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(t[i].index == i);
}

TEST_CASE("projection index is exact when the budget covers the training set") {
    const auto pts = uniform_points(5, 120, 3, -2.0, 2.0);
    const WeightedKernel kernel({1.0, 2.0, 1.0});
    const RandomProjectionIndex index(pts, kernel, ProjectionOptions{1, 3, 120, 9});
    for (const auto& q : uniform_points(6, 40, 3, -3.0, 3.0)) {
        CHECK(index.query(q, 1) == oracle::linear_knn(pts, kernel, q, 1));
        CHECK(index.query(q, 5, 24) == oracle::linear_knn(pts, kernel, q, 5));
    }
}

TEST_CASE("projection index recall on clustered data") {
    auto pts = oracle::gaussian_clusters(2024, 2200, 16, 10);
    const std::vector<StateVector> queries(pts.begin() + 2000, pts.end());
    pts.resize(2000);
    const auto kernel = WeightedKernel::euclidean(16);
    const RandomProjectionIndex index(pts, kernel, ProjectionOptions{8, 8, 10, 7});
    const double recall = oracle::recall_at_k(pts, kernel, queries, 10,
                                              [&](StateView q, std::size_t k) { return index.query(q, k); });
    MESSAGE("recall@10 = " << recall);
    CHECK(recall >= 0.8);
}

TEST_CASE("projection index query totality") {
    const auto pts = uniform_points(8, 300, 4, 0.0, 1.0);
    const RandomProjectionIndex index(pts, WeightedKernel::euclidean(4), ProjectionOptions{});
    for (const auto& q : {StateVector{100.0, -100.0, 50.0, 7.0}, StateVector{0.5, 0.5, 0.5, 0.5}}) {
        const auto got = index.query(q, 20);
        REQUIRE(got.size() == 20);
        std::vector<std::size_t> idx;
        for (const auto& n : got) {
            CHECK(n.index < 300);
            CHECK(n.distance == WeightedKernel::euclidean(4).distance(pts[n.index], q));
            idx.push_back(n.index);
        }
        CHECK(std::is_sorted(got.begin(), got.end(), neighbour_less));
        std::sort(idx.begin(), idx.end());
        CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    }
    CHECK_THROWS_AS(RandomProjectionIndex(pts, WeightedKernel::euclidean(4), ProjectionOptions{8, 65, 10, 0}),
                    ValidationError);
}

TEST_CASE("knn policy histogram") {
    const std::vector<StateVector> xs{{0.0}, {1.0}, {2.0}, {3.0}, {10.0}};
    const std::vector<ActionId> ys{0, 1, 1, 2, 0};
    const auto data = oracle::pairs_dataset(xs, ys, 3);
    KnnOptions options;
    options.k = 3;
    options.alpha = 1.0;
    const auto model = fit_knn_policy(data, options);
    // Neighbours of 1.2: indices 1, 2, 0 with actions 1, 1, 0.
    const auto p = model.action_probabilities(StateVector{1.2});
    CHECK(p[0] == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(3.0 / 6.0).epsilon(1e-15));
    CHECK(p[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(model.kind() == "knn");

    options.alpha = 0.0;
    options.k = 2;
    const auto sharp = fit_knn_policy(data, options);
    CHECK(sharp.action_probabilities(StateVector{1.5}) == DiscreteDistribution::point_mass(3, 1));

    const std::vector<StateVector> ring{{0.0}, {0.1}, {0.2}};
    const std::vector<ActionId> each{0, 1, 2};
    for (double alpha : {0.0, 0.5, 3.0}) {
        options.alpha = alpha;
        options.k = 3;
        const auto even = fit_knn_policy(oracle::pairs_dataset(ring, each, 3), options);
        const auto u = even.action_probabilities(StateVector{0.05});
        for (std::size_t a = 0; a < 3; ++a) CHECK(u[a] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }

    options.k = 6;
    CHECK_THROWS_AS(fit_knn_policy(data, options), ValidationError);
}

TEST_CASE("smoothed knn policies are strictly positive") {
    const nav::NavConfig cfg;
    const auto data = nav::generate_dataset(cfg, nav::NavPolicy({}, cfg), 30, 2);
    for (auto index : {IndexKind::BallTree, IndexKind::RandomProjection}) {
        KnnOptions options;
        options.k = 10;
        options.index = index;
        const auto model = fit_knn_policy(data, options);
        CHECK(model.kind() == (index == IndexKind::BallTree ? "knn" : "approx_knn"));
        for (const auto& q : uniform_points(4, 500, 2, -1.0, 11.0)) {
            const auto p = model.action_probabilities(q);
            double sum = 0.0;
            for (std::size_t a = 0; a < 5; ++a) {
                CHECK(p[a] > 0.0);
                sum += p[a];
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("softmax-linear gradient matches finite differences") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> act(0, 3);
    TrainingPairs pairs;
    for (int i = 0; i < 25; ++i) {
        pairs.states.push_back({normal(rng), normal(rng), normal(rng)});
        pairs.actions.push_back(act(rng));
    }
    SoftmaxLinearModel model(4, Standardizer::fit(pairs.states));
    double worst = 0.0;
    for (int point = 0; point < 100; ++point) {
        Eigen::VectorXd params(Eigen::Index(model.parameter_count()));
        for (auto& x : params) x = normal(rng);
        const double l2 = point % 2 ? 0.3 : 0.0;
        model.set_parameters(params);
        const auto analytic = model.loss_and_gradient(pairs, l2).gradient;
        auto f = [&](const std::vector<double>& x) {
            SoftmaxLinearModel m = model;
            m.set_parameters(Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size())));
            return m.loss_and_gradient(pairs, l2).loss;
        };
        const auto numeric = oracle::numeric_gradient(f, std::vector<double>(params.begin(), params.end()), 1e-5);
        worst = std::max(worst, relative_error(analytic, numeric));
    }
    MESSAGE("softmax-linear worst relative gradient error " << worst);
    CHECK(worst <= 1e-5);
}

TEST_CASE("mlp gradient matches finite differences per layer") {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> act(0, 2);
    TrainingPairs pairs;
    for (int i = 0; i < 20; ++i) {
        pairs.states.push_back({normal(rng), normal(rng)});
        pairs.actions.push_back(act(rng));
    }
    const std::size_t hidden = 6;
    MlpPolicyModel model(3, hidden, Standardizer::fit(pairs.states));
    const Eigen::Index sizes[] = {Eigen::Index(hidden * 2), Eigen::Index(hidden), Eigen::Index(3 * hidden), 3};
    double worst = 0.0;
    for (int point = 0; point < 100; ++point) {
        Eigen::VectorXd params(Eigen::Index(model.parameter_count()));
        for (auto& x : params) x = 0.7 * normal(rng);
        const double l2 = point % 2 ? 0.2 : 0.0;
        model.set_parameters(params);
        const auto analytic = model.loss_and_gradient(pairs, l2).gradient;
        auto f = [&](const std::vector<double>& x) {
            MlpPolicyModel m = model;
            m.set_parameters(Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size())));
            return m.loss_and_gradient(pairs, l2).loss;
        };
        const auto numeric = oracle::numeric_gradient(f, std::vector<double>(params.begin(), params.end()), 1e-6);
        Eigen::Index offset = 0;
        for (auto size : sizes) {
            const std::vector<double> layer(numeric.begin() + offset, numeric.begin() + offset + size);
            worst = std::max(worst, relative_error(analytic.segment(offset, size), layer));
            offset += size;
        }
    }
    MESSAGE("mlp worst per-layer relative gradient error " << worst);
    CHECK(worst <= 1e-4);
}

TEST_CASE("softmax-linear fitting") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> mag(0.5, 2.0), other(-2.0, 2.0);
    std::vector<StateVector> xs;
    std::vector<ActionId> ys;
    for (int i = 0; i < 200; ++i) {
        const bool positive = i % 2 == 0;
        xs.push_back({positive ? mag(rng) : -mag(rng), other(rng)});
        ys.push_back(positive ? 1 : 0);
    }
    const auto data = oracle::pairs_dataset(xs, ys, 2);
    const auto model = fit_softmax_linear(data, SoftmaxLinearOptions{});
    CHECK(accuracy(model, xs, ys) == 1.0);
    const auto& hist = model.loss_history();
    REQUIRE(hist.size() == 501);
    CHECK((hist.front() - hist.back()) / double(hist.size() - 1) >= -1e-6);
    for (std::size_t e = 1; e < hist.size(); ++e) CHECK(hist[e] <= hist[e - 1] + 1e-6);

    SoftmaxLinearOptions none;
    none.epochs = 0;
    const auto untrained = fit_softmax_linear(data, none);
    CHECK(untrained.action_probabilities(StateVector{3.0, -1.0}) == DiscreteDistribution::uniform(2));

    SoftmaxLinearOptions wild;
    wild.learning_rate = 1e305;
    wild.epochs = 50;
    CHECK_THROWS_WITH_AS(fit_softmax_linear(data, wild), doctest::Contains("1e+305"), EstimatorError);
}

TEST_CASE("mlp fitting") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> noise(0.0, 0.2);
    std::uniform_int_distribution<int> corner(0, 3);
    std::vector<StateVector> xs;
    std::vector<ActionId> ys;
    for (int i = 0; i < 400; ++i) {
        const int c = corner(rng);
        const double x = (c & 1 ? 1.0 : -1.0) + noise(rng), y = (c & 2 ? 1.0 : -1.0) + noise(rng);
        xs.push_back({x, y});
        ys.push_back((x > 0) != (y > 0) ? 1 : 0);
    }
    const auto data = oracle::pairs_dataset(xs, ys, 2);
    MlpOptions options;
    options.hidden = 16;
    options.seed = 3;
    const auto model = fit_mlp(data, options);
    CHECK(accuracy(model, xs, ys) > 0.95);
    CHECK(model.loss_history().size() == options.epochs + 1);
    CHECK(model.loss_history().back() < model.loss_history().front());

    const auto again = fit_mlp(data, options);
    CHECK(again.parameters() == model.parameters());

    for (const auto& q : uniform_points(9, 1000, 2, -50.0, 50.0)) {
        const auto p = model.action_probabilities(q);
        CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-9);
    }
}

TEST_CASE("models survive a save and load") {
    const nav::NavConfig cfg;
    const auto data = nav::generate_dataset(cfg, nav::NavPolicy({}, cfg), 20, 12);
    const auto probes = uniform_points(13, 50, 2, 0.0, 10.0);
    std::vector<std::unique_ptr<PolicyModel>> models;
    KnnOptions knn;
    knn.k = 7;
    knn.informative = {1};
    models.push_back(std::make_unique<KnnPolicyModel>(fit_knn_policy(data, knn)));
    knn.index = IndexKind::RandomProjection;
    knn.projection.dims = 2;
    knn.projection.seed = 5;
    models.push_back(std::make_unique<KnnPolicyModel>(fit_knn_policy(data, knn)));
    SoftmaxLinearOptions lin;
    lin.epochs = 30;
    models.push_back(std::make_unique<SoftmaxLinearModel>(fit_softmax_linear(data, lin)));
    MlpOptions mlp;
    mlp.epochs = 5;
    models.push_back(std::make_unique<MlpPolicyModel>(fit_mlp(data, mlp)));

    const auto dir = std::filesystem::temp_directory_path() / "opecalib_model_io";
    std::filesystem::create_directories(dir);
    for (const auto& model : models) {
        const auto path = dir / (model->kind() + ".json");
        save_model(*model, path, Provenance{"h", 1});
        const auto back = load_model(path);
        CHECK(back->kind() == model->kind());
        for (const auto& q : probes) CHECK(back->action_probabilities(q) == model->action_probabilities(q));
        const auto j = model_to_json(*model);
        CHECK(model_from_json(nlohmann::json::parse(j.dump()))->action_probabilities(probes[0]) ==
              model->action_probabilities(probes[0]));
    }
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(model_from_json(nlohmann::json{{"kind", "forest"}}), ValidationError);
}
