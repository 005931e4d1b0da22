#pragma once

// Reference implementations used only by the tests: exhaustive enumeration
// and backward induction on small tabular MDPs, a linear-scan neighbour
// search, and rank statistics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "opecalib/ball_tree.hpp"
#include "opecalib/estimators.hpp"
#include "opecalib/kernel.hpp"
#include "opecalib/trajectory.hpp"

namespace oracle {

using opecalib::ActionId;
using opecalib::DiscreteDistribution;
using opecalib::StateVector;
using opecalib::StateView;

// Finite-horizon tabular MDP. States are encoded as [s, t] so that
// time-dependent quantities can be looked up from a StateView.
struct TabularMdp {
    std::size_t states = 0;
    std::size_t actions = 0;
    std::size_t horizon = 0;
    std::vector<double> initial;                               // [s]
    std::vector<std::vector<std::vector<double>>> transition;  // [s][a][s']
    std::vector<std::vector<double>> reward;                   // [s][a], deterministic

    static TabularMdp random(std::uint64_t seed, std::size_t states, std::size_t actions, std::size_t horizon,
                             bool deterministic_start) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.05, 1.0);
        std::uniform_real_distribution<double> r(-1.0, 2.0);
        auto normalised = [&](std::size_t n) {
            std::vector<double> p(n);
            for (auto& x : p) x = u(rng);
            const double s = std::accumulate(p.begin(), p.end(), 0.0);
            for (auto& x : p) x /= s;
            return p;
        };
        TabularMdp m;
        m.states = states;
        m.actions = actions;
        m.horizon = horizon;
        if (deterministic_start) {
            m.initial.assign(states, 0.0);
            m.initial[0] = 1.0;
        } else {
            m.initial = normalised(states);
        }
        m.transition.assign(states, {});
        m.reward.assign(states, std::vector<double>(actions));
        for (std::size_t s = 0; s < states; ++s)
            for (std::size_t a = 0; a < actions; ++a) {
                m.transition[s].push_back(normalised(states));
                m.reward[s][a] = r(rng);
            }
        return m;
    }

    // Next state (s + a + 1) mod S with probability one.
    static TabularMdp deterministic(std::uint64_t seed, std::size_t states, std::size_t actions, std::size_t horizon) {
        auto m = random(seed, states, actions, horizon, true);
        for (std::size_t s = 0; s < states; ++s)
            for (std::size_t a = 0; a < actions; ++a) {
                m.transition[s][a].assign(states, 0.0);
                m.transition[s][a][(s + a + 1) % states] = 1.0;
            }
        return m;
    }
};

using TabularPolicy = std::vector<std::vector<double>>;  // [s][a]

inline TabularPolicy random_policy(std::uint64_t seed, std::size_t states, std::size_t actions) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    TabularPolicy p(states, std::vector<double>(actions));
    for (auto& row : p) {
        for (auto& x : row) x = u(rng);
        const double s = std::accumulate(row.begin(), row.end(), 0.0);
        for (auto& x : row) x /= s;
    }
    return p;
}

inline opecalib::FunctionPolicy as_policy(const TabularPolicy& p) {
    return opecalib::FunctionPolicy(p.front().size(), [p](StateView s) {
        return DiscreteDistribution(p[std::size_t(s[0])]);
    });
}

// Q_t(s, a) by backward induction.
inline std::vector<std::vector<std::vector<double>>> q_values(const TabularMdp& m, const TabularPolicy& pi,
                                                              double gamma) {
    std::vector<std::vector<std::vector<double>>> q(m.horizon,
                                                    std::vector<std::vector<double>>(m.states, std::vector<double>(m.actions)));
    std::vector<double> v_next(m.states, 0.0);
    for (std::size_t step = m.horizon; step-- > 0;) {
        std::vector<double> v(m.states, 0.0);
        for (std::size_t s = 0; s < m.states; ++s)
            for (std::size_t a = 0; a < m.actions; ++a) {
                double cont = 0.0;
                for (std::size_t n = 0; n < m.states; ++n) cont += m.transition[s][a][n] * v_next[n];
                q[step][s][a] = m.reward[s][a] + gamma * cont;
                v[s] += pi[s][a] * q[step][s][a];
            }
        v_next = v;
    }
    return q;
}

inline double value(const TabularMdp& m, const TabularPolicy& pi, double gamma) {
    const auto q = q_values(m, pi, gamma);
    double v = 0.0;
    for (std::size_t s = 0; s < m.states; ++s)
        for (std::size_t a = 0; a < m.actions; ++a) v += m.initial[s] * pi[s][a] * q[0][s][a];
    return v;
}

class TabularQ final : public opecalib::QModel {
public:
    explicit TabularQ(std::vector<std::vector<std::vector<double>>> q) : q_(std::move(q)) {}
    std::size_t action_count() const override { return q_.front().front().size(); }
    double q(StateView s, ActionId a) const override { return q_[std::size_t(s[1])][std::size_t(s[0])][std::size_t(a)]; }

private:
    std::vector<std::vector<std::vector<double>>> q_;
};

struct Weighted {
    opecalib::Trajectory trajectory;
    double probability = 0.0;
};

// Every full-horizon trajectory with nonzero probability under pi. The final
// transition is not branched on since no estimator reads the terminal state.
inline std::vector<Weighted> enumerate(const TabularMdp& m, const TabularPolicy& pi) {
    std::vector<Weighted> out;
    std::function<void(opecalib::Trajectory&, std::size_t, double)> walk = [&](opecalib::Trajectory& h, std::size_t s,
                                                                               double p) {
        const std::size_t t = h.steps.size();
        for (std::size_t a = 0; a < m.actions; ++a) {
            const double pa = p * pi[s][a];
            if (pa == 0.0) continue;
            h.steps.push_back({{double(s), double(t)}, ActionId(a), m.reward[s][a]});
            if (t + 1 == m.horizon) {
                out.push_back({h, pa});
            } else {
                for (std::size_t n = 0; n < m.states; ++n)
                    if (const double pn = pa * m.transition[s][a][n]; pn != 0.0) walk(h, n, pn);
            }
            h.steps.pop_back();
        }
    };
    for (std::size_t s = 0; s < m.states; ++s) {
        if (m.initial[s] == 0.0) continue;
        opecalib::Trajectory h;
        walk(h, s, m.initial[s]);
    }
    return out;
}

inline opecalib::Trajectory sample(const TabularMdp& m, const TabularPolicy& pi, std::mt19937_64& rng) {
    auto draw = [&](const std::vector<double>& p) {
        std::discrete_distribution<std::size_t> d(p.begin(), p.end());
        return d(rng);
    };
    opecalib::Trajectory h;
    std::size_t s = draw(m.initial);
    for (std::size_t t = 0; t < m.horizon; ++t) {
        const std::size_t a = draw(pi[s]);
        h.steps.push_back({{double(s), double(t)}, ActionId(a), m.reward[s][a]});
        s = draw(m.transition[s][a]);
    }
    h.terminal = StateVector{double(s), double(m.horizon)};
    return h;
}

inline opecalib::TrajectoryDataset sample_dataset(const TabularMdp& m, const TabularPolicy& pi, std::size_t n,
                                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<opecalib::Trajectory> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample(m, pi, rng));
    return opecalib::TrajectoryDataset(std::move(out), m.actions);
}

// One length-1 trajectory per (state, action) pair, so training pairs keep
// the given order. Severities, when given, are attached per pair.
inline opecalib::TrajectoryDataset pairs_dataset(const std::vector<StateVector>& states,
                                                 const std::vector<ActionId>& actions, std::size_t action_count,
                                                 const std::vector<double>& severity = {}) {
    std::vector<opecalib::Trajectory> ts;
    for (std::size_t i = 0; i < states.size(); ++i) {
        opecalib::Trajectory t;
        t.steps.push_back({states[i], actions[i], 0.0});
        if (!severity.empty()) t.severity = std::vector<double>{severity[i]};
        ts.push_back(std::move(t));
    }
    return opecalib::TrajectoryDataset(std::move(ts), action_count);
}

// Linear scan, ordered by (distance, index).
inline std::vector<opecalib::Neighbour> linear_knn(const std::vector<StateVector>& points,
                                                   const opecalib::WeightedKernel& kernel, StateView q, std::size_t k) {
    std::vector<opecalib::Neighbour> all;
    for (std::size_t i = 0; i < points.size(); ++i) all.push_back({i, kernel.distance(points[i], q)});
    std::sort(all.begin(), all.end(), opecalib::neighbour_less);
    all.resize(k);
    return all;
}

// Seeded Gaussian-cluster point set: `clusters` centres drawn from N(0, 9 I),
// points drawn around a uniformly chosen centre with unit variance.
inline std::vector<StateVector> gaussian_clusters(std::uint64_t seed, std::size_t n, std::size_t dim,
                                                  std::size_t clusters) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> centre(0.0, 3.0), noise(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, clusters - 1);
    std::vector<StateVector> centres(clusters, StateVector(dim));
    for (auto& c : centres)
        for (auto& x : c) x = centre(rng);
    std::vector<StateVector> points(n, StateVector(dim));
    for (auto& p : points) {
        const auto& c = centres[pick(rng)];
        for (std::size_t j = 0; j < dim; ++j) p[j] = c[j] + noise(rng);
    }
    return points;
}

// Mean fraction of the exact k nearest recovered by `approx`, over queries.
template <class Approx>
double recall_at_k(const std::vector<StateVector>& points, const opecalib::WeightedKernel& kernel,
                   const std::vector<StateVector>& queries, std::size_t k, const Approx& approx) {
    double total = 0.0;
    for (const auto& q : queries) {
        const auto exact = linear_knn(points, kernel, q, k);
        const std::vector<opecalib::Neighbour> found = approx(q, k);
        std::size_t hit = 0;
        for (const auto& e : exact)
            for (const auto& f : found)
                if (f.index == e.index) ++hit;
        total += double(hit) / double(k);
    }
    return total / double(queries.size());
}

// Average ranks, ties sharing the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * double(i + j);
        i = j + 1;
    }
    return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto a = ranks(x), b = ranks(y);
    const double n = double(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Central finite-difference gradient.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace oracle
