#include "opecalib/projection_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "opecalib/error.hpp"
#include "opecalib/rng.hpp"

namespace opecalib {

using detail::require;

RandomProjectionIndex::RandomProjectionIndex(const std::vector<StateVector>& points, WeightedKernel kernel,
                                             ProjectionOptions options)
    : kernel_(std::move(kernel)), options_(options), count_(points.size()) {
    require(!points.empty(), "projection index: empty training set");
    require(options_.projections >= 1, "projection index: need at least one projection");
    require(options_.dims >= 1 && options_.dims <= 64, "projection index: projected dimension must lie in [1, 64]");
    require(options_.multiplier >= 1, "projection index: candidate multiplier must be at least 1");
    const auto d = dim();
    const auto P = options_.projections;
    const auto dp = options_.dims;

    points_.reserve(count_ * d);
    centre_.assign(d, 0.0);
    for (const auto& p : points) {
        require(p.size() == d, "projection index: point dimension does not match kernel");
        points_.insert(points_.end(), p.begin(), p.end());
        for (std::size_t j = 0; j < d; ++j) centre_[j] += p[j];
    }
    for (auto& c : centre_) c /= double(count_);

    Rng rng(derive_seed(options_.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    matrices_.resize(P * dp * d);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t r = 0; r < dp; ++r)
            for (std::size_t j = 0; j < d; ++j)
                matrices_[(p * dp + r) * d + j] = normal(rng) * std::sqrt(kernel_.weights()[j]);

    projected_.resize(count_ * P * dp);
    buckets_.resize(P);
    std::vector<double> centred(d);
    for (std::size_t p = 0; p < P; ++p) {
        std::map<std::uint64_t, std::vector<std::size_t>> grouped;
        for (std::size_t i = 0; i < count_; ++i) {
            for (std::size_t j = 0; j < d; ++j) centred[j] = points_[i * d + j] - centre_[j];
            double* out = projected_.data() + (i * P + p) * dp;
            project(p, centred.data(), out);
            grouped[key_of(out)].push_back(i);
        }
        for (auto& [key, members] : grouped) buckets_[p].push_back(Bucket{key, std::move(members)});
    }
}

void RandomProjectionIndex::project(std::size_t p, const double* centred, double* out) const {
    const auto d = dim();
    const auto dp = options_.dims;
    for (std::size_t r = 0; r < dp; ++r) {
        const double* row = matrices_.data() + (p * dp + r) * d;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += row[j] * centred[j];
        out[r] = s;
    }
}

std::uint64_t RandomProjectionIndex::key_of(const double* projected) const {
    std::uint64_t key = 0;
    for (std::size_t r = 0; r < options_.dims; ++r)
        if (projected[r] > 0.0) key |= std::uint64_t{1} << r;
    return key;
}

std::vector<Neighbour> RandomProjectionIndex::query(StateView q, std::size_t k, std::size_t multiplier) const {
    require(q.size() == dim(), "projection index query: dimension mismatch");
    require(k >= 1 && k <= count_, "projection index query: k=" + std::to_string(k) + " must lie in [1, " +
                                       std::to_string(count_) + "]");
    const auto d = dim();
    const auto P = options_.projections;
    const auto dp = options_.dims;
    const std::size_t budget = std::min(count_, k * (multiplier ? multiplier : options_.multiplier));

    std::vector<double> centred(d);
    for (std::size_t j = 0; j < d; ++j) centred[j] = q[j] - centre_[j];
    std::vector<double> q_proj(P * dp);
    for (std::size_t p = 0; p < P; ++p) project(p, centred.data(), q_proj.data() + p * dp);

    // Gather: per projection, probe buckets in Hamming order until four times
    // the budget is covered, finishing the last Hamming radius, then keep the
    // budget closest in that projection.
    std::vector<char> seen(count_, 0);
    std::vector<std::size_t> candidates;
    std::vector<std::pair<int, std::size_t>> probe;
    std::vector<Neighbour> local;
    for (std::size_t p = 0; p < P; ++p) {
        const double* qp = q_proj.data() + p * dp;
        const auto qkey = key_of(qp);
        const auto& table = buckets_[p];
        probe.clear();
        for (std::size_t b = 0; b < table.size(); ++b) probe.emplace_back(std::popcount(table[b].key ^ qkey), b);
        std::sort(probe.begin(), probe.end());
        local.clear();
        int radius = -1;
        for (const auto& [hamming, b] : probe) {
            if (local.size() >= 4 * budget && hamming != radius) break;
            radius = hamming;
            for (auto idx : table[b].members) {
                const double* x = projected_.data() + (idx * P + p) * dp;
                double s = 0.0;
                for (std::size_t r = 0; r < dp; ++r) s += (x[r] - qp[r]) * (x[r] - qp[r]);
                local.push_back(Neighbour{idx, s});
            }
        }
        if (local.size() > budget) {
            std::nth_element(local.begin(), local.begin() + std::ptrdiff_t(budget), local.end(), neighbour_less);
            local.resize(budget);
        }
        for (const auto& n : local)
            if (!seen[n.index]) {
                seen[n.index] = 1;
                candidates.push_back(n.index);
            }
    }

    // Keep the budget closest in projected space, summed over projections.
    std::vector<Neighbour> scored;
    scored.reserve(candidates.size());
    for (auto idx : candidates) {
        const double* x = projected_.data() + idx * P * dp;
        double s = 0.0;
        for (std::size_t r = 0; r < P * dp; ++r) {
            const double diff = x[r] - q_proj[r];
            s += diff * diff;
        }
        scored.push_back(Neighbour{idx, s});
    }
    if (scored.size() > budget) {
        std::nth_element(scored.begin(), scored.begin() + std::ptrdiff_t(budget), scored.end(), neighbour_less);
        scored.resize(budget);
    }

    // Re-rank by the true kernel distance.
    for (auto& n : scored) n.distance = kernel_.distance(q, point(n.index));
    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + std::ptrdiff_t(keep), scored.end(), neighbour_less);
    scored.resize(keep);
    return scored;
}

}  // namespace opecalib
