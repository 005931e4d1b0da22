#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "opecalib/ball_tree.hpp"
#include "opecalib/kernel.hpp"

namespace opecalib {

struct ProjectionOptions {
    std::size_t projections = 8;   // P
    std::size_t dims = 8;          // d', bits per bucket key
    std::size_t multiplier = 10;   // m, candidate budget is m * k
    std::uint64_t seed = 0;
};

// Approximate nearest neighbours by bucketed random projection. Each of the P
// projections maps kernel-scaled, centred states through a d' x D Gaussian
// matrix; the sign pattern of the projection is the bucket key. A query probes
// buckets in order of Hamming distance from its own key until 4*m*k points are
// seen, takes the m*k probed points closest in each projection, keeps the m*k
// of their union closest in the concatenated projected space, and re-ranks
// those by the true kernel distance.
class RandomProjectionIndex {
public:
    RandomProjectionIndex(const std::vector<StateVector>& points, WeightedKernel kernel, ProjectionOptions options);

    std::size_t size() const noexcept { return count_; }
    std::size_t dim() const noexcept { return kernel_.dim(); }
    const WeightedKernel& kernel() const noexcept { return kernel_; }
    const ProjectionOptions& options() const noexcept { return options_; }
    StateView point(std::size_t i) const { return {points_.data() + i * dim(), dim()}; }

    // Approximate k nearest, sorted by (distance, index). `multiplier` of zero
    // uses the configured m.
    std::vector<Neighbour> query(StateView q, std::size_t k, std::size_t multiplier = 0) const;

private:
    struct Bucket {
        std::uint64_t key = 0;
        std::vector<std::size_t> members;
    };

    void project(std::size_t p, const double* centred, double* out) const;
    std::uint64_t key_of(const double* projected) const;

    WeightedKernel kernel_;
    ProjectionOptions options_;
    std::size_t count_ = 0;
    std::vector<double> points_;      // row-major, original coordinates
    std::vector<double> centre_;      // training mean
    std::vector<double> matrices_;    // P blocks of d' x D, pre-multiplied by sqrt(w)
    std::vector<double> projected_;   // count x P x d'
    std::vector<std::vector<Bucket>> buckets_;  // per projection, sorted by key
};

}  // namespace opecalib
