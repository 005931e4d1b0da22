#pragma once

#include <cstddef>
#include <vector>

#include "opecalib/kernel.hpp"

namespace opecalib {

struct Neighbour {
    std::size_t index = 0;  // position in the training set
    double distance = 0.0;  // kernel value (squared form)

    bool operator==(const Neighbour&) const = default;
};

// Orders by distance, then by lowest training index.
inline bool neighbour_less(const Neighbour& a, const Neighbour& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

// Enclosing-ball index over a fixed point set under a WeightedKernel. Pruning
// works with the square root of the kernel, which obeys the triangle
// inequality; reported distances are exact kernel values, so query results
// match a linear scan with the same tie rule.
class BallTree {
public:
    static constexpr std::size_t kDefaultLeafSize = 40;

    BallTree(const std::vector<StateVector>& points, WeightedKernel kernel, std::size_t leaf_size = kDefaultLeafSize);

    std::size_t size() const noexcept { return count_; }
    std::size_t dim() const noexcept { return kernel_.dim(); }
    std::size_t leaf_size() const noexcept { return leaf_size_; }
    const WeightedKernel& kernel() const noexcept { return kernel_; }
    StateView point(std::size_t i) const { return {points_.data() + i * dim(), dim()}; }

    // The k nearest points sorted by (distance, index).
    std::vector<Neighbour> query(StateView q, std::size_t k) const;

private:
    struct Node {
        std::size_t begin = 0, end = 0;  // range in order_
        int left = -1, right = -1;
        double radius = 0.0;             // sqrt-kernel radius around the centroid
    };

    int build(std::size_t begin, std::size_t end);
    double raw_distance(const double* a, const double* b) const noexcept;
    void search(int node, const double* q, std::size_t k, std::vector<Neighbour>& heap) const;

    WeightedKernel kernel_;
    std::size_t leaf_size_;
    std::size_t count_ = 0;
    std::vector<double> points_;     // row-major, original order
    std::vector<std::size_t> order_; // permutation grouped by node
    std::vector<Node> nodes_;
    std::vector<double> centroids_;  // row per node
};

}  // namespace opecalib
