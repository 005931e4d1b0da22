#include "opecalib/ball_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "opecalib/error.hpp"

namespace opecalib {

using detail::require;

BallTree::BallTree(const std::vector<StateVector>& points, WeightedKernel kernel, std::size_t leaf_size)
    : kernel_(std::move(kernel)), leaf_size_(leaf_size), count_(points.size()) {
    require(!points.empty(), "ball tree: empty training set");
    require(leaf_size_ >= 1, "ball tree: leaf size must be at least 1");
    const auto d = dim();
    points_.reserve(count_ * d);
    for (const auto& p : points) {
        require(p.size() == d, "ball tree: point dimension " + std::to_string(p.size()) + " does not match kernel " +
                                   std::to_string(d));
        points_.insert(points_.end(), p.begin(), p.end());
    }
    order_.resize(count_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * count_ / leaf_size_ + 1);
    build(0, count_);
}

double BallTree::raw_distance(const double* a, const double* b) const noexcept {
    const auto& w = kernel_.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double diff = a[i] - b[i];
        s += w[i] * diff * diff;
    }
    return s;
}

int BallTree::build(std::size_t begin, std::size_t end) {
    const auto d = dim();
    const int id = int(nodes_.size());
    nodes_.push_back(Node{begin, end});
    centroids_.resize(nodes_.size() * d, 0.0);

    double* c = centroids_.data() + std::size_t(id) * d;
    for (std::size_t i = begin; i < end; ++i)
        for (std::size_t j = 0; j < d; ++j) c[j] += points_[order_[i] * d + j];
    for (std::size_t j = 0; j < d; ++j) c[j] /= double(end - begin);

    double radius = 0.0;
    for (std::size_t i = begin; i < end; ++i)
        radius = std::max(radius, std::sqrt(raw_distance(c, points_.data() + order_[i] * d)));
    nodes_[std::size_t(id)].radius = radius;

    if (end - begin <= leaf_size_) return id;

    // Split on the dimension with the widest kernel-scaled spread.
    const auto& w = kernel_.weights();
    std::size_t split_dim = 0;
    double widest = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
        double lo = points_[order_[begin] * d + j], hi = lo;
        for (std::size_t i = begin; i < end; ++i) {
            const double v = points_[order_[i] * d + j];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double spread = std::sqrt(w[j]) * (hi - lo);
        if (spread > widest) {
            widest = spread;
            split_dim = j;
        }
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + std::ptrdiff_t(begin), order_.begin() + std::ptrdiff_t(mid),
                     order_.begin() + std::ptrdiff_t(end), [&](std::size_t a, std::size_t b) {
                         const double va = points_[a * d + split_dim], vb = points_[b * d + split_dim];
                         return va < vb || (va == vb && a < b);
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[std::size_t(id)].left = left;
    nodes_[std::size_t(id)].right = right;
    return id;
}

void BallTree::search(int node_id, const double* q, std::size_t k, std::vector<Neighbour>& heap) const {
    const auto& node = nodes_[std::size_t(node_id)];
    const auto d = dim();
    if (heap.size() == k) {
        const double to_centre = std::sqrt(raw_distance(q, centroids_.data() + std::size_t(node_id) * d));
        const double worst = std::sqrt(heap.front().distance);
        const double slack = 1e-9 * (worst + node.radius + to_centre);
        if (to_centre - node.radius > worst + slack) return;
    }
    if (node.left < 0) {
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t idx = order_[i];
            const Neighbour cand{idx, raw_distance(q, points_.data() + idx * d)};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end(), neighbour_less);
            } else if (neighbour_less(cand, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), neighbour_less);
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end(), neighbour_less);
            }
        }
        return;
    }
    const double dl = raw_distance(q, centroids_.data() + std::size_t(node.left) * d);
    const double dr = raw_distance(q, centroids_.data() + std::size_t(node.right) * d);
    if (dl <= dr) {
        search(node.left, q, k, heap);
        search(node.right, q, k, heap);
    } else {
        search(node.right, q, k, heap);
        search(node.left, q, k, heap);
    }
}

std::vector<Neighbour> BallTree::query(StateView q, std::size_t k) const {
    require(q.size() == dim(), "ball tree query: dimension mismatch");
    require(k >= 1 && k <= count_, "ball tree query: k=" + std::to_string(k) + " must lie in [1, " +
                                       std::to_string(count_) + "]");
    std::vector<Neighbour> heap;
    heap.reserve(k);
    search(0, q.data(), k, heap);
    std::sort_heap(heap.begin(), heap.end(), neighbour_less);
    return heap;
}

}  // namespace opecalib
