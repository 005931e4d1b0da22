#include "opecalib/kernel.hpp"

#include <cmath>
#include <string>

#include "opecalib/error.hpp"

namespace opecalib {

using detail::require;

WeightedKernel::WeightedKernel(std::vector<double> weights) : weights_(std::move(weights)) {
    require(!weights_.empty(), "kernel needs at least one dimension");
    for (double w : weights_) require(std::isfinite(w) && w > 0.0, "kernel weights must be positive and finite");
}

WeightedKernel WeightedKernel::with_informative(std::size_t dim, std::span<const std::size_t> informative) {
    std::vector<double> w(dim, 1.0);
    for (auto i : informative) {
        require(i < dim, "informative dimension " + std::to_string(i) + " outside state dimension " +
                             std::to_string(dim));
        w[i] = kInformativeWeight;
    }
    return WeightedKernel(std::move(w));
}

WeightedKernel WeightedKernel::euclidean(std::size_t dim) { return WeightedKernel(std::vector<double>(dim, 1.0)); }

double WeightedKernel::distance(StateView a, StateView b) const {
    if (a.size() != weights_.size() || b.size() != weights_.size())
        throw ValidationError("kernel distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ", kernel " + std::to_string(weights_.size()) + ")");
    double d = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const double diff = a[i] - b[i];
        d += weights_[i] * diff * diff;
    }
    return d;
}

}  // namespace opecalib
