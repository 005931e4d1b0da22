#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opecalib/trajectory.hpp"

namespace opecalib {

// Weighted squared Euclidean distance sum_i w_i (s_i - s'_i)^2. Informative
// dimensions carry weight 2, the rest weight 1, unless weights are given
// explicitly. Not a metric itself; its square root is.
class WeightedKernel {
public:
    static constexpr double kInformativeWeight = 2.0;

    explicit WeightedKernel(std::vector<double> weights);

    // Unit weights everywhere except the listed informative dimensions.
    static WeightedKernel with_informative(std::size_t dim, std::span<const std::size_t> informative);
    static WeightedKernel euclidean(std::size_t dim);

    std::size_t dim() const noexcept { return weights_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }

    double distance(StateView a, StateView b) const;

private:
    std::vector<double> weights_;
};

}  // namespace opecalib
