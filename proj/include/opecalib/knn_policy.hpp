#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "opecalib/ball_tree.hpp"
#include "opecalib/projection_index.hpp"
#include "opecalib/trajectory.hpp"

namespace opecalib {

enum class IndexKind { BallTree, RandomProjection };

std::string_view index_kind_name(IndexKind kind);
IndexKind parse_index_kind(std::string_view name);

struct KnnOptions {
    std::size_t k = 50;
    double alpha = 0.5;  // Laplace smoothing
    IndexKind index = IndexKind::BallTree;
    std::vector<std::size_t> informative;  // dimensions weighted 2 in the kernel
    std::size_t leaf_size = BallTree::kDefaultLeafSize;
    ProjectionOptions projection;
};

// Every (state, action) pair of a dataset, in trajectory then step order.
struct TrainingPairs {
    std::vector<StateVector> states;
    std::vector<ActionId> actions;
};

TrainingPairs training_pairs(const TrajectoryDataset& dataset);

// (count_a + alpha) / (k + alpha * |A|) over the neighbours' actions.
DiscreteDistribution neighbour_histogram(std::span<const Neighbour> neighbours, std::span<const ActionId> actions,
                                         std::size_t action_count, double alpha);

class KnnPolicyModel final : public PolicyModel {
public:
    KnnPolicyModel(TrainingPairs pairs, std::size_t action_count, KnnOptions options);

    std::size_t action_count() const override { return action_count_; }
    DiscreteDistribution action_probabilities(StateView state) const override;
    std::string kind() const override;

    std::vector<Neighbour> neighbours(StateView state) const;
    const KnnOptions& options() const noexcept { return options_; }
    const TrainingPairs& pairs() const noexcept { return *pairs_; }

private:
    std::shared_ptr<const TrainingPairs> pairs_;
    std::size_t action_count_;
    KnnOptions options_;
    std::variant<std::shared_ptr<const BallTree>, std::shared_ptr<const RandomProjectionIndex>> index_;
};

KnnPolicyModel fit_knn_policy(const TrajectoryDataset& dataset, const KnnOptions& options);

}  // namespace opecalib
