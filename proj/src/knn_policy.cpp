#include "opecalib/knn_policy.hpp"

#include <string>

#include "opecalib/error.hpp"

namespace opecalib {

using detail::require;

std::string_view index_kind_name(IndexKind kind) {
    return kind == IndexKind::BallTree ? "ball_tree" : "random_projection";
}

IndexKind parse_index_kind(std::string_view name) {
    if (name == "ball_tree") return IndexKind::BallTree;
    if (name == "random_projection") return IndexKind::RandomProjection;
    throw ValidationError("unknown index kind '" + std::string(name) + "' (expected ball_tree or random_projection)");
}

TrainingPairs training_pairs(const TrajectoryDataset& dataset) {
    TrainingPairs pairs;
    pairs.states.reserve(dataset.step_count());
    pairs.actions.reserve(dataset.step_count());
    for (const auto& traj : dataset)
        for (const auto& step : traj.steps) {
            pairs.states.push_back(step.state);
            pairs.actions.push_back(step.action);
        }
    return pairs;
}

DiscreteDistribution neighbour_histogram(std::span<const Neighbour> neighbours, std::span<const ActionId> actions,
                                         std::size_t action_count, double alpha) {
    require(!neighbours.empty(), "histogram over zero neighbours");
    require(alpha >= 0.0, "smoothing must be non-negative");
    std::vector<double> counts(action_count, 0.0);
    for (const auto& n : neighbours) counts[std::size_t(actions[n.index])] += 1.0;
    const double denom = double(neighbours.size()) + alpha * double(action_count);
    for (auto& c : counts) c = (c + alpha) / denom;
    return DiscreteDistribution(std::move(counts));
}

KnnPolicyModel::KnnPolicyModel(TrainingPairs pairs, std::size_t action_count, KnnOptions options)
    : action_count_(action_count), options_(std::move(options)) {
    require(!pairs.states.empty(), "kNN policy: empty training set");
    require(pairs.states.size() == pairs.actions.size(), "kNN policy: states and actions differ in count");
    require(options_.k >= 1, "kNN policy: k must be at least 1");
    require(options_.k <= pairs.states.size(), "kNN policy: k=" + std::to_string(options_.k) +
                                                   " exceeds the training size " +
                                                   std::to_string(pairs.states.size()));
    require(options_.alpha >= 0.0, "kNN policy: smoothing must be non-negative");
    for (auto a : pairs.actions)
        require(a >= 0 && std::size_t(a) < action_count_, "kNN policy: training action out of range");
    auto kernel = WeightedKernel::with_informative(pairs.states.front().size(), options_.informative);
    if (options_.index == IndexKind::BallTree)
        index_ = std::make_shared<const BallTree>(pairs.states, std::move(kernel), options_.leaf_size);
    else
        index_ = std::make_shared<const RandomProjectionIndex>(pairs.states, std::move(kernel), options_.projection);
    pairs_ = std::make_shared<const TrainingPairs>(std::move(pairs));
}

std::string KnnPolicyModel::kind() const { return options_.index == IndexKind::BallTree ? "knn" : "approx_knn"; }

std::vector<Neighbour> KnnPolicyModel::neighbours(StateView state) const {
    return std::visit([&](const auto& index) { return index->query(state, options_.k); }, index_);
}

DiscreteDistribution KnnPolicyModel::action_probabilities(StateView state) const {
    return neighbour_histogram(neighbours(state), pairs_->actions, action_count_, options_.alpha);
}

KnnPolicyModel fit_knn_policy(const TrajectoryDataset& dataset, const KnnOptions& options) {
    return KnnPolicyModel(training_pairs(dataset), dataset.action_count(), options);
}

}  // namespace opecalib
