#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "opecalib/knn_policy.hpp"
#include "opecalib/trajectory.hpp"

namespace opecalib {

struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // same layout as parameters()
};

// Per-feature affine standardisation fitted on the training states.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer identity(std::size_t dim);
    static Standardizer fit(const std::vector<StateVector>& states);
    Eigen::VectorXd apply(StateView state) const;
    Eigen::MatrixXd apply_rows(const std::vector<StateVector>& states) const;  // one row per state
};

struct SoftmaxLinearOptions {
    double learning_rate = 0.5;
    std::size_t epochs = 500;
    double l2 = 0.0;
    std::uint64_t seed = 0;
};

// Multinomial logistic regression, softmax(W z + b) with z the standardised
// state. Fitted by full-batch gradient descent on mean negative
// log-likelihood plus (l2/2)|W|^2.
class SoftmaxLinearModel final : public PolicyModel {
public:
    SoftmaxLinearModel(std::size_t action_count, Standardizer standardizer);

    std::size_t action_count() const override { return std::size_t(weights_.rows()); }
    DiscreteDistribution action_probabilities(StateView state) const override;
    std::string kind() const override { return "softmax_linear"; }

    std::size_t dim() const noexcept { return std::size_t(weights_.cols()); }
    const Standardizer& standardizer() const noexcept { return standardizer_; }

    // W row-major followed by b.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& params);
    std::size_t parameter_count() const noexcept { return std::size_t(weights_.size() + bias_.size()); }

    LossGradient loss_and_gradient(const TrainingPairs& pairs, double l2) const;

    // Full-training-set loss before the first update and after each epoch.
    const std::vector<double>& loss_history() const noexcept { return loss_history_; }
    const SoftmaxLinearOptions& options() const noexcept { return options_; }

private:
    friend SoftmaxLinearModel fit_softmax_linear(const TrajectoryDataset&, const SoftmaxLinearOptions&);
    friend class ModelSerializer;

    Eigen::MatrixXd weights_;  // |A| x D
    Eigen::VectorXd bias_;     // |A|
    Standardizer standardizer_;
    SoftmaxLinearOptions options_;
    std::vector<double> loss_history_;
};

SoftmaxLinearModel fit_softmax_linear(const TrajectoryDataset& dataset, const SoftmaxLinearOptions& options);

struct MlpOptions {
    std::size_t hidden = 16;
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double l2 = 0.0;
    std::uint64_t seed = 0;
};

// One hidden rectifier layer and a softmax output, trained by minibatch SGD
// with seeded shuffling.
class MlpPolicyModel final : public PolicyModel {
public:
    MlpPolicyModel(std::size_t action_count, std::size_t hidden, Standardizer standardizer);

    std::size_t action_count() const override { return std::size_t(w2_.rows()); }
    DiscreteDistribution action_probabilities(StateView state) const override;
    std::string kind() const override { return "mlp"; }

    std::size_t dim() const noexcept { return std::size_t(w1_.cols()); }
    std::size_t hidden() const noexcept { return std::size_t(w1_.rows()); }
    const Standardizer& standardizer() const noexcept { return standardizer_; }

    // W1 row-major, b1, W2 row-major, b2.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& params);
    std::size_t parameter_count() const noexcept {
        return std::size_t(w1_.size() + b1_.size() + w2_.size() + b2_.size());
    }

    LossGradient loss_and_gradient(const TrainingPairs& pairs, double l2) const;

    const std::vector<double>& loss_history() const noexcept { return loss_history_; }
    const MlpOptions& options() const noexcept { return options_; }

private:
    friend MlpPolicyModel fit_mlp(const TrajectoryDataset&, const MlpOptions&);
    friend class ModelSerializer;

    LossGradient batch_loss_and_gradient(const Eigen::MatrixXd& z, std::span<const ActionId> actions,
                                         std::span<const std::size_t> rows, double l2) const;

    Eigen::MatrixXd w1_;  // H x D
    Eigen::VectorXd b1_;
    Eigen::MatrixXd w2_;  // |A| x H
    Eigen::VectorXd b2_;
    Standardizer standardizer_;
    MlpOptions options_;
    std::vector<double> loss_history_;
};

MlpPolicyModel fit_mlp(const TrajectoryDataset& dataset, const MlpOptions& options);

}  // namespace opecalib
