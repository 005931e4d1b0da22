#include "opecalib/parametric_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "opecalib/error.hpp"
#include "opecalib/rng.hpp"

namespace opecalib {

using detail::require;

namespace {

// Softmax of `logits` in place; returns log-sum-exp.
double softmax_inplace(Eigen::Ref<Eigen::VectorXd> logits) {
    const double m = logits.maxCoeff();
    logits = (logits.array() - m).exp();
    const double s = logits.sum();
    logits /= s;
    return m + std::log(s);
}

DiscreteDistribution to_distribution(const Eigen::VectorXd& p) {
    std::vector<double> probs(p.data(), p.data() + p.size());
    return DiscreteDistribution(std::move(probs));
}

[[noreturn]] void diverged(const char* model, double learning_rate) {
    std::ostringstream msg;
    msg << model << " training diverged (loss is not finite) at learning rate " << learning_rate;
    throw EstimatorError(msg.str());
}

void check_pairs(const TrainingPairs& pairs, std::size_t dim, std::size_t action_count) {
    require(!pairs.states.empty(), "need at least one training pair");
    require(pairs.states.size() == pairs.actions.size(), "states and actions differ in count");
    for (const auto& s : pairs.states) require(s.size() == dim, "training state has the wrong dimension");
    for (auto a : pairs.actions) require(a >= 0 && std::size_t(a) < action_count, "training action out of range");
}

}  // namespace

Standardizer Standardizer::identity(std::size_t dim) {
    return Standardizer{Eigen::VectorXd::Zero(Eigen::Index(dim)), Eigen::VectorXd::Ones(Eigen::Index(dim))};
}

Standardizer Standardizer::fit(const std::vector<StateVector>& states) {
    require(!states.empty(), "cannot standardise an empty set");
    const auto d = Eigen::Index(states.front().size());
    Standardizer s{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
    for (const auto& x : states) s.mean += Eigen::Map<const Eigen::VectorXd>(x.data(), d);
    s.mean /= double(states.size());
    for (const auto& x : states)
        s.scale.array() += (Eigen::Map<const Eigen::VectorXd>(x.data(), d) - s.mean).array().square();
    s.scale = (s.scale / double(states.size())).array().sqrt();
    for (Eigen::Index j = 0; j < d; ++j)
        if (!(s.scale[j] > 1e-12)) s.scale[j] = 1.0;
    return s;
}

Eigen::VectorXd Standardizer::apply(StateView state) const {
    require(Eigen::Index(state.size()) == mean.size(), "state dimension does not match the model");
    return (Eigen::Map<const Eigen::VectorXd>(state.data(), mean.size()) - mean).cwiseQuotient(scale);
}

Eigen::MatrixXd Standardizer::apply_rows(const std::vector<StateVector>& states) const {
    Eigen::MatrixXd z(Eigen::Index(states.size()), mean.size());
    for (std::size_t i = 0; i < states.size(); ++i) z.row(Eigen::Index(i)) = apply(states[i]).transpose();
    return z;
}

// ---------------------------------------------------------------------------
// Softmax-linear

SoftmaxLinearModel::SoftmaxLinearModel(std::size_t action_count, Standardizer standardizer)
    : weights_(Eigen::MatrixXd::Zero(Eigen::Index(action_count), standardizer.mean.size())),
      bias_(Eigen::VectorXd::Zero(Eigen::Index(action_count))),
      standardizer_(std::move(standardizer)) {
    require(action_count >= 1, "softmax model needs at least one action");
    require(standardizer_.mean.size() >= 1, "softmax model needs at least one feature");
}

DiscreteDistribution SoftmaxLinearModel::action_probabilities(StateView state) const {
    Eigen::VectorXd logits = weights_ * standardizer_.apply(state) + bias_;
    softmax_inplace(logits);
    return to_distribution(logits);
}

Eigen::VectorXd SoftmaxLinearModel::parameters() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (Eigen::Index a = 0; a < weights_.rows(); ++a)
        for (Eigen::Index j = 0; j < weights_.cols(); ++j) p[k++] = weights_(a, j);
    for (Eigen::Index a = 0; a < bias_.size(); ++a) p[k++] = bias_[a];
    return p;
}

void SoftmaxLinearModel::set_parameters(const Eigen::VectorXd& params) {
    require(std::size_t(params.size()) == parameter_count(), "softmax model: wrong parameter count");
    Eigen::Index k = 0;
    for (Eigen::Index a = 0; a < weights_.rows(); ++a)
        for (Eigen::Index j = 0; j < weights_.cols(); ++j) weights_(a, j) = params[k++];
    for (Eigen::Index a = 0; a < bias_.size(); ++a) bias_[a] = params[k++];
}

LossGradient SoftmaxLinearModel::loss_and_gradient(const TrainingPairs& pairs, double l2) const {
    check_pairs(pairs, dim(), action_count());
    const Eigen::MatrixXd z = standardizer_.apply_rows(pairs.states);
    const auto n = double(pairs.states.size());
    Eigen::MatrixXd grad_w = Eigen::MatrixXd::Zero(weights_.rows(), weights_.cols());
    Eigen::VectorXd grad_b = Eigen::VectorXd::Zero(bias_.size());
    double loss = 0.0;
    Eigen::VectorXd p(bias_.size());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        p = weights_ * z.row(i).transpose() + bias_;
        const auto y = Eigen::Index(pairs.actions[std::size_t(i)]);
        const double logit_y = p[y];
        loss += softmax_inplace(p) - logit_y;
        p[y] -= 1.0;
        grad_w += p * z.row(i);
        grad_b += p;
    }
    LossGradient out;
    out.loss = loss / n + 0.5 * l2 * weights_.squaredNorm();
    grad_w = grad_w / n + l2 * weights_;
    grad_b /= n;
    out.gradient.resize(Eigen::Index(parameter_count()));
    Eigen::Index k = 0;
    for (Eigen::Index a = 0; a < grad_w.rows(); ++a)
        for (Eigen::Index j = 0; j < grad_w.cols(); ++j) out.gradient[k++] = grad_w(a, j);
    for (Eigen::Index a = 0; a < grad_b.size(); ++a) out.gradient[k++] = grad_b[a];
    return out;
}

SoftmaxLinearModel fit_softmax_linear(const TrajectoryDataset& dataset, const SoftmaxLinearOptions& options) {
    require(options.learning_rate > 0.0, "softmax model: learning rate must be positive");
    require(options.l2 >= 0.0, "softmax model: l2 must be non-negative");
    const auto pairs = training_pairs(dataset);
    SoftmaxLinearModel model(dataset.action_count(), Standardizer::fit(pairs.states));
    model.options_ = options;
    auto step = model.loss_and_gradient(pairs, options.l2);
    model.loss_history_.push_back(step.loss);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        model.set_parameters(model.parameters() - options.learning_rate * step.gradient);
        step = model.loss_and_gradient(pairs, options.l2);
        if (!std::isfinite(step.loss) || !step.gradient.allFinite()) diverged("softmax-linear", options.learning_rate);
        model.loss_history_.push_back(step.loss);
    }
    return model;
}

// ---------------------------------------------------------------------------
// MLP

MlpPolicyModel::MlpPolicyModel(std::size_t action_count, std::size_t hidden, Standardizer standardizer)
    : w1_(Eigen::MatrixXd::Zero(Eigen::Index(hidden), standardizer.mean.size())),
      b1_(Eigen::VectorXd::Zero(Eigen::Index(hidden))),
      w2_(Eigen::MatrixXd::Zero(Eigen::Index(action_count), Eigen::Index(hidden))),
      b2_(Eigen::VectorXd::Zero(Eigen::Index(action_count))),
      standardizer_(std::move(standardizer)) {
    require(action_count >= 1, "MLP needs at least one action");
    require(hidden >= 1, "MLP needs at least one hidden unit");
    require(standardizer_.mean.size() >= 1, "MLP needs at least one feature");
}

DiscreteDistribution MlpPolicyModel::action_probabilities(StateView state) const {
    const Eigen::VectorXd h = (w1_ * standardizer_.apply(state) + b1_).cwiseMax(0.0);
    Eigen::VectorXd logits = w2_ * h + b2_;
    softmax_inplace(logits);
    return to_distribution(logits);
}

Eigen::VectorXd MlpPolicyModel::parameters() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    auto put = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) p[k++] = m(r, c);
    };
    put(w1_);
    p.segment(k, b1_.size()) = b1_;
    k += b1_.size();
    put(w2_);
    p.segment(k, b2_.size()) = b2_;
    return p;
}

void MlpPolicyModel::set_parameters(const Eigen::VectorXd& params) {
    require(std::size_t(params.size()) == parameter_count(), "MLP: wrong parameter count");
    Eigen::Index k = 0;
    auto take = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = params[k++];
    };
    take(w1_);
    b1_ = params.segment(k, b1_.size());
    k += b1_.size();
    take(w2_);
    b2_ = params.segment(k, b2_.size());
}

LossGradient MlpPolicyModel::batch_loss_and_gradient(const Eigen::MatrixXd& z, std::span<const ActionId> actions,
                                                     std::span<const std::size_t> rows, double l2) const {
    Eigen::MatrixXd g_w1 = Eigen::MatrixXd::Zero(w1_.rows(), w1_.cols());
    Eigen::VectorXd g_b1 = Eigen::VectorXd::Zero(b1_.size());
    Eigen::MatrixXd g_w2 = Eigen::MatrixXd::Zero(w2_.rows(), w2_.cols());
    Eigen::VectorXd g_b2 = Eigen::VectorXd::Zero(b2_.size());
    double loss = 0.0;
    Eigen::VectorXd pre(b1_.size()), h(b1_.size()), p(b2_.size()), dh(b1_.size());
    for (auto i : rows) {
        const auto x = z.row(Eigen::Index(i)).transpose();
        pre = w1_ * x + b1_;
        h = pre.cwiseMax(0.0);
        p = w2_ * h + b2_;
        const auto y = Eigen::Index(actions[i]);
        const double logit_y = p[y];
        loss += softmax_inplace(p) - logit_y;
        p[y] -= 1.0;
        g_w2 += p * h.transpose();
        g_b2 += p;
        dh = (w2_.transpose() * p).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
        g_w1 += dh * x.transpose();
        g_b1 += dh;
    }
    const double n = double(rows.size());
    LossGradient out;
    out.loss = loss / n + 0.5 * l2 * (w1_.squaredNorm() + w2_.squaredNorm());
    g_w1 = g_w1 / n + l2 * w1_;
    g_b1 /= n;
    g_w2 = g_w2 / n + l2 * w2_;
    g_b2 /= n;
    out.gradient.resize(Eigen::Index(parameter_count()));
    Eigen::Index k = 0;
    auto put = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) out.gradient[k++] = m(r, c);
    };
    put(g_w1);
    out.gradient.segment(k, g_b1.size()) = g_b1;
    k += g_b1.size();
    put(g_w2);
    out.gradient.segment(k, g_b2.size()) = g_b2;
    return out;
}

LossGradient MlpPolicyModel::loss_and_gradient(const TrainingPairs& pairs, double l2) const {
    check_pairs(pairs, dim(), action_count());
    std::vector<std::size_t> rows(pairs.states.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return batch_loss_and_gradient(standardizer_.apply_rows(pairs.states), pairs.actions, rows, l2);
}

MlpPolicyModel fit_mlp(const TrajectoryDataset& dataset, const MlpOptions& options) {
    require(options.learning_rate > 0.0, "MLP: learning rate must be positive");
    require(options.batch_size >= 1, "MLP: batch size must be at least 1");
    require(options.l2 >= 0.0, "MLP: l2 must be non-negative");
    const auto pairs = training_pairs(dataset);
    MlpPolicyModel model(dataset.action_count(), options.hidden, Standardizer::fit(pairs.states));
    model.options_ = options;

    Rng init_rng(derive_seed(options.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s1 = std::sqrt(2.0 / double(model.dim()));
    const double s2 = std::sqrt(1.0 / double(options.hidden));
    for (Eigen::Index r = 0; r < model.w1_.rows(); ++r)
        for (Eigen::Index c = 0; c < model.w1_.cols(); ++c) model.w1_(r, c) = s1 * normal(init_rng);
    for (Eigen::Index r = 0; r < model.w2_.rows(); ++r)
        for (Eigen::Index c = 0; c < model.w2_.cols(); ++c) model.w2_(r, c) = s2 * normal(init_rng);

    const Eigen::MatrixXd z = model.standardizer_.apply_rows(pairs.states);
    std::vector<std::size_t> all(pairs.states.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    model.loss_history_.push_back(model.batch_loss_and_gradient(z, pairs.actions, all, options.l2).loss);

    std::vector<std::size_t> order = all;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(options.seed, 1 + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const auto end = std::min(order.size(), start + options.batch_size);
            const auto batch = std::span<const std::size_t>(order).subspan(start, end - start);
            const auto step = model.batch_loss_and_gradient(z, pairs.actions, batch, options.l2);
            if (!step.gradient.allFinite()) diverged("MLP", options.learning_rate);
            model.set_parameters(model.parameters() - options.learning_rate * step.gradient);
        }
        const double loss = model.batch_loss_and_gradient(z, pairs.actions, all, options.l2).loss;
        if (!std::isfinite(loss)) diverged("MLP", options.learning_rate);
        model.loss_history_.push_back(loss);
    }
    return model;
}

}  // namespace opecalib
