#include "opecalib/model_io.hpp"

#include <fstream>

#include "opecalib/error.hpp"
#include "opecalib/knn_policy.hpp"
#include "opecalib/parametric_models.hpp"

namespace opecalib {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

ordered_json standardizer_json(const Standardizer& s) {
    return {{"mean", to_std(s.mean)}, {"scale", to_std(s.scale)}};
}

Standardizer standardizer_from(const json& j) {
    return Standardizer{to_eigen(j.at("mean").get<std::vector<double>>()),
                        to_eigen(j.at("scale").get<std::vector<double>>())};
}

}  // namespace

class ModelSerializer {
public:
    static ordered_json to_json(const SoftmaxLinearModel& m) {
        const auto& o = m.options();
        return {{"kind", m.kind()},
                {"action_count", m.action_count()},
                {"dim", m.dim()},
                {"hyperparameters",
                 {{"learning_rate", o.learning_rate}, {"epochs", o.epochs}, {"l2", o.l2}, {"seed", o.seed}}},
                {"standardizer", standardizer_json(m.standardizer())},
                {"parameters", to_std(m.parameters())}};
    }

    static ordered_json to_json(const MlpPolicyModel& m) {
        const auto& o = m.options();
        return {{"kind", m.kind()},
                {"action_count", m.action_count()},
                {"dim", m.dim()},
                {"hyperparameters",
                 {{"hidden", o.hidden},
                  {"learning_rate", o.learning_rate},
                  {"epochs", o.epochs},
                  {"batch_size", o.batch_size},
                  {"l2", o.l2},
                  {"seed", o.seed}}},
                {"standardizer", standardizer_json(m.standardizer())},
                {"parameters", to_std(m.parameters())}};
    }

    static std::unique_ptr<PolicyModel> softmax_from(const json& j) {
        auto model = std::make_unique<SoftmaxLinearModel>(j.at("action_count").get<std::size_t>(),
                                                          standardizer_from(j.at("standardizer")));
        const auto& h = j.at("hyperparameters");
        model->options_ = {h.at("learning_rate").get<double>(), h.at("epochs").get<std::size_t>(),
                           h.at("l2").get<double>(), h.at("seed").get<std::uint64_t>()};
        model->set_parameters(to_eigen(j.at("parameters").get<std::vector<double>>()));
        return model;
    }

    static std::unique_ptr<PolicyModel> mlp_from(const json& j) {
        const auto& h = j.at("hyperparameters");
        auto model = std::make_unique<MlpPolicyModel>(j.at("action_count").get<std::size_t>(),
                                                      h.at("hidden").get<std::size_t>(),
                                                      standardizer_from(j.at("standardizer")));
        model->options_ = {h.at("hidden").get<std::size_t>(), h.at("learning_rate").get<double>(),
                           h.at("epochs").get<std::size_t>(),  h.at("batch_size").get<std::size_t>(),
                           h.at("l2").get<double>(),           h.at("seed").get<std::uint64_t>()};
        model->set_parameters(to_eigen(j.at("parameters").get<std::vector<double>>()));
        return model;
    }
};

ordered_json model_to_json(const PolicyModel& model) {
    if (const auto* knn = dynamic_cast<const KnnPolicyModel*>(&model)) {
        const auto& o = knn->options();
        return {{"kind", knn->kind()},
                {"action_count", knn->action_count()},
                {"hyperparameters",
                 {{"k", o.k},
                  {"alpha", o.alpha},
                  {"index", index_kind_name(o.index)},
                  {"informative", o.informative},
                  {"leaf_size", o.leaf_size},
                  {"projections", o.projection.projections},
                  {"dims", o.projection.dims},
                  {"multiplier", o.projection.multiplier},
                  {"seed", o.projection.seed}}},
                {"training", {{"states", knn->pairs().states}, {"actions", knn->pairs().actions}}}};
    }
    if (const auto* lr = dynamic_cast<const SoftmaxLinearModel*>(&model)) return ModelSerializer::to_json(*lr);
    if (const auto* mlp = dynamic_cast<const MlpPolicyModel*>(&model)) return ModelSerializer::to_json(*mlp);
    throw ValidationError("model kind '" + model.kind() + "' cannot be serialised");
}

std::unique_ptr<PolicyModel> model_from_json(const json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "knn" || kind == "approx_knn") {
            const auto& h = j.at("hyperparameters");
            KnnOptions o;
            o.k = h.at("k").get<std::size_t>();
            o.alpha = h.at("alpha").get<double>();
            o.index = parse_index_kind(h.at("index").get<std::string>());
            o.informative = h.at("informative").get<std::vector<std::size_t>>();
            o.leaf_size = h.at("leaf_size").get<std::size_t>();
            o.projection = {h.at("projections").get<std::size_t>(), h.at("dims").get<std::size_t>(),
                            h.at("multiplier").get<std::size_t>(), h.at("seed").get<std::uint64_t>()};
            TrainingPairs pairs{j.at("training").at("states").get<std::vector<StateVector>>(),
                                j.at("training").at("actions").get<std::vector<ActionId>>()};
            return std::make_unique<KnnPolicyModel>(std::move(pairs), j.at("action_count").get<std::size_t>(), o);
        }
        if (kind == "softmax_linear") return ModelSerializer::softmax_from(j);
        if (kind == "mlp") return ModelSerializer::mlp_from(j);
        throw ValidationError("unknown model kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const PolicyModel& model, const std::filesystem::path& path,
                const std::optional<Provenance>& provenance) {
    auto j = model_to_json(model);
    if (provenance) {
        j["config_hash"] = provenance->config_hash;
        j["seed"] = provenance->seed;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write model '" + path.string() + "'");
    out << j.dump() << '\n';
}

std::unique_ptr<PolicyModel> load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
    return model_from_json(j);
}

}  // namespace opecalib
