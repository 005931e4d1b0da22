#include "opecalib/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "opecalib/error.hpp"
#include "opecalib/provenance.hpp"

namespace opecalib {

namespace {

std::string type_name(const toml::node& node) {
    std::ostringstream s;
    s << node.type();
    return s.str();
}

// A TOML table plus the set of keys read from it, so leftovers can be
// reported as unknown.
class Section {
public:
    Section(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

    bool present() const { return table_ != nullptr; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return table_ && table_->contains(key);
    }

    const toml::node* node(const std::string& key) {
        seen_.insert(key);
        return table_ ? table_->get(key) : nullptr;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ValidationError("config: " + where(key) + ": " + what);
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        const auto* n = node(key);
        if (!n) return fallback;
        if (!n->is_integer()) fail(key, "expected an integer, got " + type_name(*n));
        return n->as_integer()->get();
    }

    std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 0) {
        const auto v = integer(key, std::int64_t(fallback));
        if (v < std::int64_t(min)) fail(key, "must be at least " + std::to_string(min));
        return std::size_t(v);
    }

    std::optional<std::size_t> optional_count(const std::string& key, std::size_t min = 0) {
        if (!has(key)) return std::nullopt;
        return count(key, 0, min);
    }

    double real(const std::string& key, double fallback) {
        const auto* n = node(key);
        if (!n) return fallback;
        if (n->is_integer()) return double(n->as_integer()->get());
        if (!n->is_floating_point()) fail(key, "expected a number, got " + type_name(*n));
        return n->as_floating_point()->get();
    }

    bool boolean(const std::string& key, bool fallback) {
        const auto* n = node(key);
        if (!n) return fallback;
        if (!n->is_boolean()) fail(key, "expected a boolean, got " + type_name(*n));
        return n->as_boolean()->get();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        const auto* n = node(key);
        if (!n) return fallback;
        if (!n->is_string()) fail(key, "expected a string, got " + type_name(*n));
        return n->as_string()->get();
    }

    const toml::array* array(const std::string& key) {
        const auto* n = node(key);
        if (!n) return nullptr;
        if (!n->is_array()) fail(key, "expected an array, got " + type_name(*n));
        return n->as_array();
    }

    std::vector<double> reals(const std::string& key, std::vector<double> fallback) {
        const auto* arr = array(key);
        if (!arr) return fallback;
        std::vector<double> out;
        for (const auto& el : *arr) {
            if (el.is_integer())
                out.push_back(double(el.as_integer()->get()));
            else if (el.is_floating_point())
                out.push_back(el.as_floating_point()->get());
            else
                fail(key, "expected an array of numbers");
        }
        return out;
    }

    std::vector<std::int64_t> integers(const std::string& key, std::vector<std::int64_t> fallback) {
        const auto* arr = array(key);
        if (!arr) return fallback;
        std::vector<std::int64_t> out;
        for (const auto& el : *arr) {
            if (!el.is_integer()) fail(key, "expected an array of integers");
            out.push_back(el.as_integer()->get());
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
        const auto* arr = array(key);
        if (!arr) return fallback;
        std::vector<std::string> out;
        for (const auto& el : *arr) {
            if (!el.is_string()) fail(key, "expected an array of strings");
            out.push_back(el.as_string()->get());
        }
        return out;
    }

    nav::Point point(const std::string& key, nav::Point fallback) {
        if (!has(key)) return fallback;
        const auto v = reals(key, {});
        if (v.size() != 2) fail(key, "expected [x, y]");
        return {v[0], v[1]};
    }

    Section sub(const std::string& key) {
        const auto* n = node(key);
        if (!n) return Section(nullptr, where(key));
        if (!n->is_table()) fail(key, "expected a table, got " + type_name(*n));
        return Section(n->as_table(), where(key));
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_) {
            const std::string key(k.str());
            if (!seen_.count(key)) throw ValidationError("config: unknown key '" + where(key) + "'");
        }
    }

    const toml::table* table() const { return table_; }

private:
    const toml::table* table_;
    std::string path_;
    std::set<std::string> seen_;
};

nav::PolicySpec policy_from_table(Section section) {
    nav::PolicySpec spec = parse_policy_name(section.string("kind", "softmax"));
    spec.temperature = section.real("temperature", spec.temperature);
    spec.epsilon = section.real("epsilon", spec.epsilon);
    section.finish();
    return spec;
}

nav::PolicySpec policy_at(Section& section, const std::string& key, nav::PolicySpec fallback) {
    const auto* n = section.node(key);
    if (!n) return fallback;
    if (n->is_string()) return parse_policy_name(n->as_string()->get());
    if (n->is_table()) return policy_from_table(Section(n->as_table(), section.where(key)));
    section.fail(key, "expected a policy name or {kind = ...} table");
}

void check_policy(const nav::PolicySpec& spec, const std::string& where) {
    if (!(spec.temperature > 0.0)) throw ValidationError("config: " + where + ": temperature must be positive");
    if (!(spec.epsilon >= 0.0 && spec.epsilon <= 1.0))
        throw ValidationError("config: " + where + ": epsilon must lie in [0, 1]");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void check_floor(double floor, const std::string& where) {
    if (!(floor > 0.0 && floor <= 0.1)) throw ValidationError("config: " + where + ": prob_floor must lie in (0, 0.1]");
}

nav::NavConfig read_nav(Section s) {
    nav::NavConfig c;
    c.side = s.real("side", c.side);
    c.start = s.point("start", c.start);
    c.goal_centre = s.point("goal_centre", c.goal_centre);
    c.goal_radius = s.real("goal_radius", c.goal_radius);
    c.goal_reward = s.real("goal_reward", c.goal_reward);
    c.penalty_centre = s.point("penalty_centre", c.penalty_centre);
    c.penalty_radius = s.real("penalty_radius", c.penalty_radius);
    c.penalty_reward = s.real("penalty_reward", c.penalty_reward);
    c.noise_sd = s.real("noise_sd", c.noise_sd);
    c.horizon = s.count("horizon", c.horizon, 1);
    c.gamma = s.real("gamma", c.gamma);
    s.finish();
    c.validate();
    return c;
}

GenerateConfig read_generate(Section s) {
    GenerateConfig c;
    c.n = s.count("n", c.n);
    if (c.n == 0) s.fail("n", "must be at least 1");
    c.policy = policy_at(s, "policy", c.policy);
    check_policy(c.policy, s.where("policy"));
    c.output = s.string("output", c.output);
    s.finish();
    return c;
}

SweepConfig read_sweep(Section s, const std::filesystem::path& base) {
    SweepConfig c;
    if (const auto* arr = s.array("behaviours")) {
        std::size_t i = 0;
        for (const auto& el : *arr) {
            const auto where = s.where("behaviours[" + std::to_string(i++) + "]");
            if (el.is_string())
                c.behaviours.push_back(parse_policy_name(el.as_string()->get()));
            else if (el.is_table())
                c.behaviours.push_back(policy_from_table(Section(el.as_table(), where)));
            else
                throw ValidationError("config: " + where + ": expected a policy name or table");
            check_policy(c.behaviours.back(), where);
        }
        if (c.behaviours.empty()) s.fail("behaviours", "must name at least one policy");
    } else {
        nav::PolicySpec eps;
        eps.kind = nav::PolicyKind::EpsilonGoal;
        c.behaviours = {nav::PolicySpec{}, eps};
    }
    c.evaluation = policy_at(s, "evaluation", nav::default_sweep_evaluation());
    check_policy(c.evaluation, s.where("evaluation"));
    if (const auto* arr = s.array("grid")) {
        for (const auto& el : *arr) {
            const auto* pair = el.as_array();
            if (!pair || pair->size() != 2 || !(*pair)[0].is_integer() || !(*pair)[1].is_integer())
                s.fail("grid", "expected an array of [k, train_size] integer pairs");
            const auto k = (*pair)[0].as_integer()->get(), train = (*pair)[1].as_integer()->get();
            if (k < 1 || train < 1) s.fail("grid", "k and train_size must be positive");
            c.grid.push_back({std::size_t(k), std::size_t(train)});
        }
        if (c.grid.empty()) s.fail("grid", "must contain at least one point");
    }
    c.n_eval = s.count("n_eval", c.n_eval, 1);
    c.repeats = s.count("repeats", c.repeats, 1);
    c.alpha = s.real("alpha", c.alpha);
    if (!(c.alpha >= 0.0)) s.fail("alpha", "must be non-negative");
    c.prob_floor = s.real("prob_floor", c.prob_floor);
    check_floor(c.prob_floor, s.where("prob_floor"));
    if (s.has("eval_dataset")) c.eval_dataset = resolve(base, s.string("eval_dataset", ""));
    s.finish();
    return c;
}

CalibrateConfig read_calibrate(Section s, const std::filesystem::path& base) {
    CalibrateConfig c;
    if (s.has("dataset")) c.dataset = resolve(base, s.string("dataset", ""));
    c.behaviour = policy_at(s, "behaviour", c.behaviour);
    check_policy(c.behaviour, s.where("behaviour"));
    c.n_train = s.count("n_train", c.n_train, 1);
    c.n_test = s.count("n_test", c.n_test, 1);
    c.target_k = s.count("target_k", c.target_k, 1);
    c.samples = s.count("samples", c.samples, 1);
    c.strata = s.count("strata", c.strata, 1);
    if (s.has("edges")) {
        c.edges = s.reals("edges", {});
        if (c.edges->size() < 2 || !std::is_sorted(c.edges->begin(), c.edges->end()))
            s.fail("edges", "expected at least two ascending values");
    }
    c.models = s.strings("models", {});
    if (c.models.empty()) s.fail("models", "must name at least one [models.<name>] table");
    s.finish();
    return c;
}

EvaluateConfig read_evaluate(Section s, const std::filesystem::path& base) {
    EvaluateConfig c;
    if (s.has("dataset")) c.dataset = resolve(base, s.string("dataset", ""));
    c.behaviour = policy_at(s, "behaviour", c.behaviour);
    check_policy(c.behaviour, s.where("behaviour"));
    c.n = s.count("n", c.n, 2);
    c.split = parse_split_kind(s.string("split", std::string(split_kind_name(c.split))));
    if (s.has("withheld")) {
        c.withheld.clear();
        for (auto a : s.integers("withheld", {})) {
            if (a < 0) s.fail("withheld", "action ids must be non-negative");
            c.withheld.push_back(ActionId(a));
        }
        if (c.withheld.empty()) s.fail("withheld", "must list at least one action");
    }
    c.model = s.string("model", c.model);
    c.evaluation_policy = s.string("evaluation_policy", c.evaluation_policy);
    if (c.evaluation_policy != "fitted" && c.evaluation_policy != "behaviour")
        s.fail("evaluation_policy", "expected 'fitted' or 'behaviour'");
    c.estimator = parse_estimator(s.string("estimator", std::string(estimator_name(c.estimator))));
    c.q_model = s.string("q_model", c.q_model);
    if (c.q_model != "zero" && c.q_model != "fqi") s.fail("q_model", "expected 'zero' or 'fqi'");
    c.fqi_regressor.k = s.count("fqi_k", c.fqi_regressor.k, 1);
    c.fqi_iterations = s.optional_count("fqi_iterations", 1);
    c.bootstrap_n = s.count("bootstrap_n", c.bootstrap_n, 1);
    c.bootstrap_k = s.count("bootstrap_k", c.bootstrap_k, 1);
    c.repeats = s.count("repeats", c.repeats, 1);
    c.prob_floor = s.real("prob_floor", c.prob_floor);
    check_floor(c.prob_floor, s.where("prob_floor"));
    s.finish();
    return c;
}

ModelConfig read_model(Section s, const std::string& name) {
    ModelConfig m;
    m.name = name;
    m.kind = s.string("kind", "");
    if (m.kind == "knn" || m.kind == "approx_knn") {
        m.knn.index = m.kind == "knn" ? IndexKind::BallTree : IndexKind::RandomProjection;
        m.knn.k = s.count("k", m.knn.k, 1);
        m.knn.alpha = s.real("alpha", m.knn.alpha);
        if (!(m.knn.alpha >= 0.0)) s.fail("alpha", "must be non-negative");
        for (auto d : s.integers("informative", {})) {
            if (d < 0) s.fail("informative", "dimension indices must be non-negative");
            m.knn.informative.push_back(std::size_t(d));
        }
        m.knn.leaf_size = s.count("leaf_size", m.knn.leaf_size, 1);
        if (m.kind == "approx_knn") {
            m.knn.projection.projections = s.count("projections", m.knn.projection.projections, 1);
            m.knn.projection.dims = s.count("dims", m.knn.projection.dims, 1);
            m.knn.projection.multiplier = s.count("multiplier", m.knn.projection.multiplier, 1);
        }
    } else if (m.kind == "softmax_linear") {
        m.linear.learning_rate = s.real("learning_rate", m.linear.learning_rate);
        m.linear.epochs = s.count("epochs", m.linear.epochs, 1);
        m.linear.l2 = s.real("l2", m.linear.l2);
        if (!(m.linear.learning_rate > 0.0)) s.fail("learning_rate", "must be positive");
        if (!(m.linear.l2 >= 0.0)) s.fail("l2", "must be non-negative");
    } else if (m.kind == "mlp") {
        m.mlp.hidden = s.count("hidden", m.mlp.hidden, 1);
        m.mlp.learning_rate = s.real("learning_rate", m.mlp.learning_rate);
        m.mlp.epochs = s.count("epochs", m.mlp.epochs, 1);
        m.mlp.batch_size = s.count("batch_size", m.mlp.batch_size, 1);
        m.mlp.l2 = s.real("l2", m.mlp.l2);
        if (!(m.mlp.learning_rate > 0.0)) s.fail("learning_rate", "must be positive");
        if (!(m.mlp.l2 >= 0.0)) s.fail("l2", "must be non-negative");
    } else if (m.kind != "target" && m.kind != "true") {
        s.fail("kind", "expected knn, approx_knn, softmax_linear, mlp, target or true");
    }
    s.finish();
    return m;
}

}  // namespace

nav::PolicySpec parse_policy_name(const std::string& name) {
    nav::PolicySpec spec;
    if (name == "softmax")
        spec.kind = nav::PolicyKind::SoftmaxToGoal;
    else if (name == "epsilon")
        spec.kind = nav::PolicyKind::EpsilonGoal;
    else
        throw ValidationError("config: unknown policy '" + name + "' (expected softmax or epsilon)");
    return spec;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config: " << e.description() << " at line " << e.source().begin.line;
        throw ValidationError(msg.str());
    }
    ExperimentConfig c;
    c.hash = content_hash(text);
    Section top(&root, "");
    const auto seed = top.integer("seed", 0);
    if (seed < 0) top.fail("seed", "must be non-negative");
    c.seed = std::uint64_t(seed);
    c.out_dir = top.string("out_dir", c.out_dir.string());
    c.jobs = top.count("jobs", c.jobs, 1);
    c.nav = read_nav(top.sub("nav"));
    c.generate = read_generate(top.sub("generate"));
    c.sweep = read_sweep(top.sub("sweep"), base_dir);
    c.calibrate.models = {"knn"};
    if (top.has("calibrate")) c.calibrate = read_calibrate(top.sub("calibrate"), base_dir);

    auto models = top.sub("models");
    if (models.present()) {
        for (const auto& [k, v] : *models.table()) {
            const std::string name(k.str());
            auto section = models.sub(name);
            if (!section.present()) models.fail(name, "expected a table");
            c.models[name] = read_model(section, name);
        }
    }
    models.finish();
    if (!c.models.count("knn")) c.models["knn"] = ModelConfig{"knn", "knn", {}, {}, {}};

    c.evaluate = read_evaluate(top.sub("evaluate"), base_dir);
    top.finish();

    for (const auto& name : c.calibrate.models)
        if (!c.models.count(name)) throw ValidationError("config: calibrate.models names unknown model '" + name + "'");
    const auto it = c.models.find(c.evaluate.model);
    if (it == c.models.end())
        throw ValidationError("config: evaluate.model names unknown model '" + c.evaluate.model + "'");
    if (it->second.kind == "target" || it->second.kind == "true")
        throw ValidationError("config: evaluate.model must be a fitted model kind");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

}  // namespace opecalib
