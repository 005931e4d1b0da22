#include "opecalib/commands.hpp"

#include <fstream>
#include <iostream>

#include "opecalib/calibration.hpp"
#include "opecalib/dataset_io.hpp"
#include "opecalib/error.hpp"
#include "opecalib/model_io.hpp"

namespace opecalib {

namespace {

using ordered_json = nlohmann::ordered_json;

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

ordered_json stamped(const RunContext& ctx) {
    return {{"config_hash", ctx.config.hash}, {"seed", ctx.seed}};
}

void write_json(const std::filesystem::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

TrajectoryDataset load_input(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ValidationError("dataset not found: " + path.string());
    return load_dataset(path);
}

ordered_json policy_json(const nav::PolicySpec& spec) {
    ordered_json j{{"kind", spec.kind == nav::PolicyKind::SoftmaxToGoal ? "softmax" : "epsilon"}};
    if (spec.kind == nav::PolicyKind::SoftmaxToGoal)
        j["temperature"] = spec.temperature;
    else
        j["epsilon"] = spec.epsilon;
    return j;
}

}  // namespace

RunContext make_context(const RunOptions& options) {
    RunContext ctx;
    ctx.config = load_config(options.config_path);
    ctx.seed = options.seed.value_or(ctx.config.seed);
    ctx.jobs = options.jobs.value_or(ctx.config.jobs);
    if (ctx.jobs == 0) throw ValidationError("--jobs must be at least 1");
    ctx.out_dir = options.out_dir.value_or(ctx.config.out_dir);
    return ctx;
}

std::unique_ptr<PolicyModel> fit_model(const ModelConfig& model, const TrajectoryDataset& train, std::uint64_t seed) {
    if (model.kind == "knn" || model.kind == "approx_knn") {
        auto options = model.knn;
        options.projection.seed = seed;
        return std::make_unique<KnnPolicyModel>(fit_knn_policy(train, options));
    }
    if (model.kind == "softmax_linear") {
        auto options = model.linear;
        options.seed = seed;
        return std::make_unique<SoftmaxLinearModel>(fit_softmax_linear(train, options));
    }
    if (model.kind == "mlp") {
        auto options = model.mlp;
        options.seed = seed;
        return std::make_unique<MlpPolicyModel>(fit_mlp(train, options));
    }
    throw ValidationError("model '" + model.name + "' of kind " + model.kind + " cannot be fitted");
}

std::vector<std::string> cmd_generate(const RunContext& ctx) {
    const auto& g = ctx.config.generate;
    const nav::NavPolicy policy(g.policy, ctx.config.nav);
    const auto dataset = nav::generate_dataset(ctx.config.nav, policy, g.n, ctx.seed, ctx.jobs);
    std::filesystem::create_directories(ctx.out_dir);
    save_dataset(dataset, ctx.out_dir / g.output, ctx.provenance());
    return {g.output};
}

std::vector<std::string> cmd_sweep(const RunContext& ctx) {
    const auto& s = ctx.config.sweep;
    std::optional<TrajectoryDataset> eval;
    if (s.eval_dataset) eval = load_input(*s.eval_dataset);
    std::filesystem::create_directories(ctx.out_dir);
    std::vector<std::string> written;
    auto summary = stamped(ctx);
    summary["evaluation"] = policy_json(s.evaluation);
    summary["outputs"] = ordered_json::array();
    for (std::size_t b = 0; b < s.behaviours.size(); ++b) {
        nav::SweepOptions options;
        options.nav = ctx.config.nav;
        options.behaviour = s.behaviours[b];
        options.evaluation = s.evaluation;
        options.grid = s.grid.empty() ? nav::default_sweep_grid() : s.grid;
        options.n_eval = s.n_eval;
        options.repeats = s.repeats;
        options.alpha = s.alpha;
        options.prob_floor = s.prob_floor;
        options.seed = derive_seed(ctx.seed, b);
        options.jobs = ctx.jobs;
        options.eval_dataset = eval;
        const auto rows = nav::figure1_sweep(options);
        const auto name = "sweep_" + s.behaviours[b].name() + ".csv";
        write_text(ctx.out_dir / name, nav::sweep_csv(rows, ctx.provenance()));
        written.push_back(name);
        summary["outputs"].push_back({{"behaviour", policy_json(s.behaviours[b])}, {"file", name}});
    }
    write_json(ctx.out_dir / "sweep.json", summary);
    written.push_back("sweep.json");
    return written;
}

std::vector<std::string> cmd_calibrate(const RunContext& ctx) {
    const auto& c = ctx.config.calibrate;
    std::optional<TrajectoryDataset> train, test;
    if (c.dataset) {
        auto split = random_split(load_input(*c.dataset), derive_seed(ctx.seed, 0));
        train = std::move(split.d1);
        test = std::move(split.d2);
    } else {
        const nav::NavPolicy policy(c.behaviour, ctx.config.nav);
        train = nav::generate_dataset(ctx.config.nav, policy, c.n_train, derive_seed(ctx.seed, 0), ctx.jobs);
        test = nav::generate_dataset(ctx.config.nav, policy, c.n_test, derive_seed(ctx.seed, 1), ctx.jobs);
    }
    const auto target = std::make_shared<const TargetDistribution>(
        *test, WeightedKernel::euclidean(test->state_dim()), c.target_k);
    CalibrationOptions options;
    options.edges = c.edges;
    options.quantile_bins = c.strata;
    options.sample_count = c.samples;
    options.seed = derive_seed(ctx.seed, 2);

    std::filesystem::create_directories(ctx.out_dir);
    std::vector<std::string> written;
    std::string combined = provenance_comment(ctx.provenance()) + "model,stratum_lo,stratum_hi,n,mean_tv\n";
    auto summary = stamped(ctx);
    summary["reports"] = ordered_json::array();
    for (std::size_t i = 0; i < c.models.size(); ++i) {
        const auto& recipe = ctx.config.models.at(c.models[i]);
        std::unique_ptr<PolicyModel> model;
        if (recipe.kind == "target") {
            model = std::make_unique<TargetPolicyModel>(target);
        } else if (recipe.kind == "true") {
            if (c.dataset) throw ValidationError("model '" + recipe.name + "': the true policy is only known for generated data");
            model = nav::true_nav_policy(c.behaviour, ctx.config.nav);
        } else {
            model = fit_model(recipe, *train, derive_seed(ctx.seed, 100 + i));
            const auto model_file = "model_" + recipe.name + ".json";
            save_model(*model, ctx.out_dir / model_file, ctx.provenance());
            written.push_back(model_file);
        }
        const auto report = calibration_report(*model, recipe.name, *test, *target, options);
        const auto file = "calibration_" + recipe.name + ".csv";
        write_text(ctx.out_dir / file, calibration_csv(report, ctx.provenance()));
        written.push_back(file);
        for (const auto& s : report.strata)
            combined += recipe.name + ',' + format_double(s.lo) + ',' + format_double(s.hi) + ',' +
                        std::to_string(s.n) + ',' + format_double(s.mean_tv) + '\n';
        summary["reports"].push_back(to_json(report));
    }
    write_text(ctx.out_dir / "calibration.csv", combined);
    write_json(ctx.out_dir / "calibration.json", summary);
    written.push_back("calibration.csv");
    written.push_back("calibration.json");
    return written;
}

std::vector<std::string> cmd_evaluate(const RunContext& ctx) {
    const auto& e = ctx.config.evaluate;
    const double gamma = ctx.config.nav.gamma;
    const auto& recipe = ctx.config.models.at(e.model);
    TrajectoryDataset data = [&] {
        if (e.dataset) return load_input(*e.dataset);
        const nav::NavPolicy policy(e.behaviour, ctx.config.nav);
        return nav::generate_dataset(ctx.config.nav, policy, e.n, derive_seed(ctx.seed, 0), ctx.jobs);
    }();

    std::filesystem::create_directories(ctx.out_dir);
    std::vector<std::string> written;
    auto summary = stamped(ctx);
    summary["estimator"] = estimator_name(e.estimator);
    summary["split"] = split_kind_name(e.split);
    summary["evaluation_policy"] = e.evaluation_policy;
    summary["q_model"] = e.q_model;
    summary["repeats"] = ordered_json::array();
    double mse_total = 0.0;

    for (std::size_t j = 0; j < e.repeats; ++j) {
        const auto stream = derive_seed(ctx.seed, 10 + j);
        const auto split = e.split == SplitKind::Random ? random_split(data, derive_seed(stream, 0))
                                                        : intervention_split(data, e.withheld, derive_seed(stream, 0));
        std::shared_ptr<const PolicyModel> pi_b = fit_model(recipe, split.d2, derive_seed(stream, 2));
        std::shared_ptr<const PolicyModel> pi_e;
        double truth = 0.0;
        if (e.evaluation_policy == "behaviour") {
            pi_e = pi_b;
            truth = monte_carlo_value(split.d2, gamma);
        } else {
            pi_e = fit_model(recipe, split.d1, derive_seed(stream, 1));
            truth = monte_carlo_value(split.d1, gamma);
        }

        std::shared_ptr<const QModel> q;
        if (uses_control_variates(e.estimator)) {
            if (e.q_model == "fqi") {
                FqiOptions fqi;
                fqi.gamma = gamma;
                fqi.iterations = e.fqi_iterations;
                fqi.regressor = e.fqi_regressor;
                q = fitted_q_iteration(split.d2, *pi_e, fqi);
            } else {
                q = std::make_shared<ZeroQModel>(data.action_count());
            }
        }

        const std::string context = "evaluate: repeat " + std::to_string(j) + ", " +
                                    std::string(estimator_name(e.estimator)) + ": ";
        EstimateReport estimate;
        BootstrapResult boot;
        try {
            const auto weights = cumulative_weights(split.d2, *pi_e, *pi_b, e.prob_floor);
            std::optional<ControlVariates> cv;
            if (q) cv = control_variates(split.d2, *pi_e, *q);
            estimate = run_estimator(e.estimator, split.d2, weights, cv ? &*cv : nullptr, gamma);

            BootstrapOptions options;
            options.n = e.bootstrap_n;
            options.k = e.bootstrap_k;
            options.gamma = gamma;
            options.seed = derive_seed(stream, 3);
            options.prob_floor = e.prob_floor;
            options.jobs = ctx.jobs;
            boot = bootstrap_mse(split.d2, *pi_e, *pi_b, e.estimator, truth, options, q.get());
        } catch (const EstimatorError& err) {
            throw EstimatorError(context + err.what());
        }
        const double tv = policy_tv_distance(*pi_e, *pi_b, logged_states(split.d2));

        auto est = stamped(ctx);
        est["repeat"] = j;
        est["split"] = split_kind_name(e.split);
        est["d1_size"] = split.d1.size();
        est["d2_size"] = split.d2.size();
        est["truth"] = truth;
        est["policy_tv_distance"] = tv;
        est["estimate"] = to_json(estimate);
        const auto est_file = "estimate_" + std::to_string(j) + ".json";
        write_json(ctx.out_dir / est_file, est);
        const auto boot_file = "bootstrap_" + std::to_string(j) + ".csv";
        write_text(ctx.out_dir / boot_file, bootstrap_csv(boot, ctx.provenance()));
        written.push_back(est_file);
        written.push_back(boot_file);

        auto row = bootstrap_summary(boot);
        row["repeat"] = j;
        row["estimate"] = estimate.value;
        row["policy_tv_distance"] = tv;
        summary["repeats"].push_back(row);
        mse_total += boot.mse;
    }
    summary["mean_mse"] = mse_total / double(e.repeats);
    write_json(ctx.out_dir / "summary.json", summary);
    written.push_back("summary.json");
    return written;
}

int run_command(const std::string& command, const RunOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const auto ctx = make_context(options);
        std::vector<std::string> written;
        if (command == "generate")
            written = cmd_generate(ctx);
        else if (command == "sweep")
            written = cmd_sweep(ctx);
        else if (command == "calibrate")
            written = cmd_calibrate(ctx);
        else if (command == "evaluate")
            written = cmd_evaluate(ctx);
        else
            throw ValidationError("unknown command '" + command + "'");
        for (const auto& f : written) out << (ctx.out_dir / f).string() << '\n';
        return 0;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const EstimatorError& e) {
        err << "estimator failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace opecalib
