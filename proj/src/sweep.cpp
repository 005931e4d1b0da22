#include "opecalib/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "opecalib/ball_tree.hpp"
#include "opecalib/calibration.hpp"
#include "opecalib/error.hpp"
#include "opecalib/knn_policy.hpp"
#include "opecalib/parallel.hpp"

namespace opecalib::nav {

using detail::require;

namespace {

struct Cell {
    double avg_abs_err = 0.0;
    double frac_err = 0.0;
    bool valid = false;
};

constexpr double kReferenceEpsilon = 1e-9;

Cell compare(const TrajectoryDataset& eval, const TakenProbabilities& truth, std::vector<std::vector<double>> fitted,
             double v_true, const SweepOptions& options) {
    Cell cell;
    double abs_total = 0.0;
    for (std::size_t i = 0; i < eval.size(); ++i)
        for (std::size_t t = 0; t < eval[i].length(); ++t) abs_total += std::abs(truth.behaviour[i][t] - fitted[i][t]);
    cell.avg_abs_err = abs_total / double(eval.step_count());
    const TakenProbabilities probs{truth.evaluation, std::move(fitted)};
    const double v_fit = estimate_step_wis(eval, weights_from_probabilities(probs, options.prob_floor), options.nav.gamma).value;
    if (std::abs(v_true) > kReferenceEpsilon) {
        cell.frac_err = (v_fit - v_true) / v_true;
        cell.valid = true;
    }
    return cell;
}

}  // namespace

TrajectoryDataset truncate_to_steps(const TrajectoryDataset& dataset, std::size_t steps) {
    require(steps >= 1 && steps <= dataset.step_count(), "cannot take " + std::to_string(steps) + " steps from " +
                                                             std::to_string(dataset.step_count()));
    std::vector<Trajectory> kept;
    std::size_t remaining = steps;
    for (const auto& traj : dataset) {
        if (remaining == 0) break;
        Trajectory t = traj;
        if (t.length() > remaining) {
            t.steps.resize(remaining);
            if (t.severity) t.severity->resize(remaining);
            t.terminal.reset();
        }
        remaining -= t.length();
        kept.push_back(std::move(t));
    }
    return TrajectoryDataset(std::move(kept), dataset.action_count());
}

std::vector<SweepRow> figure1_sweep(const SweepOptions& options) {
    options.nav.validate();
    require(!options.grid.empty(), "sweep: grid is empty");
    require(options.repeats >= 1, "sweep: need at least one repeat");
    require(options.n_eval >= 1 || options.eval_dataset, "sweep: need at least one evaluation trajectory");
    require(options.alpha >= 0.0, "sweep: smoothing must be non-negative");
    std::size_t max_train = 0;
    for (const auto& p : options.grid) {
        require(p.k >= 1 && p.train_size >= 1, "sweep: k and train_size must be positive");
        require(p.k <= p.train_size, "sweep: k=" + std::to_string(p.k) + " exceeds train_size=" +
                                         std::to_string(p.train_size));
        max_train = std::max(max_train, p.train_size);
    }
    if (options.eval_dataset)
        require(options.eval_dataset->state_dim() == 2 && options.eval_dataset->action_count() == kActionCount,
                "sweep: evaluation dataset is not a navigation dataset");

    const NavPolicy pi_b(options.behaviour, options.nav);
    const NavPolicy pi_e(options.evaluation, options.nav);
    const std::size_t train_trajectories = (max_train + options.nav.horizon - 1) / options.nav.horizon;

    std::map<std::size_t, std::vector<std::size_t>> by_train_size;
    for (std::size_t g = 0; g < options.grid.size(); ++g) by_train_size[options.grid[g].train_size].push_back(g);

    std::vector<std::vector<Cell>> cells(options.repeats, std::vector<Cell>(options.grid.size()));
    parallel_for(options.repeats, options.jobs, [&](std::size_t r) {
        const auto pool = generate_dataset(options.nav, pi_b, train_trajectories, derive_seed(options.seed, 2 * r));
        const auto eval = options.eval_dataset
                              ? *options.eval_dataset
                              : generate_dataset(options.nav, pi_b, options.n_eval, derive_seed(options.seed, 2 * r + 1));
        const auto truth = taken_probabilities(eval, pi_e, pi_b);
        const double v_true =
            estimate_step_wis(eval, weights_from_probabilities(truth, options.prob_floor), options.nav.gamma).value;

        if (options.fitter) {
            for (std::size_t g = 0; g < options.grid.size(); ++g) {
                const auto train = truncate_to_steps(pool, options.grid[g].train_size);
                const auto model = options.fitter(train, options.grid[g].k);
                const auto fitted = taken_probabilities(eval, pi_e, *model).behaviour;
                cells[r][g] = compare(eval, truth, fitted, v_true, options);
            }
            return;
        }

        // kNN results for every k are prefixes of one k_max query, since
        // neighbours come back sorted by (distance, index).
        const auto all_pairs = training_pairs(pool);
        for (const auto& [train_size, members] : by_train_size) {
            const std::vector<StateVector> states(all_pairs.states.begin(),
                                                  all_pairs.states.begin() + std::ptrdiff_t(train_size));
            const std::span<const ActionId> actions(all_pairs.actions.data(), train_size);
            const BallTree tree(states, WeightedKernel::euclidean(2));
            std::size_t k_max = 0;
            for (auto g : members) k_max = std::max(k_max, options.grid[g].k);

            std::vector<std::vector<std::vector<Neighbour>>> neighbours(eval.size());
            for (std::size_t i = 0; i < eval.size(); ++i)
                for (const auto& step : eval[i].steps) neighbours[i].push_back(tree.query(step.state, k_max));

            for (auto g : members) {
                const auto k = options.grid[g].k;
                std::vector<std::vector<double>> fitted(eval.size());
                for (std::size_t i = 0; i < eval.size(); ++i)
                    for (std::size_t t = 0; t < eval[i].length(); ++t) {
                        const auto dist = neighbour_histogram(std::span(neighbours[i][t]).first(k), actions,
                                                              kActionCount, options.alpha);
                        fitted[i].push_back(dist[std::size_t(eval[i].steps[t].action)]);
                    }
                cells[r][g] = compare(eval, truth, std::move(fitted), v_true, options);
            }
        }
    });

    std::vector<SweepRow> rows;
    for (std::size_t g = 0; g < options.grid.size(); ++g) {
        SweepRow row;
        row.k = options.grid[g].k;
        row.train_size = options.grid[g].train_size;
        double abs_total = 0.0, frac_total = 0.0;
        for (std::size_t r = 0; r < options.repeats; ++r) {
            abs_total += cells[r][g].avg_abs_err;
            if (cells[r][g].valid) {
                frac_total += cells[r][g].frac_err;
                ++row.repeats;
            } else {
                ++row.flagged;
            }
        }
        row.avg_abs_err = abs_total / double(options.repeats);
        if (row.repeats == 0) {
            row.frac_err_mean = row.frac_err_std = std::numeric_limits<double>::quiet_NaN();
        } else {
            row.frac_err_mean = frac_total / double(row.repeats);
            double ss = 0.0;
            for (std::size_t r = 0; r < options.repeats; ++r)
                if (cells[r][g].valid) ss += (cells[r][g].frac_err - row.frac_err_mean) * (cells[r][g].frac_err - row.frac_err_mean);
            row.frac_err_std = row.repeats > 1 ? std::sqrt(ss / double(row.repeats - 1)) : 0.0;
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepPoint> default_sweep_grid() {
    std::vector<SweepPoint> grid;
    for (std::size_t train : {150, 600, 3000})
        for (std::size_t k : {5, 25, 100})
            if (k <= train) grid.push_back({k, train});
    for (std::size_t train : {150, 600, 3000}) grid.push_back({train, train});
    return grid;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::optional<Provenance>& provenance) {
    std::ostringstream out;
    out << provenance_comment(provenance);
    out << "k,train_size,avg_abs_err,frac_err_mean,frac_err_std,repeats\n";
    for (const auto& r : rows)
        out << r.k << ',' << r.train_size << ',' << format_double(r.avg_abs_err) << ','
            << format_double(r.frac_err_mean) << ',' << format_double(r.frac_err_std) << ',' << r.repeats << '\n';
    return out.str();
}

}  // namespace opecalib::nav
