#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmfs/data.hpp"
#include "mmfs/error.hpp"
#include "mmfs/eval.hpp"
#include "mmfs/io.hpp"
#include "mmfs/parallel.hpp"
#include "mmfs/select.hpp"

namespace mmfs::cli {

/// lambda candidates for the parameter grid.
inline std::vector<double> default_lambda_grid() { return {0.001, 0.01, 0.1, 1, 10, 100, 1000}; }

/// Step horizons 5..20 for the parameter grid.
inline std::vector<int> default_n_grid() {
    std::vector<int> g;
    for (int n = 5; n <= 20; ++n) g.push_back(n);
    return g;
}

inline constexpr int kDefaultNeighbors = 5;
inline constexpr int kDefaultRepeats = 20;

struct RunConfig {
    std::string input;
    Orientation orientation = Orientation::RowsAreInstances;
    std::optional<std::string> label_column;
    StandardizeMode standardize = StandardizeMode::None;
    Variant variant = Variant::MaxP;
    MmfsParams params = [] {
        MmfsParams p;
        p.k = kDefaultNeighbors;
        return p;
    }();
    std::optional<std::size_t> s;
    std::vector<std::size_t> counts; // empty: default grid for d
    std::vector<double> lambda_grid = default_lambda_grid();
    std::vector<int> n_grid = default_n_grid();
    int repeats = kDefaultRepeats;
    std::uint64_t seed = 0;
    std::string out = ".";
    int jobs = 1;
    NmiNorm nmi_norm = NmiNorm::Arithmetic;
    bool dump_matrices = false;
    bool trace = false;
    bool identity_w = false; // project: bypass the solver with W = I

    /// Checks everything that does not depend on the data.
    void validate() const {
        using mmfs::detail::require;
        require(!input.empty(), "--input is required");
        require(params.k >= 1, "--k must be >= 1 (got " + std::to_string(params.k) + ")");
        require(params.alpha > 0.0, "--alpha must be > 0");
        require(params.n >= 1, "--n must be >= 1");
        params.solver.validate();
        require(!s || *s >= 1, "--s must be >= 1");
        for (auto c : counts) require(c >= 1, "--counts entries must be >= 1");
        require(repeats >= 1, "--repeats must be >= 1");
        require(jobs >= 1, "--jobs must be >= 1");
        require(!lambda_grid.empty() && !n_grid.empty(), "grid axes must be non-empty");
        for (double l : lambda_grid) require(l >= 0.0, "lambda grid entries must be >= 0");
        for (int n : n_grid) require(n >= 1, "n grid entries must be >= 1");
    }
};

inline LabeledDataset load_input(const RunConfig& cfg) {
    auto ds = load_csv(cfg.input, cfg.label_column, cfg.orientation);
    ds.data = standardize(ds.data, cfg.standardize);
    return ds;
}

namespace detail {

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out);
    return (std::filesystem::path(cfg.out) / name).string();
}

inline void write_dumps(const RunConfig& cfg, const DataMatrix& X) {
    const auto P = transition_model(X, cfg.params);
    const auto both = reachability_at_horizons(P, {cfg.params.n}).front();
    auto f = io::open_output(out_path(cfg, "P.csv"));
    io::write_matrix_triplets(f, P.values);
    auto f1 = io::open_output(out_path(cfg, "V_min.csv"));
    io::write_matrix_triplets(f1, both.v_min.values);
    auto f2 = io::open_output(out_path(cfg, "V_max.csv"));
    io::write_matrix_triplets(f2, both.v_max.values);
}

inline void write_selection(const RunConfig& cfg, const SelectionResult& r, const std::vector<std::string>& names) {
    const std::string stem = std::string("selection_") + to_string(r.variant);
    auto js = io::open_output(out_path(cfg, stem + ".json"));
    js << io::selection_json(r, names).dump(2) << "\n";
    auto csv = io::open_output(out_path(cfg, stem + ".csv"));
    io::write_selection_csv(csv, r, names);
}

inline void write_trace(const RunConfig& cfg, const SolverState& st, Variant v) {
    auto f = io::open_output(out_path(cfg, std::string("trace_") + to_string(v) + ".csv"));
    io::write_trace_csv(f, st);
}

} // namespace detail

/// Runs the configured variant and writes selection_<variant>.{json,csv}
/// (plus solver traces and matrix dumps on request). Returns the selection.
inline SelectionResult cmd_select(const RunConfig& cfg) {
    cfg.validate();
    mmfs::detail::require(cfg.s.has_value(), "select requires --s (number of features to keep)");
    const auto ds = load_input(cfg);
    const auto& X = ds.data;
    const std::size_t s = *cfg.s;
    mmfs::detail::require(s <= static_cast<std::size_t>(X.features()),
                          "--s must be <= d (d=" + std::to_string(X.features()) + ")");
    cfg.params.validate(X.instances());

    if (cfg.dump_matrices) detail::write_dumps(cfg, X);

    std::optional<SelectionResult> rmin, rmax;
    if (cfg.variant != Variant::MaxP) {
        const auto fit = fit_mmfs(X, cfg.params, ReachVariant::Min);
        if (cfg.trace) detail::write_trace(cfg, fit.solver, Variant::MinP);
        rmin = selection_from_weights(fit.solver.W, Variant::MinP, s);
    }
    if (cfg.variant != Variant::MinP) {
        const auto fit = fit_mmfs(X, cfg.params, ReachVariant::Max);
        if (cfg.trace) detail::write_trace(cfg, fit.solver, Variant::MaxP);
        rmax = selection_from_weights(fit.solver.W, Variant::MaxP, s);
    }
    SelectionResult result = cfg.variant == Variant::MinP   ? *rmin
                             : cfg.variant == Variant::MaxP ? *rmax
                                                            : select_inter(*rmin, *rmax, s);
    detail::write_selection(cfg, result, X.feature_names());
    return result;
}

/// ACC/NMI per feature count; writes sweep_<variant>.csv.
inline EvalReport cmd_sweep(const RunConfig& cfg) {
    cfg.validate();
    const auto ds = load_input(cfg);
    if (!ds.labels) throw PreconditionError("sweep requires labels: pass --label-col naming the class column");
    const auto d = static_cast<std::size_t>(ds.data.features());
    auto counts = cfg.counts.empty() ? default_feature_counts(d) : cfg.counts;
    if (counts.empty())
        throw PreconditionError("no default feature count fits d=" + std::to_string(d) + "; pass --counts");
    const auto rep = benchmark_sweep(ds, cfg.variant, counts, cfg.params,
                                     SweepOptions{cfg.repeats, cfg.seed, cfg.jobs, cfg.nmi_norm});
    auto f = io::open_output(detail::out_path(cfg, std::string("sweep_") + to_string(cfg.variant) + ".csv"));
    io::write_report_csv(f, rep);
    return rep;
}

/// ACC/NMI means at fixed s over the (lambda, n) grid, lambda-major order;
/// writes grid_<variant>.csv.
inline std::vector<io::GridCell> cmd_grid(const RunConfig& cfg) {
    cfg.validate();
    mmfs::detail::require(cfg.s.has_value(), "grid requires --s (number of features evaluated per cell)");
    const auto ds = load_input(cfg);
    if (!ds.labels) throw PreconditionError("grid requires labels: pass --label-col naming the class column");
    const auto& X = ds.data;
    const std::size_t s = *cfg.s;
    mmfs::detail::require(s <= static_cast<std::size_t>(X.features()),
                          "--s must be <= d (d=" + std::to_string(X.features()) + ")");
    cfg.params.validate(X.instances());

    const auto P = transition_model(X, cfg.params);
    const auto horizons = reachability_at_horizons(P, cfg.n_grid);
    std::map<int, std::size_t> at_horizon;
    for (std::size_t i = 0; i < horizons.size(); ++i) at_horizon[horizons[i].horizon] = i;
    std::vector<Template> f_min(horizons.size()), f_max(horizons.size());
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (cfg.variant != Variant::MaxP) f_min[i] = build_template(horizons[i].v_min, X);
        if (cfg.variant != Variant::MinP) f_max[i] = build_template(horizons[i].v_max, X);
    }

    std::vector<io::GridCell> cells;
    for (double l : cfg.lambda_grid)
        for (int n : cfg.n_grid) cells.push_back({l, n, 0.0, 0.0});

    const int c = static_cast<int>(ds.labels->class_count());
    parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) {
        auto& cell = cells[i];
        SolverConfig sc = cfg.params.solver;
        sc.lambda = cell.lambda;
        const std::size_t h = at_horizon.at(cell.n);
        std::optional<SelectionResult> rmin, rmax;
        if (cfg.variant != Variant::MaxP)
            rmin = selection_from_weights(solve_irls(X, f_min[h], sc).W, Variant::MinP, s);
        if (cfg.variant != Variant::MinP)
            rmax = selection_from_weights(solve_irls(X, f_max[h], sc).W, Variant::MaxP, s);
        const auto sel = cfg.variant == Variant::MinP   ? *rmin
                         : cfg.variant == Variant::MaxP ? *rmax
                                                        : select_inter(*rmin, *rmax, s);
        // seeds are already fanned out across cells
        const auto score = evaluate_subset(X, sel.selected, ds.labels->ids, c, cfg.repeats, cfg.seed, 1, cfg.nmi_norm);
        cell.acc_mean = score.acc_mean;
        cell.nmi_mean = score.nmi_mean;
    });

    auto f = io::open_output(detail::out_path(cfg, std::string("grid_") + to_string(cfg.variant) + ".csv"));
    io::write_grid_csv(f, cells);
    return cells;
}

/// Writes projection_<variant>.csv with the rows of X^T W. Returns X^T W.
inline Matrix cmd_project(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.variant == Variant::Inter)
        throw PreconditionError("project needs a single fitted W: use --variant minP or maxP");
    const auto ds = load_input(cfg);
    const auto& X = ds.data;
    Matrix W;
    if (cfg.identity_w) {
        W = Matrix::Identity(X.features(), X.features());
    } else {
        cfg.params.validate(X.instances());
        const auto fit = fit_mmfs(X, cfg.params, cfg.variant == Variant::MinP ? ReachVariant::Min : ReachVariant::Max);
        if (cfg.trace) detail::write_trace(cfg, fit.solver, cfg.variant);
        W = fit.solver.W;
    }
    Matrix projected = X.values().transpose() * W;
    auto f = io::open_output(detail::out_path(cfg, std::string("projection_") + to_string(cfg.variant) + ".csv"));
    io::write_projection_csv(f, projected, ds.labels);
    return projected;
}

namespace detail {

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto v = mmfs::detail::parse_real(mmfs::detail::trim(item));
        if (!v) throw PreconditionError(std::string(flag) + ": cannot parse '" + item + "'");
        out.push_back(static_cast<T>(*v));
    }
    if (out.empty()) throw PreconditionError(std::string(flag) + ": empty list");
    return out;
}

} // namespace detail

/// Parses argv, runs the subcommand. Exit status: 0 success, 2 invalid
/// arguments or violated preconditions, 1 any other failure.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    CLI::App app{"Multi-step Markov transition feature selection"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string orientation = "rows-are-instances", standardize = "none", variant = "maxP";
    std::string penalty = "squared", denominator = "neighbors", nmi_norm = "arithmetic";
    std::string label_col, counts, lambda_grid, n_grid;
    std::optional<std::size_t> s;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input, "input CSV")->envname("MMFS_INPUT");
        sub->add_option("--orientation", orientation, "rows-are-instances | rows-are-features")
            ->envname("MMFS_ORIENTATION")
            ->check(CLI::IsMember({"rows-are-instances", "rows-are-features"}));
        sub->add_option("--label-col", label_col, "name of the class label column")->envname("MMFS_LABEL_COL");
        sub->add_option("--standardize", standardize, "none | zscore")
            ->envname("MMFS_STANDARDIZE")
            ->check(CLI::IsMember({"none", "zscore"}));
        sub->add_option("--variant", variant, "minP | maxP | inter")
            ->envname("MMFS_VARIANT")
            ->check(CLI::IsMember({"minP", "maxP", "inter"}));
        sub->add_option("--k", cfg.params.k, "number of nearest neighbours")->envname("MMFS_K");
        sub->add_option("--alpha", cfg.params.alpha, "distance smoothing constant")->envname("MMFS_ALPHA");
        sub->add_option("--n", cfg.params.n, "transition step horizon")->envname("MMFS_N");
        sub->add_option("--lambda", cfg.params.solver.lambda, "row-sparsity weight")->envname("MMFS_LAMBDA");
        sub->add_option("--epsilon", cfg.params.solver.epsilon, "row-norm smoothing")->envname("MMFS_EPSILON");
        sub->add_option("--tol", cfg.params.solver.tol, "relative convergence tolerance")->envname("MMFS_TOL");
        sub->add_option("--max-iter", cfg.params.solver.max_iter, "solver iteration cap")->envname("MMFS_MAX_ITER");
        sub->add_option("--penalty", penalty, "squared | plain")
            ->envname("MMFS_PENALTY")
            ->check(CLI::IsMember({"squared", "plain"}));
        sub->add_option("--denominator", denominator, "neighbors | all")
            ->envname("MMFS_DENOMINATOR")
            ->check(CLI::IsMember({"neighbors", "all"}));
        sub->add_option("--s", s, "number of selected features")->envname("MMFS_S");
        sub->add_option("--counts", counts, "comma-separated feature counts")->envname("MMFS_COUNTS");
        sub->add_option("--repeats", cfg.repeats, "k-means repeats per evaluation")->envname("MMFS_REPEATS");
        sub->add_option("--seed", cfg.seed, "base k-means seed")->envname("MMFS_SEED");
        sub->add_option("--out", cfg.out, "output directory")->envname("MMFS_OUT");
        sub->add_option("--jobs", cfg.jobs, "worker threads")->envname("MMFS_JOBS");
        sub->add_option("--nmi-norm", nmi_norm, "arithmetic | geometric")
            ->envname("MMFS_NMI_NORM")
            ->check(CLI::IsMember({"arithmetic", "geometric"}));
        sub->add_flag("--dump-matrices", cfg.dump_matrices, "write P, V_min, V_max triplet CSVs")
            ->envname("MMFS_DUMP_MATRICES");
        sub->add_flag("--trace", cfg.trace, "write per-iteration solver trace")->envname("MMFS_TRACE");
        sub->add_flag("--low-memory", cfg.params.low_memory, "fold transition powers instead of storing them")
            ->envname("MMFS_LOW_MEMORY");
    };

    auto* select = app.add_subcommand("select", "rank features and write the selected subset");
    auto* sweep = app.add_subcommand("sweep", "ACC/NMI over a grid of selected-feature counts");
    auto* grid = app.add_subcommand("grid", "ACC/NMI over the (lambda, n) parameter grid");
    auto* project = app.add_subcommand("project", "write X^T W coordinates for external embedding");
    for (auto* sub : {select, sweep, grid, project}) add_common(sub);
    grid->add_option("--lambda-grid", lambda_grid, "comma-separated lambda values")->envname("MMFS_LAMBDA_GRID");
    grid->add_option("--n-grid", n_grid, "comma-separated step horizons")->envname("MMFS_N_GRID");
    project->add_flag("--identity-w", cfg.identity_w, "debug: project with W = I")->envname("MMFS_IDENTITY_W");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        cfg.orientation =
            orientation == "rows-are-features" ? Orientation::RowsAreFeatures : Orientation::RowsAreInstances;
        cfg.standardize = standardize == "zscore" ? StandardizeMode::ZScore : StandardizeMode::None;
        cfg.variant = variant == "minP" ? Variant::MinP : variant == "inter" ? Variant::Inter : Variant::MaxP;
        cfg.params.solver.penalty = penalty == "plain" ? Penalty::Plain : Penalty::Squared;
        cfg.params.denominator = denominator == "all" ? DistanceDenominator::All : DistanceDenominator::Neighbors;
        cfg.nmi_norm = nmi_norm == "geometric" ? NmiNorm::Geometric : NmiNorm::Arithmetic;
        if (!label_col.empty()) cfg.label_column = label_col;
        cfg.s = s;
        if (!counts.empty()) cfg.counts = detail::parse_list<std::size_t>(counts, "--counts");
        if (!lambda_grid.empty()) cfg.lambda_grid = detail::parse_list<double>(lambda_grid, "--lambda-grid");
        if (!n_grid.empty()) cfg.n_grid = detail::parse_list<int>(n_grid, "--n-grid");

        if (select->parsed()) cmd_select(cfg);
        else if (sweep->parsed()) cmd_sweep(cfg);
        else if (grid->parsed()) cmd_grid(cfg);
        else if (project->parsed()) cmd_project(cfg);
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace mmfs::cli
