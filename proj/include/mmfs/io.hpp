#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfs/data.hpp"
#include "mmfs/error.hpp"
#include "mmfs/eval.hpp"
#include "mmfs/markov.hpp"
#include "mmfs/select.hpp"
#include "mmfs/solver.hpp"

namespace mmfs::io {

namespace detail {

inline std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace detail

/// {variant, s, selected, scores, feature_names}. `scores` and
/// `feature_names` are indexed by feature, `selected` holds indices into them.
inline nlohmann::json selection_json(const SelectionResult& r, const std::vector<std::string>& feature_names) {
    nlohmann::json j;
    j["variant"] = to_string(r.variant);
    j["s"] = r.s;
    j["selected"] = r.selected;
    std::vector<double> scores(r.scores.data(), r.scores.data() + r.scores.size());
    j["scores"] = scores;
    j["feature_names"] = feature_names;
    return j;
}

/// rank,feature_name for the selected features (rank starts at 1).
inline void write_selection_csv(std::ostream& out, const SelectionResult& r,
                                const std::vector<std::string>& feature_names) {
    out << "rank,feature_name\n";
    for (std::size_t i = 0; i < r.selected.size(); ++i) out << (i + 1) << "," << feature_names[r.selected[i]] << "\n";
}

inline void write_trace_csv(std::ostream& out, const SolverState& st) {
    out << "iteration,objective,delta_w\n";
    for (std::size_t i = 0; i < st.objective_trace.size(); ++i)
        out << (i + 1) << "," << mmfs::detail::format_real(st.objective_trace[i]) << ","
            << mmfs::detail::format_real(st.delta_w_trace[i]) << "\n";
}

/// Nonzero entries as row,col,value triplets.
inline void write_matrix_triplets(std::ostream& out, const Matrix& m) {
    out << "row,col,value\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (m(i, j) != 0.0) out << i << "," << j << "," << mmfs::detail::format_real(m(i, j)) << "\n";
}

inline void write_report_csv(std::ostream& out, const EvalReport& rep) {
    out << "# variant=" << to_string(rep.variant) << "; acc/nmi in percent; std is the population std over "
        << rep.repeats << " k-means repeats\n";
    out << "feature_count,acc_mean,acc_std,nmi_mean,nmi_std\n";
    for (std::size_t i = 0; i < rep.feature_counts.size(); ++i)
        out << rep.feature_counts[i] << "," << detail::fixed2(rep.acc_mean[i]) << "," << detail::fixed2(rep.acc_std[i])
            << "," << detail::fixed2(rep.nmi_mean[i]) << "," << detail::fixed2(rep.nmi_std[i]) << "\n";
}

struct GridCell {
    double lambda = 0.0;
    int n = 0;
    double acc_mean = 0.0, nmi_mean = 0.0;
};

inline void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells) {
    out << "lambda,n,acc_mean,nmi_mean\n";
    for (const auto& c : cells)
        out << mmfs::detail::format_real(c.lambda) << "," << c.n << "," << detail::fixed2(c.acc_mean) << ","
            << detail::fixed2(c.nmi_mean) << "\n";
}

/// instance,label,p0..p{d-1}: rows of X^T W.
inline void write_projection_csv(std::ostream& out, const Matrix& projected, const std::optional<Labels>& labels) {
    out << "instance,label";
    for (Eigen::Index j = 0; j < projected.cols(); ++j) out << ",p" << j;
    out << "\n";
    for (Eigen::Index i = 0; i < projected.rows(); ++i) {
        out << i << ",";
        if (labels) out << labels->names[static_cast<std::size_t>(labels->ids[static_cast<std::size_t>(i)])];
        for (Eigen::Index j = 0; j < projected.cols(); ++j) out << "," << mmfs::detail::format_real(projected(i, j));
        out << "\n";
    }
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

} // namespace mmfs::io
