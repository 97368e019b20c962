#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmfs/error.hpp"

namespace mmfs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Feature-major data matrix: d rows (features) by N columns (instances).
class DataMatrix {
public:
    DataMatrix() = default;

    DataMatrix(Matrix values, std::vector<std::string> feature_names)
        : values_(std::move(values)), names_(std::move(feature_names)) {
        validate();
    }

    /// Names default to f0 ... f{d-1}.
    explicit DataMatrix(Matrix values) : values_(std::move(values)) {
        names_.reserve(static_cast<std::size_t>(values_.rows()));
        for (Eigen::Index i = 0; i < values_.rows(); ++i) names_.push_back("f" + std::to_string(i));
        validate();
    }

    const Matrix& values() const noexcept { return values_; }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    Eigen::Index features() const noexcept { return values_.rows(); }
    Eigen::Index instances() const noexcept { return values_.cols(); }

    /// Keeps the listed feature rows, in the given order.
    DataMatrix subset(const std::vector<std::size_t>& rows) const {
        detail::require(!rows.empty(), "feature subset must be non-empty");
        Matrix out(static_cast<Eigen::Index>(rows.size()), values_.cols());
        std::vector<std::string> names;
        names.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            detail::require(rows[r] < static_cast<std::size_t>(values_.rows()),
                            "feature index " + std::to_string(rows[r]) + " out of range");
            out.row(static_cast<Eigen::Index>(r)) = values_.row(static_cast<Eigen::Index>(rows[r]));
            names.push_back(names_[rows[r]]);
        }
        return DataMatrix(std::move(out), std::move(names));
    }

    friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
        return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
               a.values_ == b.values_ && a.names_ == b.names_;
    }

private:
    void validate() const {
        detail::require(values_.rows() >= 1, "data matrix needs at least one feature");
        detail::require(values_.cols() >= 2, "data matrix needs at least two instances (N >= 2)");
        detail::require(values_.allFinite(), "data matrix contains non-finite entries");
        detail::require(names_.size() == static_cast<std::size_t>(values_.rows()),
                        "feature_names must have one entry per feature");
        std::set<std::string> unique(names_.begin(), names_.end());
        detail::require(unique.size() == names_.size(), "feature names must be unique");
    }

    Matrix values_;
    std::vector<std::string> names_;
};

/// Class labels encoded as 0..c-1 in order of first appearance, with the
/// original identifiers kept for output.
struct Labels {
    std::vector<int> ids;
    std::vector<std::string> names;

    std::size_t class_count() const noexcept { return names.size(); }

    static Labels from_strings(const std::vector<std::string>& raw) {
        Labels out;
        std::map<std::string, int> index;
        out.ids.reserve(raw.size());
        for (const auto& r : raw) {
            auto [it, inserted] = index.emplace(r, static_cast<int>(out.names.size()));
            if (inserted) out.names.push_back(r);
            out.ids.push_back(it->second);
        }
        return out;
    }

    static Labels from_ids(const std::vector<int>& raw) {
        std::vector<std::string> s;
        s.reserve(raw.size());
        for (int v : raw) s.push_back(std::to_string(v));
        return from_strings(s);
    }

    friend bool operator==(const Labels&, const Labels&) = default;
};

struct LabeledDataset {
    DataMatrix data;
    std::optional<Labels> labels;
    std::string label_column;

    std::optional<std::size_t> class_count() const {
        if (!labels) return std::nullopt;
        return labels->class_count();
    }
};

enum class Orientation { RowsAreInstances, RowsAreFeatures };
enum class StandardizeMode { None, ZScore };

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        auto cell = trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        cells.emplace_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

/// Parses the whole cell as a real; accepts nan/inf spellings so the caller
/// can report them as non-finite rather than non-numeric.
inline std::optional<double> parse_real(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string format_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace detail

/// Reads a comma-separated numeric table. A header row is assumed iff any
/// cell of the first row does not parse as a number.
inline LabeledDataset load_csv(const std::string& path, const std::optional<std::string>& label_column = std::nullopt,
                               Orientation orientation = Orientation::RowsAreInstances) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open input file: " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        rows.push_back(detail::split_csv_line(line));
    }
    if (rows.empty()) throw ParseError(path + ": file is empty");

    const std::size_t width = rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width)
            throw ParseError(path + ": ragged row " + std::to_string(r + 1) + " has " +
                             std::to_string(rows[r].size()) + " columns, expected " + std::to_string(width));
    }

    bool has_header = false;
    for (const auto& cell : rows.front()) {
        if (!detail::parse_real(cell)) {
            has_header = true;
            break;
        }
    }

    std::optional<std::size_t> label_idx;
    if (label_column) {
        if (orientation != Orientation::RowsAreInstances)
            throw PreconditionError("a label column is only supported with rows-are-instances orientation");
        if (has_header) {
            const auto& hdr = rows.front();
            for (std::size_t c = 0; c < hdr.size(); ++c)
                if (hdr[c] == *label_column) label_idx = c;
        }
        if (!label_idx) throw ParseError(path + ": label column '" + *label_column + "' not found in header");
    }

    const std::size_t first = has_header ? 1 : 0;
    const std::size_t body_rows = rows.size() - first;
    const std::size_t value_cols = width - (label_idx ? 1 : 0);
    if (value_cols == 0) throw ParseError(path + ": no feature columns");

    Matrix table(static_cast<Eigen::Index>(body_rows), static_cast<Eigen::Index>(value_cols));
    std::vector<std::string> raw_labels;
    for (std::size_t r = first; r < rows.size(); ++r) {
        std::size_t out_c = 0;
        for (std::size_t c = 0; c < width; ++c) {
            const auto& cell = rows[r][c];
            if (label_idx && c == *label_idx) {
                raw_labels.push_back(cell);
                continue;
            }
            auto v = detail::parse_real(cell);
            const std::string where = path + ": row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1);
            if (!v) throw ParseError(where + ": non-numeric cell '" + cell + "'");
            if (!std::isfinite(*v)) throw ParseError(where + ": non-finite value '" + cell + "'");
            table(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(out_c++)) = *v;
        }
    }

    LabeledDataset ds;
    if (orientation == Orientation::RowsAreInstances) {
        if (table.rows() < 2) throw ParseError(path + ": need at least two instances (N >= 2)");
        std::vector<std::string> names;
        if (has_header) {
            for (std::size_t c = 0; c < width; ++c)
                if (!label_idx || c != *label_idx) names.push_back(rows.front()[c]);
            std::set<std::string> unique(names.begin(), names.end());
            if (unique.size() != names.size()) throw ParseError(path + ": duplicate feature names in header");
            ds.data = DataMatrix(table.transpose(), std::move(names));
        } else {
            ds.data = DataMatrix(table.transpose());
        }
    } else {
        if (table.cols() < 2) throw ParseError(path + ": need at least two instances (N >= 2)");
        ds.data = DataMatrix(std::move(table));
    }
    if (label_idx) {
        ds.labels = Labels::from_strings(raw_labels);
        ds.label_column = *label_column;
    }
    return ds;
}

/// Writes instances as rows with a header of feature names (plus the label
/// column, if any). Values are written with shortest round-trip precision.
inline void write_csv(std::ostream& out, const LabeledDataset& ds) {
    const auto& X = ds.data.values();
    const auto& names = ds.data.feature_names();
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    if (ds.labels) out << "," << (ds.label_column.empty() ? "label" : ds.label_column);
    out << "\n";
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
        for (Eigen::Index j = 0; j < X.rows(); ++j) out << (j ? "," : "") << detail::format_real(X(j, i));
        if (ds.labels) out << "," << ds.labels->names[static_cast<std::size_t>(ds.labels->ids[static_cast<std::size_t>(i)])];
        out << "\n";
    }
}

inline DataMatrix standardize(const DataMatrix& X, StandardizeMode mode) {
    if (mode == StandardizeMode::None) return X;
    Matrix v = X.values();
    const double n = static_cast<double>(v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double mean = v.row(r).mean();
        v.row(r).array() -= mean;
        double sd = std::sqrt(v.row(r).squaredNorm() / n);
        if (sd < 1e-12) sd = 1.0;
        v.row(r) /= sd;
    }
    return DataMatrix(std::move(v), X.feature_names());
}

} // namespace mmfs
