#pragma once

// CSV ingestion and emission for datasets: one header row, comma separated,
// '.' decimal separator. Empty outcome cells are read as missing.

#include <advbal/core.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace advbal {

struct CsvSchema {
    std::string treatment_column = "a";
    std::string outcome_column = "y";
    // Empty means every column that is neither treatment nor outcome.
    std::vector<std::string> covariate_columns;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        cells.emplace_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return cells;
}

inline std::optional<double> parse_real(std::string_view cell) {
    if (cell.empty()) return std::nullopt;
    std::string buf(cell);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<int> parse_label(std::string_view cell) {
    int v = 0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) return v;
    // Accept integral reals such as "1.0".
    if (auto r = parse_real(cell); r && std::floor(*r) == *r && std::abs(*r) < 1e9) {
        return static_cast<int>(*r);
    }
    return std::nullopt;
}

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline Dataset read_dataset_csv(std::istream& in, const CsvSchema& schema,
                                const std::string& source_name = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(source_name + ": missing header row");
    }
    const auto header = detail::split_csv_line(line);
    auto find_column = [&](const std::string& name) -> std::size_t {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] == name) return j;
        }
        throw ParseError(source_name + ": column '" + name + "' not found in header");
    };

    const std::size_t treat_col = find_column(schema.treatment_column);
    const std::size_t out_col = find_column(schema.outcome_column);
    std::vector<std::string> names = schema.covariate_columns;
    if (names.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j != treat_col && j != out_col) names.push_back(header[j]);
        }
    }
    std::vector<std::size_t> cov_cols;
    for (const auto& name : names) cov_cols.push_back(find_column(name));

    std::vector<double> values;
    std::vector<int> treatment;
    std::vector<std::optional<double>> outcome;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ParseError(source_name + ": row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(header.size()));
        }
        for (std::size_t k = 0; k < cov_cols.size(); ++k) {
            const auto& cell = cells[cov_cols[k]];
            auto v = detail::parse_real(cell);
            if (!v) {
                throw ParseError(source_name + ": row " + std::to_string(row) + ", column '" +
                                 names[k] + "': cannot parse '" + cell + "' as a finite real");
            }
            values.push_back(*v);
        }
        auto a = detail::parse_label(cells[treat_col]);
        if (!a) {
            throw ParseError(source_name + ": row " + std::to_string(row) + ", column '" +
                             schema.treatment_column + "': cannot parse '" + cells[treat_col] +
                             "' as a treatment label");
        }
        treatment.push_back(*a);
        const auto& ycell = cells[out_col];
        if (ycell.empty()) {
            outcome.emplace_back(std::nullopt);
        } else {
            auto y = detail::parse_real(ycell);
            if (!y) {
                throw ParseError(source_name + ": row " + std::to_string(row) + ", column '" +
                                 schema.outcome_column + "': cannot parse '" + ycell + "' as a finite real");
            }
            outcome.emplace_back(*y);
        }
    }

    const auto n = static_cast<Eigen::Index>(treatment.size());
    const auto d = static_cast<Eigen::Index>(names.size());
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = values[static_cast<std::size_t>(i * d + j)];
    }
    return Dataset(std::move(x), std::move(treatment), std::move(outcome), std::move(names));
}

inline Dataset load_dataset_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path + "'");
    }
    return read_dataset_csv(in, schema, path);
}

// Writes covariates, then treatment and outcome columns named per schema.
inline void write_dataset_csv(std::ostream& out, const Dataset& ds, const CsvSchema& schema = {}) {
    for (const auto& name : ds.column_names()) out << name << ',';
    out << schema.treatment_column << ',' << schema.outcome_column << '\n';
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        for (std::size_t j = 0; j < ds.dims(); ++j) {
            out << detail::format_real(ds.covariates()(static_cast<Eigen::Index>(i),
                                                       static_cast<Eigen::Index>(j)))
                << ',';
        }
        out << ds.treatment()[i] << ',';
        if (ds.outcome()[i]) out << detail::format_real(*ds.outcome()[i]);
        out << '\n';
    }
}

} // namespace advbal
