#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ssdiag/core_data.hpp"
#include "ssdiag/error.hpp"

namespace ssdiag::io {

// CSV conventions: comma separated, '.' decimal, no quoting, LF or CRLF line
// endings, blank lines ignored.
//   shares:   region_id,s_1,...,s_F
//   outcomes: region_id,y[,y_placebo][,cluster][,x_realized]

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based, per row
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline CsvTable parse_csv(std::string_view text, std::string source) {
    CsvTable table;
    table.source = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    if (text.starts_with("\xEF\xBB\xBF")) pos = 3;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ValidationError(table.source + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (table.header.empty()) throw ValidationError(table.source + ": empty file");
    return table;
}

inline double parse_number(const CsvTable& t, std::size_t row, std::size_t col) {
    const std::string& field = t.rows[row][col];
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc() || ptr != last) {
        throw ValidationError(t.source + ":" + std::to_string(t.line_numbers[row]) + ": cannot parse '" + field +
                              "' in column '" + t.header[col] + "' as a number");
    }
    return value;
}

inline long long parse_integer(const CsvTable& t, std::size_t row, std::size_t col) {
    const std::string& field = t.rows[row][col];
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw ValidationError(t.source + ":" + std::to_string(t.line_numbers[row]) + ": cannot parse '" + field +
                              "' in column '" + t.header[col] + "' as an integer label");
    }
    return value;
}

inline std::map<std::string, std::size_t> index_regions(const CsvTable& t) {
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& id = t.rows[r][0];
        if (id.empty()) throw ValidationError(t.source + ":" + std::to_string(t.line_numbers[r]) + ": empty region_id");
        if (!index.emplace(id, r).second) {
            throw ValidationError(t.source + ":" + std::to_string(t.line_numbers[r]) + ": duplicate region_id '" + id + "'");
        }
    }
    return index;
}

/// Joins shares and outcomes on region_id (in shares-file order) and validates.
inline Dataset ingest_text(std::string_view shares_text, std::string_view outcomes_text,
                           std::string shares_name = "shares", std::string outcomes_name = "outcomes") {
    const CsvTable shares = parse_csv(shares_text, std::move(shares_name));
    const CsvTable outcomes = parse_csv(outcomes_text, std::move(outcomes_name));

    if (shares.header.front() != "region_id") throw ValidationError(shares.source + ": first column must be region_id");
    if (shares.header.size() < 3) throw ValidationError(shares.source + ": need at least 2 sector columns");
    if (outcomes.header.size() < 2 || outcomes.header[0] != "region_id" || outcomes.header[1] != "y") {
        throw ValidationError(outcomes.source + ": header must start with region_id,y");
    }
    std::optional<std::size_t> placebo_col, cluster_col, x_col;
    const std::vector<std::string> optional_order{"y_placebo", "cluster", "x_realized"};
    std::size_t next_allowed = 0;
    for (std::size_t c = 2; c < outcomes.header.size(); ++c) {
        const std::string& name = outcomes.header[c];
        std::size_t k = next_allowed;
        while (k < optional_order.size() && optional_order[k] != name) ++k;
        if (k == optional_order.size()) {
            throw ValidationError(outcomes.source + ": unexpected or out-of-order column '" + name +
                                  "' (expected region_id,y[,y_placebo][,cluster][,x_realized])");
        }
        next_allowed = k + 1;
        if (name == "y_placebo") placebo_col = c;
        if (name == "cluster") cluster_col = c;
        if (name == "x_realized") x_col = c;
    }

    const auto share_index = index_regions(shares);
    const auto outcome_index = index_regions(outcomes);
    for (const auto& [id, row] : outcome_index) {
        if (!share_index.contains(id)) {
            throw ValidationError(outcomes.source + ":" + std::to_string(outcomes.line_numbers[row]) +
                                  ": unknown region_id '" + id + "' (not in shares)");
        }
    }

    const std::size_t n = shares.rows.size();
    const std::size_t f = shares.header.size() - 1;
    RawDataset raw;
    raw.shares = DenseMatrix(n, f);
    raw.y.resize(n);
    if (placebo_col) raw.y_placebo.emplace(n);
    if (cluster_col) raw.clusters.emplace(n);
    if (x_col) raw.x_realized.emplace(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& id = shares.rows[i][0];
        const auto it = outcome_index.find(id);
        if (it == outcome_index.end()) {
            throw ValidationError(outcomes.source + ": missing region_id '" + id + "' present in shares");
        }
        raw.region_ids.push_back(id);
        for (std::size_t k = 0; k < f; ++k) raw.shares(i, k) = parse_number(shares, i, k + 1);
        const std::size_t r = it->second;
        raw.y[i] = parse_number(outcomes, r, 1);
        if (placebo_col) (*raw.y_placebo)[i] = parse_number(outcomes, r, *placebo_col);
        if (cluster_col) (*raw.clusters)[i] = parse_integer(outcomes, r, *cluster_col);
        if (x_col) (*raw.x_realized)[i] = parse_number(outcomes, r, *x_col);
    }
    return validate_dataset(std::move(raw));
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline Dataset ingest(const std::filesystem::path& shares_csv, const std::filesystem::path& outcomes_csv) {
    return ingest_text(read_file(shares_csv), read_file(outcomes_csv), shares_csv.string(), outcomes_csv.string());
}

/// Shortest round-trip decimal representation.
inline std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int digits) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    return std::string(buf, ptr);
}

inline std::string write_shares_csv(const Dataset& data) {
    std::string out = "region_id";
    for (std::size_t f = 0; f < data.sectors(); ++f) out += ",s_" + std::to_string(f + 1);
    out += '\n';
    for (std::size_t i = 0; i < data.regions(); ++i) {
        out += data.region_ids[i];
        for (double w : data.shares.row(i)) out += ',' + format_number(w);
        out += '\n';
    }
    return out;
}

inline std::string write_outcomes_csv(const Dataset& data) {
    std::string out = "region_id,y";
    if (data.y_placebo) out += ",y_placebo";
    if (data.clusters) out += ",cluster";
    if (data.x_realized) out += ",x_realized";
    out += '\n';
    for (std::size_t i = 0; i < data.regions(); ++i) {
        out += data.region_ids[i] + ',' + format_number(data.y[i]);
        if (data.y_placebo) out += ',' + format_number((*data.y_placebo)[i]);
        if (data.clusters) out += ',' + std::to_string((*data.clusters)[i]);
        if (data.x_realized) out += ',' + format_number((*data.x_realized)[i]);
        out += '\n';
    }
    return out;
}

}  // namespace ssdiag::io
