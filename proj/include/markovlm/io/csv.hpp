#ifndef MARKOVLM_IO_CSV_HPP
#define MARKOVLM_IO_CSV_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "markovlm/dag.hpp"
#include "markovlm/dataset.hpp"
#include "markovlm/error.hpp"

namespace markovlm::io {

// Header plus string cells; every row has the header's width.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        return std::nullopt;
    }

    std::size_t column_index(std::string_view name) const {
        if (auto k = find(name)) return *k;
        throw ValidationError("missing column: " + std::string(name));
    }
};

// RFC 4180: quoted fields may hold commas, doubled quotes and line breaks.
// Accepts LF or CRLF line endings and a UTF-8 byte-order mark.
inline CsvTable read_csv(std::istream& in) {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    std::size_t line = 1;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) records.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t k = 0; k < text.size(); ++k) {
        const char ch = text[k];
        if (quoted) {
            if (ch == '"') {
                if (k + 1 < text.size() && text[k + 1] == '"') {
                    field += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line;
                field += ch;
            }
            continue;
        }
        switch (ch) {
            case '"':
                if (field_started && !field.empty()) {
                    throw ValidationError("csv line " + std::to_string(line) + ": stray quote inside field");
                }
                quoted = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r':
                if (k + 1 < text.size() && text[k + 1] == '\n') break;
                end_row();
                ++line;
                break;
            case '\n':
                end_row();
                ++line;
                break;
            default:
                field += ch;
                field_started = true;
        }
    }
    if (quoted) throw ValidationError("csv: unterminated quoted field");
    if (field_started || !row.empty()) end_row();

    if (records.empty()) throw ValidationError("empty file: no header row");
    CsvTable table;
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size()) {
            throw ValidationError("csv row " + std::to_string(r) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(records[r].size()));
        }
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    return read_csv(in);
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out << ',';
        out << csv_escape(cells[k]);
    }
    out << "\r\n";
}

inline void write_csv(std::ostream& out, const CsvTable& table) {
    write_csv_row(out, table.header);
    for (const auto& r : table.rows) write_csv_row(out, r);
}

// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

// Whole-string numeric parse; surrounding blanks are allowed.
inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// Numeric labels first, in numeric order; then the rest lexicographically.
inline bool label_less(const std::string& a, const std::string& b) {
    auto x = parse_double(a), y = parse_double(b);
    if (x && y) return *x < *y || (*x == *y && a < b);
    if (x != y) return x.has_value();
    return a < b;
}

inline std::vector<std::string> ordered_labels(std::vector<std::string> labels) {
    std::sort(labels.begin(), labels.end(), label_less);
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

struct LoadedDataset {
    std::vector<std::string> factors;
    std::string response;
    DagSpec spec;
    PathDataset data;
};

// Factor columns become DAG columns in the given order. With `known`, its
// labels fix the level numbering; otherwise levels are numbered by
// ordered_labels.
inline LoadedDataset load_dataset(const CsvTable& table, const std::vector<std::string>& factors,
                                  const std::string& response, const std::optional<DagSpec>& known = std::nullopt) {
    if (factors.empty()) throw InvalidArgument("at least one factor column is required");
    if (table.rows.empty()) throw ValidationError("empty file: no data rows");
    std::vector<std::size_t> fcol;
    for (const auto& f : factors) fcol.push_back(table.column_index(f));
    const std::size_t rcol = table.column_index(response);

    DagSpec spec;
    if (known) {
        if (known->columns() != factors.size()) {
            throw ValidationError("model has " + std::to_string(known->columns()) + " columns, data selects " +
                                  std::to_string(factors.size()) + " factors");
        }
        spec = *known;
        if (spec.labels.empty()) {
            for (std::size_t j = 0; j < spec.columns(); ++j) {
                std::vector<std::string> names;
                for (std::size_t i = 0; i < spec.levels[j]; ++i) names.push_back(std::to_string(i + 1));
                spec.labels.push_back(names);
            }
        }
    } else {
        for (std::size_t j = 0; j < factors.size(); ++j) {
            std::vector<std::string> seen;
            for (std::size_t r = 0; r < table.rows.size(); ++r) {
                const auto& v = table.rows[r][fcol[j]];
                if (v.empty()) {
                    throw ValidationError("row " + std::to_string(r + 1) + ": missing value in factor " + factors[j]);
                }
                seen.push_back(v);
            }
            spec.labels.push_back(ordered_labels(std::move(seen)));
            spec.levels.push_back(spec.labels.back().size());
        }
    }
    require_valid(spec);

    std::vector<std::map<std::string, std::uint32_t>> index(spec.columns());
    for (std::size_t j = 0; j < spec.columns(); ++j)
        for (std::size_t i = 0; i < spec.levels[j]; ++i) index[j][spec.labels[j][i]] = static_cast<std::uint32_t>(i);

    PathDataset data(spec);
    data.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::vector<std::uint32_t> nodes(spec.columns());
        for (std::size_t j = 0; j < spec.columns(); ++j) {
            auto it = index[j].find(row[fcol[j]]);
            if (it == index[j].end()) {
                throw ValidationError("row " + std::to_string(r + 1) + ": unknown level '" + row[fcol[j]] +
                                      "' in factor " + factors[j]);
            }
            nodes[j] = it->second;
        }
        auto y = parse_double(row[rcol]);
        if (!y) {
            throw ValidationError("row " + std::to_string(r + 1) + ": non-numeric response '" + row[rcol] + "' in " +
                                  response);
        }
        if (!std::isfinite(*y)) throw ValidationError("row " + std::to_string(r + 1) + ": response is not finite");
        data.add(Path(std::move(nodes)), *y);
    }
    return LoadedDataset{factors, response, spec, std::move(data)};
}

// Inverse of load_dataset: one row per record, labels for the factors.
inline CsvTable dataset_table(const PathDataset& data, const std::vector<std::string>& factors,
                              const std::string& response) {
    const DagSpec& spec = data.spec();
    if (factors.size() != spec.columns()) throw InvalidArgument("one factor name per column required");
    CsvTable t;
    t.header = factors;
    t.header.push_back(response);
    t.rows.reserve(data.size());
    for (const auto& rec : data.records()) {
        std::vector<std::string> row;
        for (std::size_t j = 0; j < rec.path.size(); ++j) row.push_back(spec.label(j, rec.path[j]));
        row.push_back(format_double(rec.response));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace markovlm::io

#endif  // MARKOVLM_IO_CSV_HPP
