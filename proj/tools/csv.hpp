#pragma once

#include <charconv>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "bjel/errors.hpp"

namespace bjel::cli {

// Strict numeric CSV: comma separated, one header row, '.' decimals.
// Anything outside that dialect is rejected rather than guessed.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
    std::size_t rows = 0;

    int column_index(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        return -1;
    }
    std::span<const double> column(const std::string& name) const {
        int j = column_index(name);
        if (j < 0) fail(errc::bad_request, "CSV has no column named '" + name + "'");
        return columns[static_cast<std::size_t>(j)];
    }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline double parse_field(const std::string& field, std::size_t row, std::size_t col) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        fail(errc::invalid_input, "malformed CSV field '" + field + "' at row " +
                                      std::to_string(row) + ", column " + std::to_string(col + 1));
    return v;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::bad_request, "cannot open CSV file '" + path + "'");

    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) fail(errc::invalid_input, "CSV file '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = detail::split_line(line);
    if (t.header.empty() || t.header[0].empty())
        fail(errc::invalid_input, "CSV header row missing in '" + path + "'");
    t.columns.resize(t.header.size());

    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == EOF) break;  // tolerate one trailing newline
        ++row;
        auto fields = detail::split_line(line);
        if (fields.size() != t.header.size())
            fail(errc::invalid_input, "row " + std::to_string(row) + " has " +
                                          std::to_string(fields.size()) + " fields, expected " +
                                          std::to_string(t.header.size()));
        for (std::size_t j = 0; j < fields.size(); ++j)
            t.columns[j].push_back(detail::parse_field(fields[j], row, j));
        ++t.rows;
    }
    if (t.rows == 0) fail(errc::invalid_input, "CSV file '" + path + "' has no data rows");
    return t;
}

}  // namespace bjel::cli
