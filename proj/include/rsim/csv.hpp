#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rsim/common.hpp"

namespace rsim::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // excludes header
    std::vector<std::size_t> line_numbers;       // 1-based source line per row
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (t.header.empty()) {
            t.header = split_line(line);
        } else {
            t.rows.push_back(split_line(line));
            t.line_numbers.push_back(lineno);
        }
    }
    if (t.header.empty()) throw EmptyInputError("'" + path + "' is empty");
    return t;
}

inline double parse_double(const std::string& s, std::size_t lineno, const std::string& col) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
    double v = 0.0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e)
        throw ParseError("line " + std::to_string(lineno) + ": cannot parse '" + s + "' as number in column '" + col + "'");
    return v;
}

inline long parse_long(const std::string& s, std::size_t lineno, const std::string& col) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
    long v = 0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e)
        throw ParseError("line " + std::to_string(lineno) + ": cannot parse '" + s + "' as integer in column '" + col +
                         "'");
    return v;
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);  // binary: no newline translation, byte-stable output
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline void require_columns(const Table& t, const std::vector<std::string>& cols, const std::string& what) {
    if (t.header.size() != cols.size())
        throw ParseError(what + ": expected " + std::to_string(cols.size()) + " columns, got " +
                         std::to_string(t.header.size()));
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (t.header[i] != cols[i])
            throw ParseError(what + ": expected column " + std::to_string(i + 1) + " to be '" + cols[i] + "', got '" +
                             t.header[i] + "'");
}

}  // namespace rsim::csv
