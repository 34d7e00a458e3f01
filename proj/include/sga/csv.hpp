#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "sga/errors.hpp"

namespace sga::csv {

/// Shortest decimal form that parses back to the same double.
inline std::string number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw ValidationError("cannot format number");
    return std::string(buf, end);
}

inline double parse_number(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) throw ValidationError("not a number: '" + s + "'");
    return v;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out(1);
    for (char ch : line) {
        if (ch == ',') {
            out.emplace_back();
        } else if (ch != '\r') {
            out.back().push_back(ch);
        }
    }
    return out;
}

/// Header plus rows of already-formatted cells, '\n' line endings.
inline void write(const std::filesystem::path& path, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "' for writing");
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    if (!out) throw FormatError(FormatError::Kind::io, "failed writing '" + path.string() + "'");
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw ValidationError("csv has no column '" + name + "'");
    }
};

inline Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "' for reading");
    Table t;
    std::string line;
    if (std::getline(in, line)) t.header = split_line(line);
    while (std::getline(in, line)) {
        if (!line.empty()) t.rows.push_back(split_line(line));
    }
    return t;
}

}  // namespace sga::csv
