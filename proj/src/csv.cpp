#include "tpcflow/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tpcflow/errors.hpp"

namespace tpcflow {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.columns = split_line(line);
    if (table.columns.empty()) throw DataError("CSV header has no columns: " + path);

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != table.columns.size()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(table.columns.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }
        for (const auto& cell : cells) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) {
                throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
            table.values.push_back(v);
        }
    }
    return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file: " + path);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out << ',';
        out << table.columns[c];
    }
    out << '\n';
    const std::size_t ncol = table.cols();
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < ncol; ++c) {
            if (c) out << ',';
            out << format_double(table.at(r, c));
        }
        out << '\n';
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace tpcflow
