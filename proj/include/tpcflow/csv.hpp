#pragma once

#include <string>
#include <vector>

namespace tpcflow {

/// Row-major numeric table with named columns. All artifact CSV files use
/// ',' separators, '.' decimals, UTF-8, one header line.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<double> values;  // rows * columns.size(), row-major

    std::size_t rows() const { return columns.empty() ? 0 : values.size() / columns.size(); }
    std::size_t cols() const { return columns.size(); }
    double at(std::size_t r, std::size_t c) const { return values[r * columns.size() + c]; }
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

/// Full round-trip precision ("%.17g").
std::string format_double(double v);

}  // namespace tpcflow
