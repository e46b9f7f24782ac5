#pragma once

#include <string>
#include <vector>

#include "flowmi/matrix.hpp"

namespace flowmi::bench {

struct CsvTable {
    std::vector<std::string> columns;
    Matrix values; // one row per data line, parsed strictly as doubles

    int column_index(const std::string& name) const; // -1 when absent

    // Gathers named columns into a matrix, preserving the requested order.
    Matrix select(const std::vector<std::string>& names) const;
};

// Strict numeric CSV: one header line, comma separators, '.' decimal, no
// quoting and no missing values. Errors carry the 1-based data row and the
// column name.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& columns, const Matrix& values);

// Splits "a,b,c" into trimmed tokens; empty input gives an empty list.
std::vector<std::string> split_list(const std::string& spec);

} // namespace flowmi::bench
