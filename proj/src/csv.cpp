#include "flowmi/bench/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowmi/error.hpp"

namespace flowmi::bench {

std::vector<std::string> split_list(const std::string& spec) {
    std::vector<std::string> out;
    std::string token;
    std::stringstream ss(spec);
    while (std::getline(ss, token, ',')) {
        const auto b = token.find_first_not_of(" \t\r");
        const auto e = token.find_last_not_of(" \t\r");
        if (b == std::string::npos) continue;
        out.push_back(token.substr(b, e - b + 1));
    }
    return out;
}

int CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

Matrix CsvTable::select(const std::vector<std::string>& names) const {
    Matrix out(values.rows(), static_cast<int>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const int src = column_index(names[j]);
        if (src < 0) throw DataError("CSV column '" + names[j] + "' not found");
        for (int i = 0; i < values.rows(); ++i) out.at(i, static_cast<int>(j)) = values.at(i, src);
    }
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV file '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    CsvTable table;
    {
        std::string token;
        std::stringstream ss(line);
        while (std::getline(ss, token, ',')) table.columns.push_back(token);
    }
    if (table.columns.empty()) throw DataError("CSV file '" + path + "' has an empty header");

    std::vector<double> cells;
    int rows = 0;
    const int cols = static_cast<int>(table.columns.size());
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++rows;
        int col = 0;
        std::size_t pos = 0;
        while (true) {
            const std::size_t next = line.find(',', pos);
            const std::string_view cell(line.data() + pos, (next == std::string::npos ? line.size() : next) - pos);
            if (col >= cols)
                throw DataError("CSV row " + std::to_string(rows) + ": too many fields");
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw DataError("CSV row " + std::to_string(rows) + ", column '" + table.columns[static_cast<std::size_t>(col)] +
                                "': non-numeric value '" + std::string(cell) + "'");
            cells.push_back(v);
            ++col;
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (col != cols)
            throw DataError("CSV row " + std::to_string(rows) + ": expected " + std::to_string(cols) + " fields, got " +
                            std::to_string(col));
    }

    table.values = Matrix(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) table.values.at(i, j) = cells[static_cast<std::size_t>(i) * cols + j];
    return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns, const Matrix& values) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file '" + path + "'");
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
    out << "\n";
    char buf[40];
    for (int i = 0; i < values.rows(); ++i) {
        for (int j = 0; j < values.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", values.at(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw DataError("error while writing CSV file '" + path + "'");
}

} // namespace flowmi::bench
