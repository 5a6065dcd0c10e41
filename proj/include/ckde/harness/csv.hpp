#pragma once
/// \file csv.hpp
/// CSV with a `# key = value` metadata header.

#include "ckde/hash.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ckde::harness {

using Cell = std::variant<double, long long, std::string>;

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void meta(const std::string& key, const std::string& value) { meta_.emplace_back(key, value); }

    void row(std::vector<Cell> cells) {
        if (cells.size() != columns_.size())
            throw std::invalid_argument("CsvTable: row has " + std::to_string(cells.size()) + " cells, want " +
                                        std::to_string(columns_.size()));
        rows_.push_back(std::move(cells));
    }

    std::size_t rows() const { return rows_.size(); }

    std::string str() const {
        std::ostringstream os;
        for (const auto& [k, v] : meta_) os << "# " << k << " = " << v << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) os << ',';
                std::visit(
                    [&](const auto& v) {
                        using T = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<T, double>) os << fmt_double(v);
                        else os << v;
                    },
                    r[i]);
            }
            os << '\n';
        }
        return os.str();
    }

    /// Writes the file and returns its sha256.
    std::string write(const std::string& path) const {
        const std::string s = str();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path);
        f << s;
        f.close();
        if (!f) throw std::runtime_error("write failed: " + path);
        return sha256_hex(s);
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::pair<std::string, std::string>> meta_;
    std::vector<std::vector<Cell>> rows_;
};

/// Parsed file: metadata, header and raw string cells.
struct CsvData {
    std::map<std::string, std::string> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw std::out_of_range("no column " + name);
    }
    double number(std::size_t row, const std::string& name) const { return std::stod(rows.at(row).at(column(name))); }
};

inline CsvData read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    CsvData d;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string c;
        while (std::getline(ss, c, ',')) out.push_back(c);
        return out;
    };
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find(" = ");
            if (eq != std::string::npos && line.size() > 2) d.meta[line.substr(2, eq - 2)] = line.substr(eq + 3);
            continue;
        }
        if (d.columns.empty()) d.columns = split(line);
        else d.rows.push_back(split(line));
    }
    return d;
}

}  // namespace ckde::harness
