#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "satqkd/config.hpp"

namespace satqkd {

inline constexpr const char* kToolVersion = "satqkd 0.1.0";

/// Columnar results with units, serialised as CSV behind a '#'-prefixed
/// metadata block. Numbers carry 9 significant digits so reruns of the same
/// campaign are byte-identical.
class ResultTable {
public:
    struct Column {
        std::string name;
        std::string unit;  // empty for dimensionless
    };

    ResultTable(std::vector<Column> columns, std::uint64_t config_hash, std::uint64_t seed)
        : columns_(std::move(columns)), config_hash_(config_hash), seed_(seed) {}

    void add_metadata(const std::string& key, const std::string& value) {
        metadata_.emplace_back(key, value);
    }

    void add_row(const std::vector<double>& row) {
        if (row.size() != columns_.size())
            throw std::invalid_argument("ResultTable: row width does not match schema");
        rows_.push_back(row);
    }

    std::size_t row_count() const { return rows_.size(); }

    std::string to_csv() const {
        std::string out;
        char buf[128];
        std::snprintf(buf, sizeof buf, "# tool: %s\n", kToolVersion);
        out += buf;
        std::snprintf(buf, sizeof buf, "# config_hash: %016llx\n",
                      static_cast<unsigned long long>(config_hash_));
        out += buf;
        std::snprintf(buf, sizeof buf, "# seed: %llu\n", static_cast<unsigned long long>(seed_));
        out += buf;
        for (const auto& [k, v] : metadata_) out += "# " + k + ": " + v + "\n";
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (i) out += ',';
            out += columns_[i].name;
            if (!columns_[i].unit.empty()) out += " (" + columns_[i].unit + ")";
        }
        out += '\n';
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                std::snprintf(buf, sizeof buf, "%.9g", row[i]);
                out += buf;
            }
            out += '\n';
        }
        return out;
    }

private:
    std::vector<Column> columns_;
    std::uint64_t config_hash_;
    std::uint64_t seed_;
    std::vector<std::pair<std::string, std::string>> metadata_;
    std::vector<std::vector<double>> rows_;
};

inline void write_results(const ResultTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << table.to_csv();
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace satqkd
