#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "taxflow/error.hpp"
#include "taxflow/model.hpp"

namespace taxflow {

// 17 significant digits, enough to read back every double exactly.
inline std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Header line plus rows of reals, written with 17 significant digits.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::initializer_list<const char*> columns)
        : path_(path), out_(path, std::ios::binary), width_(columns.size()) {
        if (!out_) throw Error("cannot open " + path.string() + " for writing");
        bool first = true;
        for (const char* c : columns) {
            out_ << (first ? "" : ",") << c;
            first = false;
        }
        out_ << '\n';
    }

    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
        : path_(path), out_(path, std::ios::binary), width_(columns.size()) {
        if (!out_) throw Error("cannot open " + path.string() + " for writing");
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }

    void row(std::span<const double> values) {
        require(values.size() == width_, "CSV row width does not match header");
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_real(values[i]);
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_) throw Error("failed writing " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t width_;
};

// Two-column CSV (y, T) with a header, interpolated linearly onto the grid.
inline GridFunction read_tax_csv(const std::filesystem::path& path, const Grid& g) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read tax file " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<double> ys, ts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = line.find(',');
        if (c == std::string::npos) throw Error("tax file row without a comma: " + line);
        ys.push_back(std::stod(line.substr(0, c)));
        ts.push_back(std::stod(line.substr(c + 1)));
    }
    require(ys.size() >= 2, "tax file needs at least two rows");
    for (std::size_t i = 1; i < ys.size(); ++i) require(ys[i] > ys[i - 1], "tax file incomes must be ascending");
    require(ys.front() <= g.lo() && ys.back() >= g.hi(), "tax file does not cover the income grid");
    return GridFunction::sample(g, [&](double y) {
        std::size_t k = 1;
        while (ys[k] < y) ++k;
        const double w = (y - ys[k - 1]) / (ys[k] - ys[k - 1]);
        return (1.0 - w) * ts[k - 1] + w * ts[k];
    });
}

}  // namespace taxflow
