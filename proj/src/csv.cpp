#include "enfo/csv.hpp"

#include "enfo/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

namespace enfo {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw InputError(source + ": line " + std::to_string(line_no) + ": " + msg);
    };

    if (!std::getline(in, line)) {
        line_no = 1;
        fail("missing header");
    }
    ++line_no;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_commas(trim(line));
    if (header.size() < 2) fail("header needs at least one feature column and 'y'");
    if (trim(header.back()) != "y") fail("last header column must be 'y'");
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (trim(header[j]) != "x" + std::to_string(j)) {
            fail("header column " + std::to_string(j + 1) + " must be 'x" + std::to_string(j) + "'");
        }
    }

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = trim(line);
        if (body.empty()) continue;
        const auto cells = split_commas(body);
        if (cells.size() != d + 1) {
            fail("expected " + std::to_string(d + 1) + " cells, found " + std::to_string(cells.size()));
        }
        for (const auto raw : cells) {
            const std::string_view cell = trim(raw);
            double v = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (!cell.empty() && *first == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (cell.empty() || ec != std::errc() || ptr != last) {
                fail("non-numeric cell '" + std::string(cell) + "'");
            }
            if (!std::isfinite(v)) fail("non-finite cell '" + std::string(cell) + "'");
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) fail("no data rows");

    Matrix x(static_cast<Index>(rows), static_cast<Index>(d));
    Vector y(static_cast<Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < d; ++j) x(i, j) = values[i * (d + 1) + j];
        y(i) = values[i * (d + 1) + d];
    }
    return make_dataset(std::move(x), std::move(y));
}

Dataset read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return parse_csv(in, path.string());
}

void write_csv(const Dataset& data, std::ostream& out) {
    validate(data);
    for (Index j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
    out << "y\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (Index i = 0; i < data.rows(); ++i) {
        for (Index j = 0; j < data.dim(); ++j) {
            put(data.features(i, j));
            out << ',';
        }
        put(data.target(i));
        out << '\n';
    }
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    write_csv(data, out);
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace enfo
