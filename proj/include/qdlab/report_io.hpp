// report_io.hpp - deterministic CSV / JSON-lines / binary matrix output
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qdlab/common.hpp"

namespace qdlab {

// Shortest round-trip representation; locale-independent and stable across
// runs, which the determinism guarantee rides on.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string csv_escape(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

struct CsvField {
    std::string text;
    CsvField(const char* s) : text(s) {}
    CsvField(const std::string& s) : text(s) {}
    CsvField(double x) : text(format_double(x)) {}
    CsvField(int x) : text(std::to_string(x)) {}
    CsvField(long x) : text(std::to_string(x)) {}
    CsvField(bool b) : text(b ? "true" : "false") {}
};

// Accumulates rows and writes the whole file at once (LF line endings,
// RFC-4180-style quoting).
class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(std::initializer_list<CsvField> fields) {
        std::vector<std::string> r;
        r.reserve(fields.size());
        for (auto& f : fields) r.push_back(f.text);
        rows_.push_back(std::move(r));
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw numerical_error("cannot open " + path.string() + " for writing");
        auto emit = [&out](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out << ',';
                out << csv_escape(r[i]);
            }
            out << '\n';
        };
        emit(header_);
        for (auto& r : rows_) emit(r);
    }

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// One JSON object per line.
class JsonlWriter {
  public:
    void record(const nlohmann::json& j) { lines_.push_back(j.dump()); }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw numerical_error("cannot open " + path.string() + " for writing");
        for (auto& l : lines_) out << l << '\n';
    }

    bool empty() const { return lines_.empty(); }

  private:
    std::vector<std::string> lines_;
};

// Flag-gated dense dump: 16-byte header {8-byte magic, u32 rows, u32 cols},
// then row-major (re, im) float64 pairs, little-endian.
inline void write_matrix_dump(const std::filesystem::path& path, const MatrixXcd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw numerical_error("cannot open " + path.string() + " for writing");
    const char magic[8] = {'Q', 'D', 'L', 'G', 'M', 'T', 'X', '\0'};
    out.write(magic, 8);
    std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
    std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double re = m(r, c).real(), im = m(r, c).imag();
            out.write(reinterpret_cast<const char*>(&re), 8);
            out.write(reinterpret_cast<const char*>(&im), 8);
        }
    }
}

inline MatrixXcd read_matrix_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw numerical_error("cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (std::string(magic, 7) != "QDLGMTX") throw numerical_error("bad matrix dump magic");
    std::uint32_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 4);
    MatrixXcd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            double re = 0, im = 0;
            in.read(reinterpret_cast<char*>(&re), 8);
            in.read(reinterpret_cast<char*>(&im), 8);
            m(r, c) = Complex{re, im};
        }
    }
    if (!in) throw numerical_error("truncated matrix dump");
    return m;
}

}  // namespace qdlab
