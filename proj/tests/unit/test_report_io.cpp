#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "qdlab/report_io.hpp"

using namespace qdlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("format_double round-trips and is minimal") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5e-300) == "-2.5e-300");
    double x = 0.1 + 0.2;
    CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("csv escaping follows RFC-4180 quoting") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("csv writer emits header plus rows with LF endings") {
    fs::path tmp = fs::temp_directory_path() / "qdlab_test.csv";
    CsvWriter w({"n", "value"});
    w.row({1, 0.5});
    w.row({2, -1.25});
    w.write(tmp);
    CHECK(slurp(tmp) == "n,value\n1,0.5\n2,-1.25\n");
    fs::remove(tmp);
}

TEST_CASE("jsonl writer emits one object per line") {
    fs::path tmp = fs::temp_directory_path() / "qdlab_test.jsonl";
    JsonlWriter w;
    w.record({{"a", 1}});
    w.record({{"b", 2.5}});
    w.write(tmp);
    CHECK(slurp(tmp) == "{\"a\":1}\n{\"b\":2.5}\n");
    fs::remove(tmp);
}

TEST_CASE("binary matrix dump round-trips") {
    fs::path tmp = fs::temp_directory_path() / "qdlab_test.gmtx";
    MatrixXcd m(2, 3);
    m << Complex{1.0, -2.0}, Complex{0.0, 0.5}, Complex{3.25, 0.0},
         Complex{-1e-30, 1e30}, Complex{0.0, 0.0}, Complex{7.0, -7.0};
    write_matrix_dump(tmp, m);
    CHECK(fs::file_size(tmp) == 16 + 2 * 3 * 16);
    MatrixXcd back = read_matrix_dump(tmp);
    CHECK(back.rows() == 2);
    CHECK(back.cols() == 3);
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
    fs::remove(tmp);
}
