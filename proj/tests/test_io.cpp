#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "hypar/errors.hpp"
#include "hypar/io.hpp"

using namespace hypar;

TEST_CASE("numbers round trip through their shortest text", "[io][property]") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int i = 0; i < 20000; ++i) {
        const auto u = bits(rng);
        double x;
        std::memcpy(&x, &u, sizeof x);
        if (!std::isfinite(x)) continue;
        CHECK(parse_number(format_number(x)) == x);
    }
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(-2.5e-7) == "-2.5e-07");
    CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(std::isnan(parse_number("nan")));
    CHECK(parse_number("inf") == std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(parse_number("1.5x"), DomainError);
    CHECK_THROWS_AS(parse_number(""), DomainError);
}

TEST_CASE("sha256 known vectors", "[io]") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("csv tables and files", "[io]") {
    const Table t{{"a", "b"}, {{1.0, 0.25}, {-3.0, std::numeric_limits<double>::quiet_NaN()}}};
    CHECK(t.csv() == "a,b\n1,0.25\n-3,nan\n");

    const auto dir = std::filesystem::temp_directory_path() / "hypar_test_io" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    const auto file = dir / "t.csv";
    write_text(file, t.csv());
    CHECK(read_text(file) == t.csv());
    CHECK(sha256_file(file) == sha256_hex(t.csv()));
    std::filesystem::remove_all(dir.parent_path());
    CHECK_THROWS(read_text(file));
}

TEST_CASE("intensity tables", "[io]") {
    IntensityMap m;
    m.metric = Metric::transmission;
    m.frequencies = {0.9, 1.1};
    m.amplitudes = {0.01};
    m.cells.resize(2);
    m.cells[0].value = 2.0;
    m.cells[0].converged = true;
    m.cells[1].value = 3.0;
    const Table dense = intensity_dense_table(m);
    REQUIRE(dense.rows.size() == 1);
    CHECK(dense.rows[0] == std::vector<double>{0.01, 2.0, 3.0});
    const Table lng = intensity_long_table(m);
    REQUIRE(lng.rows.size() == 2);
    CHECK(lng.rows[1][0] == 1.1);
    CHECK(lng.rows[1][2] == 3.0);
    CHECK(lng.rows[0][3] == 1.0);
    CHECK(lng.rows[1][3] == 0.0);
}
