#include "latdyn/csv_io.hpp"
#include "latdyn/errors.hpp"
#include "latdyn/random.hpp"

#include "doctest.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>

using namespace latdyn;

TEST_CASE("doubles survive a text round trip bit for bit") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    // Random bit patterns cover subnormals and extreme exponents.
    std::uint64_t bits = 0;
    for (int k = 0; k < 4; ++k) bits = (bits << 16) ^ static_cast<std::uint64_t>(rng.uniform() * 65536.0);
    const double v = std::bit_cast<double>(bits);
    if (!std::isfinite(v)) continue;
    double back = 0.0;
    REQUIRE(csv::parse_double(csv::format_double(v), back));
    CHECK(std::bit_cast<std::uint64_t>(back) == bits);
  }
  double back = 0.0;
  REQUIRE(csv::parse_double(csv::format_double(0.1), back));
  CHECK(back == 0.1);
  CHECK(csv::format_double(0.5) == "0.5");
}

TEST_CASE("parse_double rejects partial fields") {
  double v = 0.0;
  CHECK_FALSE(csv::parse_double("", v));
  CHECK_FALSE(csv::parse_double("1.5x", v));
  CHECK_FALSE(csv::parse_double("abc", v));
  CHECK(csv::parse_double(" +2.5 ", v));
  CHECK(v == 2.5);
  CHECK(csv::parse_double("-1e-3", v));
  CHECK(v == -1e-3);
}

TEST_CASE("split_fields keeps empty fields and trims blanks") {
  const auto f = csv::split_fields(" a, b ,,c\r");
  REQUIRE(f.size() == 4);
  CHECK(f[0] == "a");
  CHECK(f[1] == "b");
  CHECK(f[2].empty());
  CHECK(f[3] == "c");
}

TEST_CASE("tables round trip with comments") {
  Eigen::MatrixXd m(2, 3);
  m << 1.0, -2.25, 1e-300, 0.0, 3.0, 1.0 / 3.0;
  const std::string text = csv::format_table({"a", "b", "c"}, m, {"note one", "note two"});
  CHECK(text.rfind("# note one\n# note two\na,b,c\n", 0) == 0);
  const csv::Table t = csv::parse_table(text);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.values == m);
  CHECK(t.column("b") == 1);
  CHECK(t.column("zz") == -1);
}

TEST_CASE("malformed tables report line and column") {
  try {
    csv::parse_table("a,b\n1,2\n3,oops\n");
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
  CHECK_THROWS_AS(csv::parse_table("a,b\n1,2,3\n"), InputError);
  CHECK_THROWS_AS(csv::parse_table("# only comments\n"), InputError);
}

TEST_CASE("files are written with parent directories and read back") {
  const auto dir = std::filesystem::temp_directory_path() / "latdyn_csv_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  csv::write_file(dir / "x.txt", "hello\n");
  CHECK(csv::read_file(dir / "x.txt") == "hello\n");
  CHECK_THROWS_AS(csv::read_file(dir / "missing.txt"), InputError);
  std::filesystem::remove_all(dir.parent_path());
}
