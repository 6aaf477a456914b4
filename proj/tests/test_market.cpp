#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "matchlab/csv.hpp"
#include "matchlab/market.hpp"
#include "matchlab/rng.hpp"

using namespace matchlab;

namespace {

MarketInstance two_by_two() {
  MarketInstance m;
  m.students = {{1, 0.2, {1, 2}}, {2, 0.9, {2, 1}}};
  m.programs = {{1, 1}, {2, 1}};
  m.rankings = {{1, {2, 1}}, {2, {1, 2}}};
  return m;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("matchlab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("market_core") {
  TEST_CASE("well-formed market has no violations") { CHECK(validate_market(two_by_two()).empty()); }

  TEST_CASE("ranking a non-applicant is reported once") {
    auto m = two_by_two();
    m.students.push_back({3, 0.5, {2}});
    m.rankings[1].push_back(3);
    auto v = validate_market(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].entity == "ranking");
    CHECK(v[0].rule.find("student 3") != std::string::npos);
  }

  TEST_CASE("duplicate application is reported once") {
    auto m = two_by_two();
    m.students[0].applications = {1, 1, 2};
    CHECK(validate_market(m).size() == 1);
  }

  TEST_CASE("validation never throws on garbage") {
    MarketInstance m;
    m.students = {{1, 7.0, {}}, {1, -1.0, {9, 9}}};
    m.programs = {{4, -2}, {4, 1}};
    m.rankings = {{5, {1, 1, 8}}};
    std::vector<Violation> v;
    CHECK_NOTHROW(v = validate_market(m));
    CHECK(v.size() >= 7);
  }

  TEST_CASE("market csv round trip") {
    auto m = two_by_two();
    auto dir = scratch_dir("market_rt");
    write_market_csv(dir, m);
    auto back = read_market_csv(dir);
    CHECK(back.rankings == m.rankings);
    REQUIRE(back.students.size() == 2);
    CHECK(back.students[1].applications == m.students[1].applications);
    CHECK(back.students[0].abitur == m.students[0].abitur);
    CHECK(back.programs[1].capacity == 1);
  }

  TEST_CASE("ties in rankings csv are rejected") {
    auto dir = scratch_dir("market_tie");
    write_market_csv(dir, two_by_two());
    write_csv(dir / "rankings.csv", {{"program_id", "rank", "student_id"}, {{"1", "1", "2"}, {"1", "1", "1"}}});
    CHECK_THROWS_AS(read_market_csv(dir), InputError);
  }

  TEST_CASE("format_double round trips exactly") {
    for (double x : {0.1, 1.0 / 3, 3339.0 / 65536, -2.5e-300, 1e17})
      CHECK(parse_double(format_double(x)) == x);
  }

  TEST_CASE("rational constants convert at use") {
    Rational k{3339, 65536};
    CHECK(k.value() == 3339.0 / 65536);
  }

  TEST_CASE("gumbel inverse cdf") {
    CHECK(gumbel_from_uniform(std::exp(-1.0)) == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("gumbel moments over 1e6 draws") {
    RngStream s(42, {7});
    const int n = 1'000'000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      double g = gumbel_draw(s);
      sum += g;
      sq += g * g;
    }
    double mean = sum / n, var = sq / n - mean * mean;
    CHECK(std::abs(mean - 0.5772156649) < 0.01);
    CHECK(std::abs(var - std::numbers::pi * std::numbers::pi / 6) < 0.02);
  }

  TEST_CASE("same key replays the same sequence") {
    RngStream a(5, {1, 2}), b(5, {1, 2});
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    CHECK(RngStream(5).fork(1).fork(2).next_u64() == RngStream(5, {1, 2}).next_u64());
  }

  TEST_CASE("sibling streams are uncorrelated") {
    RngStream root(99);
    RngStream a = root.fork(1), b = root.fork(2);
    const int n = 100'000;
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
      double x = a.uniform(), y = b.uniform();
      sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
    }
    double cov = sab / n - sa / n * sb / n;
    double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
    CHECK(std::abs(corr) < 0.01);
  }

  TEST_CASE("arrival and belief preconditions") {
    OfferArrival o{2, {1, 1}};
    CHECK_THROWS_AS(o.check(), InputError);
    OfferArrival ok{2, {3, 1}};
    CHECK_NOTHROW(ok.check());
    CHECK(ok.first_learning_period() == 1);
    CHECK(OfferArrival::none(2, 2).first_learning_period() == 2);
    BeliefVector p{{0.5, 1.2}};
    CHECK_THROWS_AS(p.check(), InputError);
  }
}
