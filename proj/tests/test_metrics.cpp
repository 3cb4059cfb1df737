#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "dsfacto/metrics.hpp"

using namespace dsfacto;

TEST_CASE("rmse") {
  std::vector<double> a{1.0, 2.0, 3.0};
  CHECK(rmse(a, a) == 0.0);

  std::vector<double> zeros{0.0, 0.0}, labels{3.0, 4.0};
  CHECK(rmse(zeros, labels) == doctest::Approx(3.5355339059327376));

  std::vector<double> one{2.0}, lab{5.5};
  CHECK(rmse(one, lab) == doctest::Approx(3.5));

  CHECK_THROWS_AS(rmse({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(rmse(a, one), std::invalid_argument);
}

TEST_CASE("accuracy") {
  std::vector<double> y{1.0, -1.0, 1.0, -1.0};
  CHECK(accuracy(y, y) == 1.0);

  std::vector<double> flipped{-1.0, 1.0, -1.0, 1.0};
  CHECK(accuracy(flipped, y) == 0.0);

  std::vector<double> three{1.0, -1.0, 1.0, 1.0};
  CHECK(accuracy(three, y) == doctest::Approx(0.75));

  std::vector<double> bad{0.5, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(accuracy(bad, y), std::invalid_argument);
  CHECK_THROWS_AS(accuracy({}, {}), std::invalid_argument);
}

TEST_CASE("rmse is nonnegative and accuracy stays in [0, 1]") {
  std::mt19937_64 rng(83);
  std::normal_distribution<double> n(0.0, 3.0);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t len = 1 + trial % 17;
    std::vector<double> preds(len), labels(len), sp(len), sl(len);
    for (std::size_t i = 0; i < len; ++i) {
      preds[i] = n(rng);
      labels[i] = n(rng);
      sp[i] = coin(rng) ? 1.0 : -1.0;
      sl[i] = coin(rng) ? 1.0 : -1.0;
    }
    CHECK(rmse(preds, labels) >= 0.0);
    double acc = accuracy(sp, sl);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
}

TEST_CASE("write_trace format") {
  TrainTrace trace;
  std::ostringstream empty;
  write_trace(trace, empty);
  CHECK(empty.str() == "epoch,objective,elapsed_secs,train_metric,test_metric\n");

  TraceRow r1{1, 0.523811437, 0.0123456, 0.89301, 0.9012};
  TraceRow r2{2, 0.41, 0.025, 0.91, std::nullopt};
  trace = {r1, r2};
  std::ostringstream out;
  write_trace(trace, out);
  std::string text = out.str();

  // 3 lines, LF endings, empty test field on the last row
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.find("\r") == std::string::npos);
  CHECK(text.find("1,0.523811,0.0123456,0.89301,0.9012\n") != std::string::npos);
  CHECK(text.find("2,0.41,0.025,0.91,\n") != std::string::npos);
}

TEST_CASE("write_trace values round-trip at 6 significant digits") {
  TrainTrace trace{{3, 0.123456789, 1.23456789, 987.654321, 0.000123456789}};
  std::ostringstream out;
  write_trace(trace, out);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  int epoch;
  double obj, el, tr, te;
  REQUIRE(std::sscanf(row.c_str(), "%d,%lf,%lf,%lf,%lf", &epoch, &obj, &el, &tr, &te) == 5);
  CHECK(epoch == 3);
  CHECK(obj == doctest::Approx(0.123456789).epsilon(1e-6));
  CHECK(el == doctest::Approx(1.23456789).epsilon(1e-6));
  CHECK(tr == doctest::Approx(987.654321).epsilon(1e-6));
  CHECK(te == doctest::Approx(0.000123456789).epsilon(1e-6));
}
