#include "cog/calibration.hpp"
#include "cog/models.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cog;

namespace {

/// Logits with labels drawn from softmax(logits / true_temperature).
void sample_problem(Index n, Index classes, double true_temperature, Seed seed, Matrix& logits,
                    std::vector<int>& labels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 2.0);
  logits.resize(n, classes);
  for (Index i = 0; i < logits.size(); ++i) logits.data()[i] = normal(rng);
  const Matrix probs = calibrate(logits, true_temperature);
  labels.clear();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    double u = unit(rng), acc = 0.0;
    int y = static_cast<int>(classes - 1);
    for (Index c = 0; c < classes; ++c) {
      acc += probs(i, c);
      if (u < acc) {
        y = static_cast<int>(c);
        break;
      }
    }
    labels.push_back(y);
  }
}

Matrix one_hot_confidence(const std::vector<double>& conf) {
  // Two-class rows with max-probability conf[i] on class 0.
  Matrix p(static_cast<Index>(conf.size()), 2);
  for (std::size_t i = 0; i < conf.size(); ++i) p.row(static_cast<Index>(i)) << conf[i], 1.0 - conf[i];
  return p;
}

}  // namespace

TEST_CASE("fit_temperature: recovers T near 1 on calibrated logits") {
  Matrix logits;
  std::vector<int> labels;
  sample_problem(20000, 4, 1.0, 1, logits, labels);
  const TemperatureFit fit = fit_temperature(logits, labels);
  CHECK(std::abs(fit.temperature - 1.0) <= 0.05);
  CHECK_FALSE(fit.clamped);
  CHECK(fit.nll <= fit.nll_at_one);
}

TEST_CASE("fit_temperature: recovers a planted temperature") {
  Matrix logits;
  std::vector<int> labels;
  sample_problem(20000, 4, 2.5, 2, logits, labels);
  const TemperatureFit fit = fit_temperature(logits, labels);
  CHECK(std::abs(fit.temperature - 2.5) <= 0.15);
  CHECK(fit.nll < fit.nll_at_one);
}

TEST_CASE("fit_temperature: search bounds and empty input") {
  SUBCASE("every label wrong: T pushed to the upper bound") {
    Matrix logits(4, 2);
    logits << 5, 0, 5, 0, 0, 5, 0, 5;
    const std::vector<int> labels{1, 1, 0, 0};
    const TemperatureFit fit = fit_temperature(logits, labels);
    CHECK(fit.clamped);
    CHECK(fit.temperature == doctest::Approx(std::exp(kMaxLogTemperature)).epsilon(1e-2));
    CHECK(fit.warnings.size() == 1);
  }
  SUBCASE("every label right: T pushed to the lower bound") {
    Matrix logits(2, 2);
    logits << 1, 0, 0, 1;
    const std::vector<int> labels{0, 1};
    const TemperatureFit fit = fit_temperature(logits, labels);
    CHECK(fit.clamped);
    CHECK(fit.temperature == doctest::Approx(std::exp(kMinLogTemperature)).epsilon(1e-2));
  }
  SUBCASE("empty validation set") {
    const TemperatureFit fit = fit_temperature(Matrix(0, 3), std::vector<int>{});
    CHECK(fit.temperature == 1.0);
    CHECK(fit.warnings.size() == 1);
  }
}

TEST_CASE("temperature NLL: scaling identity and optimality over random problems") {
  for (Seed seed = 10; seed < 20; ++seed) {
    Matrix logits;
    std::vector<int> labels;
    sample_problem(200, 3, 0.5 + 0.3 * static_cast<double>(seed - 10), seed, logits, labels);
    for (double c : {0.5, 2.0, 7.0})
      for (double t : {0.3, 1.0, 4.0})
        CHECK(temperature_nll(c * logits, labels, c * t) == doctest::Approx(temperature_nll(logits, labels, t)));
    const TemperatureFit fit = fit_temperature(logits, labels);
    CHECK(fit.nll <= fit.nll_at_one + 1e-12);
    CHECK(fit.nll_at_one == doctest::Approx(temperature_nll(logits, labels, 1.0)));
    // Neighbours of the optimum in log space are no better (beyond refinement precision).
    for (double step : {-0.01, 0.01}) {
      const double t = fit.temperature * std::exp(step);
      if (std::log(t) > kMinLogTemperature && std::log(t) < kMaxLogTemperature)
        CHECK(temperature_nll(logits, labels, t) >= fit.nll - 1e-9);
    }
  }
}

TEST_CASE("calibrate: argmax invariance and validity") {
  Matrix logits;
  std::vector<int> labels;
  sample_problem(300, 5, 1.0, 3, logits, labels);
  const auto ref = argmax_rows(logits);
  for (double t : {0.05, 0.5, 1.0, 3.0, 20.0}) {
    const Matrix p = calibrate(logits, t);
    CHECK(argmax_rows(p) == ref);
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(calibrate(logits, 0.0), ValidationError);
  CHECK_THROWS_AS(calibrate(logits, -1.0), ValidationError);
}

TEST_CASE("reliability: ECE worked examples") {
  SUBCASE("confident and correct") {
    const ReliabilityBins r = reliability(one_hot_confidence({1.0, 1.0, 1.0}), std::vector<int>{0, 0, 0});
    CHECK(r.ece == doctest::Approx(0.0));
    CHECK(r.bins.back().count == 3);
  }
  SUBCASE("0.8 confidence with 80 % accuracy") {
    std::vector<double> conf(10, 0.85);
    const std::vector<int> labels{0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
    const ReliabilityBins r = reliability(one_hot_confidence(conf), labels);
    CHECK(r.bins[8].count == 10);
    CHECK(r.ece == doctest::Approx(0.05));
    const ReliabilityBins exact = reliability(one_hot_confidence(std::vector<double>(10, 0.8)), labels);
    CHECK(exact.ece == doctest::Approx(0.0));
  }
  SUBCASE("0.9 confidence with 60 % accuracy") {
    std::vector<double> conf(10, 0.9);
    const std::vector<int> labels{0, 0, 0, 0, 0, 0, 1, 1, 1, 1};
    const ReliabilityBins r = reliability(one_hot_confidence(conf), labels);
    CHECK(r.ece == doctest::Approx(0.3));
  }
}

TEST_CASE("reliability: bin bookkeeping") {
  Matrix logits;
  std::vector<int> labels;
  sample_problem(500, 3, 1.0, 4, logits, labels);
  const ReliabilityBins r = reliability(calibrate(logits, 1.0), labels, 15);
  CHECK(r.bins.size() == 15);
  CHECK(r.total == 500);
  Index sum = 0;
  double ece = 0.0;
  for (const auto& b : r.bins) {
    sum += b.count;
    CHECK(b.high - b.low == doctest::Approx(1.0 / 15.0));
    if (b.count > 0) {
      CHECK(b.confidence >= b.low - 1e-12);
      CHECK(b.confidence <= b.high + 1e-12);
    }
    ece += static_cast<double>(b.count) / 500.0 * std::abs(b.accuracy - b.confidence);
  }
  CHECK(sum == 500);
  CHECK(r.ece == doctest::Approx(ece));
  CHECK(r.ece >= 0.0);
  CHECK(r.ece <= 1.0);
  CHECK_THROWS_AS(reliability(calibrate(logits, 1.0), labels, 1), ValidationError);
}

TEST_CASE("reliability_csv: header and row count") {
  const ReliabilityBins r = reliability(one_hot_confidence({0.9, 0.6}), std::vector<int>{0, 1}, 4);
  const std::string csv = reliability_csv(r);
  CHECK(csv.rfind("bin_low,bin_high,count,confidence,accuracy\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("calibrate: unit temperature is plain softmax, huge temperature is uniform") {
  Matrix logits(2, 3);
  logits << 1.0, 2.0, 3.0, -5.0, 0.0, 5.0;
  CHECK((calibrate(logits, 1.0) - softmax_rows(logits)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((calibrate(logits, 1e6).array() - 1.0 / 3.0).abs().maxCoeff() < 1e-5);
}

TEST_CASE("reliability: half confidence with half accuracy has zero ECE") {
  const ReliabilityBins r = reliability(one_hot_confidence(std::vector<double>(4, 0.5)), std::vector<int>{0, 1, 0, 1});
  CHECK(r.ece == doctest::Approx(0.0));
}

TEST_CASE("fit_temperature: scaling the logits scales the fitted temperature") {
  Matrix logits;
  std::vector<int> labels;
  sample_problem(5000, 3, 1.5, 9, logits, labels);
  const double base = fit_temperature(logits, labels).temperature;
  const double scaled = fit_temperature(2.0 * logits, labels).temperature;
  CHECK(scaled == doctest::Approx(2.0 * base).epsilon(1e-3));
}
