#include "cog/calibration.hpp"

#include "cog/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cog {

double temperature_nll(const Matrix& logits, std::span<const int> labels, double temperature) {
  if (static_cast<Index>(labels.size()) != logits.rows()) throw ValidationError("one label per logit row required");
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const Eigen::RowVectorXd z = logits.row(r) / temperature;
    const double shift = z.maxCoeff();
    total += std::log((z.array() - shift).exp().sum()) + shift - z(labels[r]);
  }
  return total / static_cast<double>(labels.size());
}

TemperatureFit fit_temperature(const Matrix& logits, std::span<const int> labels) {
  TemperatureFit fit;
  if (labels.empty()) {
    fit.warnings.push_back("empty validation set; temperature left at 1");
    return fit;
  }
  if (!logits.allFinite()) throw ValidationError("temperature fitting needs finite logits");
  auto nll = [&](double log_t) { return temperature_nll(logits, labels, std::exp(log_t)); };

  constexpr double step = 0.05;
  constexpr int half = 60;  // grid covers [-3, 3]
  double best_log = 0.0;
  double best = nll(0.0);
  fit.nll_at_one = best;
  for (int i = -half; i <= half; ++i) {
    const double lt = step * i;
    const double v = nll(lt);
    if (v < best) {
      best = v;
      best_log = lt;
    }
  }

  double lo = std::max(kMinLogTemperature, best_log - step);
  double hi = std::min(kMaxLogTemperature, best_log + step);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - ratio * (hi - lo);
  double b = lo + ratio * (hi - lo);
  double fa = nll(a);
  double fb = nll(b);
  while (hi - lo > 1e-4) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - ratio * (hi - lo);
      fa = nll(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + ratio * (hi - lo);
      fb = nll(b);
    }
  }
  const double refined = 0.5 * (lo + hi);
  const double refined_nll = nll(refined);
  if (refined_nll < best) {
    best = refined_nll;
    best_log = refined;
  }
  fit.temperature = std::exp(best_log);
  fit.nll = best;
  fit.clamped = best_log <= kMinLogTemperature + 1e-3 || best_log >= kMaxLogTemperature - 1e-3;
  if (fit.clamped) fit.warnings.push_back("temperature optimum at search bound");
  return fit;
}

ReliabilityBins reliability(const Matrix& probs, std::span<const int> labels, int num_bins) {
  if (num_bins < 2) throw ValidationError("reliability needs at least two bins");
  if (static_cast<Index>(labels.size()) != probs.rows()) throw ValidationError("one label per probability row required");
  ReliabilityBins out;
  out.bins.resize(static_cast<std::size_t>(num_bins));
  for (int b = 0; b < num_bins; ++b) {
    out.bins[b].low = static_cast<double>(b) / num_bins;
    out.bins[b].high = static_cast<double>(b + 1) / num_bins;
  }
  for (Index r = 0; r < probs.rows(); ++r) {
    Index pred = 0;
    const double conf = probs.row(r).maxCoeff(&pred);
    const int b = std::clamp(static_cast<int>(std::floor(conf * num_bins)), 0, num_bins - 1);
    auto& bin = out.bins[b];
    ++bin.count;
    bin.confidence += conf;
    bin.accuracy += pred == labels[r] ? 1.0 : 0.0;
  }
  out.total = probs.rows();
  for (auto& bin : out.bins) {
    if (bin.count == 0) continue;
    bin.confidence /= static_cast<double>(bin.count);
    bin.accuracy /= static_cast<double>(bin.count);
    out.ece += static_cast<double>(bin.count) / static_cast<double>(out.total) * std::abs(bin.accuracy - bin.confidence);
  }
  return out;
}

std::string reliability_csv(const ReliabilityBins& bins) {
  std::ostringstream out;
  out << "bin_low,bin_high,count,confidence,accuracy\n";
  for (const auto& b : bins.bins)
    out << io::format_double(b.low) << ',' << io::format_double(b.high) << ',' << b.count << ','
        << io::format_double(b.confidence) << ',' << io::format_double(b.accuracy) << '\n';
  return out.str();
}

void write_reliability_csv(const std::filesystem::path& path, const ReliabilityBins& bins) {
  io::write_text(path, reliability_csv(bins));
}

}  // namespace cog
