#pragma once

#include "cog/nn.hpp"
#include "cog/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cog {

inline constexpr double kMinLogTemperature = -3.0;
inline constexpr double kMaxLogTemperature = 3.0;

/// softmax(z / T), row-wise. Argmax per row is unchanged for any T > 0.
template <typename Derived>
MatrixX<typename Derived::Scalar> calibrate(const Eigen::MatrixBase<Derived>& logits, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  using Scalar = typename Derived::Scalar;
  return softmax_rows(logits / static_cast<Scalar>(temperature));
}

/// Mean negative log-likelihood of softmax(z / T) at the given labels (one per row).
double temperature_nll(const Matrix& logits, std::span<const int> labels, double temperature);

struct TemperatureFit {
  double temperature = 1.0;
  double nll = 0.0;          ///< at the fitted temperature
  double nll_at_one = 0.0;
  bool clamped = false;      ///< optimum at a search bound
  std::vector<std::string> warnings;
};

/// Minimizes validation NLL over log T in [-3, 3]: a 0.05-step grid, then
/// golden-section refinement to |d log T| < 1e-3. T = 1 is always a candidate,
/// so nll <= nll_at_one.
TemperatureFit fit_temperature(const Matrix& logits, std::span<const int> labels);

struct ReliabilityBin {
  double low = 0.0;
  double high = 0.0;
  Index count = 0;
  double confidence = 0.0;  ///< mean max-probability in the bin
  double accuracy = 0.0;
};

struct ReliabilityBins {
  std::vector<ReliabilityBin> bins;
  Index total = 0;
  double ece = 0.0;
};

/// Equal-width confidence bins on [0, 1]; confidence 1.0 falls in the last bin.
ReliabilityBins reliability(const Matrix& probs, std::span<const int> labels, int num_bins = 10);

/// bin_low,bin_high,count,confidence,accuracy
std::string reliability_csv(const ReliabilityBins& bins);
void write_reliability_csv(const std::filesystem::path& path, const ReliabilityBins& bins);

}  // namespace cog
