#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace wf::flu {

struct ArimaConfig {
  std::size_t p = 54;
  std::size_t d = 1;
  std::size_t q = 1;
  void validate() const;
};

class ArimaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ARMA(p, q) on the d-times differenced series, fitted by conditional least
/// squares. A constant is estimated only when d = 0.
struct ArimaModel {
  ArimaConfig config;
  double constant = 0.0;
  std::vector<double> ar;
  std::vector<double> ma;
  double residual_variance = 0.0;
  std::size_t iterations = 0;

  /// Forecasts `horizon` values after the end of `history` (original scale),
  /// with residuals rebuilt from the history and future shocks set to zero.
  std::vector<double> forecast(std::span<const double> history, std::size_t horizon) const;
};

/// Throws ArimaError when the history is too short or the fitted moving
/// average part is not invertible.
ArimaModel fit_arima(std::span<const double> series, const ArimaConfig& cfg);

std::vector<double> arima_fit_forecast(std::span<const double> history, const ArimaConfig& cfg, std::size_t horizon);

/// True when all roots of 1 + m1 z + ... + mq z^q lie outside the unit circle.
bool ma_invertible(std::span<const double> ma);

std::vector<double> difference(std::span<const double> x, std::size_t d);

}  // namespace wf::flu
