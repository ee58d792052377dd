#include "weatherformer/flu/arima.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "weatherformer/util/least_squares.hpp"

namespace wf::flu {

namespace {

struct Params {
  double c = 0.0;
  std::vector<double> ar, ma;
};

// Conditional residuals: e_t = 0 for t < p.
std::vector<double> residuals(const std::vector<double>& w, const Params& m) {
  const std::size_t p = m.ar.size(), q = m.ma.size();
  std::vector<double> e(w.size(), 0.0);
  for (std::size_t t = p; t < w.size(); ++t) {
    double pred = m.c;
    for (std::size_t i = 0; i < p; ++i) pred += m.ar[i] * w[t - 1 - i];
    for (std::size_t j = 0; j < q && j < t; ++j) pred += m.ma[j] * e[t - 1 - j];
    e[t] = w[t] - pred;
  }
  return e;
}

double sse(const std::vector<double>& e, std::size_t from) {
  double s = 0.0;
  for (std::size_t t = from; t < e.size(); ++t) s += e[t] * e[t];
  return s;
}

std::vector<double> pack(const Params& m, bool with_c) {
  std::vector<double> b;
  if (with_c) b.push_back(m.c);
  b.insert(b.end(), m.ar.begin(), m.ar.end());
  b.insert(b.end(), m.ma.begin(), m.ma.end());
  return b;
}

Params unpack(const std::vector<double>& b, bool with_c, std::size_t p, std::size_t q) {
  Params m;
  std::size_t k = 0;
  if (with_c) m.c = b[k++];
  m.ar.assign(b.begin() + static_cast<long>(k), b.begin() + static_cast<long>(k + p));
  m.ma.assign(b.begin() + static_cast<long>(k + p), b.begin() + static_cast<long>(k + p + q));
  return m;
}

// Two-stage start: a long autoregression supplies residual proxies, then the
// series is regressed on its own lags and the lagged proxies.
Params hannan_rissanen(const std::vector<double>& w, std::size_t p, std::size_t q, bool with_c) {
  const std::size_t n = w.size();
  std::vector<double> proxy(n, 0.0);
  std::size_t start = p;
  if (q > 0) {
    const std::size_t m = std::min(std::max<std::size_t>(p + q + 4, 20), n / 3);
    const std::size_t rows = n - m;
    std::vector<double> x, y;
    for (std::size_t t = m; t < n; ++t) {
      if (with_c) x.push_back(1.0);
      for (std::size_t i = 1; i <= m; ++i) x.push_back(w[t - i]);
      y.push_back(w[t]);
    }
    const auto fit = util::least_squares(x, rows, m + (with_c ? 1 : 0), y);
    for (std::size_t t = m; t < n; ++t) {
      double pred = with_c ? fit.coefficients[0] : 0.0;
      for (std::size_t i = 1; i <= m; ++i) pred += fit.coefficients[i - (with_c ? 0 : 1)] * w[t - i];
      proxy[t] = w[t] - pred;
    }
    start = std::max(p, m + q);
  }
  const std::size_t cols = (with_c ? 1 : 0) + p + q;
  std::vector<double> x, y;
  for (std::size_t t = start; t < n; ++t) {
    if (with_c) x.push_back(1.0);
    for (std::size_t i = 1; i <= p; ++i) x.push_back(w[t - i]);
    for (std::size_t j = 1; j <= q; ++j) x.push_back(proxy[t - j]);
    y.push_back(w[t]);
  }
  if (y.size() <= cols) throw ArimaError("not enough observations for the initial regression");
  return unpack(util::least_squares(x, y.size(), cols, y).coefficients, with_c, p, q);
}

}  // namespace

void ArimaConfig::validate() const {
  if (d > 2) throw std::invalid_argument("arima d must be 0, 1 or 2");
}

bool ma_invertible(std::span<const double> ma) {
  std::size_t q = ma.size();
  while (q > 0 && ma[q - 1] == 0.0) --q;
  if (q == 0) return true;
  // roots of z^q + m1 z^(q-1) + ... + mq are the reciprocals of the roots
  // of 1 + m1 z + ... + mq z^q
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  for (std::size_t j = 0; j < q; ++j) companion(0, static_cast<Eigen::Index>(j)) = -ma[j];
  for (std::size_t i = 1; i < q; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  const auto eig = companion.eigenvalues();
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (std::abs(eig[i]) >= 1.0 - 1e-9) return false;
  }
  return true;
}

std::vector<double> difference(std::span<const double> x, std::size_t d) {
  std::vector<double> w(x.begin(), x.end());
  for (std::size_t k = 0; k < d; ++k) {
    if (w.size() < 2) throw ArimaError("series too short to difference");
    for (std::size_t t = 0; t + 1 < w.size(); ++t) w[t] = w[t + 1] - w[t];
    w.pop_back();
  }
  return w;
}

ArimaModel fit_arima(std::span<const double> series, const ArimaConfig& cfg) {
  cfg.validate();
  const std::size_t p = cfg.p, q = cfg.q;
  const bool with_c = cfg.d == 0;
  const std::size_t k = (with_c ? 1 : 0) + p + q;
  if (series.size() <= cfg.p + cfg.d + cfg.q || series.size() < cfg.d + p + 2 * k + 2) {
    throw ArimaError("arima needs a longer history: " + std::to_string(series.size()) + " values for p=" +
                     std::to_string(p) + " d=" + std::to_string(cfg.d) + " q=" + std::to_string(q));
  }
  for (double v : series) {
    if (!std::isfinite(v)) throw ArimaError("arima history contains non-finite values");
  }
  const auto w = difference(series, cfg.d);

  ArimaModel model;
  model.config = cfg;
  if (k == 0) {
    model.residual_variance = sse(w, 0) / static_cast<double>(w.size());
    return model;
  }

  Params cur = hannan_rissanen(w, p, q, with_c);
  if (!ma_invertible(cur.ma)) std::fill(cur.ma.begin(), cur.ma.end(), 0.0);
  auto e = residuals(w, cur);
  double cur_sse = sse(e, p);

  // Gauss-Newton on the conditional sum of squares
  const std::size_t n = w.size();
  std::size_t it = 0;
  for (; q > 0 && it < 100; ++it) {
    std::vector<double> jac(n * k, 0.0);  // d e_t / d beta, row-major
    for (std::size_t t = p; t < n; ++t) {
      double* row = jac.data() + t * k;
      std::size_t c = 0;
      if (with_c) row[c++] = -1.0;
      for (std::size_t i = 0; i < p; ++i) row[c++] = -w[t - 1 - i];
      for (std::size_t j = 0; j < q; ++j) row[c++] = t > j ? -e[t - 1 - j] : 0.0;
      for (std::size_t j = 0; j < q && j < t; ++j) {
        const double* prev = jac.data() + (t - 1 - j) * k;
        for (std::size_t a = 0; a < k; ++a) row[a] -= cur.ma[j] * prev[a];
      }
    }
    std::vector<double> rhs(e.begin() + static_cast<long>(p), e.end());
    const std::vector<double> design(jac.begin() + static_cast<long>(p * k), jac.end());
    // e(beta + delta) ~ e + J delta; minimise |e + J delta|
    auto delta = util::least_squares(design, n - p, k, rhs).coefficients;
    const auto base = pack(cur, with_c);
    bool improved = false;
    double step = 1.0;
    for (int halve = 0; halve < 30; ++halve, step *= 0.5) {
      auto trial_b = base;
      for (std::size_t a = 0; a < k; ++a) trial_b[a] -= step * delta[a];
      auto trial = unpack(trial_b, with_c, p, q);
      if (!ma_invertible(trial.ma)) continue;
      auto te = residuals(w, trial);
      const double ts = sse(te, p);
      if (ts < cur_sse) {
        improved = true;
        const double gain = (cur_sse - ts) / std::max(cur_sse, 1e-300);
        cur = std::move(trial);
        e = std::move(te);
        cur_sse = ts;
        if (gain < 1e-12) step = 0.0;
        break;
      }
    }
    if (!improved || step == 0.0) break;
  }
  if (!ma_invertible(cur.ma)) throw ArimaError("fitted moving-average part is not invertible");
  model.constant = cur.c;
  model.ar = std::move(cur.ar);
  model.ma = std::move(cur.ma);
  model.iterations = it;
  model.residual_variance = cur_sse / static_cast<double>(n - p);
  return model;
}

std::vector<double> ArimaModel::forecast(std::span<const double> history, std::size_t horizon) const {
  const std::size_t p = ar.size(), q = ma.size(), d = config.d;
  if (history.size() <= p + d) throw ArimaError("forecast history is shorter than p + d + 1");
  // keep the last value of every differencing level for integration
  std::vector<std::vector<double>> levels{std::vector<double>(history.begin(), history.end())};
  for (std::size_t k = 0; k < d; ++k) levels.push_back(difference(levels.back(), 1));
  std::vector<double> w = levels.back();
  Params m{constant, ar, ma};
  auto e = residuals(w, m);
  const std::size_t n = w.size();
  for (std::size_t h = 0; h < horizon; ++h) {
    const std::size_t t = n + h;
    double pred = constant;
    for (std::size_t i = 0; i < p; ++i) pred += ar[i] * w[t - 1 - i];
    for (std::size_t j = 0; j < q; ++j) pred += ma[j] * e[t - 1 - j];
    w.push_back(pred);
    e.push_back(0.0);
  }
  std::vector<double> out(w.begin() + static_cast<long>(n), w.end());
  for (std::size_t k = d; k-- > 0;) {
    double last = levels[k].back();
    for (auto& v : out) {
      last += v;
      v = last;
    }
  }
  return out;
}

std::vector<double> arima_fit_forecast(std::span<const double> history, const ArimaConfig& cfg, std::size_t horizon) {
  return fit_arima(history, cfg).forecast(history, horizon);
}

}  // namespace wf::flu
