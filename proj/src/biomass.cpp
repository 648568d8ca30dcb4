#include "cropmap/biomass.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "cropmap/errors.hpp"

namespace cropmap {

double predict(const PolyModel& m, double e_v) {
  if (!std::isfinite(e_v)) throw DomainError("predict: e_v must be finite");
  double acc = 0.0;
  for (auto it = m.coefficients.rbegin(); it != m.coefficients.rend(); ++it)
    acc = acc * e_v + *it;
  return acc;
}

FitReport fit_poly(const std::vector<Sample>& samples, int order) {
  if (order != 1 && order != 2)
    throw DomainError("fit_poly: order must be 1 or 2");
  const std::size_t n = samples.size();
  const std::size_t k = static_cast<std::size_t>(order) + 1;
  if (n < k) throw DomainError("fit_poly: need at least order+1 samples");

  std::set<double> distinct;
  for (const auto& s : samples) {
    if (!std::isfinite(s.e_v) || !std::isfinite(s.b) || s.e_v < 0.0 ||
        s.b < 0.0)
      throw DomainError("fit_poly: samples must be finite and non-negative");
    distinct.insert(s.e_v);
  }
  if (distinct.size() < k)
    throw DomainError("fit_poly: need at least order+1 distinct e_v values");

  double mean = 0.0;
  for (const auto& s : samples) mean += s.e_v;
  mean /= double(n);
  double var = 0.0;
  for (const auto& s : samples) var += (s.e_v - mean) * (s.e_v - mean);
  const double scale = std::sqrt(var / double(n));

  Eigen::MatrixXd A(n, k);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (samples[i].e_v - mean) / scale;
    A(i, 0) = 1.0;
    A(i, 1) = u;
    if (order == 2) A(i, 2) = u * u;
    y(i) = samples[i].b;
  }

  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const double cond =
      svd.singularValues()(0) / svd.singularValues()(k - 1);

  FitReport r;
  r.n = n;
  r.condition = cond;
  r.x_mean = mean;
  r.x_scale = scale;
  r.scaled_coefficients.assign(c.data(), c.data() + k);

  // expand c0 + c1 u + c2 u^2 with u = (x - mean)/scale into powers of x
  r.model.order = order;
  const double inv = 1.0 / scale;
  if (order == 1) {
    r.model.coefficients = {c(0) - c(1) * mean * inv, c(1) * inv};
  } else {
    const double a2 = c(2) * inv * inv;
    r.model.coefficients = {c(0) - c(1) * mean * inv + a2 * mean * mean,
                            c(1) * inv - 2.0 * a2 * mean, a2};
  }

  double ss_res = 0.0, ss_tot = 0.0;
  double b_mean = 0.0;
  for (const auto& s : samples) b_mean += s.b;
  b_mean /= double(n);
  r.residuals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // evaluate on the scaled basis: numerically exact form of the fit
    const double u = (samples[i].e_v - mean) / scale;
    double p = c(0) + c(1) * u;
    if (order == 2) p += c(2) * u * u;
    const double res = samples[i].b - p;
    r.residuals.push_back(res);
    ss_res += res * res;
    ss_tot += (samples[i].b - b_mean) * (samples[i].b - b_mean);
  }
  r.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return r;
}

double r_squared(const PolyModel& m, const std::vector<Sample>& samples) {
  if (samples.size() < 2) throw DomainError("r_squared: need n >= 2");
  double b_mean = 0.0;
  for (const auto& s : samples) b_mean += s.b;
  b_mean /= double(samples.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& s : samples) {
    const double res = s.b - predict(m, s.e_v);
    ss_res += res * res;
    ss_tot += (s.b - b_mean) * (s.b - b_mean);
  }
  if (ss_tot <= 0.0)
    throw DomainError("r_squared: zero variance in biomass values");
  return 1.0 - ss_res / ss_tot;
}

}  // namespace cropmap
