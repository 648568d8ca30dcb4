#pragma once

#include <string>
#include <vector>

namespace cropmap {

// One regression observation: volume density against fresh biomass per
// hectare.
struct Sample {
  double e_v = 0.0;  // m3/ha
  double b = 0.0;    // kg/ha
  std::string source_id;
};

// Polynomial predictor b(e_v), coefficients in ascending powers of raw e_v.
struct PolyModel {
  int order = 1;  // 1 or 2
  std::vector<double> coefficients;  // order + 1 entries
};

struct FitReport {
  PolyModel model;
  double r_squared = 0.0;
  std::size_t n = 0;
  std::vector<double> residuals;  // b_i - predict(model, e_v_i), input order
  double condition = 0.0;         // of the scaled Vandermonde
  // Scaled-basis solution the raw coefficients were mapped from; kept for
  // diagnostics and optimality checks.
  double x_mean = 0.0;
  double x_scale = 1.0;
  std::vector<double> scaled_coefficients;
};

// Least squares on the centered-and-scaled abscissa, reported in raw form.
// Throws DomainError when order is not 1 or 2, when n < order + 1, or when
// there are fewer than order + 1 distinct e_v values.
FitReport fit_poly(const std::vector<Sample>& samples, int order);

double predict(const PolyModel& m, double e_v);

// 1 - SSres/SStot; may be negative. Throws DomainError for n < 2 or zero
// variance in b.
double r_squared(const PolyModel& m, const std::vector<Sample>& samples);

}  // namespace cropmap
