#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace eigenprism::dist {

inline double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Two-sided critical value z*_{1 - alpha/2}.
inline double normal_critical(double alpha) { return normal_quantile(1.0 - 0.5 * alpha); }

inline double chi2_quantile(double dof, double p) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

inline double chi2_pdf(double dof, double x) {
  return boost::math::pdf(boost::math::chi_squared_distribution<double>(dof), x);
}

}  // namespace eigenprism::dist
