#include "storagessm/numerics.hpp"

#include <boost/math/distributions/normal.hpp>

#include "storagessm/errors.hpp"

namespace storagessm {

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("normal_quantile: u must lie in (0, 1)");
  static const boost::math::normal_distribution<double> standard;
  // The lower tail is resolved more accurately, so reflect upper-tail values.
  if (u > 0.5) return -boost::math::quantile(boost::math::complement(standard, u));
  return boost::math::quantile(standard, u);
}

}  // namespace storagessm
