#include "benchtrack/rng.hpp"

#include <limits>

namespace benchtrack {
namespace detail {

// 128-strip normal ziggurat (Marsaglia & Tsang layout, 51-bit mantissa).
ZigguratTables::ZigguratTables() {
  const double m1 = 2251799813685248.0;  // 2^51
  double dn = 3.442619855899;
  double tn = dn;
  const double vn = 9.91256303526217e-03;

  double q = vn / std::exp(-0.5 * dn * dn);
  kn[0] = static_cast<std::uint64_t>((dn / q) * m1);
  kn[1] = 0;
  wn[0] = q / m1;
  wn[127] = dn / m1;
  fn[0] = 1.0;
  fn[127] = std::exp(-0.5 * dn * dn);
  for (int i = 126; i >= 1; --i) {
    dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
    kn[i + 1] = static_cast<std::uint64_t>((dn / tn) * m1);
    tn = dn;
    fn[i] = std::exp(-0.5 * dn * dn);
    wn[i] = dn / m1;
  }
}

const ZigguratTables& ziggurat_tables() {
  static const ZigguratTables tables;
  return tables;
}

}  // namespace detail

// Rejection branch: base-strip tail or wedge acceptance. Returns NaN to ask
// the caller to redraw.
double PathRng::slow_normal(std::int64_t hz, int iz) {
  const auto& z = detail::ziggurat_tables();
  const double r = 3.442619855899;
  if (iz == 0) {
    double x, y;
    do {
      x = -std::log(u01() + std::numeric_limits<double>::min()) / r;
      y = -std::log(u01() + std::numeric_limits<double>::min());
    } while (x * x > y + y);
    return hz > 0 ? r + x : -(r + x);
  }
  const double x = static_cast<double>(hz) * z.wn[iz];
  if (z.fn[iz] + u01() * (z.fn[iz - 1] - z.fn[iz]) < std::exp(-0.5 * x * x)) {
    return x;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace benchtrack
