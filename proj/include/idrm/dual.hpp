#pragma once

#include <array>
#include <cmath>

namespace idrm {

// First-order dual scalar with a fixed-capacity derivative vector. Used to
// differentiate pointwise loss densities with respect to the field value and
// spatial gradient slots (at most n_components*(1+dim) of them).
struct Ad {
  static constexpr int kMax = 12;

  double v = 0.0;
  int n = 0;
  std::array<double, kMax> d{};

  Ad() = default;
  Ad(double value, int width) : v(value), n(width) { d.fill(0.0); }

  static Ad constant(double value, int width) { return Ad(value, width); }
  static Ad variable(double value, int width, int index, double seed = 1.0) {
    Ad a(value, width);
    a.d[index] = seed;
    return a;
  }
};

inline Ad operator+(const Ad& a, const Ad& b) {
  Ad r(a.v + b.v, a.n);
  for (int i = 0; i < r.n; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
inline Ad operator-(const Ad& a, const Ad& b) {
  Ad r(a.v - b.v, a.n);
  for (int i = 0; i < r.n; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
inline Ad operator-(const Ad& a) {
  Ad r(-a.v, a.n);
  for (int i = 0; i < r.n; ++i) r.d[i] = -a.d[i];
  return r;
}
inline Ad operator*(const Ad& a, const Ad& b) {
  Ad r(a.v * b.v, a.n);
  for (int i = 0; i < r.n; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
inline Ad operator+(const Ad& a, double c) {
  Ad r = a;
  r.v += c;
  return r;
}
inline Ad operator+(double c, const Ad& a) { return a + c; }
inline Ad operator-(const Ad& a, double c) { return a + (-c); }
inline Ad operator-(double c, const Ad& a) { return -a + c; }
inline Ad operator*(const Ad& a, double c) {
  Ad r(a.v * c, a.n);
  for (int i = 0; i < r.n; ++i) r.d[i] = a.d[i] * c;
  return r;
}
inline Ad operator*(double c, const Ad& a) { return a * c; }
inline Ad operator/(const Ad& a, double c) { return a * (1.0 / c); }

// x^e for real exponent. The derivative at x == 0 is defined as 0; callers
// only hit that case with integrands of the form |g|^e whose true one-sided
// derivative vanishes for e > 1.
inline Ad pow(const Ad& a, double e) {
  Ad r(std::pow(a.v, e), a.n);
  if (a.v == 0.0) return r;
  const double f = e * std::pow(a.v, e - 1.0);
  for (int i = 0; i < r.n; ++i) r.d[i] = f * a.d[i];
  return r;
}

inline Ad sqrt(const Ad& a) { return pow(a, 0.5); }

}  // namespace idrm
