#pragma once

// Reference implementations the tests compare against. They share no code with
// the library: long-double series, brute-force search and explicit inverses.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// erf by its Maclaurin series in long double. Good to ~1e-15 for |x| <= 4.5.
inline long double erf_series(long double x) {
  long double sum = 0.0L, term = x;
  for (int n = 0; n < 400; ++n) {
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(add) < 1e-30L) break;
    term *= -x * x / (n + 1);
  }
  return 2.0L / std::sqrt(3.14159265358979323846264338327950288L) * sum;
}

inline double normal_cdf(double z) {
  return static_cast<double>(0.5L * (1.0L + erf_series(static_cast<long double>(z) / std::sqrt(2.0L))));
}

inline double entropy_bits(double p) {
  const long double q = p;
  if (q <= 0.0L || q >= 1.0L) return 0.0;
  return static_cast<double>(-(q * std::log2(q) + (1.0L - q) * std::log2(1.0L - q)));
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

/// S(f1, f2) for one pair (1 beats 2) with prior K = [[1+j, rho], [rho, 1+j]].
inline double single_pair_objective(double f1, double f2, double rho, double u, double jitter = 1e-6) {
  Eigen::Matrix2d K;
  K << 1 + jitter, rho, rho, 1 + jitter;
  const Eigen::Vector2d f(f1, f2);
  const double z = (f1 - f2) / u;
  // The series is only trusted for |z| <= 6; outside that use the tail expansions.
  double ll;
  if (z > 6) {
    ll = 0.0;
  } else if (z >= -6) {
    ll = std::log(normal_cdf(z));
  } else {
    ll = -0.5 * z * z - std::log(-z) - 0.5 * std::log(2 * M_PI) + std::log(1 - 1 / (z * z) + 3 / (z * z * z * z));
  }
  return ll - 0.5 * f.dot(K.inverse() * f);
}

/// Brute-force maximizer of a 2-D function: coarse grid, then repeated zoom.
inline Eigen::Vector2d grid_argmax(const std::function<double(double, double)>& s, double lo, double hi) {
  double cx = 0.5 * (lo + hi), cy = cx, half = 0.5 * (hi - lo);
  for (int round = 0; round < 40; ++round) {
    const int n = 40;
    double best = -INFINITY, bx = cx, by = cy;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        const double x = cx - half + 2 * half * i / n, y = cy - half + 2 * half * j / n;
        const double v = s(x, y);
        if (v > best) {
          best = v;
          bx = x;
          by = y;
        }
      }
    }
    cx = bx;
    cy = by;
    half *= 0.25;
  }
  return {cx, cy};
}

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = nd(rng);
  return A * A.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace oracle
