#pragma once

#include "lamewave/fem.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace lamewave {

// Which constant multiplies r_k^2 / r^2 (and sin r_k / r) in the ball's
// closed forms: 2 lambda0 + lambda1 (`paper`) or lambda0 + lambda1
// (`lambda_sum`).
enum class Convention { paper, lambda_sum };

Convention parse_convention(std::string_view name);  // throws InputError
std::string to_string(Convention c);
double convention_constant(Convention c, const MaterialParams& params);

// j(x) = sin x / x^2 - cos x / x (spherical Bessel function of order one),
// with its series near 0.
double spherical_j1(double x);
double spherical_j0(double x);
// Bessel functions of the first kind; series for |x| <= 12, Hankel
// asymptotics beyond.
double bessel_j0(double x);
double bessel_j1(double x);

// First `count` positive roots of spherical_j1, the k-th in ((k-1/2)pi, (k+1/2)pi).
std::vector<double> bessel_roots(int count);
// First `count` positive roots of bessel_j1.
std::vector<double> bessel_j1_roots(int count);

// Closed-form overdetermined Dirichlet-Lame mode of the ball of radius r:
//   psi_k(y) = (r^2 sin(r_k|y|/r) / (r_k^2 |y|^3) - r cos(r_k|y|/r) / (r_k |y|^2)) y
//            = j(r_k |y| / r) y / |y|,
// mu_k = C r_k^2 / r^2, q_k = C sin(r_k) / r.
struct BallMode {
  int k = 1;
  double root = 0.0;
  double radius = 1.0;
  Convention convention = Convention::lambda_sum;
  double constant = 0.0;
  double mu = 0.0;
  double q = 0.0;

  Point psi(const Point& y) const;
};

BallMode ball_mode(int k, double radius, const MaterialParams& params, Convention convention);

// 2D witness from the Neumann disk mode u(y) = J0(s |y| / r), J1(s) = 0:
// V = grad u, mu_S = (s/r)^2, mu = lambda mu_S, c = J0(s), q = -lambda mu_S c.
struct DiskMode {
  int k = 1;
  double root = 0.0;
  double radius = 1.0;
  double mu_s = 0.0;
  double mu = 0.0;
  double c = 0.0;
  double q = 0.0;

  double u(const Point& y) const;
  Point V(const Point& y) const;
};

DiskMode disk_mode(int k, double radius, const MaterialParams& params);

}  // namespace lamewave
