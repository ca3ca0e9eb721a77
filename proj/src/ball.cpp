#include "lamewave/ball.hpp"

#include "lamewave/error.hpp"

#include <cmath>
#include <numbers>

namespace lamewave {

namespace {

constexpr double pi = std::numbers::pi;

double series_j(int n, double x) {
  // sum_k (-1)^k (x/2)^{2k+n} / (k! (k+n)!)
  const double h = 0.5 * x;
  double term = n == 0 ? 1.0 : h;
  double sum = term;
  for (int k = 1; k < 80; ++k) {
    term *= -h * h / (static_cast<double>(k) * (k + n));
    sum += term;
    if (std::abs(term) < 1e-18 * std::max(1.0, std::abs(sum))) break;
  }
  return sum;
}

double asymptotic_j(int n, double x) {
  const double mu = 4.0 * n * n;
  double p = 0.0, q = 0.0, a = 1.0, last = INFINITY;
  for (int j = 0; j < 60; ++j) {
    if (j > 0) a *= (mu - (2.0 * j - 1) * (2.0 * j - 1)) / (j * 8.0 * x);
    const double mag = std::abs(a);
    if (mag > last) break;  // asymptotic series started diverging
    last = mag;
    const double sign = (j / 2) % 2 == 0 ? 1.0 : -1.0;
    if (j % 2 == 0) {
      p += sign * a;
    } else {
      q += sign * a;
    }
    if (mag < 1e-17) break;
  }
  const double chi = x - (0.5 * n + 0.25) * pi;
  return std::sqrt(2.0 / (pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

double bessel_j(int n, double x) {
  const double ax = std::abs(x);
  const double v = ax <= 12.0 ? series_j(n, ax) : asymptotic_j(n, ax);
  return n % 2 == 1 && x < 0.0 ? -v : v;
}

template <class F>
double bisect(F f, double lo, double hi) {
  double flo = f(lo);
  if (flo * f(hi) > 0.0) throw Error("root bracket without sign change");
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Convention parse_convention(std::string_view name) {
  if (name == "paper") return Convention::paper;
  if (name == "lambda_sum") return Convention::lambda_sum;
  throw InputError("unknown convention '" + std::string(name) + "' (expected paper or lambda_sum)");
}

std::string to_string(Convention c) { return c == Convention::paper ? "paper" : "lambda_sum"; }

double convention_constant(Convention c, const MaterialParams& params) {
  return c == Convention::paper ? 2.0 * params.lambda0 + params.lambda1 : params.lambda();
}

double spherical_j1(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return x * (1.0 / 3.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 840.0 - x2 / 45360.0)));
  }
  return std::sin(x) / (x * x) - std::cos(x) / x;
}

double spherical_j0(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

double bessel_j0(double x) { return bessel_j(0, x); }
double bessel_j1(double x) { return bessel_j(1, x); }

std::vector<double> bessel_roots(int count) {
  if (count < 1) throw InputError("bessel_roots: count must be >= 1");
  // x^2 j(x) = sin x - x cos x has the same positive roots without the pole.
  auto f = [](double x) { return std::sin(x) - x * std::cos(x); };
  std::vector<double> roots;
  for (int k = 1; k <= count; ++k) {
    double r = bisect(f, k * pi, (k + 0.5) * pi);
    for (int it = 0; it < 3; ++it) {
      const double d = r * std::sin(r);  // f'(x) = x sin x
      if (d == 0.0) break;
      const double step = f(r) / d;
      if (std::abs(step) > 1e-10) break;
      r -= step;
    }
    roots.push_back(r);
  }
  return roots;
}

std::vector<double> bessel_j1_roots(int count) {
  if (count < 1) throw InputError("bessel_j1_roots: count must be >= 1");
  std::vector<double> roots;
  for (int k = 1; k <= count; ++k) {
    const double beta = (k + 0.25) * pi;  // McMahon: root ~ beta - 3/(8 beta)
    roots.push_back(bisect(bessel_j1, beta - 0.5, beta));
  }
  return roots;
}

Point BallMode::psi(const Point& y) const {
  const double rho = y.norm();
  if (rho == 0.0) return Point::Zero();
  return spherical_j1(root * rho / radius) / rho * y;
}

BallMode ball_mode(int k, double radius, const MaterialParams& params, Convention convention) {
  if (k < 1) throw InputError("ball_mode: k must be >= 1");
  if (!(radius > 0.0)) throw InputError("ball_mode: radius must be positive");
  params.validate();
  BallMode m;
  m.k = k;
  m.root = bessel_roots(k).back();
  m.radius = radius;
  m.convention = convention;
  m.constant = convention_constant(convention, params);
  m.mu = m.constant * m.root * m.root / (radius * radius);
  m.q = m.constant * std::sin(m.root) / radius;
  return m;
}

double DiskMode::u(const Point& y) const { return bessel_j0(root * y.norm() / radius); }

Point DiskMode::V(const Point& y) const {
  const double rho = y.norm();
  if (rho == 0.0) return Point::Zero();
  return -bessel_j1(root * rho / radius) * (root / radius) / rho * y;
}

DiskMode disk_mode(int k, double radius, const MaterialParams& params) {
  if (k < 1) throw InputError("disk_mode: k must be >= 1");
  if (!(radius > 0.0)) throw InputError("disk_mode: radius must be positive");
  params.validate();
  DiskMode d;
  d.k = k;
  d.root = bessel_j1_roots(k).back();
  d.radius = radius;
  d.mu_s = d.root * d.root / (radius * radius);
  d.mu = params.lambda() * d.mu_s;
  d.c = bessel_j0(d.root);
  d.q = -params.lambda() * d.mu_s * d.c;
  return d;
}

}  // namespace lamewave
