#include "lamewave/quadrature.hpp"

#include "lamewave/error.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace lamewave {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw InputError("gauss_legendre: n must be >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? x : p1;
      const double pm = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node for the weight.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double pn = n == 1 ? x : p1;
    const double pm = n == 1 ? 1.0 : p0;
    dp = n * (x * pn - pm) / (x * x - 1.0);
    nodes[n - 1 - i] = 0.5 * (1.0 + x);
    weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);  // 2/((1-x^2)P'^2) scaled to [0,1]
  }
}

namespace {

QuadratureRule symmetric_rule(int dim, int degree) {
  QuadratureRule r;
  r.dim = dim;
  r.degree = degree;
  auto add = [&](std::initializer_list<double> bary, double w) {
    Eigen::Vector4d p = Eigen::Vector4d::Zero();
    int i = 0;
    for (double b : bary) p[i++] = b;
    r.points.push_back(p);
    r.weights.push_back(w);
  };
  if (degree <= 1) {
    const double c = 1.0 / (dim + 1);
    add({c, c, c, c}, 1.0);
    r.points.back().tail(3 - dim).setZero();
    return r;
  }
  // degree 2
  if (dim == 1) {
    const double a = 0.5 - 0.5 / std::sqrt(3.0);
    add({a, 1.0 - a}, 0.5);
    add({1.0 - a, a}, 0.5);
  } else if (dim == 2) {
    const double a = 1.0 / 6.0, b = 2.0 / 3.0;
    add({b, a, a}, 1.0 / 3.0);
    add({a, b, a}, 1.0 / 3.0);
    add({a, a, b}, 1.0 / 3.0);
  } else {
    const double a = 0.1381966011250105, b = 0.5854101966249685;
    add({b, a, a, a}, 0.25);
    add({a, b, a, a}, 0.25);
    add({a, a, b, a}, 0.25);
    add({a, a, a, b}, 0.25);
  }
  return r;
}

// Collapsed (Duffy) product rule: x = u, y = (1-u) v, z = (1-u)(1-v) w with
// Jacobian (1-u)^{d-1} (1-v)^{d-2}; Gauss-Legendre in each direction.
QuadratureRule collapsed_rule(int dim, int degree) {
  const int n = (degree + 3 + 1) / 2;
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  QuadratureRule r;
  r.dim = dim;
  r.degree = degree;
  double volume_factor = 1.0;  // d! (reference simplex volume is 1/d!)
  for (int k = 2; k <= dim; ++k) volume_factor *= k;
  auto push = [&](const Eigen::Vector3d& cart, double weight) {
    Eigen::Vector4d p = Eigen::Vector4d::Zero();
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      p[i + 1] = cart[i];
      s += cart[i];
    }
    p[0] = 1.0 - s;
    r.points.push_back(p);
    r.weights.push_back(weight * volume_factor);
  };
  if (dim == 1) {
    for (int i = 0; i < n; ++i) push(Eigen::Vector3d(x[i], 0, 0), w[i]);
  } else if (dim == 2) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double u = x[i], v = x[j];
        push(Eigen::Vector3d(u, (1.0 - u) * v, 0.0), w[i] * w[j] * (1.0 - u));
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          const double u = x[i], v = x[j], t = x[k];
          push(Eigen::Vector3d(u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * t),
               w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) * (1.0 - v));
        }
      }
    }
  }
  return r;
}

}  // namespace

const QuadratureRule& simplex_rule(int dim, int degree) {
  if (dim < 1 || dim > 3) throw InputError("simplex_rule: dimension must be 1, 2 or 3");
  if (degree < 0) throw InputError("simplex_rule: negative degree");
  static std::mutex mutex;
  static std::map<std::pair<int, int>, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(dim, degree);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, degree <= 2 ? symmetric_rule(dim, degree) : collapsed_rule(dim, degree)).first;
  }
  return it->second;
}

}  // namespace lamewave
