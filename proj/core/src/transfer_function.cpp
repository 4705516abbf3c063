#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "estatcom/analysis.hpp"
#include "estatcom/frame.hpp"

namespace estatcom {

namespace poly {

Poly trim(Poly p) {
  auto first = std::find_if(p.begin(), p.end(), [](double c) { return c != 0.0; });
  if (first == p.end()) return {0.0};
  p.erase(p.begin(), first);
  return p;
}

namespace {

Poly combine(const Poly& a, const Poly& b, double sign) {
  const std::size_t n = std::max(a.size(), b.size());
  Poly out(n, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[n - a.size() + i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[n - b.size() + i] += sign * b[i];
  return trim(std::move(out));
}

// Parlett-Reinsch balancing by powers of two; reduces the eigenvalue error of
// companion matrices with widely spread coefficients.
void balance(Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  constexpr double radix = 2.0;
  bool converged = false;
  while (!converged) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0;
      double r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

}  // namespace

Poly add(const Poly& a, const Poly& b) { return combine(a, b, 1.0); }
Poly sub(const Poly& a, const Poly& b) { return combine(a, b, -1.0); }

Poly mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return trim(std::move(out));
}

Poly scale(const Poly& a, double k) {
  Poly out = a;
  for (double& c : out) c *= k;
  return trim(std::move(out));
}

Complex eval(const Poly& p, Complex s) {
  Complex acc(0.0, 0.0);
  for (double c : p) acc = acc * s + c;
  return acc;
}

std::vector<Complex> roots(const Poly& input) {
  Poly p = trim(input);
  std::vector<Complex> out;
  while (p.size() > 1 && p.back() == 0.0) {
    out.emplace_back(0.0, 0.0);
    p.pop_back();
  }
  const Eigen::Index n = static_cast<Eigen::Index>(p.size()) - 1;
  if (n <= 0) return out;
  if (n == 1) {
    out.emplace_back(-p[1] / p[0], 0.0);
    return out;
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) companion(0, j) = -p[j + 1] / p[0];
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  balance(companion);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("polynomial root finding did not converge");
  const auto& values = solver.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(values[i]);
  return out;
}

}  // namespace poly

TransferFunction::TransferFunction(Poly num, Poly den) : num_(poly::trim(std::move(num))) {
  if (den.empty()) throw std::invalid_argument("TransferFunction: empty denominator");
  den_ = poly::trim(std::move(den));
  if (den_.size() == 1 && den_[0] == 0.0) throw std::invalid_argument("TransferFunction: zero denominator");
  for (double c : num_) {
    if (!std::isfinite(c)) throw std::invalid_argument("TransferFunction: non-finite numerator");
  }
  for (double c : den_) {
    if (!std::isfinite(c)) throw std::invalid_argument("TransferFunction: non-finite denominator");
  }
}

TransferFunction TransferFunction::constant(double k) { return {{k}, {1.0}}; }
TransferFunction TransferFunction::s() { return {{1.0, 0.0}, {1.0}}; }

Complex TransferFunction::operator()(Complex s) const {
  const Complex d = poly::eval(den_, s);
  if (d == Complex(0.0, 0.0)) {
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, inf};
  }
  return poly::eval(num_, s) / d;
}

Complex TransferFunction::at_hz(double f) const { return (*this)(Complex(0.0, kTwoPi * f)); }

double TransferFunction::dc_gain() const {
  const double d = den_.back();
  const double n = num_.back();
  if (d == 0.0) return n == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                : std::copysign(std::numeric_limits<double>::infinity(), n);
  return n / d;
}

TransferFunction TransferFunction::feedback(const TransferFunction& h) const {
  // G / (1 + G H) = nG dH / (dG dH + nG nH)
  return {poly::mul(num_, h.den_), poly::add(poly::mul(den_, h.den_), poly::mul(num_, h.num_))};
}

TransferFunction operator+(const TransferFunction& a, const TransferFunction& b) {
  return {poly::add(poly::mul(a.num_, b.den_), poly::mul(b.num_, a.den_)), poly::mul(a.den_, b.den_)};
}

TransferFunction operator-(const TransferFunction& a, const TransferFunction& b) {
  return {poly::sub(poly::mul(a.num_, b.den_), poly::mul(b.num_, a.den_)), poly::mul(a.den_, b.den_)};
}

TransferFunction operator*(const TransferFunction& a, const TransferFunction& b) {
  return {poly::mul(a.num_, b.num_), poly::mul(a.den_, b.den_)};
}

TransferFunction operator/(const TransferFunction& a, const TransferFunction& b) {
  if (b.num_.size() == 1 && b.num_[0] == 0.0) throw std::invalid_argument("TransferFunction: division by zero");
  return {poly::mul(a.num_, b.den_), poly::mul(a.den_, b.num_)};
}

TransferFunction TransferFunction::operator-() const { return {poly::scale(num_, -1.0), den_}; }

}  // namespace estatcom
