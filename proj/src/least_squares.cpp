#include "mixlaw/least_squares.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mixlaw/error.hpp"
#include "mixlaw/random.hpp"

namespace mixlaw {
namespace {

double sum_squares(const Eigen::VectorXd& r) {
  if (!r.allFinite()) return std::numeric_limits<double>::infinity();
  return r.squaredNorm();
}

void evaluate(const ResidualFn& fn, const Eigen::VectorXd& x, Eigen::VectorXd& r) {
  fn(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
     std::span<double>(r.data(), static_cast<std::size_t>(r.size())));
}

// Central differences; step scaled to the parameter magnitude.
void jacobian(const ResidualFn& fn, const Eigen::VectorXd& x, Eigen::MatrixXd& jac) {
  const auto m = jac.rows();
  Eigen::VectorXd xp = x, rp(m), rm(m);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    evaluate(fn, xp, rp);
    xp[j] = x[j] - h;
    evaluate(fn, xp, rm);
    xp[j] = x[j];
    jac.col(j) = (rp - rm) / (2.0 * h);
  }
}

double radical_inverse(std::size_t index, unsigned base) {
  double inv = 1.0 / base, f = inv, value = 0.0;
  while (index > 0) {
    value += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return value;
}

}  // namespace

LeastSquaresResult levenberg_marquardt(const ResidualFn& fn, std::size_t n_residuals,
                                       std::vector<double> x0, const LeastSquaresOptions& options) {
  const auto n = static_cast<Eigen::Index>(x0.size());
  const auto m = static_cast<Eigen::Index>(n_residuals);
  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(x0.data(), n);
  Eigen::VectorXd r(m), r_trial(m);
  evaluate(fn, x, r);
  double cost = sum_squares(r);

  LeastSquaresResult out;
  if (!std::isfinite(cost)) {
    out.x = std::move(x0);
    out.objective = cost;
    return out;
  }

  Eigen::MatrixXd jac(m, n);
  double lambda = 1e-3;
  double nu = 2.0;
  bool need_jacobian = true;
  Eigen::MatrixXd normal(n, n);
  Eigen::VectorXd grad(n);

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (cost == 0.0) {
      out.converged = true;
      break;
    }
    if (need_jacobian) {
      jacobian(fn, x, jac);
      normal = jac.transpose() * jac;
      grad = jac.transpose() * r;
      need_jacobian = false;
      if (!grad.allFinite() || !normal.allFinite()) break;
    }
    Eigen::MatrixXd damped = normal;
    for (Eigen::Index j = 0; j < n; ++j)
      damped(j, j) += lambda * std::max(normal(j, j), 1e-12);
    const Eigen::VectorXd step = damped.ldlt().solve(-grad);
    if (!step.allFinite()) {
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e16) {
        out.converged = true;
        break;
      }
      continue;
    }
    const Eigen::VectorXd x_trial = x + step;
    evaluate(fn, x_trial, r_trial);
    const double trial_cost = sum_squares(r_trial);

    if (trial_cost < cost) {
      const double predicted = -(step.dot(grad) + 0.5 * step.dot(normal * step));
      const double rho = predicted > 0.0 ? (cost - trial_cost) / (2.0 * predicted) : 0.5;
      const double relative_drop = (cost - trial_cost) / cost;
      const double step_size = step.norm();
      x = x_trial;
      r = r_trial;
      cost = trial_cost;
      need_jacobian = true;
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (relative_drop < options.relative_tolerance ||
          step_size <= 1e-14 * (x.norm() + 1e-14)) {
        out.converged = true;
        ++it;
        break;
      }
    } else {
      lambda *= nu;
      nu *= 2.0;
      // No descent direction left at working precision: a local minimum.
      if (lambda > 1e16) {
        out.converged = true;
        break;
      }
    }
  }

  out.x.assign(x.data(), x.data() + n);
  out.objective = cost;
  out.iterations = it;
  return out;
}

MultiStartResult multistart(const ResidualFn& fn, std::size_t n_residuals,
                            const std::vector<std::vector<double>>& starts,
                            const LeastSquaresOptions& options) {
  MultiStartResult result;
  bool have = false;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    auto candidate = levenberg_marquardt(fn, n_residuals, starts[i], options);
    if (!std::isfinite(candidate.objective)) continue;
    ++result.finite_starts;
    if (!have || candidate.objective < result.best.objective) {
      result.best = std::move(candidate);
      result.winning_start = i;
      have = true;
    }
  }
  if (!have) fail(ErrorCode::fit_failure, "no multi-start produced a finite objective");
  return result;
}

std::vector<std::vector<double>> seeded_halton(std::size_t count, std::size_t dims,
                                               std::uint64_t seed) {
  static constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (dims > std::size(kPrimes)) fail(ErrorCode::domain_error, "too many Halton dimensions");
  std::vector<double> shift(dims);
  std::uint64_t state = seed;
  for (auto& s : shift) {
    state = splitmix64(state);
    s = static_cast<double>(state >> 11) * 0x1.0p-53;
  }
  std::vector<std::vector<double>> points(count, std::vector<double>(dims));
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t d = 0; d < dims; ++d) {
      double v = radical_inverse(i + 1, kPrimes[d]) + shift[d];
      points[i][d] = v - std::floor(v);
    }
  return points;
}

}  // namespace mixlaw
