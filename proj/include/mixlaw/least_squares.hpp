#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) over an unconstrained parameter
// vector with a finite-difference Jacobian, plus a deterministic multi-start
// driver. Constraints are handled by callers through reparameterization.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace mixlaw {

using ResidualFn = std::function<void(std::span<const double> x, std::span<double> residuals)>;

struct LeastSquaresOptions {
  int max_iterations = 2000;
  double relative_tolerance = 1e-10;  // on relative objective decrease
};

struct LeastSquaresResult {
  std::vector<double> x;
  double objective = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

LeastSquaresResult levenberg_marquardt(const ResidualFn& residuals, std::size_t n_residuals,
                                       std::vector<double> x0, const LeastSquaresOptions& options);

struct MultiStartResult {
  LeastSquaresResult best;
  std::size_t winning_start = 0;
  std::size_t finite_starts = 0;
};

// Runs every start and keeps the lowest objective; ties go to the lowest
// start index. Throws fit_failure when no start yields a finite objective.
MultiStartResult multistart(const ResidualFn& residuals, std::size_t n_residuals,
                            const std::vector<std::vector<double>>& starts,
                            const LeastSquaresOptions& options);

// Points of a Halton sequence in [0,1)^dims with a seeded Cranley-Patterson
// rotation. Same seed, same points.
std::vector<std::vector<double>> seeded_halton(std::size_t count, std::size_t dims,
                                               std::uint64_t seed);

}  // namespace mixlaw
