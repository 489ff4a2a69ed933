#pragma once

#include <span>
#include <vector>

#include "racing/solver.hpp"

// Internal PANOC inner loop shared by panoc_solve and the ALM/PM outer loop.

namespace racing::solver::detail {

struct InnerResult {
  std::vector<double> u;
  double cost = 0.0;      // f at the returned u
  double residual = 0.0;  // inf-norm fixed-point residual
  std::size_t iters = 0;
  bool converged = false;
};

InnerResult panoc_inner(const CostGradFn& f, const BoxBounds& box,
                        std::span<const double> u0, const SolverConfig& cfg,
                        std::vector<std::pair<double, double>>* fbe_trace);

}  // namespace racing::solver::detail
