#pragma once

#include <functional>
#include <span>
#include <vector>

namespace elicit::optim {

using Objective = std::function<double(std::span<const double>)>;

// Writes the gradient into the second argument and returns the value.
using ObjectiveWithGradient =
    std::function<double(std::span<const double>, std::span<double>)>;

struct OptimResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  double f_abs_tol = 1e-14;
  double f_rel_tol = 1e-12;
  double x_tol = 1e-10;
  int max_evaluations = 20000;
  double initial_step = 0.1;
  int restarts = 2;  // re-runs from the best vertex
};

OptimResult nelder_mead(const Objective& f, std::vector<double> start,
                        const NelderMeadOptions& options = {});

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::vector<double> clamp(std::span<const double> x) const;
};

/// Nelder-Mead on a box. Points outside the box are evaluated at their
/// coordinate-wise projection plus a quadratic penalty on the distance, so the
/// returned point always lies inside the box.
OptimResult minimize_in_box(const Objective& f, const Box& box,
                            std::vector<double> start,
                            const NelderMeadOptions& options = {});

/// Runs minimize_in_box from each start and keeps the lowest value. Ties
/// resolve to the earliest start so results do not depend on scheduling.
OptimResult multi_start_in_box(const Objective& f, const Box& box,
                               const std::vector<std::vector<double>>& starts,
                               const NelderMeadOptions& options = {});

/// Starting lattice {lo + (hi-lo)/4, lo + 3(hi-lo)/4}^d inside the box.
std::vector<std::vector<double>> corner_lattice(const Box& box);

struct BfgsOptions {
  double rel_f_tol = 1e-9;
  double grad_tol = 1e-6;
  int max_iterations = 400;
  double max_abs_x = 50.0;  // steps leaving this cube are rejected
};

/// Quasi-Newton minimization (BFGS, backtracking Armijo line search).
/// Converged when the relative change of the objective is below rel_f_tol
/// and the gradient norm is below grad_tol.
OptimResult bfgs(const ObjectiveWithGradient& f, std::vector<double> start,
                 const BfgsOptions& options = {});

/// Central-difference gradient.
std::vector<double> numeric_gradient(const Objective& f,
                                     std::span<const double> x,
                                     double h = 1e-5);

}  // namespace elicit::optim
