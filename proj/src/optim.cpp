#include "optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace elicit::optim {

namespace {

struct Vertex {
  std::vector<double> x;
  double f;
};

OptimResult nelder_mead_once(const Objective& f, std::vector<double> start,
                             const NelderMeadOptions& opt, int budget) {
  const std::size_t dim = start.size();
  OptimResult out;
  auto eval = [&](const std::vector<double>& x) {
    ++out.evaluations;
    double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Vertex> simplex;
  simplex.reserve(dim + 1);
  simplex.push_back({start, eval(start)});
  for (std::size_t i = 0; i < dim; ++i) {
    auto x = start;
    const double step = x[i] != 0.0 ? opt.initial_step * std::max(1.0, std::abs(x[i]))
                                     : opt.initial_step;
    x[i] += step;
    simplex.push_back({x, eval(x)});
  }

  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  std::vector<double> centroid(dim), trial(dim);

  auto sort_simplex = [&] {
    std::stable_sort(simplex.begin(), simplex.end(),
                     [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
  };

  while (out.evaluations < budget) {
    sort_simplex();
    ++out.iterations;
    const double f_best = simplex.front().f;
    const double f_worst = simplex.back().f;
    double x_spread = 0.0;
    for (std::size_t v = 1; v <= dim; ++v)
      for (std::size_t i = 0; i < dim; ++i)
        x_spread = std::max(x_spread, std::abs(simplex[v].x[i] - simplex[0].x[i]));
    if (std::abs(f_worst - f_best) <= opt.f_abs_tol + opt.f_rel_tol * std::abs(f_best) &&
        x_spread <= opt.x_tol) {
      out.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v < dim; ++v)
      for (std::size_t i = 0; i < dim; ++i) centroid[i] += simplex[v].x[i] / dim;

    auto& worst = simplex.back();
    auto along = [&](double coef) {
      for (std::size_t i = 0; i < dim; ++i)
        trial[i] = centroid[i] + coef * (worst.x[i] - centroid[i]);
      return trial;
    };

    auto reflected = along(-kReflect);
    const double f_reflected = eval(reflected);
    if (f_reflected < simplex.front().f) {
      auto expanded = along(-kExpand);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        worst = {expanded, f_expanded};
      } else {
        worst = {reflected, f_reflected};
      }
      continue;
    }
    if (f_reflected < simplex[dim - 1].f) {
      worst = {reflected, f_reflected};
      continue;
    }
    const bool outside = f_reflected < worst.f;
    auto contracted = outside ? along(-kContract) : along(kContract);
    const double f_contracted = eval(contracted);
    if (f_contracted < std::min(f_reflected, worst.f)) {
      worst = {contracted, f_contracted};
      continue;
    }
    for (std::size_t v = 1; v <= dim; ++v) {
      for (std::size_t i = 0; i < dim; ++i)
        simplex[v].x[i] = simplex[0].x[i] + kShrink * (simplex[v].x[i] - simplex[0].x[i]);
      simplex[v].f = eval(simplex[v].x);
    }
  }
  sort_simplex();
  out.x = simplex.front().x;
  out.value = simplex.front().f;
  return out;
}

}  // namespace

OptimResult nelder_mead(const Objective& f, std::vector<double> start,
                        const NelderMeadOptions& options) {
  OptimResult best = nelder_mead_once(f, std::move(start), options,
                                      options.max_evaluations);
  int total_evals = best.evaluations;
  int total_iters = best.iterations;
  for (int r = 0; r < options.restarts && total_evals < options.max_evaluations; ++r) {
    NelderMeadOptions again = options;
    again.initial_step = options.initial_step * 0.1;
    auto next = nelder_mead_once(f, best.x, again, options.max_evaluations - total_evals);
    total_evals += next.evaluations;
    total_iters += next.iterations;
    const bool improved = next.value < best.value - options.f_abs_tol;
    if (next.value <= best.value) best = next;
    if (!improved) break;
  }
  best.evaluations = total_evals;
  best.iterations = total_iters;
  return best;
}

std::vector<double> Box::clamp(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], lower[i], upper[i]);
  return y;
}

OptimResult minimize_in_box(const Objective& f, const Box& box,
                            std::vector<double> start,
                            const NelderMeadOptions& options) {
  auto penalized = [&](std::span<const double> x) {
    auto y = box.clamp(x);
    double dist2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dist2 += (x[i] - y[i]) * (x[i] - y[i]);
    return f(y) + 1e2 * dist2;
  };
  auto result = nelder_mead(penalized, box.clamp(start), options);
  result.x = box.clamp(result.x);
  result.value = f(result.x);
  return result;
}

OptimResult multi_start_in_box(const Objective& f, const Box& box,
                               const std::vector<std::vector<double>>& starts,
                               const NelderMeadOptions& options) {
  OptimResult best;
  best.value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  for (const auto& s : starts) {
    auto r = minimize_in_box(f, box, s, options);
    evaluations += r.evaluations;
    if (r.value < best.value || best.x.empty()) best = r;
  }
  best.evaluations = evaluations;
  return best;
}

std::vector<std::vector<double>> corner_lattice(const Box& box) {
  const std::size_t dim = box.lower.size();
  std::vector<std::vector<double>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << dim); ++mask) {
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double w = (mask >> i) & 1U ? 0.75 : 0.25;
      x[i] = box.lower[i] + w * (box.upper[i] - box.lower[i]);
    }
    out.push_back(std::move(x));
  }
  return out;
}

OptimResult bfgs(const ObjectiveWithGradient& f, std::vector<double> start,
                 const BfgsOptions& opt) {
  const std::size_t dim = start.size();
  OptimResult out;
  std::vector<double> x = std::move(start), g(dim), x_new(dim), g_new(dim), dir(dim);
  std::vector<double> H(dim * dim, 0.0);  // inverse Hessian approximation
  for (std::size_t i = 0; i < dim; ++i) H[i * dim + i] = 1.0;

  auto inside = [&](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [&](double c) { return std::isfinite(c) && std::abs(c) <= opt.max_abs_x; });
  };
  auto norm = [](const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  };

  double fx = f(x, g);
  ++out.evaluations;
  if (!std::isfinite(fx)) {
    out.x = x;
    out.value = fx;
    return out;
  }

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    out.iterations = iter + 1;
    for (std::size_t i = 0; i < dim; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s -= H[i * dim + j] * g[j];
      dir[i] = s;
    }
    double slope = std::inner_product(dir.begin(), dir.end(), g.begin(), 0.0);
    if (slope >= 0.0) {  // not a descent direction; reset to steepest descent
      std::fill(H.begin(), H.end(), 0.0);
      for (std::size_t i = 0; i < dim; ++i) {
        H[i * dim + i] = 1.0;
        dir[i] = -g[i];
      }
      slope = -std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    }

    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < dim; ++i) x_new[i] = x[i] + step * dir[i];
      if (inside(x_new)) {
        f_new = f(x_new, g_new);
        ++out.evaluations;
        if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = norm(g) < opt.grad_tol;
      break;
    }

    std::vector<double> s(dim), y(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
    const double rel_change = std::abs(f_new - fx) / std::max(1.0, std::abs(fx));
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;

    if (rel_change < opt.rel_f_tol && norm(g) < opt.grad_tol) {
      out.converged = true;
      break;
    }
    if (sy > 1e-12 * norm(s) * norm(y)) {
      std::vector<double> Hy(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) acc += H[i * dim + j] * y[j];
        Hy[i] = acc;
      }
      const double yHy = std::inner_product(y.begin(), y.end(), Hy.begin(), 0.0);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
          H[i * dim + j] += rho * ((1.0 + rho * yHy) * s[i] * s[j] - Hy[i] * s[j] - s[i] * Hy[j]);
    }
  }
  out.x = x;
  out.value = fx;
  return out;
}

std::vector<double> numeric_gradient(const Objective& f, std::span<const double> x,
                                     double h) {
  std::vector<double> point(x.begin(), x.end()), grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + h;
    const double up = f(point);
    point[i] = orig - h;
    const double down = f(point);
    point[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace elicit::optim
