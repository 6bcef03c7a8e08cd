#pragma once

#include <functional>
#include <vector>

namespace snrdet {

struct NelderMeadOptions {
  double tolerance = 1e-6;  // stop when the simplex diameter falls below this
  int max_iterations = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
/// The initial simplex is `start` plus one vertex per axis offset by `step[i]`.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, const std::vector<double>& step,
                             const NelderMeadOptions& options = {});

}  // namespace snrdet
