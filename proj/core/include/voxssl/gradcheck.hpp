#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "voxssl/autodiff.hpp"

namespace voxssl {

using ParamMap = std::map<std::string, Tensor>;
using VarMap = std::map<std::string, Var>;

struct GradCheckFailure {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  bool passed = false;
  std::size_t n_checked = 0;
  double max_rel_err = 0.0;
  std::vector<GradCheckFailure> failures;
};

/// Compares reverse-mode gradients of the scalar `build(params)` against
/// central finite differences, element by element over every tensor in
/// `params`. The error measure is |analytic - numeric| / max(1, |analytic|,
/// |numeric|), i.e. relative above unit magnitude and absolute below it.
/// `build` is invoked with fresh leaf Vars each evaluation and must be a pure
/// function of them. Throws NumericError if any evaluation is non-finite.
GradCheckReport grad_check(const std::function<Var(VarMap&)>& build, ParamMap params,
                           double eps = 1e-5, double tol = 1e-4,
                           std::size_t max_failures = 16);

}  // namespace voxssl
