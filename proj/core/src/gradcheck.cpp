#include "voxssl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "voxssl/errors.hpp"

namespace voxssl {

namespace {

double eval_value(const std::function<Var(VarMap&)>& build, const ParamMap& params) {
  VarMap vars;
  for (const auto& [name, t] : params) vars.emplace(name, Var::leaf(t, false, name));
  const Var out = build(vars);
  const double v = out.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite objective");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(VarMap&)>& build, ParamMap params,
                           double eps, double tol, std::size_t max_failures) {
  // Analytic pass: one forward/backward with grad-requiring leaves.
  VarMap vars;
  for (const auto& [name, t] : params) vars.emplace(name, Var::leaf(t, true, name));
  const Var out = build(vars);
  if (!std::isfinite(out.item())) throw NumericError("grad_check: non-finite objective");
  backward(out);
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, v] : vars) analytic.emplace(name, v.grad());

  GradCheckReport report;
  report.passed = true;
  for (auto& [name, t] : params) {
    const Tensor& a = analytic.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t.at(i);
      t.at(i) = orig + eps;
      const double fp = eval_value(build, params);
      t.at(i) = orig - eps;
      const double fm = eval_value(build, params);
      t.at(i) = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double an = a.at(i);
      const double denom = std::max({1.0, std::fabs(an), std::fabs(numeric)});
      const double rel = std::fabs(an - numeric) / denom;
      report.n_checked++;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      if (rel > tol) {
        report.passed = false;
        if (report.failures.size() < max_failures) {
          report.failures.push_back({name, i, an, numeric, rel});
        }
      }
    }
  }
  return report;
}

}  // namespace voxssl
