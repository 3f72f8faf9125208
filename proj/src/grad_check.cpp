#include "gce/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "gce/errors.hpp"

namespace gce::ad {

GradCheckReport grad_check(const std::function<Tensor(Graph&)>& loss,
                           const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  GradCheckReport report;

  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  {
    Graph graph;
    Tensor value = loss(graph);
    if (!std::isfinite(value.item())) {
      report.non_finite = true;
      report.passed = false;
      return report;
    }
    graph.backward(value);
  }

  auto evaluate = [&]() {
    Graph graph(GradMode::kNoGrad);
    return loss(graph).item();
  };

  for (const auto& p : params) {
    Tensor t = p.tensor;
    GradCheckEntry entry{p.name};
    const std::vector<double> analytic = t.grad();
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double up = evaluate();
      values[i] = saved - options.eps;
      const double down = evaluate();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.non_finite = true;
        entry.passed = false;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.eps);
      const double diff = std::abs(numeric - analytic[i]);
      entry.max_abs_error = std::max(entry.max_abs_error, diff);
      if (diff > options.abs_floor) {
        const double rel = diff / std::max(std::abs(numeric), std::abs(analytic[i]));
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
      }
    }
    if (entry.max_rel_error > options.rel_tol) entry.passed = false;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace gce::ad
