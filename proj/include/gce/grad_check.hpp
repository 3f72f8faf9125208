#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gce/autodiff.hpp"

namespace gce::ad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool non_finite = false;
  bool passed = true;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double rel_tol = 1e-4;
  // Differences at or below this are accepted regardless of relative size.
  double abs_floor = 1e-6;
};

// Compares analytic gradients of the scalar built by `loss` against central
// differences (f(x+eps) - f(x-eps)) / (2 eps), entry by entry. `loss` is
// invoked once in record mode and twice per parameter entry in no-grad mode.
// Existing parameter gradients are cleared.
GradCheckReport grad_check(const std::function<Tensor(Graph&)>& loss,
                           const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options = {});

}  // namespace gce::ad
