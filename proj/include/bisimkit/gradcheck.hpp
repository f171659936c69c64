#pragma once

#include <functional>
#include <vector>

#include "bisimkit/nn.hpp"

namespace bisimkit::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tol) const { return max_rel_error < tol; }
};

// Copies the gradient buffers behind the views into one flat vector.
std::vector<double> collect_gradients(const std::vector<ParamView>& params);

// Compares analytic gradients against central differences of loss(), which
// must evaluate the loss at the current parameter values. The relative error
// of one coordinate is |a - n| / max(|a|, |n|, floor).
GradCheckReport gradient_check(const std::vector<ParamView>& params, const std::vector<double>& analytic,
                               const std::function<double()>& loss, double h = 1e-5, double floor = 1e-6);

}  // namespace bisimkit::nn
