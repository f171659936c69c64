#include "bisimkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bisimkit::nn {

std::vector<double> collect_gradients(const std::vector<ParamView>& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.grad, p.grad + p.size);
  return out;
}

GradCheckReport gradient_check(const std::vector<ParamView>& params, const std::vector<double>& analytic,
                               const std::function<double()>& loss, double h, double floor) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.size;
  if (analytic.size() != total) throw std::invalid_argument("gradient_check: analytic gradient size mismatch");

  GradCheckReport report;
  std::size_t k = 0;
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.size; ++i, ++k) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = loss();
      p.value[i] = saved - h;
      const double down = loss();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > report.max_rel_error || report.checked == 0) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        if (rel >= report.max_rel_error) {
          report.worst_index = k;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
      ++report.checked;
    }
  }
  return report;
}

}  // namespace bisimkit::nn
