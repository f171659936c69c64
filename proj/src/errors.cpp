#include "bisimkit/errors.hpp"

#include <cmath>

namespace bisimkit {

void require_finite(double value, const std::string& what) {
  if (!std::isfinite(value)) throw NumericalError("non-finite " + what);
}

}  // namespace bisimkit
