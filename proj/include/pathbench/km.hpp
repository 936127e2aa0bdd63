#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pathbench {

/// Product-limit survival estimate, one entry per distinct event time.
struct KMCurve {
  std::size_t n_subjects = 0;
  std::vector<double> event_times;    // strictly increasing
  std::vector<std::size_t> at_risk;   // nonincreasing
  std::vector<std::size_t> events;
  std::vector<double> survival;       // nonincreasing, in [0, 1]

  /// Right-continuous step function: 1 before the first event.
  double survival_at(double t) const;
};

KMCurve km_curve(const std::vector<double>& times, const std::vector<bool>& events);

}  // namespace pathbench
