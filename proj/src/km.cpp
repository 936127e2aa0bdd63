#include "pathbench/km.hpp"

#include "pathbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pathbench {

double KMCurve::survival_at(double t) const {
  const auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

KMCurve km_curve(const std::vector<double>& times, const std::vector<bool>& events) {
  if (times.empty()) throw Error(ErrorKind::Precondition, "km_curve needs at least one subject");
  if (times.size() != events.size()) throw Error(ErrorKind::Precondition, "times and events differ in length");
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorKind::Precondition, "survival times must be finite and >= 0");
  }

  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });

  KMCurve curve;
  curve.n_subjects = times.size();
  std::size_t at_risk = times.size();
  double s = 1.0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = times[order[k]];
    std::size_t d = 0;
    std::size_t c = 0;
    for (; k < order.size() && times[order[k]] == t; ++k) {
      if (events[order[k]]) {
        ++d;
      } else {
        ++c;
      }
    }
    if (d > 0) {
      s *= static_cast<double>(at_risk - d) / static_cast<double>(at_risk);
      curve.event_times.push_back(t);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(d);
      curve.survival.push_back(s);
    }
    // Subjects censored at t stay in the risk set for events at t.
    at_risk -= d + c;
  }
  return curve;
}

}  // namespace pathbench
