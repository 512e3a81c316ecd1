#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "swap/common.hpp"

namespace swapkit::pruner {

enum class ScheduleKind { exponential, linear, explicit_counts };

// Per-stage sparsity fractions and the nonzero counts they round to.
struct SparsitySchedule {
  ScheduleKind kind = ScheduleKind::exponential;
  std::size_t parameters = 0;
  std::vector<double> fractions;
  std::vector<std::size_t> counts;

  std::size_t stages() const { return counts.size(); }
  std::size_t final_count() const { return counts.back(); }
};

namespace detail {

inline void check_fracs(double k0, double kT, std::size_t T) {
  if (T == 0) throw DomainError("schedule: T must be >= 1");
  if (!(kT <= 1.0)) throw DomainError("schedule: target sparsity exceeds 1");
  if (!(k0 >= 0.0)) throw DomainError("schedule: initial sparsity below 0");
  if (!(k0 <= kT)) throw DomainError("schedule: initial sparsity exceeds target sparsity");
}

// Round half-up, then clamp so counts never increase.
inline std::vector<std::size_t> to_counts(const std::vector<double>& fractions, std::size_t p) {
  std::vector<std::size_t> counts;
  counts.reserve(fractions.size());
  for (double f : fractions) {
    const double keep = (1.0 - f) * static_cast<double>(p);
    auto k = static_cast<std::size_t>(std::floor(keep + 0.5));
    k = std::min(k, p);
    if (!counts.empty()) k = std::min(k, counts.back());
    counts.push_back(k);
  }
  return counts;
}

}  // namespace detail

// fraction_t = kT + (k0 - kT) (1 - t/T)^3, t = 0..T
inline SparsitySchedule exponential_schedule(double k0frac, double kTfrac, std::size_t T, std::size_t p) {
  detail::check_fracs(k0frac, kTfrac, T);
  SparsitySchedule s;
  s.kind = ScheduleKind::exponential;
  s.parameters = p;
  for (std::size_t t = 0; t <= T; ++t) {
    const double r = 1.0 - static_cast<double>(t) / static_cast<double>(T);
    s.fractions.push_back(kTfrac + (k0frac - kTfrac) * r * r * r);
  }
  s.counts = detail::to_counts(s.fractions, p);
  return s;
}

// fraction_t = k0 + (kT - k0) t/T, t = 0..T
inline SparsitySchedule linear_schedule(double k0frac, double kTfrac, std::size_t T, std::size_t p) {
  detail::check_fracs(k0frac, kTfrac, T);
  SparsitySchedule s;
  s.kind = ScheduleKind::linear;
  s.parameters = p;
  for (std::size_t t = 0; t <= T; ++t)
    s.fractions.push_back(k0frac + (kTfrac - k0frac) * static_cast<double>(t) / static_cast<double>(T));
  s.counts = detail::to_counts(s.fractions, p);
  return s;
}

// Stages given directly as nonzero counts.
inline SparsitySchedule explicit_schedule(std::vector<std::size_t> counts, std::size_t p) {
  if (counts.empty()) throw DomainError("schedule: no stages");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > p) throw DomainError("schedule: stage count exceeds parameter count");
    if (i > 0 && counts[i] > counts[i - 1]) throw DomainError("schedule: counts must be non-increasing");
  }
  SparsitySchedule s;
  s.kind = ScheduleKind::explicit_counts;
  s.parameters = p;
  s.counts = std::move(counts);
  for (auto k : s.counts) s.fractions.push_back(p == 0 ? 0.0 : 1.0 - static_cast<double>(k) / static_cast<double>(p));
  return s;
}

}  // namespace swapkit::pruner
