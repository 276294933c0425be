#include "corabench/common.hpp"

#include <cstdio>
#include <limits>

namespace corabench {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config: return "config error";
    case ErrorCategory::Range: return "range error";
    case ErrorCategory::Environment: return "environment error";
    case ErrorCategory::Usage: return "usage error";
    case ErrorCategory::Training: return "training error";
    case ErrorCategory::Metric: return "metric error";
    case ErrorCategory::LogFormat: return "log format error";
    case ErrorCategory::Io: return "i/o error";
  }
  return "error";
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) noexcept {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  if (bound == 0) throw UsageError("uniform_below: bound must be positive");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

}  // namespace corabench
