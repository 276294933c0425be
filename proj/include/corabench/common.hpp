#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace corabench {

using Index = Eigen::Index;
using Step = std::int64_t;
using Rng = std::mt19937_64;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ErrorCategory {
  Config,
  Range,
  Environment,
  Usage,
  Training,
  Metric,
  LogFormat,
  Io,
};

std::string_view category_name(ErrorCategory category);

/// Base of every error raised by the library; the category drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::Config, m) {}
};
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& m) : Error(ErrorCategory::Range, m) {}
};
class EnvironmentError : public Error {
 public:
  explicit EnvironmentError(const std::string& m) : Error(ErrorCategory::Environment, m) {}
};
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& m) : Error(ErrorCategory::Usage, m) {}
};
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& m) : Error(ErrorCategory::Training, m) {}
};
class MetricError : public Error {
 public:
  explicit MetricError(const std::string& m) : Error(ErrorCategory::Metric, m) {}
};
class LogFormatError : public Error {
 public:
  explicit LogFormatError(const std::string& m) : Error(ErrorCategory::LogFormat, m) {}
};
class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorCategory::Io, m) {}
};

// splitmix64 finalizer; used to derive independent seeds from structured keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

/// FNV-1a over raw bytes, chainable through `seed`.
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

inline std::uint64_t fnv1a(std::string_view text,
                           std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
  return fnv1a(text.data(), text.size(), seed);
}

/// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection; stable across standard libraries.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// "%.9g" rendering used by every machine-readable output.
std::string format_real(double value);

}  // namespace corabench
