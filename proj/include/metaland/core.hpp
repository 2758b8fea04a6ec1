// Shared vocabulary: vector aliases, error type, seeded random streams.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace metaland {

using Vec3 = Eigen::Vector3d;

enum class ErrorCode {
  ConfigError,
  DepletedMass,
  DegenerateGeometry,
  ParseError,
  DimensionError,
  DegenerateDirection,
  ShapeError,
  NumericalDivergence,
  MissingRun,
  IoError,
  UsageError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DepletedMass: return "DepletedMass";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::NumericalDivergence: return "NumericalDivergence";
    case ErrorCode::MissingRun: return "MissingRun";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ stream) + index);
}

// Random stream with platform-independent uniform/normal draws (the standard
// distributions are implementation-defined, which would break reproducible
// CSV output across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace metaland
