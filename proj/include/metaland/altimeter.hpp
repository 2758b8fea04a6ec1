// Four-beam radar altimeter: beam geometry, the plane-stack range model, a
// ray-marching reference, and the error characterization sweep.
#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "metaland/core.hpp"
#include "metaland/terrain.hpp"

namespace metaland {

inline constexpr double kBeamConeAngle = std::numbers::pi / 8.0;
inline constexpr double kMissRange = 10000.0;

enum class BeamPointing { VelocityAveraged, TargetPointing };

struct BeamSet {
  Vec3 axis = Vec3(0.0, 0.0, -1.0);
  std::array<Vec3, 4> beams;
};

struct AltimeterReading {
  std::array<double, 4> range{kMissRange, kMissRange, kMissRange, kMissRange};
  std::array<bool, 4> miss{true, true, true, true};
};

// Four beams on a cone of half-angle pi/8 about the central axis, at
// quadrant azimuths. The in-plane basis is anchored to +x so the layout is
// a deterministic function of the axis.
inline BeamSet beam_directions(const Vec3& position, const Vec3& velocity,
                               BeamPointing mode, const Vec3& target) {
  Vec3 axis;
  if (mode == BeamPointing::VelocityAveraged) {
    const double speed = velocity.norm();
    if (!(speed > 0.0)) {
      throw Error(ErrorCode::DegenerateDirection,
                  "velocity-averaged beams need nonzero velocity");
    }
    axis = velocity / speed + Vec3(0.0, 0.0, -1.0);
  } else {
    axis = target - position;
  }
  const double n = axis.norm();
  if (!(n > 0.0) || !(axis.z() < 0.0)) {
    throw Error(ErrorCode::DegenerateDirection,
                "beam axis must point below the horizon");
  }
  axis /= n;
  Vec3 ref = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = (ref - ref.dot(axis) * axis).normalized();
  const Vec3 w = axis.cross(u);
  BeamSet set;
  set.axis = axis;
  const double c = std::cos(kBeamConeAngle);
  const double s = std::sin(kBeamConeAngle);
  for (int k = 0; k < 4; ++k) {
    const double phi = 0.5 * std::numbers::pi * k;
    set.beams[k] = (c * axis + s * (std::cos(phi) * u + std::sin(phi) * w)).normalized();
    if (!(set.beams[k].z() < 0.0)) {
      throw Error(ErrorCode::DegenerateDirection,
                  "beam does not point downward");
    }
  }
  return set;
}

struct BeamHit {
  bool miss = true;
  double range = kMissRange;
};

// Intersects one beam with every plane below the sensor. Each intersection
// indexes the map; the one whose plane height best matches the indexed
// elevation wins. No in-map intersection, or a best mismatch larger than
// `tolerance`, is a miss.
inline BeamHit measure_beam(const TerrainMap& map, const Vec3& position,
                            const Vec3& direction, double tolerance) {
  BeamHit hit;
  if (!(direction.z() < 0.0)) return hit;
  double best = std::numeric_limits<double>::infinity();
  for (double plane : map.planes()) {
    if (!(plane < position.z())) break;
    const double t = (plane - position.z()) / direction.z();
    const double x = position.x() + t * direction.x();
    const double y = position.y() + t * direction.y();
    const auto elev = map.elevation_at(x, y);
    if (!elev) continue;
    const double mismatch = std::abs(plane - *elev);
    if (mismatch < best) {
      best = mismatch;
      hit.range = t;
    }
  }
  if (best <= tolerance) {
    hit.miss = false;
  } else {
    hit.range = kMissRange;
  }
  return hit;
}

inline double default_miss_tolerance(const TerrainMap& map) {
  return map.plane_spacing();
}

inline AltimeterReading measure(const TerrainMap& map, const Vec3& position,
                                const BeamSet& beams) {
  AltimeterReading reading;
  const double tol = default_miss_tolerance(map);
  for (int k = 0; k < 4; ++k) {
    const BeamHit hit = measure_beam(map, position, beams.beams[k], tol);
    reading.range[k] = hit.range;
    reading.miss[k] = hit.miss;
  }
  return reading;
}

// Reference range by marching the ray at sub-cell steps against the
// column-terrain surface, then bisecting the crossing. Returns nullopt when
// the ray leaves the map before hitting terrain.
inline std::optional<double> raymarch_range(const TerrainMap& map,
                                            const Vec3& position,
                                            const Vec3& direction,
                                            double step = 0.0,
                                            double max_range = 1e5) {
  if (step <= 0.0) step = 0.05 * map.cell_size();
  auto below = [&](double t) -> std::optional<bool> {
    const Vec3 p = position + t * direction;
    const auto elev = map.elevation_at(p.x(), p.y());
    if (!elev) return std::nullopt;
    return p.z() <= *elev;
  };
  const auto start = below(0.0);
  if (!start) return std::nullopt;
  if (*start) return 0.0;
  double prev = 0.0;
  for (double t = step; t <= max_range; t += step) {
    const auto b = below(t);
    if (!b) return std::nullopt;
    if (*b) {
      double lo = prev;
      double hi = t;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        const auto bm = below(mid);
        if (bm && *bm) hi = mid; else lo = mid;
      }
      return hi;
    }
    prev = t;
  }
  return std::nullopt;
}

struct AltimeterErrorRow {
  double elevation = 0.0;
  double mean_error = 0.0;  // mean |measured - reference|, misses included
  double std_error = 0.0;
  double max_error = 0.0;
  double miss_percent = 0.0;
  int samples = 0;
};

struct CharacterizeOptions {
  int samples = 10000;
  // Sensor positions are offset horizontally from the chosen ground point
  // by a uniform draw over a disk of this radius.
  double max_horizontal_offset = 500.0;
  double margin = 1500.0;  // keep ground points this far inside the edges
};

// For each sensor elevation: pick random ground points, place the sensor at
// that elevation, and compare the plane-stack range along the sensor->ground
// ray with the ray-marched reference. Every elevation replays the same draw
// sequence, so rows differ only through the elevation. Misses enter the
// error statistics with the sentinel range.
inline std::vector<AltimeterErrorRow> characterize_error(
    const TerrainMap& map, Rng& rng, const std::vector<double>& elevations,
    const CharacterizeOptions& options = {}) {
  std::vector<AltimeterErrorRow> rows;
  const double tol = default_miss_tolerance(map);
  const double x0 = map.origin_x() + options.margin;
  const double x1 = map.origin_x() + map.width() - options.margin;
  const double y0 = map.origin_y() + options.margin;
  const double y1 = map.origin_y() + map.height() - options.margin;
  if (!(x0 < x1 && y0 < y1)) {
    throw Error(ErrorCode::DimensionError, "map too small for margin");
  }
  const Rng start = rng;
  for (double elevation : elevations) {
    rng = start;
    AltimeterErrorRow row;
    row.elevation = elevation;
    std::vector<double> errors;
    errors.reserve(options.samples);
    int misses = 0;
    int attempts = 0;
    while (static_cast<int>(errors.size()) < options.samples &&
           attempts < 20 * options.samples) {
      ++attempts;
      const double gx = rng.uniform(x0, x1);
      const double gy = rng.uniform(y0, y1);
      const double radius =
          options.max_horizontal_offset * std::sqrt(rng.uniform());
      const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const Vec3 sensor(gx + radius * std::cos(azimuth),
                        gy + radius * std::sin(azimuth), elevation);
      const double ground = *map.elevation_at(gx, gy);
      if (!(ground < elevation)) continue;
      const auto sensor_ground = map.elevation_at(sensor.x(), sensor.y());
      if (!sensor_ground || !(*sensor_ground < elevation)) continue;
      const Vec3 dir = (Vec3(gx, gy, ground) - sensor).normalized();
      const auto truth = raymarch_range(map, sensor, dir);
      if (!truth) continue;
      const BeamHit hit = measure_beam(map, sensor, dir, tol);
      if (hit.miss) ++misses;
      errors.push_back(std::abs(hit.range - *truth));
    }
    row.samples = static_cast<int>(errors.size());
    if (row.samples > 0) {
      double sum = 0.0;
      for (double e : errors) {
        sum += e;
        row.max_error = std::max(row.max_error, e);
      }
      row.mean_error = sum / row.samples;
      double ss = 0.0;
      for (double e : errors) ss += (e - row.mean_error) * (e - row.mean_error);
      row.std_error = row.samples > 1 ? std::sqrt(ss / (row.samples - 1)) : 0.0;
      row.miss_percent = 100.0 * misses / row.samples;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace metaland
