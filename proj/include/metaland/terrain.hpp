// Digital terrain map: elevation grid, synthetic generation, grid-file I/O,
// mirroring, and the precomputed stack of horizontal planes used by the fast
// altimeter model.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metaland/core.hpp"

namespace metaland {

class TerrainMap {
 public:
  // Row-major elevations; row index runs along y, column index along x.
  TerrainMap(int rows, int cols, double cell_size,
             std::vector<double> elevations, double plane_spacing = 10.0,
             double origin_x = 0.0, double origin_y = 0.0)
      : rows_(rows),
        cols_(cols),
        cell_size_(cell_size),
        origin_x_(origin_x),
        origin_y_(origin_y),
        plane_spacing_(plane_spacing),
        elevations_(std::move(elevations)) {
    if (rows_ < 1 || cols_ < 1) {
      throw Error(ErrorCode::DimensionError, "terrain grid must be non-empty");
    }
    if (elevations_.size() != static_cast<std::size_t>(rows_) * cols_) {
      throw Error(ErrorCode::DimensionError,
                  "terrain grid is not rows x cols");
    }
    if (!(cell_size_ > 0.0) || !(plane_spacing_ > 0.0)) {
      throw Error(ErrorCode::DimensionError,
                  "cell size and plane spacing must be positive");
    }
    build_planes();
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double cell_size() const { return cell_size_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  double plane_spacing() const { return plane_spacing_; }
  double width() const { return cols_ * cell_size_; }
  double height() const { return rows_ * cell_size_; }
  double min_elevation() const { return min_; }
  double max_elevation() const { return max_; }
  const std::vector<double>& elevations() const { return elevations_; }
  const std::vector<double>& planes() const { return planes_; }

  double at(int row, int col) const {
    return elevations_[static_cast<std::size_t>(row) * cols_ + col];
  }

  bool contains(double x, double y) const {
    const double u = (x - origin_x_) / cell_size_;
    const double w = (y - origin_y_) / cell_size_;
    return u >= 0.0 && w >= 0.0 && u < cols_ && w < rows_;
  }

  // Elevation of the cell containing (x, y); nullopt outside the footprint.
  std::optional<double> elevation_at(double x, double y) const {
    const double u = (x - origin_x_) / cell_size_;
    const double w = (y - origin_y_) / cell_size_;
    if (!(u >= 0.0 && w >= 0.0 && u < cols_ && w < rows_)) return std::nullopt;
    return at(static_cast<int>(w), static_cast<int>(u));
  }

 private:
  void build_planes() {
    const auto [lo, hi] =
        std::minmax_element(elevations_.begin(), elevations_.end());
    min_ = *lo;
    max_ = *hi;
    planes_.clear();
    const int n = static_cast<int>(std::ceil((max_ - min_) / plane_spacing_));
    for (int k = 0; k <= n; ++k) {
      planes_.push_back(std::min(min_ + k * plane_spacing_, max_));
    }
    planes_.erase(std::unique(planes_.begin(), planes_.end()), planes_.end());
  }

  int rows_;
  int cols_;
  double cell_size_;
  double origin_x_;
  double origin_y_;
  double plane_spacing_;
  std::vector<double> elevations_;
  std::vector<double> planes_;
  double min_ = 0.0;
  double max_ = 0.0;
};

// Diamond-square fractal terrain on a (2^n + 1) lattice cropped to
// size x size, rescaled to [min_elev, max_elev].
inline TerrainMap synthetic_terrain(std::uint64_t seed, int size = 1024,
                                    double cell_size = 10.0,
                                    double min_elev = 0.0,
                                    double max_elev = 380.0,
                                    double roughness = 0.55) {
  if (size < 2) throw Error(ErrorCode::DimensionError, "terrain size < 2");
  int lattice = 1;
  while (lattice < size) lattice *= 2;
  const int n = lattice + 1;
  std::vector<double> h(static_cast<std::size_t>(n) * n, 0.0);
  auto H = [&](int r, int c) -> double& {
    return h[static_cast<std::size_t>(r) * n + c];
  };
  Rng rng(seed);
  H(0, 0) = rng.uniform(-1.0, 1.0);
  H(0, lattice) = rng.uniform(-1.0, 1.0);
  H(lattice, 0) = rng.uniform(-1.0, 1.0);
  H(lattice, lattice) = rng.uniform(-1.0, 1.0);
  double amplitude = 1.0;
  const double decay = std::pow(2.0, -roughness);
  for (int step = lattice; step > 1; step /= 2) {
    const int half = step / 2;
    for (int r = half; r < n; r += step) {
      for (int c = half; c < n; c += step) {
        const double avg = 0.25 * (H(r - half, c - half) + H(r - half, c + half) +
                                   H(r + half, c - half) + H(r + half, c + half));
        H(r, c) = avg + amplitude * rng.uniform(-1.0, 1.0);
      }
    }
    for (int r = 0; r < n; r += half) {
      for (int c = (r / half) % 2 == 0 ? half : 0; c < n; c += step) {
        double sum = 0.0;
        int count = 0;
        if (r >= half) { sum += H(r - half, c); ++count; }
        if (r + half < n) { sum += H(r + half, c); ++count; }
        if (c >= half) { sum += H(r, c - half); ++count; }
        if (c + half < n) { sum += H(r, c + half); ++count; }
        H(r, c) = sum / count + amplitude * rng.uniform(-1.0, 1.0);
      }
    }
    amplitude *= decay;
  }
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      lo = std::min(lo, H(r, c));
      hi = std::max(hi, H(r, c));
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double unit = (H(r, c) - lo) / span;
      out[static_cast<std::size_t>(r) * size + c] =
          std::clamp(min_elev + unit * (max_elev - min_elev), min_elev, max_elev);
    }
  }
  return TerrainMap(size, size, cell_size, std::move(out));
}

// Grid file: header "rows cols cellsize_m", then rows*cols elevations in
// row-major order.
inline TerrainMap parse_terrain(std::istream& in, double plane_spacing = 10.0) {
  long long rows = 0;
  long long cols = 0;
  double cell = 0.0;
  std::string header;
  if (!std::getline(in, header)) {
    throw Error(ErrorCode::ParseError, "terrain file: missing header");
  }
  std::istringstream hs(header);
  if (!(hs >> rows >> cols >> cell)) {
    throw Error(ErrorCode::ParseError,
                "terrain file: header must be 'rows cols cellsize_m'");
  }
  std::string extra;
  if (hs >> extra) {
    throw Error(ErrorCode::ParseError, "terrain file: trailing header tokens");
  }
  if (rows < 1 || cols < 1 || rows * cols > (1LL << 28)) {
    throw Error(ErrorCode::DimensionError, "terrain file: bad dimensions");
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(rows * cols));
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError,
                  "terrain file: bad elevation '" + token + "'");
    }
  }
  if (values.size() != static_cast<std::size_t>(rows * cols)) {
    throw Error(ErrorCode::DimensionError,
                "terrain file: expected " + std::to_string(rows * cols) +
                    " elevations, found " + std::to_string(values.size()));
  }
  return TerrainMap(static_cast<int>(rows), static_cast<int>(cols), cell,
                    std::move(values), plane_spacing);
}

inline TerrainMap load_terrain(const std::string& path,
                               double plane_spacing = 10.0) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open terrain file " + path);
  return parse_terrain(in, plane_spacing);
}

inline void write_terrain(std::ostream& out, const TerrainMap& map) {
  out << map.rows() << ' ' << map.cols() << ' ' << map.cell_size() << '\n';
  out.precision(17);
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      out << (c ? " " : "") << map.at(r, c);
    }
    out << '\n';
  }
}

// Doubles the row count by appending the rows in reverse order, so the
// seam rows n-1 and n are equal.
inline TerrainMap mirror_map(const TerrainMap& map) {
  const int rows = map.rows();
  const int cols = map.cols();
  std::vector<double> out(map.elevations());
  out.reserve(out.size() * 2);
  for (int r = rows - 1; r >= 0; --r) {
    for (int c = 0; c < cols; ++c) out.push_back(map.at(r, c));
  }
  return TerrainMap(2 * rows, cols, map.cell_size(), std::move(out),
                    map.plane_spacing(), map.origin_x(), map.origin_y());
}

}  // namespace metaland
