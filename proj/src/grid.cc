#include "deepcell/grid.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepcell/errors.h"

namespace deepcell {

namespace {

std::size_t clamp_axis(double offset, double cell_length, std::size_t count) {
  const double raw = std::floor(offset / cell_length);
  if (raw <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(raw), count - 1);
}

}  // namespace

VirtualGrid::VirtualGrid(PlanarPoint min_corner, double cell_length_m,
                         std::size_t n_cols, std::size_t n_rows)
    : min_corner_(min_corner),
      cell_length_m_(cell_length_m),
      n_cols_(n_cols),
      n_rows_(n_rows) {
  if (!(cell_length_m > 0.0) || !std::isfinite(cell_length_m)) {
    throw InvalidInput("grid cell length must be positive");
  }
  if (n_cols == 0 || n_rows == 0) {
    throw InvalidInput("grid needs at least one row and column");
  }
  if (!std::isfinite(min_corner.x) || !std::isfinite(min_corner.y)) {
    throw InvalidInput("non-finite grid corner");
  }
}

PlanarPoint VirtualGrid::max_corner() const {
  return {min_corner_.x + static_cast<double>(n_cols_) * cell_length_m_,
          min_corner_.y + static_cast<double>(n_rows_) * cell_length_m_};
}

bool VirtualGrid::contains(const PlanarPoint& p) const {
  const auto hi = max_corner();
  return p.x >= min_corner_.x - kEdgeEpsilonM &&
         p.y >= min_corner_.y - kEdgeEpsilonM && p.x <= hi.x + kEdgeEpsilonM &&
         p.y <= hi.y + kEdgeEpsilonM;
}

CellIndex VirtualGrid::cell_of(const PlanarPoint& p) const {
  if (!contains(p)) {
    throw OutOfBounds("point (" + std::to_string(p.x) + ", " +
                      std::to_string(p.y) + ") outside grid extent");
  }
  const std::size_t col =
      clamp_axis(p.x - min_corner_.x, cell_length_m_, n_cols_);
  const std::size_t row =
      clamp_axis(p.y - min_corner_.y, cell_length_m_, n_rows_);
  return {row * n_cols_ + col};
}

PlanarPoint VirtualGrid::centroid(CellIndex cell) const {
  if (cell.value >= cell_count()) {
    throw OutOfBounds("cell index " + std::to_string(cell.value) +
                      " out of range for K=" + std::to_string(cell_count()));
  }
  const std::size_t row = cell.value / n_cols_;
  const std::size_t col = cell.value % n_cols_;
  return {min_corner_.x + (static_cast<double>(col) + 0.5) * cell_length_m_,
          min_corner_.y + (static_cast<double>(row) + 0.5) * cell_length_m_};
}

VirtualGrid build_grid(std::span<const PlanarPoint> locations,
                       double cell_length_m) {
  if (locations.empty()) throw InvalidInput("cannot grid an empty location set");
  if (!(cell_length_m > 0.0)) {
    throw InvalidInput("grid cell length must be positive");
  }
  PlanarPoint lo = locations.front();
  PlanarPoint hi = locations.front();
  for (const auto& p : locations) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidInput("non-finite location");
    }
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  auto span_cells = [&](double extent) {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(extent / cell_length_m)));
  };
  return VirtualGrid(lo, cell_length_m, span_cells(hi.x - lo.x),
                     span_cells(hi.y - lo.y));
}

std::vector<double> one_hot(CellIndex cell, std::size_t cell_count) {
  if (cell.value >= cell_count) {
    throw OutOfBounds("one-hot index " + std::to_string(cell.value) +
                      " out of range for K=" + std::to_string(cell_count));
  }
  std::vector<double> v(cell_count, 0.0);
  v[cell.value] = 1.0;
  return v;
}

}  // namespace deepcell
