#ifndef DEEPCELL_GRID_H_
#define DEEPCELL_GRID_H_

#include <cstddef>
#include <span>
#include <vector>

#include "deepcell/domain.h"

namespace deepcell {

// Row-major flat cell index: row * n_cols + col.
struct CellIndex {
  std::size_t value = 0;

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

// Square-cell partition of the bounding box of the training locations.
// Left/bottom edges are inclusive; points on the far edges clamp into the
// last column/row.
class VirtualGrid {
 public:
  // Tolerance for points marginally outside the extent.
  static constexpr double kEdgeEpsilonM = 1e-9;

  VirtualGrid(PlanarPoint min_corner, double cell_length_m, std::size_t n_cols,
              std::size_t n_rows);

  const PlanarPoint& min_corner() const { return min_corner_; }
  double cell_length_m() const { return cell_length_m_; }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t cell_count() const { return n_cols_ * n_rows_; }
  PlanarPoint max_corner() const;

  bool contains(const PlanarPoint& p) const;
  CellIndex cell_of(const PlanarPoint& p) const;
  PlanarPoint centroid(CellIndex cell) const;

  friend bool operator==(const VirtualGrid&, const VirtualGrid&) = default;

 private:
  PlanarPoint min_corner_;
  double cell_length_m_;
  std::size_t n_cols_;
  std::size_t n_rows_;
};

VirtualGrid build_grid(std::span<const PlanarPoint> locations,
                       double cell_length_m);

std::vector<double> one_hot(CellIndex cell, std::size_t cell_count);

}  // namespace deepcell

#endif  // DEEPCELL_GRID_H_
