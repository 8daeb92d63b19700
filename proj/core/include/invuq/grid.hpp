#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace invuq {

/// Structured rectangular grid with an active-cell mask.
/// Cell (ix, iy) has flat id iy*nx + ix; active cells are numbered
/// consecutively in flat-id order.
struct Grid {
  std::size_t nx = 0, ny = 0;
  double dx = 1.0, dy = 1.0;
  std::vector<std::uint8_t> mask;  // nx*ny, 1 = active

  std::vector<std::ptrdiff_t> active_of_cell;  // flat id -> active ordinal, -1 inactive
  std::vector<std::size_t> cell_of_active;     // active ordinal -> flat id

  static Grid regular(std::size_t nx, std::size_t ny, double dx, double dy);

  std::size_t cell_id(std::size_t ix, std::size_t iy) const { return iy * nx + ix; }
  bool is_active(std::size_t ix, std::size_t iy) const { return mask[cell_id(ix, iy)] != 0; }
  std::size_t n_active() const { return cell_of_active.size(); }
  double xc(std::size_t ix) const { return (static_cast<double>(ix) + 0.5) * dx; }
  double yc(std::size_t iy) const { return (static_cast<double>(iy) + 0.5) * dy; }

  void set_inactive(std::size_t ix, std::size_t iy);
  /// Rebuild the active indexing after mask edits; validates invariants.
  void finalize();
};

/// Log-conductivity (or any scalar) field over the active cells.
struct FieldY {
  std::vector<double> v;
};

}  // namespace invuq
