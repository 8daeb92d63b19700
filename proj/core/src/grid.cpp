#include "invuq/grid.hpp"

#include "invuq/errors.hpp"

namespace invuq {

Grid Grid::regular(std::size_t nx, std::size_t ny, double dx, double dy) {
  Grid g;
  g.nx = nx;
  g.ny = ny;
  g.dx = dx;
  g.dy = dy;
  g.mask.assign(nx * ny, 1);
  g.finalize();
  return g;
}

void Grid::set_inactive(std::size_t ix, std::size_t iy) { mask[cell_id(ix, iy)] = 0; }

void Grid::finalize() {
  if (nx == 0 || ny == 0) throw ConfigError("grid: nx and ny must be positive");
  if (dx <= 0.0 || dy <= 0.0) throw ConfigError("grid: dx and dy must be positive");
  if (mask.size() != nx * ny) throw ConfigError("grid: mask length must equal nx*ny");
  active_of_cell.assign(nx * ny, -1);
  cell_of_active.clear();
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (mask[c]) {
      active_of_cell[c] = static_cast<std::ptrdiff_t>(cell_of_active.size());
      cell_of_active.push_back(c);
    }
  }
  if (cell_of_active.empty()) throw ConfigError("grid: at least one active cell required");
}

}  // namespace invuq
