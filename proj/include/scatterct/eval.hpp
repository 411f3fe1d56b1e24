#pragma once

#include <span>
#include <string>
#include <vector>

#include "scatterct/forward.hpp"
#include "scatterct/geometry.hpp"
#include "scatterct/physics.hpp"

namespace sct {

struct PhantomRegion {
  std::string name;          ///< material name for reporting
  std::vector<int> pixels;   ///< lexicographic pixel indices
  Material material;
};

/// Disjoint material regions on a grid over a vacuum background.
struct Phantom {
  Grid2D grid;
  std::vector<PhantomRegion> regions;

  MaterialMap map() const;
};

struct DiskSpec {
  Vec2 center_cm;
  double radius_cm = 1.0;
  Material material;
};

/// Rasterizes disks by pixel-center containment. Overlapping regions are an
/// error.
Phantom make_phantom(const Grid2D& grid, const std::vector<DiskSpec>& disks);

/// Built-in phantoms rasterized to the requested grid:
///  "phantom1": plexiglass elephant silhouette from the shipped 50x50 mask;
///  "phantom2": water / Delrin / graphite disks.
Phantom make_phantom(const std::string& name, const Grid2D& grid);

/// Relative mean square error ||est - truth||^2 / ||truth||^2.
double rmse(std::span<const double> estimate, std::span<const double> truth);

struct MaterialStats {
  std::string material;
  double mean_rho = 0.0, std_rho = 0.0;
  double mean_p = 0.0, std_p = 0.0;
  double true_rho = 0.0, true_p = 0.0;
  int pixel_count = 0;
};

struct EllipseReport {
  std::vector<MaterialStats> materials;
};

/// Per-region mean/std of the estimates over the truth mask eroded by one
/// pixel (3x3 erosion). Regions whose eroded mask is empty are skipped.
EllipseReport material_ellipses(std::span<const double> rho_hat, std::span<const double> p_hat,
                                const Phantom& phantom);

std::string ellipse_report_csv(const EllipseReport& report);
std::string ellipse_report_svg(const EllipseReport& report);

}  // namespace sct
