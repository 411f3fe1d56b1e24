#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sct {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

/// Square pixelization of the imaging plane. Pixel index j = row * n + col,
/// rows counted upward from the lower-left origin.
struct Grid2D {
  int n = 1;                ///< pixels per side
  double extent_cm = 1.0;   ///< physical side length
  Vec2 origin{0.0, 0.0};    ///< lower-left corner

  Grid2D() = default;
  Grid2D(int n_, double extent, Vec2 orig = {0.0, 0.0});

  double pixel_size() const { return extent_cm / n; }
  int npix() const { return n * n; }
  int index(int row, int col) const { return row * n + col; }
  Vec2 pixel_center(int j) const {
    const double d = pixel_size();
    return {origin.x + (j % n + 0.5) * d, origin.y + (j / n + 0.5) * d};
  }
};

/// Rectangular detector centered on the imaging plane. The normal is the
/// in-plane unit vector the face points along (toward the grid interior for
/// the shipped layouts).
struct Detector {
  Vec2 center;
  double width_cm = 0.1;
  double height_cm = 0.1;
  Vec2 normal{0.0, -1.0};
};

struct Source {
  Vec2 position;
  int spectrum_id = 0;
};

/// Contiguous uniform energy bins [e_lo, e_lo + count*width). Bin membership
/// is half-open: E belongs to bin k iff e_lo + k*w <= E < e_lo + (k+1)*w.
struct EnergyBinning {
  double e_lo_keV = 0.0;
  double width_keV = 1.0;
  int count = 0;

  EnergyBinning() = default;
  EnergyBinning(double e_lo, double width, int count_);
  static EnergyBinning from_range(double e_lo, double e_hi, double width);

  double e_hi_keV() const { return e_lo_keV + count * width_keV; }
  double center(int k) const { return e_lo_keV + (k + 0.5) * width_keV; }
  std::vector<double> centers_keV() const;
  /// Returns bin index, or -1 when E lies outside the covered range.
  int bin_of(double e_keV) const;
};

struct ScanGeometry {
  Grid2D grid;
  std::vector<Source> sources;
  std::vector<Detector> detectors;
  EnergyBinning atten_bins;
  EnergyBinning scatter_bins;

  int n_primary() const { return static_cast<int>(sources.size() * detectors.size()); }
  int n_secondary() const {
    return n_primary() * (static_cast<int>(detectors.size()) - 1);
  }
};

/// One chord of a traced ray. midpoint is the chord midpoint (used as the
/// scatter interaction point); pixel_center is the center of the crossed pixel.
struct RaySegment {
  int pixel = 0;
  double length_cm = 0.0;
  Vec2 midpoint;
  Vec2 pixel_center;
};

/// Siddon-style parametric traversal of the straight line p_from -> p_to
/// clipped to the grid. Segments are ordered from p_from; chords shorter than
/// 1e-12 cm (edge touches) are dropped. A ray that misses the grid yields an
/// empty list.
std::vector<RaySegment> trace_ray(const Grid2D& grid, const Vec2& p_from, const Vec2& p_to);

/// Scattering angle at r between the rays toward r_d and r_dp.
double scattering_angle(const Vec2& r, const Vec2& r_d, const Vec2& r_dp);

/// Solid angle of a rectangular detector seen from r:
/// 4*asin(sin(alpha)*sin(beta)), alpha = atan(w/2d), beta = atan(h*cos(theta)/2d).
double solid_angle(const Vec2& r, const Detector& det);

struct PrimaryRaypath {
  int source = 0;
  int detector = 0;
  std::vector<RaySegment> trace;
};

struct RaypathTables {
  std::vector<PrimaryRaypath> primary;              ///< size N_S * N_D, source-major
  std::vector<std::vector<int>> secondary;          ///< per primary: detector ids != its own
};

RaypathTables enumerate_raypaths(const ScanGeometry& geom);

/// Paper-style default layout: sources at the midpoints of the left and bottom
/// edges plus the bottom-left corner; n_detectors equally spaced along the
/// combined top+right edges, faces toward the interior.
ScanGeometry default_scan_geometry(int grid_n, double extent_cm, int n_detectors,
                                   double det_w_cm = 0.1, double det_h_cm = 0.1);

}  // namespace sct
