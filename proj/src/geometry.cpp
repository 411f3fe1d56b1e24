#include "scatterct/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace sct {

namespace {
constexpr double kMinChord = 1e-12;  // cm; edge touches below this are dropped
}

Grid2D::Grid2D(int n_, double extent, Vec2 orig) : n(n_), extent_cm(extent), origin(orig) {
  if (n < 1) throw std::invalid_argument("Grid2D: n must be >= 1");
  if (!(extent_cm > 0.0)) throw std::invalid_argument("Grid2D: extent must be positive");
}

EnergyBinning::EnergyBinning(double e_lo, double width, int count_)
    : e_lo_keV(e_lo), width_keV(width), count(count_) {
  if (!(width_keV > 0.0) || count < 0)
    throw std::invalid_argument("EnergyBinning: bad width or count");
}

EnergyBinning EnergyBinning::from_range(double e_lo, double e_hi, double width) {
  if (!(e_hi > e_lo)) throw std::invalid_argument("EnergyBinning: empty range");
  const int count = static_cast<int>(std::llround((e_hi - e_lo) / width));
  if (count < 1 || std::abs(e_lo + count * width - e_hi) > 1e-9)
    throw std::invalid_argument("EnergyBinning: width does not tile the range");
  return EnergyBinning(e_lo, width, count);
}

std::vector<double> EnergyBinning::centers_keV() const {
  std::vector<double> c(count);
  for (int k = 0; k < count; ++k) c[k] = center(k);
  return c;
}

int EnergyBinning::bin_of(double e_keV) const {
  if (e_keV < e_lo_keV) return -1;
  const int k = static_cast<int>((e_keV - e_lo_keV) / width_keV);
  if (k >= count) return -1;
  return k;
}

std::vector<RaySegment> trace_ray(const Grid2D& grid, const Vec2& p_from, const Vec2& p_to) {
  const Vec2 d = p_to - p_from;
  const double ray_len = norm(d);
  if (ray_len == 0.0) throw std::invalid_argument("trace_ray: endpoints coincide");

  const double delta = grid.pixel_size();
  const double lo[2] = {grid.origin.x, grid.origin.y};
  const double hi[2] = {grid.origin.x + grid.extent_cm, grid.origin.y + grid.extent_cm};
  const double a[2] = {p_from.x, p_from.y};
  const double dir[2] = {d.x, d.y};

  // Clip the parametric range [0,1] to the grid box.
  double t0 = 0.0, t1 = 1.0;
  for (int ax = 0; ax < 2; ++ax) {
    if (dir[ax] == 0.0) {
      if (a[ax] < lo[ax] || a[ax] > hi[ax]) return {};
    } else {
      double ta = (lo[ax] - a[ax]) / dir[ax];
      double tb = (hi[ax] - a[ax]) / dir[ax];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
  }
  if (!(t1 > t0)) return {};

  // Siddon: collect the grid-line crossing parameters inside (t0, t1).
  std::vector<double> ts;
  ts.reserve(2 * grid.n + 4);
  ts.push_back(t0);
  ts.push_back(t1);
  for (int ax = 0; ax < 2; ++ax) {
    if (dir[ax] == 0.0) continue;
    for (int k = 1; k < grid.n; ++k) {
      const double t = (lo[ax] + k * delta - a[ax]) / dir[ax];
      if (t > t0 && t < t1) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());

  std::vector<RaySegment> segs;
  segs.reserve(ts.size());
  for (size_t s = 0; s + 1 < ts.size(); ++s) {
    const double ta = ts[s], tb = ts[s + 1];
    const double chord = (tb - ta) * ray_len;
    if (chord < kMinChord) continue;
    const double tm = 0.5 * (ta + tb);
    const Vec2 mid{a[0] + tm * dir[0], a[1] + tm * dir[1]};
    int col = static_cast<int>(std::floor((mid.x - lo[0]) / delta));
    int row = static_cast<int>(std::floor((mid.y - lo[1]) / delta));
    col = std::clamp(col, 0, grid.n - 1);
    row = std::clamp(row, 0, grid.n - 1);
    RaySegment seg;
    seg.pixel = grid.index(row, col);
    seg.length_cm = chord;
    seg.midpoint = mid;
    seg.pixel_center = grid.pixel_center(seg.pixel);
    segs.push_back(seg);
  }
  return segs;
}

double scattering_angle(const Vec2& r, const Vec2& r_d, const Vec2& r_dp) {
  const Vec2 u = r - r_d;
  const Vec2 v = r - r_dp;
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0)
    throw std::domain_error("scattering_angle: interaction point coincides with a detector");
  const double c = std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
  return std::acos(c);
}

double solid_angle(const Vec2& r, const Detector& det) {
  const Vec2 u = det.center - r;
  const double d = norm(u);
  if (d == 0.0) throw std::domain_error("solid_angle: point at detector center");
  // Incidence relative to the detector plane; sign of the normal is irrelevant
  // for the subtended angle.
  const double cos_theta = std::abs(dot(u, det.normal)) / d;
  const double alpha = std::atan(det.width_cm / (2.0 * d));
  const double beta = std::atan(det.height_cm * cos_theta / (2.0 * d));
  return 4.0 * std::asin(std::sin(alpha) * std::sin(beta));
}

RaypathTables enumerate_raypaths(const ScanGeometry& geom) {
  RaypathTables tables;
  const int ns = static_cast<int>(geom.sources.size());
  const int nd = static_cast<int>(geom.detectors.size());
  tables.primary.reserve(static_cast<size_t>(ns) * nd);
  tables.secondary.reserve(static_cast<size_t>(ns) * nd);
  for (int s = 0; s < ns; ++s) {
    for (int d = 0; d < nd; ++d) {
      PrimaryRaypath ray;
      ray.source = s;
      ray.detector = d;
      ray.trace = trace_ray(geom.grid, geom.sources[s].position, geom.detectors[d].center);
      tables.primary.push_back(std::move(ray));
      std::vector<int> sec;
      sec.reserve(nd - 1);
      for (int j = 0; j < nd; ++j)
        if (j != d) sec.push_back(j);
      tables.secondary.push_back(std::move(sec));
    }
  }
  return tables;
}

ScanGeometry default_scan_geometry(int grid_n, double extent_cm, int n_detectors,
                                   double det_w_cm, double det_h_cm) {
  if (n_detectors < 2) throw std::invalid_argument("default_scan_geometry: need >= 2 detectors");
  ScanGeometry geom;
  geom.grid = Grid2D(grid_n, extent_cm, {0.0, 0.0});
  const double e = extent_cm;
  geom.sources = {Source{{0.0, e / 2.0}}, Source{{e / 2.0, 0.0}}, Source{{0.0, 0.0}}};

  // Detectors spread along the combined top + right edges by arclength; the
  // shared corner gets the inward diagonal normal.
  const double total = 2.0 * e;
  const double step = total / (n_detectors - 1);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < n_detectors; ++k) {
    const double t = k * step;
    Detector det;
    det.width_cm = det_w_cm;
    det.height_cm = det_h_cm;
    if (t < e) {
      det.center = {t, e};
      det.normal = {0.0, -1.0};
    } else if (t > e) {
      det.center = {e, e - (t - e)};
      det.normal = {-1.0, 0.0};
    } else {
      det.center = {e, e};
      det.normal = {-inv_sqrt2, -inv_sqrt2};
    }
    geom.detectors.push_back(det);
  }
  geom.atten_bins = EnergyBinning::from_range(20.0, 120.0, 1.0);
  geom.scatter_bins = EnergyBinning::from_range(20.0, 120.0, 5.0);
  return geom;
}

}  // namespace sct
