#include "scatterct/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sct {

MaterialMap Phantom::map() const {
  std::vector<double> rho(grid.npix(), 0.0), p(grid.npix(), 0.0);
  for (const auto& region : regions) {
    for (int px : region.pixels) {
      rho[px] = region.material.density_g_cm3;
      p[px] = region.material.photoelectric_cm_1;
    }
  }
  return MaterialMap(grid, std::move(rho), std::move(p));
}

Phantom make_phantom(const Grid2D& grid, const std::vector<DiskSpec>& disks) {
  Phantom ph;
  ph.grid = grid;
  std::vector<int> owner(grid.npix(), -1);
  for (size_t d = 0; d < disks.size(); ++d) {
    PhantomRegion region;
    region.name = disks[d].material.name;
    region.material = disks[d].material;
    for (int j = 0; j < grid.npix(); ++j) {
      const Vec2 c = grid.pixel_center(j);
      const double dx = c.x - disks[d].center_cm.x;
      const double dy = c.y - disks[d].center_cm.y;
      if (dx * dx + dy * dy <= disks[d].radius_cm * disks[d].radius_cm) {
        if (owner[j] >= 0) throw std::invalid_argument("make_phantom: overlapping regions");
        owner[j] = static_cast<int>(d);
        region.pixels.push_back(j);
      }
    }
    ph.regions.push_back(std::move(region));
  }
  return ph;
}

namespace {

// The shipped Phantom-I silhouette: a 50x50 binary raster of a side-view
// elephant (body, head, hanging trunk, four legs, tail), generated once from
// shape primitives in unit coordinates (y up).
const std::array<std::array<bool, 50>, 50>& elephant_mask() {
  static const auto mask = [] {
    std::array<std::array<bool, 50>, 50> m{};
    const auto inside = [](double x, double y) {
      const auto ellipse = [&](double cx, double cy, double ax, double ay) {
        const double u = (x - cx) / ax, v = (y - cy) / ay;
        return u * u + v * v <= 1.0;
      };
      const auto rect = [&](double x0, double x1, double y0, double y1) {
        return x >= x0 && x <= x1 && y >= y0 && y <= y1;
      };
      if (ellipse(0.42, 0.54, 0.26, 0.17)) return true;          // body
      if (ellipse(0.72, 0.64, 0.13, 0.13)) return true;          // head
      if (rect(0.22, 0.29, 0.14, 0.44)) return true;             // legs
      if (rect(0.34, 0.41, 0.14, 0.44)) return true;
      if (rect(0.50, 0.57, 0.14, 0.44)) return true;
      if (rect(0.62, 0.69, 0.14, 0.46)) return true;
      if (rect(0.13, 0.16, 0.40, 0.56)) return true;             // tail
      // trunk: disks along a gentle curve from the face downward
      for (int s = 0; s <= 10; ++s) {
        const double t = s / 10.0;
        const double cx = 0.83 + 0.03 * std::sin(M_PI * t);
        const double cy = 0.60 - 0.38 * t;
        const double dx = x - cx, dy = y - cy;
        if (dx * dx + dy * dy <= 0.038 * 0.038) return true;
      }
      return false;
    };
    for (int r = 0; r < 50; ++r)
      for (int c = 0; c < 50; ++c)
        m[r][c] = inside((c + 0.5) / 50.0, (r + 0.5) / 50.0);  // row 0 = bottom
    return m;
  }();
  return mask;
}

Phantom make_phantom1(const Grid2D& grid) {
  const Material* plexi = find_material("plexiglass");
  Phantom ph;
  ph.grid = grid;
  PhantomRegion region;
  region.name = plexi->name;
  region.material = *plexi;
  const auto& mask = elephant_mask();
  for (int j = 0; j < grid.npix(); ++j) {
    const Vec2 c = grid.pixel_center(j);
    // nearest mask cell in unit coordinates
    const double ux = (c.x - grid.origin.x) / grid.extent_cm;
    const double uy = (c.y - grid.origin.y) / grid.extent_cm;
    const int mc = std::clamp(static_cast<int>(ux * 50.0), 0, 49);
    const int mr = std::clamp(static_cast<int>(uy * 50.0), 0, 49);
    if (mask[mr][mc]) region.pixels.push_back(j);
  }
  ph.regions.push_back(std::move(region));
  return ph;
}

Phantom make_phantom2(const Grid2D& grid) {
  const double e = grid.extent_cm;
  const Vec2 o = grid.origin;
  const auto disk = [&](const char* name, double fx, double fy, double fr) {
    return DiskSpec{{o.x + fx * e, o.y + fy * e}, fr * e, *find_material(name)};
  };
  return make_phantom(grid, {
                                disk("water", 0.30, 0.675, 0.16),
                                disk("delrin", 0.69, 0.66, 0.13),
                                disk("graphite", 0.49, 0.31, 0.15),
                            });
}

}  // namespace

Phantom make_phantom(const std::string& name, const Grid2D& grid) {
  if (name == "phantom1") return make_phantom1(grid);
  if (name == "phantom2") return make_phantom2(grid);
  if (name == "vacuum") return Phantom{grid, {}};
  throw std::invalid_argument("make_phantom: unknown builtin '" + name + "'");
}

double rmse(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("rmse: length mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double d = estimate[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw std::invalid_argument("rmse: zero truth");
  return num / den;
}

EllipseReport material_ellipses(std::span<const double> rho_hat, std::span<const double> p_hat,
                                const Phantom& phantom) {
  const int n = phantom.grid.n;
  if (static_cast<int>(rho_hat.size()) != n * n || static_cast<int>(p_hat.size()) != n * n)
    throw std::invalid_argument("material_ellipses: estimate size mismatch");

  EllipseReport report;
  std::vector<char> in_mask(n * n);
  for (const auto& region : phantom.regions) {
    std::fill(in_mask.begin(), in_mask.end(), 0);
    for (int px : region.pixels) in_mask[px] = 1;

    // erode by one pixel (3x3 structuring element)
    std::vector<int> eroded;
    for (int px : region.pixels) {
      const int r = px / n, c = px % n;
      bool keep = true;
      for (int dr = -1; dr <= 1 && keep; ++dr)
        for (int dc = -1; dc <= 1 && keep; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= n || cc < 0 || cc >= n || !in_mask[rr * n + cc]) keep = false;
        }
      if (keep) eroded.push_back(px);
    }
    if (eroded.empty()) continue;  // region too thin at this scale

    MaterialStats st;
    st.material = region.name;
    st.true_rho = region.material.density_g_cm3;
    st.true_p = region.material.photoelectric_cm_1;
    st.pixel_count = static_cast<int>(eroded.size());
    double sr = 0.0, sp = 0.0;
    for (int px : eroded) {
      sr += rho_hat[px];
      sp += p_hat[px];
    }
    st.mean_rho = sr / eroded.size();
    st.mean_p = sp / eroded.size();
    double vr = 0.0, vp = 0.0;
    for (int px : eroded) {
      vr += (rho_hat[px] - st.mean_rho) * (rho_hat[px] - st.mean_rho);
      vp += (p_hat[px] - st.mean_p) * (p_hat[px] - st.mean_p);
    }
    st.std_rho = std::sqrt(vr / eroded.size());
    st.std_p = std::sqrt(vp / eroded.size());
    report.materials.push_back(std::move(st));
  }
  return report;
}

std::string ellipse_report_csv(const EllipseReport& report) {
  std::ostringstream out;
  out << "material,mean_rho,std_rho,mean_p,std_p,true_rho,true_p\n";
  out.precision(10);
  for (const auto& m : report.materials)
    out << m.material << ',' << m.mean_rho << ',' << m.std_rho << ',' << m.mean_p << ','
        << m.std_p << ',' << m.true_rho << ',' << m.true_p << '\n';
  return out.str();
}

std::string ellipse_report_svg(const EllipseReport& report) {
  // density on x in [0, 2.6], photoelectric on y in [0, 0.65]
  const double w = 520, h = 420, ml = 60, mb = 50, mt = 20, mr = 20;
  const double xmax = 2.6, ymax = 0.65;
  const auto X = [&](double rho) { return ml + rho / xmax * (w - ml - mr); };
  const auto Y = [&](double p) { return h - mb - p / ymax * (h - mb - mt); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};

  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  s << "<rect width='100%' height='100%' fill='white'/>\n";
  s << "<line x1='" << ml << "' y1='" << Y(0) << "' x2='" << w - mr << "' y2='" << Y(0)
    << "' stroke='black'/>\n";
  s << "<line x1='" << ml << "' y1='" << Y(0) << "' x2='" << ml << "' y2='" << mt
    << "' stroke='black'/>\n";
  s << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 12
    << "' text-anchor='middle' font-size='13'>density (g/cm^3)</text>\n";
  s << "<text x='16' y='" << (mt + h - mb) / 2
    << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
    << (mt + h - mb) / 2 << ")'>photoelectric (cm^-1)</text>\n";
  for (double t = 0.0; t <= xmax + 1e-9; t += 0.5)
    s << "<text x='" << X(t) << "' y='" << Y(0) + 16 << "' text-anchor='middle' font-size='10'>"
      << t << "</text>\n";
  for (double t = 0.0; t <= ymax + 1e-9; t += 0.1)
    s << "<text x='" << ml - 6 << "' y='" << Y(t) + 3 << "' text-anchor='end' font-size='10'>"
      << t << "</text>\n";

  int ci = 0;
  for (const auto& m : report.materials) {
    const char* col = colors[ci % 5];
    // 1-sigma uncertainty ellipse around the mean
    s << "<ellipse cx='" << X(m.mean_rho) << "' cy='" << Y(m.mean_p) << "' rx='"
      << std::max(1.0, m.std_rho / xmax * (w - ml - mr)) << "' ry='"
      << std::max(1.0, m.std_p / ymax * (h - mb - mt)) << "' fill='" << col
      << "' fill-opacity='0.15' stroke='" << col << "'/>\n";
    s << "<circle cx='" << X(m.mean_rho) << "' cy='" << Y(m.mean_p) << "' r='3' fill='" << col
      << "'/>\n";
    s << "<rect x='" << X(m.true_rho) - 4 << "' y='" << Y(m.true_p) - 4
      << "' width='8' height='8' fill='" << col << "'/>\n";
    s << "<text x='" << X(m.true_rho) + 7 << "' y='" << Y(m.true_p) - 6 << "' font-size='11' fill='"
      << col << "'>" << m.material << "</text>\n";
    ++ci;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace sct
