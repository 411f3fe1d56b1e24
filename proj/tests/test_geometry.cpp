#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "scatterct/geometry.hpp"

using namespace sct;

TEST_CASE("trace_ray: axis-aligned ray through a full row") {
  Grid2D grid(10, 20.0);  // pixel size 2 cm
  const auto segs = trace_ray(grid, {-5.0, 5.0}, {25.0, 5.0});
  REQUIRE(segs.size() == 10);
  for (size_t i = 0; i < segs.size(); ++i) {
    CHECK(segs[i].length_cm == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(segs[i].midpoint.x == doctest::Approx(2.0 * i + 1.0));
    CHECK(segs[i].midpoint.y == doctest::Approx(5.0));
    CHECK(segs[i].pixel == grid.index(2, static_cast<int>(i)));
  }
}

TEST_CASE("trace_ray: corner-to-corner diagonal on a 2x2 grid") {
  Grid2D grid(2, 2.0);
  const auto segs = trace_ray(grid, {0.0, 0.0}, {2.0, 2.0});
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].length_cm == doctest::Approx(std::sqrt(2.0)));
  CHECK(segs[1].length_cm == doctest::Approx(std::sqrt(2.0)));
  CHECK(segs[0].pixel == 0);
  CHECK(segs[1].pixel == 3);
}

TEST_CASE("trace_ray: ray missing the grid yields empty") {
  Grid2D grid(4, 4.0);
  CHECK(trace_ray(grid, {-1.0, -1.0}, {-1.0, 5.0}).empty());
  CHECK(trace_ray(grid, {5.0, -3.0}, {9.0, 10.0}).empty());
}

TEST_CASE("trace_ray: chord sums match a Monte-Carlo point-in-pixel oracle") {
  Grid2D grid(50, 20.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> side(-2.0, 22.0);
  const Vec2 a{-1.0, side(rng)}, b{21.0, side(rng)};
  const auto segs = trace_ray(grid, a, b);
  REQUIRE(!segs.empty());

  // clipped length of the ray inside the grid box
  double t0 = 0.0, t1 = 1.0;
  const double dir[2] = {b.x - a.x, b.y - a.y};
  const double av[2] = {a.x, a.y};
  for (int ax = 0; ax < 2; ++ax) {
    double ta = (0.0 - av[ax]) / dir[ax];
    double tb = (20.0 - av[ax]) / dir[ax];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  const double clipped = (t1 - t0) * std::hypot(dir[0], dir[1]);

  double total = 0.0;
  for (const auto& s : segs) total += s.length_cm;
  CHECK(std::abs(total - clipped) < 1e-10 * grid.extent_cm);

  // dense sampling along the clipped ray estimates per-pixel chord lengths
  std::vector<double> est(grid.npix(), 0.0);
  const int ns = 1000000;
  for (int i = 0; i < ns; ++i) {
    const double t = t0 + (t1 - t0) * (i + 0.5) / ns;
    const double x = av[0] + t * dir[0], y = av[1] + t * dir[1];
    const int col = std::min(49, static_cast<int>(x / 0.4));
    const int row = std::min(49, static_cast<int>(y / 0.4));
    est[grid.index(row, col)] += clipped / ns;
  }
  for (const auto& s : segs)
    CHECK(std::abs(est[s.pixel] - s.length_cm) < 0.01 * clipped / 50 + 3e-3);
}

TEST_CASE("trace_ray: symmetric under endpoint swap") {
  Grid2D grid(13, 7.0);
  const Vec2 a{-0.5, 1.3}, b{7.5, 6.1};
  auto fwd = trace_ray(grid, a, b);
  auto bwd = trace_ray(grid, b, a);
  REQUIRE(fwd.size() == bwd.size());
  for (size_t i = 0; i < fwd.size(); ++i) {
    const auto& r = bwd[bwd.size() - 1 - i];
    CHECK(fwd[i].pixel == r.pixel);
    CHECK(fwd[i].length_cm == doctest::Approx(r.length_cm).epsilon(1e-9));
  }
}

TEST_CASE("trace_ray: midpoints lie inside their pixel") {
  Grid2D grid(9, 5.0, {-1.0, 2.0});
  const auto segs = trace_ray(grid, {-2.0, 2.1}, {5.0, 7.2});
  const double d = grid.pixel_size();
  for (const auto& s : segs) {
    const int row = s.pixel / grid.n, col = s.pixel % grid.n;
    CHECK(s.midpoint.x >= grid.origin.x + col * d);
    CHECK(s.midpoint.x <= grid.origin.x + (col + 1) * d);
    CHECK(s.midpoint.y >= grid.origin.y + row * d);
    CHECK(s.midpoint.y <= grid.origin.y + (row + 1) * d);
    CHECK(s.length_cm <= d * std::sqrt(2.0) * (1 + 1e-12));
  }
}

TEST_CASE("scattering_angle basics") {
  CHECK(scattering_angle({0, 0}, {1, 0}, {0, 1}) == doctest::Approx(M_PI / 2));
  // collinear, same side -> parallel unit vectors
  CHECK(scattering_angle({0, 0}, {2, 0}, {5, 0}) == doctest::Approx(0.0));
  CHECK(scattering_angle({1, 2}, {4, 2}, {1, 6}) == doctest::Approx(M_PI / 2));
  CHECK_THROWS_AS(scattering_angle({1, 1}, {1, 1}, {0, 0}), std::domain_error);
}

TEST_CASE("scattering_angle is symmetric in the detector arguments") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const Vec2 r{u(rng), u(rng)}, a{u(rng), u(rng)}, b{u(rng), u(rng)};
    if (norm(r - a) < 1e-6 || norm(r - b) < 1e-6) continue;
    CHECK(scattering_angle(r, a, b) == doctest::Approx(scattering_angle(r, b, a)));
  }
}

TEST_CASE("solid_angle: small detector at 10 cm, normal incidence") {
  Detector det;
  det.center = {0.0, 10.0};
  det.width_cm = det.height_cm = 0.1;
  det.normal = {0.0, -1.0};
  const double omega = solid_angle({0.0, 0.0}, det);
  const double a = std::atan(0.005);
  CHECK(omega == doctest::Approx(4.0 * std::asin(std::sin(a) * std::sin(a))).epsilon(1e-12));
  // far-field w*h/d^2
  CHECK(omega == doctest::Approx(0.1 * 0.1 / 100.0).epsilon(1e-3));
}

TEST_CASE("solid_angle: grazing incidence vanishes, distance scaling") {
  Detector det;
  det.center = {10.0, 0.0};
  det.width_cm = det.height_cm = 0.1;
  det.normal = {0.0, 1.0};  // plane contains the ray -> grazing
  CHECK(solid_angle({0.0, 0.0}, det) == doctest::Approx(0.0).epsilon(1e-15));

  det.normal = {-1.0, 0.0};
  const double o1 = solid_angle({0.0, 0.0}, det);
  det.center = {20.0, 0.0};
  const double o2 = solid_angle({0.0, 0.0}, det);
  CHECK(o1 / o2 == doctest::Approx(4.0).epsilon(0.01));
  CHECK_THROWS_AS(solid_angle({20.0, 0.0}, det), std::domain_error);
}

TEST_CASE("solid_angle decreases with distance") {
  Detector det;
  det.width_cm = 0.3;
  det.height_cm = 0.2;
  det.normal = {-1.0, 0.0};
  double prev = 4 * M_PI;
  for (double d = 1.0; d < 40.0; d *= 1.7) {
    det.center = {d, 0.3};
    const double o = solid_angle({0.0, 0.0}, det);
    CHECK(o < prev);
    CHECK(o > 0.0);
    prev = o;
  }
}

TEST_CASE("enumerate_raypaths counts") {
  SUBCASE("paper geometry: 3 sources x 41 detectors") {
    const ScanGeometry geom = default_scan_geometry(50, 20.0, 41);
    const RaypathTables t = enumerate_raypaths(geom);
    CHECK(t.primary.size() == 123);
    CHECK(geom.n_primary() == 123);
    CHECK(geom.n_secondary() == 4920);
    size_t total_secondary = 0;
    for (const auto& sec : t.secondary) total_secondary += sec.size();
    CHECK(total_secondary == 4920);
  }
  SUBCASE("smallest nondegenerate case") {
    ScanGeometry geom = default_scan_geometry(4, 4.0, 2);
    geom.sources.resize(1);
    const RaypathTables t = enumerate_raypaths(geom);
    CHECK(t.primary.size() == 2);
    REQUIRE(t.secondary.size() == 2);
    CHECK(t.secondary[0] == std::vector<int>{1});
    CHECK(t.secondary[1] == std::vector<int>{0});
  }
  SUBCASE("2 sources x 5 detectors, exhaustive") {
    ScanGeometry geom = default_scan_geometry(8, 8.0, 5);
    geom.sources.resize(2);
    const RaypathTables t = enumerate_raypaths(geom);
    CHECK(t.primary.size() == 10);
    size_t rows = 0;
    for (size_t i = 0; i < t.secondary.size(); ++i) {
      rows += t.secondary[i].size();
      CHECK(t.secondary[i].size() == 4);
      for (int j : t.secondary[i]) CHECK(j != t.primary[i].detector);
    }
    CHECK(rows == 40);
  }
}

TEST_CASE("default geometry layout") {
  const ScanGeometry geom = default_scan_geometry(50, 20.0, 41);
  REQUIRE(geom.sources.size() == 3);
  CHECK(geom.sources[0].position.x == 0.0);
  CHECK(geom.sources[0].position.y == 10.0);
  CHECK(geom.sources[2].position.x == 0.0);
  CHECK(geom.sources[2].position.y == 0.0);
  REQUIRE(geom.detectors.size() == 41);
  CHECK(geom.detectors.front().center.x == doctest::Approx(0.0));
  CHECK(geom.detectors.front().center.y == doctest::Approx(20.0));
  CHECK(geom.detectors.back().center.x == doctest::Approx(20.0));
  CHECK(geom.detectors.back().center.y == doctest::Approx(0.0));
  // corner detector is present exactly once
  int corner_count = 0;
  for (const auto& d : geom.detectors)
    if (norm(d.center - Vec2{20.0, 20.0}) < 1e-9) ++corner_count;
  CHECK(corner_count == 1);
  CHECK(geom.atten_bins.count == 100);
  CHECK(geom.scatter_bins.count == 20);
}

TEST_CASE("energy binning is half-open and tiles the range") {
  const EnergyBinning bins = EnergyBinning::from_range(20.0, 120.0, 5.0);
  CHECK(bins.count == 20);
  CHECK(bins.center(0) == doctest::Approx(22.5));
  CHECK(bins.bin_of(20.0) == 0);
  CHECK(bins.bin_of(25.0) == 1);  // half-open: 25 belongs to [25, 30)
  CHECK(bins.bin_of(119.999) == 19);
  CHECK(bins.bin_of(120.0) == -1);
  CHECK(bins.bin_of(19.999) == -1);
}
