#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "scatterct/eval.hpp"

using namespace sct;

TEST_CASE("make_phantom: water disk carries the table values") {
  const Grid2D grid(40, 20.0);
  const Phantom ph = make_phantom(grid, {{{10.0, 10.0}, 4.0, *find_material("water")}});
  const MaterialMap m = ph.map();
  REQUIRE(!ph.regions[0].pixels.empty());
  for (int px : ph.regions[0].pixels) {
    CHECK(m.rho[px] == 1.0);
    CHECK(m.p[px] == 0.5439);
  }
  // background is vacuum
  std::set<int> inside(ph.regions[0].pixels.begin(), ph.regions[0].pixels.end());
  for (int j = 0; j < grid.npix(); ++j)
    if (!inside.count(j)) {
      CHECK(m.rho[j] == 0.0);
      CHECK(m.p[j] == 0.0);
    }
}

TEST_CASE("make_phantom: empty region list gives an all-zero map") {
  const Grid2D grid(10, 5.0);
  const Phantom ph = make_phantom(grid, {});
  const MaterialMap m = ph.map();
  for (int j = 0; j < grid.npix(); ++j) {
    CHECK(m.rho[j] == 0.0);
    CHECK(m.p[j] == 0.0);
  }
}

TEST_CASE("make_phantom: disk area approximates pi r^2") {
  const Grid2D grid(100, 20.0);  // delta = 0.2, radius 3*delta... use finer
  const double r = 3.0;
  const Phantom ph = make_phantom(grid, {{{10.0, 10.0}, r, *find_material("graphite")}});
  const double area_px = ph.regions[0].pixels.size() * grid.pixel_size() * grid.pixel_size();
  CHECK(std::abs(area_px - M_PI * r * r) / (M_PI * r * r) < 0.05);
}

TEST_CASE("make_phantom: overlapping regions are rejected") {
  const Grid2D grid(20, 20.0);
  CHECK_THROWS(make_phantom(grid, {{{10.0, 10.0}, 4.0, *find_material("water")},
                                   {{12.0, 10.0}, 4.0, *find_material("delrin")}}));
}

TEST_CASE("builtin phantom2 has three disjoint material disks") {
  for (int n : {20, 50}) {
    const Grid2D grid(n, 20.0);
    const Phantom ph = make_phantom("phantom2", grid);
    REQUIRE(ph.regions.size() == 3);
    CHECK(ph.regions[0].material.name == "water");
    CHECK(ph.regions[1].material.name == "delrin");
    CHECK(ph.regions[2].material.name == "graphite");
    for (const auto& reg : ph.regions) CHECK(!reg.pixels.empty());
  }
}

TEST_CASE("builtin phantom1 is a plexiglass silhouette with concavities") {
  const Grid2D grid(50, 20.0);
  const Phantom ph = make_phantom("phantom1", grid);
  REQUIRE(ph.regions.size() == 1);
  CHECK(ph.regions[0].material.name == "plexiglass");
  const size_t area = ph.regions[0].pixels.size();
  CHECK(area > 400);   // a substantial object
  CHECK(area < 1700);  // but far from filling the square
  // concavity probe: the bounding box contains background pixels between legs
  std::set<int> inside(ph.regions[0].pixels.begin(), ph.regions[0].pixels.end());
  int rmin = 50, rmax = 0, cmin = 50, cmax = 0;
  for (int px : inside) {
    rmin = std::min(rmin, px / 50);
    rmax = std::max(rmax, px / 50);
    cmin = std::min(cmin, px % 50);
    cmax = std::max(cmax, px % 50);
  }
  int holes = 0;
  for (int r = rmin; r <= rmax; ++r)
    for (int c = cmin; c <= cmax; ++c)
      if (!inside.count(r * 50 + c)) ++holes;
  CHECK(holes > 100);
  // it also rasterizes at other scales
  const Phantom small = make_phantom("phantom1", Grid2D(20, 20.0));
  CHECK(!small.regions[0].pixels.empty());
}

TEST_CASE("rmse") {
  const std::vector<double> t = {1.0, 2.0, 3.0};
  CHECK(rmse(t, t) == 0.0);
  CHECK(rmse(std::vector<double>{0.0, 0.0, 0.0}, t) == doctest::Approx(1.0));
  std::vector<double> e = t;
  for (double& v : e) v *= 1.1;
  CHECK(rmse(e, t) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS(rmse(e, std::vector<double>{0.0, 0.0, 0.0}));
  CHECK_THROWS(rmse(e, std::vector<double>{1.0}));
}

TEST_CASE("rmse is scale covariant") {
  const std::vector<double> t = {1.0, -2.0, 0.5, 3.0};
  const std::vector<double> e = {1.2, -1.7, 0.4, 2.6};
  std::vector<double> t2 = t, e2 = e;
  for (double& v : t2) v *= 7.0;
  for (double& v : e2) v *= 7.0;
  CHECK(rmse(e2, t2) == doctest::Approx(rmse(e, t)).epsilon(1e-14));
}

TEST_CASE("material_ellipses: perfect reconstruction has exact means, zero stds") {
  const Grid2D grid(50, 20.0);
  const Phantom ph = make_phantom("phantom2", grid);
  const MaterialMap m = ph.map();
  const EllipseReport rep = material_ellipses(m.rho, m.p, ph);
  REQUIRE(rep.materials.size() == 3);
  for (const auto& st : rep.materials) {
    CHECK(st.mean_rho == doctest::Approx(st.true_rho).epsilon(1e-14));
    CHECK(st.mean_p == doctest::Approx(st.true_p).epsilon(1e-14));
    CHECK(st.std_rho < 1e-12);  // zero up to the rounding of the mean
    CHECK(st.std_p < 1e-12);
    CHECK(st.pixel_count > 0);
  }
}

TEST_CASE("material_ellipses: uniform offset shifts means, keeps stds") {
  const Grid2D grid(50, 20.0);
  const Phantom ph = make_phantom("phantom2", grid);
  const MaterialMap m = ph.map();
  std::vector<double> rho_off = m.rho, p_off = m.p;
  for (double& v : rho_off) v += 0.25;
  for (double& v : p_off) v += 0.1;
  const EllipseReport a = material_ellipses(m.rho, m.p, ph);
  const EllipseReport b = material_ellipses(rho_off, p_off, ph);
  REQUIRE(a.materials.size() == b.materials.size());
  for (size_t i = 0; i < a.materials.size(); ++i) {
    CHECK(b.materials[i].mean_rho ==
          doctest::Approx(a.materials[i].mean_rho + 0.25).epsilon(1e-12));
    CHECK(b.materials[i].mean_p == doctest::Approx(a.materials[i].mean_p + 0.1).epsilon(1e-12));
    CHECK(b.materials[i].std_rho == doctest::Approx(a.materials[i].std_rho).epsilon(1e-9));
  }
}

TEST_CASE("material_ellipses: erosion shrinks masks and skips slivers") {
  const Grid2D grid(50, 20.0);
  const Phantom ph = make_phantom("phantom2", grid);
  const MaterialMap m = ph.map();
  const EllipseReport rep = material_ellipses(m.rho, m.p, ph);
  for (size_t i = 0; i < rep.materials.size(); ++i)
    CHECK(rep.materials[i].pixel_count < static_cast<int>(ph.regions[i].pixels.size()));

  // a 1-pixel-wide region erodes to nothing and is skipped
  const Grid2D tiny(10, 10.0);
  Phantom thin;
  thin.grid = tiny;
  PhantomRegion reg;
  reg.name = "water";
  reg.material = *find_material("water");
  for (int c = 0; c < 10; ++c) reg.pixels.push_back(5 * 10 + c);
  thin.regions.push_back(reg);
  const MaterialMap mm = thin.map();
  const EllipseReport rep2 = material_ellipses(mm.rho, mm.p, thin);
  CHECK(rep2.materials.empty());
}

TEST_CASE("ellipse report serializes to CSV and SVG") {
  const Grid2D grid(50, 20.0);
  const Phantom ph = make_phantom("phantom2", grid);
  const MaterialMap m = ph.map();
  const EllipseReport rep = material_ellipses(m.rho, m.p, ph);
  const std::string csv = ellipse_report_csv(rep);
  CHECK(csv.find("material,mean_rho,std_rho,mean_p,std_p,true_rho,true_p") == 0);
  CHECK(csv.find("water") != std::string::npos);
  CHECK(csv.find("graphite") != std::string::npos);
  const std::string svg = ellipse_report_svg(rep);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("ellipse") != std::string::npos);
  CHECK(svg.find("delrin") != std::string::npos);
}
