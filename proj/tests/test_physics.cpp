#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scatterct/physics.hpp"

using namespace sct;

TEST_CASE("f_kn_total: small-gamma limit is 4/3") {
  // series-expansion oracle at E = 0.001 keV (gamma ~ 2e-9):
  // 4/3 - 8g/3 + O(g^2)
  const double g = 0.001 / 511.0;
  const double oracle = 4.0 / 3.0 - 8.0 / 3.0 * g;
  CHECK(std::abs(f_kn_total(0.001) - oracle) < 1e-10);
  CHECK(std::abs(f_kn_total(0.001) - 4.0 / 3.0) < 1e-4);
}

TEST_CASE("f_kn_total: monotone decreasing over the imaging band") {
  CHECK(f_kn_total(60.0) > f_kn_total(120.0));
  double prev = f_kn_total(20.0);
  for (double e = 21.0; e <= 120.0; e += 1.0) {
    const double v = f_kn_total(e);
    CHECK(v < prev);
    CHECK(v > 0.0);
    prev = v;
  }
}

TEST_CASE("f_kn_total: high-precision values") {
  // 40-digit mpmath evaluation of the closed form
  CHECK(f_kn_total(511.0) == doctest::Approx(0.574303789220057685).epsilon(1e-13));
  CHECK(f_kn_total(60.0) == doctest::Approx(1.09357064091665682).epsilon(1e-13));
  CHECK(f_kn_total(20.0) == doctest::Approx(1.23861402846556766).epsilon(1e-13));
  CHECK_THROWS_AS(f_kn_total(0.0), std::domain_error);
  CHECK_THROWS_AS(f_kn_total(-5.0), std::domain_error);
}

TEST_CASE("f_kn_total: series/closed-form seam is smooth") {
  // the branch switch sits at gamma = 5e-3 (E ~ 2.555 keV)
  const double e_seam = 5e-3 * 511.0;
  const double below = f_kn_total(e_seam * (1 - 1e-9));
  const double above = f_kn_total(e_seam * (1 + 1e-9));
  CHECK(std::abs(below - above) < 1e-9);
}

TEST_CASE("kn_differential: forward limit and backscatter value") {
  const double re2 = PhysicsConstants::r_e_cm * PhysicsConstants::r_e_cm;
  CHECK(kn_differential(17.0, 0.0) == doctest::Approx(re2).epsilon(1e-14));
  CHECK(kn_differential(456.0, 0.0) == doctest::Approx(re2).epsilon(1e-14));

  // direct substitution at theta = pi, E = 100 keV
  const double g = 100.0 / 511.0;
  const double oracle = re2 / 2.0 / ((1 + 2 * g) * (1 + 2 * g)) * (2.0 + 4.0 * g * g / (1 + 2 * g));
  CHECK(kn_differential(100.0, M_PI) == doctest::Approx(oracle).epsilon(1e-13));
  // matches the 40-digit reference
  CHECK(kn_differential(100.0, M_PI) == doctest::Approx(4.32751205641052267e-26).epsilon(1e-13));
}

TEST_CASE("kn_differential integrates to the total cross section") {
  // Simpson quadrature of dsigma/dOmega over the sphere vs 2 pi r_e^2 f_KN
  const double re2 = PhysicsConstants::r_e_cm * PhysicsConstants::r_e_cm;
  for (double e : {30.0, 60.0, 100.0}) {
    const int n = 10000;
    const double h = M_PI / n;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double th = i * h;
      const double f = kn_differential(e, th) * std::sin(th) * 2.0 * M_PI;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      integral += w * f;
    }
    integral *= h / 3.0;
    CHECK(integral == doctest::Approx(2.0 * M_PI * re2 * f_kn_total(e)).epsilon(1e-3));
  }
}

TEST_CASE("kn_differential is maximal at theta = 0") {
  for (double e : {20.0, 80.0, 140.0}) {
    const double peak = kn_differential(e, 0.0);
    for (double th = 0.1; th <= M_PI; th += 0.1) CHECK(kn_differential(e, th) < peak);
  }
}

TEST_CASE("compton_shift values") {
  CHECK(compton_shift(75.0, 0.0) == doctest::Approx(75.0).epsilon(1e-15));
  // 100/(1 + 200/511) = 51100/711
  CHECK(compton_shift(100.0, M_PI) == doctest::Approx(51100.0 / 711.0).epsilon(1e-14));
  CHECK(compton_shift(100.0, M_PI) == doctest::Approx(71.8706047819971871).epsilon(1e-13));
  // 100/(1 + 100/511) = 51100/611
  CHECK(compton_shift(100.0, M_PI / 2) == doctest::Approx(83.6333878887070376).epsilon(1e-13));
}

TEST_CASE("compton_shift monotonicity") {
  // decreasing in angle
  double prev = compton_shift(90.0, 0.0);
  for (double th = 0.1; th <= M_PI; th += 0.05) {
    const double v = compton_shift(90.0, th);
    CHECK(v < prev);
    CHECK(v > 0.0);
    prev = v;
  }
  // energy loss increasing in E_S at fixed angle
  double prev_loss = 0.0;
  for (double e = 10.0; e <= 140.0; e += 5.0) {
    const double loss = e - compton_shift(e, 1.0);
    CHECK(loss > prev_loss);
    prev_loss = loss;
  }
}

TEST_CASE("mu_at: photoelectric term is exact at the reference energy") {
  CHECK(mu_at(0.0, 0.5439, 20.0) == 0.5439);  // water photoelectric row of the table
  CHECK(mu_at(0.0, 0.4134, 40.0) == doctest::Approx(0.4134 / 8.0).epsilon(1e-15));
}

TEST_CASE("mu_at: plexiglass total attenuation near the XCOM value") {
  // NIST XCOM, PMMA at 60 keV, incoherent + photoelectric, at the table's
  // 1.18 g/cm^3: about 0.2124 cm^-1
  const double model = mu_at(1.18, 0.3263, 60.0);
  CHECK(std::abs(model - 0.2124) / 0.2124 < 0.15);
}

TEST_CASE("mu_at: calibration anchor reproduces water Compton attenuation") {
  // kappa was fixed so the Compton term of water at 60 keV equals the XCOM
  // incoherent value 0.1772 cm^-1
  CHECK(mu_at(1.0, 0.0, 60.0) == doctest::Approx(0.1772).epsilon(1e-6));
}

TEST_CASE("mu_at is jointly linear in (rho, p)") {
  const double e = 47.0;
  const double a = mu_at(1.3, 0.2, e), b = mu_at(0.4, 0.7, e);
  CHECK(mu_at(1.3 + 0.4, 0.2 + 0.7, e) == doctest::Approx(a + b).epsilon(1e-14));
  CHECK(mu_at(2.6, 0.4, e) == doctest::Approx(2 * a).epsilon(1e-14));
  CHECK_THROWS_AS(mu_at(-1.0, 0.0, 60.0), std::domain_error);
}

TEST_CASE("band_intensity") {
  SUBCASE("flat spectrum") {
    std::vector<double> e, w;
    for (int i = 0; i < 100; ++i) {
      e.push_back(0.5 + i);
      w.push_back(1.0);
    }
    const Spectrum s(e, w, 1.0);
    CHECK(band_intensity(s, 10.0, 15.0) == 5.0);
    CHECK(band_intensity(s, 200.0, 210.0) == 0.0);  // empty overlap
  }
  SUBCASE("partition additivity and total") {
    const Spectrum s = Spectrum::kramers(140.0, 1.0e6);
    CHECK(s.total_photons() == doctest::Approx(1.0e6).epsilon(1e-12));
    double partial = 0.0;
    for (double lo = 0.0; lo < 150.0; lo += 7.5) partial += band_intensity(s, lo, lo + 7.5);
    CHECK(partial == doctest::Approx(s.total_photons()).epsilon(1e-12));
    // direct summation oracle for one bin
    double direct = 0.0;
    for (size_t i = 0; i < s.energies_keV.size(); ++i)
      if (s.energies_keV[i] >= 59.5 && s.energies_keV[i] < 60.5) direct += s.intensities[i];
    CHECK(band_intensity(s, 59.5, 60.5) == direct);
  }
}

TEST_CASE("kramers spectrum shape") {
  const Spectrum s = Spectrum::kramers(140.0, 1.0e6);
  CHECK(s.bin_width_keV == 1.0);
  CHECK(s.energies_keV.front() == doctest::Approx(1.5));
  CHECK(s.energies_keV.back() == doctest::Approx(139.5));
  for (size_t i = 1; i < s.intensities.size(); ++i)
    CHECK(s.intensities[i] < s.intensities[i - 1]);  // 140/E - 1 decreases
  for (double v : s.intensities) CHECK(v >= 0.0);
}

TEST_CASE("material table carries the published values") {
  CHECK(find_material("water")->density_g_cm3 == 1.0);
  CHECK(find_material("water")->photoelectric_cm_1 == 0.5439);
  CHECK(find_material("delrin")->density_g_cm3 == 1.4);
  CHECK(find_material("delrin")->photoelectric_cm_1 == 0.4134);
  CHECK(find_material("graphite")->density_g_cm3 == 2.23);
  CHECK(find_material("graphite")->photoelectric_cm_1 == 0.2177);
  CHECK(find_material("plexiglass")->density_g_cm3 == 1.18);
  CHECK(find_material("plexiglass")->photoelectric_cm_1 == 0.3263);
  CHECK(find_material("unobtainium") == nullptr);
}
