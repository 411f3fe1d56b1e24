#pragma once

#include <string>
#include <vector>

namespace sct {

/// Fixed physical constants. kn_kappa_default is the single calibration scalar
/// that maps the Klein-Nishina Compton term onto physical cm^-1; it is chosen
/// so water at 60 keV reproduces the XCOM incoherent attenuation 0.1772 cm^-1.
struct PhysicsConstants {
  static constexpr double m_e_c2_keV = 511.0;
  static constexpr double avogadro = 6.02214076e23;
  static constexpr double r_e_cm = 2.8179403e-13;
  static constexpr double E0_keV = 20.0;  ///< photoelectric reference energy
  static constexpr double kn_kappa_default = 1.0785804003942426;
};

/// Total Klein-Nishina factor (dimensionless). Strictly positive and monotone
/// decreasing over the imaging band. The total cross section per electron is
/// 2*pi*r_e^2 times this value.
double f_kn_total(double e_keV);

/// Differential Klein-Nishina cross section dsigma/dOmega in cm^2/sr.
double kn_differential(double e_keV, double theta);

/// Energy of a photon of energy e_s_keV after Compton scattering by theta.
double compton_shift(double e_s_keV, double theta);

/// Dimensionless photoelectric energy dependence (E0/E)^3; equals 1 at E0.
double photoelectric_factor(double e_keV);

/// Compton mass-attenuation scale C_KN = (N_A/2) * 2*pi*r_e^2 * kappa, in
/// cm^2/g per unit f_KN.
double compton_mass_coeff(double kappa = PhysicsConstants::kn_kappa_default);

/// Linear attenuation coefficient mu(rho, p, E) in cm^-1 with rho in g/cm^3
/// and p in cm^-1 at E0 = 20 keV.
double mu_at(double rho, double p, double e_keV,
             double kappa = PhysicsConstants::kn_kappa_default);

/// Sampled source spectrum: photon counts per bin on uniformly spaced
/// ascending bin centers.
struct Spectrum {
  std::vector<double> energies_keV;
  std::vector<double> intensities;
  double bin_width_keV = 1.0;

  Spectrum() = default;
  Spectrum(std::vector<double> energies, std::vector<double> counts, double width);

  double total_photons() const;

  /// Kramers-law bremsstrahlung shape I(E) ~ (e_max/E - 1) sampled on 1-keV
  /// bins over [1, e_max], normalized to total_photons counts.
  static Spectrum kramers(double e_max_keV = 140.0, double total_photons = 1.0e6,
                          double bin_width_keV = 1.0);

  /// Two-column CSV "energy_keV,intensity" with a header row.
  static Spectrum from_csv(const std::string& path);
};

/// Integrated source intensity over [e_lo, e_hi) at spectrum resolution
/// (counts whose bin center falls in the window). Empty overlap gives 0.
double band_intensity(const Spectrum& spec, double e_lo_keV, double e_hi_keV);

struct Material {
  std::string name;
  double density_g_cm3 = 0.0;
  double photoelectric_cm_1 = 0.0;  ///< at E0 = 20 keV
};

/// Built-in material table (water, Delrin, graphite, plexiglass).
const std::vector<Material>& material_table();
const Material* find_material(const std::string& name);

}  // namespace sct
