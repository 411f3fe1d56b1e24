#include "scatterct/physics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sct {

double f_kn_total(double e_keV) {
  if (!(e_keV > 0.0)) throw std::domain_error("f_kn_total: energy must be positive");
  const double g = e_keV / PhysicsConstants::m_e_c2_keV;
  if (g < 5e-3) {
    // The closed form cancels catastrophically as gamma -> 0; switch to the
    // series 4/3 - 8g/3 + 104g^2/15 - 266g^3/15 + 4576g^4/105 - 2176g^5/21.
    return 4.0 / 3.0 +
           g * (-8.0 / 3.0 +
                g * (104.0 / 15.0 +
                     g * (-266.0 / 15.0 + g * (4576.0 / 105.0 - g * 2176.0 / 21.0))));
  }
  const double l = std::log1p(2.0 * g);
  const double term1 = (1.0 + g) / (g * g) * (2.0 * (1.0 + g) / (1.0 + 2.0 * g) - l / g);
  const double term2 = l / (2.0 * g);
  const double term3 = (1.0 + 3.0 * g) / ((1.0 + 2.0 * g) * (1.0 + 2.0 * g));
  return term1 + term2 - term3;
}

double kn_differential(double e_keV, double theta) {
  if (!(e_keV > 0.0)) throw std::domain_error("kn_differential: energy must be positive");
  if (!(theta >= 0.0 && theta <= M_PI))
    throw std::domain_error("kn_differential: theta outside [0, pi]");
  const double g = e_keV / PhysicsConstants::m_e_c2_keV;
  const double c = std::cos(theta);
  const double k = 1.0 + g * (1.0 - c);
  const double re2 = PhysicsConstants::r_e_cm * PhysicsConstants::r_e_cm;
  return re2 / 2.0 / (k * k) * ((1.0 + c * c) + g * g * (1.0 - c) * (1.0 - c) / k);
}

double compton_shift(double e_s_keV, double theta) {
  if (!(e_s_keV > 0.0)) throw std::domain_error("compton_shift: energy must be positive");
  if (!(theta >= 0.0 && theta <= M_PI))
    throw std::domain_error("compton_shift: theta outside [0, pi]");
  const double g = e_s_keV / PhysicsConstants::m_e_c2_keV;
  return e_s_keV / (1.0 + g * (1.0 - std::cos(theta)));
}

double photoelectric_factor(double e_keV) {
  if (!(e_keV > 0.0)) throw std::domain_error("photoelectric_factor: energy must be positive");
  const double r = PhysicsConstants::E0_keV / e_keV;
  return r * r * r;
}

double compton_mass_coeff(double kappa) {
  const double re2 = PhysicsConstants::r_e_cm * PhysicsConstants::r_e_cm;
  return PhysicsConstants::avogadro / 2.0 * 2.0 * M_PI * re2 * kappa;
}

double mu_at(double rho, double p, double e_keV, double kappa) {
  if (rho < 0.0 || p < 0.0) throw std::domain_error("mu_at: negative material values");
  return compton_mass_coeff(kappa) * f_kn_total(e_keV) * rho + photoelectric_factor(e_keV) * p;
}

Spectrum::Spectrum(std::vector<double> energies, std::vector<double> counts, double width)
    : energies_keV(std::move(energies)), intensities(std::move(counts)), bin_width_keV(width) {
  if (energies_keV.size() != intensities.size() || energies_keV.empty())
    throw std::invalid_argument("Spectrum: size mismatch");
  if (!(bin_width_keV > 0.0)) throw std::invalid_argument("Spectrum: bad bin width");
  for (size_t i = 0; i < energies_keV.size(); ++i) {
    if (intensities[i] < 0.0) throw std::invalid_argument("Spectrum: negative intensity");
    if (i > 0) {
      const double gap = energies_keV[i] - energies_keV[i - 1];
      if (!(gap > 0.0) || std::abs(gap - bin_width_keV) > 1e-9 * bin_width_keV)
        throw std::invalid_argument("Spectrum: energies must ascend uniformly by bin width");
    }
  }
}

double Spectrum::total_photons() const {
  double s = 0.0;
  for (double v : intensities) s += v;
  return s;
}

Spectrum Spectrum::kramers(double e_max_keV, double total_photons, double bin_width_keV) {
  if (!(e_max_keV > 1.0 + bin_width_keV))
    throw std::invalid_argument("Spectrum::kramers: e_max too small");
  std::vector<double> e, w;
  for (double c = 1.0 + bin_width_keV / 2.0; c < e_max_keV; c += bin_width_keV) {
    e.push_back(c);
    w.push_back(std::max(0.0, e_max_keV / c - 1.0));
  }
  double s = 0.0;
  for (double v : w) s += v;
  for (double& v : w) v *= total_photons / s;
  return Spectrum(std::move(e), std::move(w), bin_width_keV);
}

Spectrum Spectrum::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Spectrum: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("Spectrum: empty file " + path);
  // header check
  {
    std::string hdr = line;
    hdr.erase(std::remove_if(hdr.begin(), hdr.end(), ::isspace), hdr.end());
    if (hdr != "energy_keV,intensity")
      throw std::runtime_error("Spectrum: expected header 'energy_keV,intensity' in " + path);
  }
  std::vector<double> e, w;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw std::runtime_error("Spectrum: malformed line " + std::to_string(lineno));
    e.push_back(std::stod(a));
    w.push_back(std::stod(b));
  }
  if (e.size() < 2) throw std::runtime_error("Spectrum: need at least two samples");
  const double width = e[1] - e[0];
  return Spectrum(std::move(e), std::move(w), width);
}

double band_intensity(const Spectrum& spec, double e_lo_keV, double e_hi_keV) {
  double s = 0.0;
  for (size_t i = 0; i < spec.energies_keV.size(); ++i) {
    const double c = spec.energies_keV[i];
    if (c >= e_lo_keV && c < e_hi_keV) s += spec.intensities[i];
  }
  return s;
}

const std::vector<Material>& material_table() {
  static const std::vector<Material> table = {
      {"water", 1.0, 0.5439},
      {"delrin", 1.4, 0.4134},
      {"graphite", 2.23, 0.2177},
      {"plexiglass", 1.18, 0.3263},
  };
  return table;
}

const Material* find_material(const std::string& name) {
  for (const auto& m : material_table())
    if (m.name == name) return &m;
  return nullptr;
}

}  // namespace sct
