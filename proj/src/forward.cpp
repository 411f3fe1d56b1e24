#include "scatterct/forward.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace sct {

MaterialMap::MaterialMap(const Grid2D& g, std::vector<double> rho_, std::vector<double> p_)
    : grid(g), rho(std::move(rho_)), p(std::move(p_)) {
  const size_t np = static_cast<size_t>(grid.npix());
  if (rho.size() != np || p.size() != np)
    throw std::invalid_argument("MaterialMap: vector length != N_p");
  for (double& v : rho) v = std::max(0.0, v);
  for (double& v : p) v = std::max(0.0, v);
}

AttenuationSystem build_attenuation_system(const ScanGeometry& geom, double kappa) {
  AttenuationSystem sys;
  sys.bins = geom.atten_bins;
  sys.kappa = kappa;
  const RaypathTables rays = enumerate_raypaths(geom);
  const int n_rays = static_cast<int>(rays.primary.size());
  const int np = geom.grid.npix();
  const int ne = geom.atten_bins.count;
  const double c_kn = compton_mass_coeff(kappa);

  std::vector<Triplet> tr_a;
  for (int i = 0; i < n_rays; ++i) {
    // chords sorted by pixel id; a straight raypath crosses each pixel once
    std::vector<std::pair<int, double>> row;
    row.reserve(rays.primary[i].trace.size());
    for (const RaySegment& seg : rays.primary[i].trace) row.emplace_back(seg.pixel, seg.length_cm);
    std::sort(row.begin(), row.end());
    for (auto& [px, len] : row) tr_a.push_back({i, px, len});
  }
  sys.A = SparseOperator::from_triplets(n_rays, np, tr_a);

  SparseOperator::Builder brho(n_rays * ne, np);
  SparseOperator::Builder bp(n_rays * ne, np);
  for (int i = 0; i < n_rays; ++i) {
    const auto row = sys.A.row(i);
    for (int m = 0; m < ne; ++m) {
      const double em = geom.atten_bins.center(m);
      const double crho = c_kn * f_kn_total(em);
      const double cp = photoelectric_factor(em);
      const int r = i * ne + m;
      for (size_t k = 0; k < row.cols.size(); ++k) {
        brho.add(r, row.cols[k], crho * row.vals[k]);
        bp.add(r, row.cols[k], cp * row.vals[k]);
      }
    }
  }
  sys.K_rho = brho.take();
  sys.K_p = bp.take();
  return sys;
}

std::vector<double> forward_attenuation(const AttenuationSystem& sys, const MaterialMap& m) {
  if (static_cast<int>(m.rho.size()) != sys.K_rho.cols())
    throw std::invalid_argument("forward_attenuation: map size mismatch");
  std::vector<double> g = sys.K_rho.matvec(m.rho);
  sys.K_p.matvec_add(m.p, std::span<double>(g), 1.0);
  return g;
}

ScatterModel::ScatterModel(const ScanGeometry& geom, const Spectrum& spec, double kappa)
    : geom_(geom), spec_(spec), kappa_(kappa) {
  c_kn_ = compton_mass_coeff(kappa_);
  rays_ = enumerate_raypaths(geom_);
  idx_.n_detectors = static_cast<int>(geom_.detectors.size());
  idx_.n_scatter_bins = geom_.scatter_bins.count;

  // Usable source-energy samples: scattering only loses energy, so any E_S
  // below the detector band can never be binned.
  const double e_min = geom_.scatter_bins.e_lo_keV;
  for (size_t k = 0; k < spec_.energies_keV.size(); ++k) {
    const double es = spec_.energies_keV[k];
    const double ik = spec_.intensities[k];
    if (ik <= 0.0 || es < e_min) continue;
    es_keV_.push_back(es);
    w_spec_.push_back(ik * spec_.bin_width_keV);
    fkn_es_.push_back(f_kn_total(es));
    fp_es_.push_back(photoelectric_factor(es));
  }

  const int n_rays = static_cast<int>(rays_.primary.size());
  const double half_na = PhysicsConstants::avogadro / 2.0;

  ray_off_.push_back(0);
  block_ray_off_.push_back(0);
  for (int i = 0; i < n_rays; ++i) {
    const PrimaryRaypath& ray = rays_.primary[i];
    const int32_t g0 = static_cast<int32_t>(ray_px_.size());
    for (const RaySegment& seg : ray.trace) {
      ray_px_.push_back(seg.pixel);
      ray_chord_.push_back(seg.length_cm);
    }
    ray_off_.push_back(static_cast<int32_t>(ray_px_.size()));

    const Vec2 primary_det = geom_.detectors[ray.detector].center;
    const auto& sec = rays_.secondary[i];
    for (size_t slot = 0; slot < sec.size(); ++slot) {
      const int j = sec[slot];
      const Detector& det = geom_.detectors[j];
      const int row_base =
          (i * (idx_.n_detectors - 1) + static_cast<int>(slot)) * idx_.n_scatter_bins;
      for (size_t pos = 0; pos < ray.trace.size(); ++pos) {
        const RaySegment& seg = ray.trace[pos];
        const double theta = scattering_angle(seg.midpoint, primary_det, det.center);
        const double omega = solid_angle(seg.midpoint, det);
        if (!(omega > 0.0)) continue;
        const double omc = 1.0 - std::cos(theta);

        Block blk;
        blk.out_off = static_cast<int32_t>(out_px_.size());
        blk.ev_off = static_cast<int64_t>(ev_wgeo_.size());
        blk.row_base = row_base;
        blk.col = seg.pixel;
        blk.ray_pos = g0 + static_cast<int32_t>(pos);  // global position index

        for (size_t k = 0; k < es_keV_.size(); ++k) {
          const double es = es_keV_[k];
          const double ep = es / (1.0 + es / PhysicsConstants::m_e_c2_keV * omc);
          const int bin = geom_.scatter_bins.bin_of(ep);
          if (bin < 0) continue;  // outside the detector band
          const double w_geo =
              w_spec_[k] * half_na * kn_differential(es, theta) * omega * seg.length_cm;
          ev_wgeo_.push_back(w_geo);
          ev_fkn_out_.push_back(f_kn_total(ep));
          ev_fp_out_.push_back(photoelectric_factor(ep));
          ev_eprime_.push_back(ep);
          ev_k_.push_back(static_cast<int32_t>(k));
          ev_bin_.push_back(static_cast<int16_t>(bin));
        }
        blk.ev_n = static_cast<int32_t>(static_cast<int64_t>(ev_wgeo_.size()) - blk.ev_off);
        if (blk.ev_n == 0) continue;

        const auto out = trace_ray(geom_.grid, seg.midpoint, det.center);
        for (const RaySegment& o : out) {
          out_px_.push_back(o.pixel);
          out_len_.push_back(o.length_cm);
        }
        blk.out_n = static_cast<int32_t>(out.size());
        blocks_.push_back(blk);
      }
    }
    block_ray_off_.push_back(static_cast<int32_t>(blocks_.size()));
  }

  in_rho_.resize(ray_px_.size());
  in_p_.resize(ray_px_.size());
  scratch_dense_.assign(geom_.grid.npix(), 0.0);
}

int ScatterModel::n_rows() const {
  return static_cast<int>(rays_.primary.size()) * (idx_.n_detectors - 1) * idx_.n_scatter_bins;
}

void ScatterModel::attenuation_dots(std::span<const double> rho, std::span<const double> p) const {
  const int n_rays = static_cast<int>(rays_.primary.size());
  for (int i = 0; i < n_rays; ++i) {
    double run_rho = 0.0, run_p = 0.0;
    for (int32_t g = ray_off_[i]; g < ray_off_[i + 1]; ++g) {
      const int px = ray_px_[g];
      const double half = 0.5 * ray_chord_[g];
      in_rho_[g] = run_rho + half * rho[px];
      in_p_[g] = run_p + half * p[px];
      run_rho += ray_chord_[g] * rho[px];
      run_p += ray_chord_[g] * p[px];
    }
  }
}

SparseOperator ScatterModel::assemble(const MaterialMap& lin_point) const {
  if (static_cast<int>(lin_point.rho.size()) != geom_.grid.npix())
    throw std::invalid_argument("ScatterModel::assemble: map size mismatch");
  attenuation_dots(lin_point.rho, lin_point.p);

  const int nbins = idx_.n_scatter_bins;
  SparseOperator::Builder builder(n_rows(), geom_.grid.npix());

  const int n_rays = static_cast<int>(rays_.primary.size());
  std::vector<double> acc;       // nbins x n_px scratch for one (ray, slot)
  std::vector<int> sorted_px;    // ascending pixel ids of the current ray
  std::vector<int> pos_to_slot;  // position along ray -> index into sorted_px

  for (int i = 0; i < n_rays; ++i) {
    const int32_t g0 = ray_off_[i];
    const int n_px = ray_off_[i + 1] - g0;
    if (n_px == 0) continue;
    sorted_px.assign(ray_px_.begin() + g0, ray_px_.begin() + g0 + n_px);
    std::sort(sorted_px.begin(), sorted_px.end());
    pos_to_slot.resize(n_px);
    for (int q = 0; q < n_px; ++q)
      pos_to_slot[q] = static_cast<int>(
          std::lower_bound(sorted_px.begin(), sorted_px.end(), ray_px_[g0 + q]) -
          sorted_px.begin());
    acc.assign(static_cast<size_t>(nbins) * n_px, 0.0);

    int cur_base = -1;
    const auto flush = [&]() {
      if (cur_base < 0) return;
      for (int m = 0; m < nbins; ++m) {
        const double* row = acc.data() + static_cast<size_t>(m) * n_px;
        for (int q = 0; q < n_px; ++q)
          if (row[q] != 0.0) builder.add(cur_base + m, sorted_px[q], row[q]);
      }
      std::fill(acc.begin(), acc.end(), 0.0);
    };

    for (int32_t bi = block_ray_off_[i]; bi < block_ray_off_[i + 1]; ++bi) {
      const Block& blk = blocks_[bi];
      if (blk.row_base != cur_base) {
        flush();
        cur_base = blk.row_base;
      }
      double out_rho = 0.0, out_p = 0.0;
      for (int32_t o = blk.out_off; o < blk.out_off + blk.out_n; ++o) {
        out_rho += out_len_[o] * lin_point.rho[out_px_[o]];
        out_p += out_len_[o] * lin_point.p[out_px_[o]];
      }
      const double in_r = in_rho_[blk.ray_pos];
      const double in_pp = in_p_[blk.ray_pos];
      const int slot = pos_to_slot[blk.ray_pos - g0];
      const int64_t e1 = blk.ev_off + blk.ev_n;
      for (int64_t e = blk.ev_off; e < e1; ++e) {
        const int k = ev_k_[e];
        const double arg = -(c_kn_ * fkn_es_[k] * in_r + fp_es_[k] * in_pp) -
                           (c_kn_ * ev_fkn_out_[e] * out_rho + ev_fp_out_[e] * out_p);
        acc[static_cast<size_t>(ev_bin_[e]) * n_px + slot] += ev_wgeo_[e] * std::exp(arg);
      }
    }
    flush();
  }
  return builder.take();
}

std::vector<double> ScatterModel::forward(std::span<const double> rho,
                                          std::span<const double> p) const {
  if (static_cast<int>(rho.size()) != geom_.grid.npix() || rho.size() != p.size())
    throw std::invalid_argument("ScatterModel::forward: size mismatch");
  std::vector<double> g(n_rows(), 0.0);
  attenuation_dots(rho, p);
  for (const Block& blk : blocks_) {
    double out_rho = 0.0, out_p = 0.0;
    for (int32_t o = blk.out_off; o < blk.out_off + blk.out_n; ++o) {
      out_rho += out_len_[o] * rho[out_px_[o]];
      out_p += out_len_[o] * p[out_px_[o]];
    }
    const double in_r = in_rho_[blk.ray_pos];
    const double in_pp = in_p_[blk.ray_pos];
    const double rho_l = rho[blk.col];
    const int64_t e1 = blk.ev_off + blk.ev_n;
    for (int64_t e = blk.ev_off; e < e1; ++e) {
      const int k = ev_k_[e];
      const double arg = -(c_kn_ * fkn_es_[k] * in_r + fp_es_[k] * in_pp) -
                         (c_kn_ * ev_fkn_out_[e] * out_rho + ev_fp_out_[e] * out_p);
      g[blk.row_base + ev_bin_[e]] += ev_wgeo_[e] * std::exp(arg) * rho_l;
    }
  }
  return g;
}

void ScatterModel::forward_with_jacobian(std::span<const double> rho, std::span<const double> p,
                                         const RowSink& sink) const {
  if (static_cast<int>(rho.size()) != geom_.grid.npix() || rho.size() != p.size())
    throw std::invalid_argument("ScatterModel::forward_with_jacobian: size mismatch");
  attenuation_dots(rho, p);

  const int nbins = idx_.n_scatter_bins;
  const int n_rays = static_cast<int>(rays_.primary.size());

  std::vector<double> model(nbins);
  std::vector<double> t_in, t_out;   // nbins x n_px per (ray, slot)
  std::vector<double> suffix;        // per-bin suffix sums over positions
  std::vector<int> support;          // touched pixel ids, ascending
  std::vector<char> touched(geom_.grid.npix(), 0);
  std::vector<int> row_cols;
  std::vector<double> row_vals;

  for (int i = 0; i < n_rays; ++i) {
    const int32_t g0 = ray_off_[i];
    const int n_px = ray_off_[i + 1] - g0;
    if (n_px == 0) continue;
    t_in.assign(static_cast<size_t>(nbins) * n_px, 0.0);
    t_out.assign(static_cast<size_t>(nbins) * n_px, 0.0);
    std::fill(model.begin(), model.end(), 0.0);

    int cur_base = -1;
    int32_t group_begin = block_ray_off_[i];

    const auto flush = [&](int32_t group_end) {
      if (cur_base < 0) return;
      // support of this (ray, slot): ray pixels plus all out-path pixels
      support.clear();
      for (int q = 0; q < n_px; ++q) {
        const int px = ray_px_[g0 + q];
        if (!touched[px]) {
          touched[px] = 1;
          support.push_back(px);
        }
      }
      for (int32_t bi = group_begin; bi < group_end; ++bi) {
        const Block& blk = blocks_[bi];
        for (int32_t o = blk.out_off; o < blk.out_off + blk.out_n; ++o) {
          const int px = out_px_[o];
          if (!touched[px]) {
            touched[px] = 1;
            support.push_back(px);
          }
        }
      }
      std::sort(support.begin(), support.end());

      for (int m = 0; m < nbins; ++m) {
        const double* tin = t_in.data() + static_cast<size_t>(m) * n_px;
        const double* tout = t_out.data() + static_cast<size_t>(m) * n_px;
        // in-path contribution via suffix sums: pixel q of the ray receives
        // chord_q * (sum_{l>q} tin[l] + tin[q]/2)
        double suf = 0.0;
        suffix.resize(n_px);
        for (int q = n_px - 1; q >= 0; --q) {
          suffix[q] = suf + 0.5 * tin[q];
          suf += tin[q];
        }
        bool nonzero = false;
        for (int q = 0; q < n_px; ++q) {
          const double w = ray_chord_[g0 + q] * suffix[q];
          if (w != 0.0) {
            scratch_dense_[ray_px_[g0 + q]] += w;
            nonzero = true;
          }
        }
        for (int32_t bi = group_begin; bi < group_end; ++bi) {
          const Block& blk = blocks_[bi];
          const double w = tout[blk.ray_pos - g0];
          if (w == 0.0) continue;
          nonzero = true;
          for (int32_t o = blk.out_off; o < blk.out_off + blk.out_n; ++o)
            scratch_dense_[out_px_[o]] += w * out_len_[o];
        }
        if (nonzero || model[m] != 0.0) {
          row_cols.clear();
          row_vals.clear();
          for (int px : support) {
            const double v = scratch_dense_[px];
            if (v != 0.0) {
              row_cols.push_back(px);
              row_vals.push_back(-v);  // d exp(-a.mu)/dp carries the minus
            }
          }
          sink(cur_base + m, model[m], row_cols, row_vals);
        }
        for (int px : support) scratch_dense_[px] = 0.0;
      }
      for (int px : support) touched[px] = 0;
      std::fill(model.begin(), model.end(), 0.0);
      std::fill(t_in.begin(), t_in.end(), 0.0);
      std::fill(t_out.begin(), t_out.end(), 0.0);
    };

    for (int32_t bi = block_ray_off_[i]; bi < block_ray_off_[i + 1]; ++bi) {
      const Block& blk = blocks_[bi];
      if (blk.row_base != cur_base) {
        flush(bi);
        cur_base = blk.row_base;
        group_begin = bi;
      }
      double out_rho = 0.0, out_p = 0.0;
      for (int32_t o = blk.out_off; o < blk.out_off + blk.out_n; ++o) {
        out_rho += out_len_[o] * rho[out_px_[o]];
        out_p += out_len_[o] * p[out_px_[o]];
      }
      const double in_r = in_rho_[blk.ray_pos];
      const double in_pp = in_p_[blk.ray_pos];
      const double rho_l = rho[blk.col];
      const int pos = blk.ray_pos - g0;
      const int64_t e1 = blk.ev_off + blk.ev_n;
      for (int64_t e = blk.ev_off; e < e1; ++e) {
        const int k = ev_k_[e];
        const double arg = -(c_kn_ * fkn_es_[k] * in_r + fp_es_[k] * in_pp) -
                           (c_kn_ * ev_fkn_out_[e] * out_rho + ev_fp_out_[e] * out_p);
        const double val = ev_wgeo_[e] * std::exp(arg) * rho_l;
        const int m = ev_bin_[e];
        model[m] += val;
        t_in[static_cast<size_t>(m) * n_px + pos] += val * fp_es_[k];
        t_out[static_cast<size_t>(m) * n_px + pos] += val * ev_fp_out_[e];
      }
    }
    flush(block_ray_off_[i + 1]);
  }
}

void ScatterModel::for_each_event(const MaterialMap& m,
                                  const std::function<void(const EventInfo&)>& fn) const {
  attenuation_dots(m.rho, m.p);
  for (const Block& blk : blocks_) {
    double out_rho = 0.0, out_p = 0.0;
    for (int32_t o = blk.out_off; o < blk.out_off + blk.out_n; ++o) {
      out_rho += out_len_[o] * m.rho[out_px_[o]];
      out_p += out_len_[o] * m.p[out_px_[o]];
    }
    const double in_r = in_rho_[blk.ray_pos];
    const double in_pp = in_p_[blk.ray_pos];
    const int64_t e1 = blk.ev_off + blk.ev_n;
    for (int64_t e = blk.ev_off; e < e1; ++e) {
      const int k = ev_k_[e];
      const double arg = -(c_kn_ * fkn_es_[k] * in_r + fp_es_[k] * in_pp) -
                         (c_kn_ * ev_fkn_out_[e] * out_rho + ev_fp_out_[e] * out_p);
      EventInfo info;
      info.row = blk.row_base + ev_bin_[e];
      info.col = blk.col;
      info.e_prime_keV = ev_eprime_[e];
      info.value = ev_wgeo_[e] * std::exp(arg);
      fn(info);
    }
  }
}

ScatterSystem assemble_scatter(std::shared_ptr<const ScatterModel> model,
                               const MaterialMap& lin_point) {
  ScatterSystem sys;
  sys.model = std::move(model);
  sys.lin = lin_point;
  sys.K_C = sys.model->assemble(lin_point);
  return sys;
}

std::vector<double> forward_scatter(const ScatterSystem& sys, std::span<const double> rho) {
  if (static_cast<int>(rho.size()) != sys.K_C.cols())
    throw std::invalid_argument("forward_scatter: rho length mismatch");
  return sys.K_C.matvec(rho);
}

NoiseResult add_noise(std::span<const double> g, double snr_db, uint64_t seed) {
  if (!std::isfinite(snr_db)) throw std::invalid_argument("add_noise: snr must be finite");
  double power = 0.0;
  for (double v : g) power += v * v;
  if (power == 0.0) throw std::invalid_argument("add_noise: SNR undefined for all-zero signal");

  NoiseResult out;
  out.sigma = std::sqrt(power / (static_cast<double>(g.size()) * std::pow(10.0, snr_db / 10.0)));
  out.noisy.resize(g.size());

  // Box-Muller on top of mt19937_64 keeps the stream bit-reproducible across
  // platforms (std::normal_distribution is implementation-defined).
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  };
  double spare = 0.0;
  bool have_spare = false;
  for (size_t i = 0; i < g.size(); ++i) {
    double z;
    if (have_spare) {
      z = spare;
      have_spare = false;
    } else {
      const double u1 = uniform();
      const double u2 = uniform();
      const double r = std::sqrt(-2.0 * std::log(u1));
      z = r * std::cos(2.0 * M_PI * u2);
      spare = r * std::sin(2.0 * M_PI * u2);
      have_spare = true;
    }
    out.noisy[i] = g[i] + out.sigma * z;
  }
  return out;
}

}  // namespace sct
