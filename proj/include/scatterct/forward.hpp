#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "scatterct/geometry.hpp"
#include "scatterct/physics.hpp"
#include "scatterct/sparse.hpp"

namespace sct {

/// Paired density / photoelectric images on a grid, lexicographically ordered.
/// Entries are clamped to >= 0 on construction.
struct MaterialMap {
  Grid2D grid;
  std::vector<double> rho;  ///< g/cm^3
  std::vector<double> p;    ///< cm^-1 at E0

  MaterialMap() = default;
  MaterialMap(const Grid2D& g, std::vector<double> rho_, std::vector<double> p_);
};

/// Linear attenuation system: A holds chord lengths per primary raypath;
/// K_rho / K_p stack the per-bin scaled copies (N_SD*N_E rows).
struct AttenuationSystem {
  SparseOperator A;
  SparseOperator K_rho;
  SparseOperator K_p;
  EnergyBinning bins;
  double kappa = PhysicsConstants::kn_kappa_default;
};

AttenuationSystem build_attenuation_system(const ScanGeometry& geom,
                                           double kappa = PhysicsConstants::kn_kappa_default);

/// g_A = K_rho * rho + K_p * p (log-domain attenuation data).
std::vector<double> forward_attenuation(const AttenuationSystem& sys, const MaterialMap& m);

/// Scatter observation row index: (raypath i, secondary slot j', bin m) with
/// j' indexing the ascending detector ids excluding raypath i's own detector.
struct ScatterIndexMap {
  int n_detectors = 0;
  int n_scatter_bins = 0;
  int row(int raypath, int sec_slot, int bin) const {
    return (raypath * (n_detectors - 1) + sec_slot) * n_scatter_bins + bin;
  }
};

/// Geometry + kinematics cache for the scatter model: traces, angles, solid
/// angles, per-event Compton kinematics and spectrum weights. Everything here
/// is independent of (rho, p), so one cache serves every linearization point
/// of a reconstruction at a given grid scale.
class ScatterModel {
 public:
  ScatterModel(const ScanGeometry& geom, const Spectrum& spec,
               double kappa = PhysicsConstants::kn_kappa_default);

  const ScanGeometry& geometry() const { return geom_; }
  const RaypathTables& raypaths() const { return rays_; }
  const ScatterIndexMap& index_map() const { return idx_; }
  int n_rows() const;
  int n_cols() const { return geom_.grid.npix(); }
  double kappa() const { return kappa_; }
  int64_t n_events() const { return static_cast<int64_t>(ev_wgeo_.size()); }

  /// Builds the frozen scatter operator K_C at linearization point (rho, p).
  SparseOperator assemble(const MaterialMap& lin_point) const;

  /// g_model(row) = [K_C(rho,p) * rho](row) evaluated directly (forward with
  /// re-attenuation at the supplied p).
  std::vector<double> forward(std::span<const double> rho, std::span<const double> p) const;

  /// Per-row Jacobian d g_model / d p streamed to a sink. `cols`/`vals` hold
  /// the sparse row support (cols ascending); `model` is the forward value of
  /// that row at (rho, p).
  using RowSink = std::function<void(int row, double model, std::span<const int> cols,
                                     std::span<const double> vals)>;
  void forward_with_jacobian(std::span<const double> rho, std::span<const double> p,
                             const RowSink& sink) const;

  /// Test hook: per-event inspection (value recomputed at the given maps).
  struct EventInfo {
    int row;
    int col;
    double e_prime_keV;
    double value;  ///< event weight excluding the rho(col) factor
  };
  void for_each_event(const MaterialMap& m,
                      const std::function<void(const EventInfo&)>& fn) const;

 private:
  struct Block {  // one (raypath, pixel-on-ray, secondary detector) group
    int32_t out_off;
    int32_t out_n;
    int64_t ev_off;
    int32_t ev_n;
    int32_t row_base;   // first K_C row of (raypath, sec_slot)
    int32_t col;        // scatter pixel
    int32_t ray_pos;    // position of the pixel along the ray
  };

  void attenuation_dots(std::span<const double> rho, std::span<const double> p) const;

  ScanGeometry geom_;
  Spectrum spec_;
  double kappa_;
  double c_kn_;
  RaypathTables rays_;
  ScatterIndexMap idx_;

  // per usable source-energy sample
  std::vector<double> es_keV_, w_spec_;       // E_S, I(E_S)*dE_S
  std::vector<double> fkn_es_, fp_es_;

  // per ray: pixel list (along the ray) and chord lengths
  std::vector<int32_t> ray_off_;
  std::vector<int32_t> ray_px_;
  std::vector<double> ray_chord_;

  // out-path storage shared by blocks
  std::vector<int32_t> out_px_;
  std::vector<double> out_len_;

  std::vector<Block> blocks_;
  std::vector<int32_t> block_ray_off_;  // blocks grouped per ray

  // per event (parallel arrays)
  std::vector<double> ev_wgeo_;
  std::vector<double> ev_fkn_out_, ev_fp_out_;
  std::vector<double> ev_eprime_;
  std::vector<int32_t> ev_k_;
  std::vector<int16_t> ev_bin_;

  // scratch reused across assemble/forward calls
  mutable std::vector<double> in_rho_, in_p_;    // per (ray,pos) prefix dots
  mutable std::vector<double> scratch_dense_;
  mutable std::vector<int32_t> scratch_touched_;
};

/// Frozen quasi-linear scatter system: K_C assembled at `lin` so that
/// g_C = K_C * rho is linear in rho.
struct ScatterSystem {
  std::shared_ptr<const ScatterModel> model;
  MaterialMap lin;
  SparseOperator K_C;
};

ScatterSystem assemble_scatter(std::shared_ptr<const ScatterModel> model,
                               const MaterialMap& lin_point);

std::vector<double> forward_scatter(const ScatterSystem& sys, std::span<const double> rho);

struct NoiseResult {
  std::vector<double> noisy;
  double sigma = 0.0;
};

/// Adds white Gaussian noise at the requested SNR (dB):
/// sigma^2 = ||g||^2 / (len * 10^(snr/10)). Deterministic for a fixed seed.
NoiseResult add_noise(std::span<const double> g, double snr_db, uint64_t seed);

/// Measurement container: attenuation data g_A (raypath-major, then bin) and
/// scatter data g_C (raypath, secondary slot, bin).
struct SinogramSet {
  std::vector<double> g_A;
  std::vector<double> g_C;
  double sigma_A = 0.0;
  double sigma_C = 0.0;
  uint64_t seed = 0;
  int n_sources = 0;
  int n_detectors = 0;
  int n_atten_bins = 0;
  int n_scatter_bins = 0;
  int grid_n = 0;

  int n_primary() const { return n_sources * n_detectors; }
  int atten_index(int raypath, int bin) const { return raypath * n_atten_bins + bin; }
  int scatter_index(int raypath, int sec_slot, int bin) const {
    return (raypath * (n_detectors - 1) + sec_slot) * n_scatter_bins + bin;
  }
};

}  // namespace sct
