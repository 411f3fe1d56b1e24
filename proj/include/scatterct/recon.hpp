#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scatterct/forward.hpp"
#include "scatterct/sparse.hpp"

namespace sct {

enum class DataMode { kAttenOnly, kScatterOnly, kBoth };

/// Stacked horizontal+vertical first differences on an n x n image,
/// shape 2n(n-1) x n^2. Annihilates constants.
SparseOperator build_gradient(int n);

/// Multiplicative edge weights for the adaptive smoother; d starts at 1 and
/// can only shrink.
struct EdgeWeights {
  std::vector<double> d;
  int iteration = 0;
};

/// One sweep of the edge-weight iteration:
/// d_i <- d_i * (1 - t_i^2), t = (D L rho) / ||D L rho||_inf.
/// A zero weighted gradient leaves d unchanged.
std::vector<double> update_edge_weights(std::span<const double> d, const SparseOperator& L,
                                        std::span<const double> rho);

/// Normalizing data weights w1 = 1/||g_C||, w2 = 1/||g_A||. A single empty
/// dataset gets weight 0; both empty is an error.
std::pair<double, double> data_weights(std::span<const double> g_A,
                                       std::span<const double> g_C);

struct LsqrResult {
  std::vector<double> x;
  int iterations = 0;
  int stop_reason = 0;  ///< 1 residual small, 2 gradient small, 3 max_iter
  double residual_norm = 0.0;
};

/// Paige-Saunders LSQR for min ||b - Ax||. Starts from x = 0, hence returns
/// the minimum-norm minimizer on rank-deficient systems. Deterministic.
LsqrResult lsqr_solve(const LinOp& A, std::span<const double> b, double tol = 1e-10,
                      int max_iter = 2000);

struct LmParams {
  double damping_init_scale = 1e-3;  ///< times mean(diag(J^T J))
  double damping_up = 10.0;
  double damping_down = 10.0;
  int max_iter = 50;
  double step_tol = 1e-8;
  int max_rejects = 20;
};

struct NlmParams {
  int patch = 5;
  int search = 11;
  double bandwidth_frac = 0.1;  ///< of the reference image dynamic range
};

struct ReconConfig {
  DataMode mode = DataMode::kBoth;
  double lambda_rho = -1.0;  ///< <= 0 means select by discrepancy principle
  double lambda_p = -1.0;
  double eps_fpi = 1e-11;
  double eps_epi = 3e-3;
  int l_max = 100;
  int max_fpi = 50;
  double eps_cyclic = 1e-2;
  int n_max = 8;
  double rho_init = 0.4;
  std::vector<int> scales = {10, 20, 30, 40, 50};
  int lambda_count = 25;
  double lambda_lo = 1e-4;
  double lambda_hi = 1e4;
  double lsqr_tol = 1e-10;
  int lsqr_max_iter = 2000;
  LmParams lm;
  NlmParams nlm;
  double kappa = PhysicsConstants::kn_kappa_default;
};

/// 25-by-default logarithmically spaced regularization candidates.
std::vector<double> lambda_candidates(const ReconConfig& cfg);

/// Row-stochastic non-local-means weights built from a reference image.
struct NlmWeights {
  SparseOperator W;
};

NlmWeights nlm_weights(std::span<const double> i_ref, int n, int patch, int search,
                       double bandwidth);

/// Discrepancy-principle selection: evaluates F = (1/tau)*||r||^2 - sigma^2
/// for each candidate and returns the lambda minimizing |F|.
double select_lambda(std::span<const double> candidates,
                     const std::function<std::vector<double>(double)>& residual_fn,
                     double tau, double sigma);

/// Thrown when the density fixed-point iteration diverges; carries the last
/// iterate.
class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(std::string msg, std::vector<double> iterate)
      : std::runtime_error(std::move(msg)), last_iterate(std::move(iterate)) {}
  std::vector<double> last_iterate;
};

/// Inputs of one density solve at a fixed grid scale. The scatter model is
/// omitted in attenuation-only mode.
struct DensityProblem {
  std::shared_ptr<const ScatterModel> scatter;  // nullptr when unused
  const AttenuationSystem* atten = nullptr;     // nullptr when unused
  std::span<const double> g_A;
  std::span<const double> g_C;
  std::span<const double> p_hat;  ///< fixed photoelectric image on this grid
  double w1 = 0.0;
  double w2 = 0.0;
  const SparseOperator* L = nullptr;
  const ReconConfig* cfg = nullptr;
};

struct DensityTrace {
  std::vector<int> fpi_counts;       ///< inner iterations per outer step
  std::vector<int> lsqr_iterations;  ///< per inner solve
  int epi_iterations = 0;
  double final_objective = 0.0;
  std::vector<double> stacked_residual;  ///< at the returned iterate
};

/// Table-1 solver: outer edge-preserving iteration around an inner fixed-point
/// loop, each inner step a frozen quasi-linear LSQR solve. Returns the density
/// clamped to >= 0.
std::vector<double> solve_density_scale(const DensityProblem& prob,
                                        std::span<const double> rho_init, double lambda_rho,
                                        DensityTrace* trace = nullptr);

/// Nearest-neighbor resampling of a coarse n_from x n_from image onto an
/// n_to x n_to grid covering the same physical extent.
std::vector<double> upscale_nearest(std::span<const double> img, int n_from, int n_to);

struct ScaleResult {
  int scale_n = 0;
  double lambda = 0.0;
  std::vector<double> rho;
  DensityTrace trace;
  double discrepancy = 0.0;
};

/// Optional persistence hooks so an interrupted multiscale run can resume from
/// the last completed scale.
class ScaleCheckpoint {
 public:
  virtual ~ScaleCheckpoint() = default;
  virtual std::optional<ScaleResult> load(int scale_n) = 0;
  virtual void save(const ScaleResult& result) = 0;
};

/// Everything the reconstruction drivers need that is independent of grid
/// scale.
struct ReconProblem {
  const ScanGeometry* geom = nullptr;
  const Spectrum* spectrum = nullptr;
  std::span<const double> g_A;
  std::span<const double> g_C;
  double sigma_A = 0.0;
  double sigma_C = 0.0;
  ReconConfig cfg;
};

struct MultiscaleResult {
  std::vector<ScaleResult> scales;
  double lambda_finest = 0.0;
};

/// Coarse-to-fine density initialization (cyclic iteration n = 0 -> 1, p = 0):
/// constant start on the coarsest grid, per-scale solve + discrepancy selection
/// of lambda_rho, nearest-neighbor upscale between scales.
MultiscaleResult multiscale_density(const ReconProblem& prob, ScaleCheckpoint* ckpt = nullptr);

/// d g_model / d p of the scatter forward model as an explicit sparse matrix
/// (rows: scatter observations; cols: pixels).
SparseOperator scatter_jacobian_p(const ScatterModel& model, std::span<const double> rho_hat,
                                  std::span<const double> p);

struct PhotoelectricTrace {
  int lm_iterations = 0;
  bool converged = false;
  bool warning_no_decrease = false;
  double final_residual2 = 0.0;
  std::vector<double> residual_history;  ///< squared residual at accepted iterates
  std::vector<double> stacked_residual;
  double lambda = 0.0;
};

struct PhotoelectricProblem {
  std::shared_ptr<const ScatterModel> scatter;  // nullptr in atten-only mode
  const AttenuationSystem* atten = nullptr;
  std::span<const double> g_A;
  std::span<const double> g_C;
  std::span<const double> rho_hat;
  const NlmWeights* nlm = nullptr;
  double w1 = 0.0;
  double w2 = 0.0;
  const ReconConfig* cfg = nullptr;
};

/// Levenberg-Marquardt solve of the stacked photoelectric problem with the
/// analytic scatter Jacobian. Returns p clamped to >= 0.
std::vector<double> solve_photoelectric(const PhotoelectricProblem& prob,
                                        std::span<const double> p_init, double lambda_p,
                                        PhotoelectricTrace* trace = nullptr);

struct CyclicIterate {
  int n = 0;
  std::vector<double> rho;
  std::vector<double> p;
  double rho_change = 0.0;  ///< ||rho_n - rho_{n-1}||^2
  double rmse_rho = -1.0;   ///< vs supplied truth, when available
  double rmse_p = -1.0;
};

struct CyclicTrace {
  MultiscaleResult multiscale;
  std::vector<CyclicIterate> iterates;
  std::vector<int> fpi_counts;  ///< all inner fixed-point counts, in order
  double lambda_rho = 0.0;
  double lambda_p = 0.0;
  int converged_n = -1;
};

struct CyclicResult {
  std::vector<double> rho;
  std::vector<double> p;
  CyclicTrace trace;
};

/// Full cyclic coordinate descent: multiscale density at n=1, NLM reference
/// from that estimate, then alternating density / photoelectric solves until
/// the density change satisfies the stopping rule.
CyclicResult cyclic_descent(const ReconProblem& prob, const MaterialMap* truth = nullptr,
                            ScaleCheckpoint* ckpt = nullptr);

}  // namespace sct
