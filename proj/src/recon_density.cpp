#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>

#include "scatterct/recon.hpp"
#include "scatterct/recon_internal.hpp"

namespace sct {

namespace {

/// Row-scaled operator D * B with D = diag(d).
class RowScaledOp final : public LinOp {
 public:
  RowScaledOp(const SparseOperator* base, const std::vector<double>* d) : base_(base), d_(d) {}
  int rows() const override { return base_->rows(); }
  int cols() const override { return base_->cols(); }
  void matvec(std::span<const double> x, std::span<double> y) const override {
    base_->matvec(x, y);
    for (int i = 0; i < rows(); ++i) y[i] *= (*d_)[i];
  }
  void rmatvec(std::span<const double> y, std::span<double> x) const override {
    std::vector<double> tmp(y.begin(), y.end());
    for (int i = 0; i < rows(); ++i) tmp[i] *= (*d_)[i];
    base_->rmatvec(tmp, x);
  }
  using LinOp::matvec;
  using LinOp::rmatvec;

 private:
  const SparseOperator* base_;
  const std::vector<double>* d_;
};

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

std::vector<double> solve_density_scale(const DensityProblem& prob,
                                        std::span<const double> rho_init, double lambda_rho,
                                        DensityTrace* trace) {
  const ReconConfig& cfg = *prob.cfg;
  const bool use_scatter = prob.scatter && prob.w1 > 0.0;
  const bool use_atten = prob.atten && prob.w2 > 0.0;
  if (!use_scatter && !use_atten)
    throw std::invalid_argument("solve_density_scale: no active data term");
  const int np = prob.L->cols();
  if (static_cast<int>(rho_init.size()) != np)
    throw std::invalid_argument("solve_density_scale: rho_init size mismatch");

  const double sw1 = std::sqrt(prob.w1);
  const double sw2 = std::sqrt(prob.w2);
  const double slam = std::sqrt(lambda_rho);

  // attenuation block of the stacked rhs: g_A - K_p * p_hat (fixed here)
  std::vector<double> atten_rhs;
  if (use_atten) {
    atten_rhs.assign(prob.g_A.begin(), prob.g_A.end());
    std::vector<double> kp(prob.atten->K_p.rows());
    prob.atten->K_p.matvec(prob.p_hat, std::span<double>(kp));
    for (size_t i = 0; i < atten_rhs.size(); ++i) atten_rhs[i] -= kp[i];
  }

  std::vector<double> d(prob.L->rows(), 1.0);
  std::vector<double> rho(rho_init.begin(), rho_init.end());
  std::vector<double> prev_wg;
  bool have_prev_wg = false;

  DensityTrace local_trace;
  DensityTrace& tr = trace ? *trace : local_trace;
  tr = DensityTrace{};

  const Grid2D* grid = nullptr;
  if (use_scatter) grid = &prob.scatter->geometry().grid;
  std::vector<double> p_hat_vec(prob.p_hat.begin(), prob.p_hat.end());

  const auto build_rhs = [&](std::vector<double>& g, int rows_c, int rows_a, int rows_m) {
    g.assign(static_cast<size_t>(rows_c) + rows_a + rows_m, 0.0);
    size_t off = 0;
    if (use_scatter) {
      for (int i = 0; i < rows_c; ++i) g[off + i] = sw1 * prob.g_C[i];
      off += rows_c;
    }
    if (use_atten) {
      for (int i = 0; i < rows_a; ++i) g[off + i] = sw2 * atten_rhs[i];
    }
  };

  int epi = 0;
  std::vector<double> stacked_rhs;
  for (int l = 1; l <= cfg.l_max; ++l) {
    epi = l;
    RowScaledOp M(prob.L, &d);

    // inner fixed-point loop: freeze K_C at the current iterate, solve the
    // linear least-squares problem, repeat until the iterate stops moving
    int fpi = 0;
    int bad_rounds = 0;
    double prev_obj = std::numeric_limits<double>::infinity();
    double prev_change = std::numeric_limits<double>::infinity();
    while (true) {
      ++fpi;
      SparseOperator K_C;
      if (use_scatter)
        K_C = prob.scatter->assemble(MaterialMap(*grid, rho, p_hat_vec));

      StackedOp K;
      if (use_scatter) K.add_block(&K_C, sw1);
      if (use_atten) K.add_block(&prob.atten->K_rho, sw2);
      K.add_block(&M, slam);

      const int rows_c = use_scatter ? K_C.rows() : 0;
      const int rows_a = use_atten ? prob.atten->K_rho.rows() : 0;
      build_rhs(stacked_rhs, rows_c, rows_a, M.rows());

      // quasi-linear objective at the current linearization point
      std::vector<double> r = K.matvec(rho);
      for (size_t i = 0; i < r.size(); ++i) r[i] = stacked_rhs[i] - r[i];
      const double obj = sq_norm(r);

      LsqrResult sol = lsqr_solve(K, stacked_rhs, cfg.lsqr_tol, cfg.lsqr_max_iter);
      tr.lsqr_iterations.push_back(sol.iterations);
      const double change = sq_dist(sol.x, rho);

      // divergence: the objective grows while the iterates stop contracting
      // (a converging fixed point may still show asymptotic objective creep)
      if (obj > prev_obj && change >= prev_change) {
        if (++bad_rounds >= 5)
          throw SolverDivergence("solve_density_scale: fixed-point iteration diverging", rho);
      } else {
        bad_rounds = 0;
      }
      prev_obj = obj;
      prev_change = change;

      rho = std::move(sol.x);
      if (change < cfg.eps_fpi) break;
      if (fpi >= cfg.max_fpi)
        throw SolverDivergence("solve_density_scale: fixed point did not converge", rho);
    }
    tr.fpi_counts.push_back(fpi);

    // outer stop: change of the weighted gradient M rho across iterations
    std::vector<double> wg = M.matvec(rho);
    if (have_prev_wg && sq_dist(wg, prev_wg) < cfg.eps_epi) break;
    prev_wg = std::move(wg);
    have_prev_wg = true;
    if (l < cfg.l_max) d = update_edge_weights(d, *prob.L, rho);
  }
  tr.epi_iterations = epi;

  for (double& v : rho) v = std::max(0.0, v);

  // stacked residual at the returned iterate (regularized discrepancy input)
  {
    RowScaledOp M(prob.L, &d);
    SparseOperator K_C;
    if (use_scatter) K_C = prob.scatter->assemble(MaterialMap(*grid, rho, p_hat_vec));
    StackedOp K;
    if (use_scatter) K.add_block(&K_C, sw1);
    if (use_atten) K.add_block(&prob.atten->K_rho, sw2);
    K.add_block(&M, slam);
    const int rows_c = use_scatter ? K_C.rows() : 0;
    const int rows_a = use_atten ? prob.atten->K_rho.rows() : 0;
    build_rhs(stacked_rhs, rows_c, rows_a, M.rows());
    std::vector<double> r = K.matvec(rho);
    for (size_t i = 0; i < r.size(); ++i) r[i] = stacked_rhs[i] - r[i];
    tr.final_objective = sq_norm(r);
    tr.stacked_residual = std::move(r);
  }
  return rho;
}

ScaleBundle make_scale_bundle(const ScanGeometry& geom, const Spectrum& spectrum,
                              const ReconConfig& cfg, int scale_n) {
  ScaleBundle bundle;
  bundle.geom = geom;
  bundle.geom.grid.n = scale_n;
  bundle.scale_n = scale_n;
  if (cfg.mode != DataMode::kScatterOnly)
    bundle.atten = std::make_shared<AttenuationSystem>(
        build_attenuation_system(bundle.geom, cfg.kappa));
  if (cfg.mode != DataMode::kAttenOnly)
    bundle.scatter = std::make_shared<ScatterModel>(bundle.geom, spectrum, cfg.kappa);
  bundle.L = std::make_shared<SparseOperator>(build_gradient(scale_n));
  return bundle;
}

std::pair<double, double> mode_weights(DataMode mode, std::span<const double> g_A,
                                       std::span<const double> g_C) {
  switch (mode) {
    case DataMode::kAttenOnly:
      return {0.0, 1.0};
    case DataMode::kScatterOnly:
      return {1.0, 0.0};
    case DataMode::kBoth:
      return data_weights(g_A, g_C);
  }
  throw std::logic_error("mode_weights: bad mode");
}

double discrepancy_sigma2(const ReconProblem& prob, double w1, double w2, double tau) {
  const double nc = static_cast<double>(prob.g_C.size());
  const double na = static_cast<double>(prob.g_A.size());
  double s = 0.0;
  if (w1 > 0.0) s += w1 * nc * prob.sigma_C * prob.sigma_C;
  if (w2 > 0.0) s += w2 * na * prob.sigma_A * prob.sigma_A;
  return s / tau;
}

double bisect_discrepancy(std::span<const double> lambdas,
                          const std::function<std::optional<double>(double)>& F,
                          std::map<double, double>& f_memo) {
  const int n = static_cast<int>(lambdas.size());
  if (n == 0) throw std::invalid_argument("bisect_discrepancy: no candidates");
  const auto eval = [&](int i) -> std::optional<double> {
    const double lam = lambdas[i];
    if (auto it = f_memo.find(lam); it != f_memo.end()) return it->second;
    const std::optional<double> f = F(lam);
    if (f.has_value()) f_memo[lam] = *f;
    return f;
  };

  // locate the smallest index with F >= 0; failed solves sort with the
  // under-regularized (F < 0) side
  int lo = -1, hi = n;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    const auto f = eval(mid);
    if (f.has_value() && *f >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  if (hi < n) eval(hi);
  if (lo >= 0) eval(lo);
  if (f_memo.empty())
    throw SolverDivergence("lambda selection: no candidate converged", std::vector<double>{});

  double best = 0.0, best_absf = std::numeric_limits<double>::infinity();
  for (const auto& [lam, f] : f_memo)
    if (std::abs(f) < best_absf) {
      best_absf = std::abs(f);
      best = lam;
    }
  return best;
}

MultiscaleResult multiscale_density(const ReconProblem& prob, ScaleCheckpoint* ckpt) {
  BundleCache bundles(prob);
  return multiscale_density_impl(prob, bundles, ckpt);
}

MultiscaleResult multiscale_density_impl(const ReconProblem& prob, BundleCache& bundles,
                                         ScaleCheckpoint* ckpt) {
  const ReconConfig& cfg = prob.cfg;
  if (cfg.scales.empty()) throw std::invalid_argument("multiscale_density: no scales");
  for (size_t i = 1; i < cfg.scales.size(); ++i)
    if (cfg.scales[i] <= cfg.scales[i - 1])
      throw std::invalid_argument("multiscale_density: scales must ascend");

  // All-zero data leaves the weights undefined; the penalty-only minimizer is
  // zero at every scale.
  if (sq_norm(prob.g_A) == 0.0 && sq_norm(prob.g_C) == 0.0) {
    MultiscaleResult out;
    for (int scale_n : cfg.scales) {
      ScaleResult r;
      r.scale_n = scale_n;
      r.lambda = cfg.lambda_rho > 0.0 ? cfg.lambda_rho : cfg.lambda_lo;
      r.rho.assign(static_cast<size_t>(scale_n) * scale_n, 0.0);
      out.lambda_finest = r.lambda;
      out.scales.push_back(std::move(r));
    }
    return out;
  }

  const auto [w1, w2] = mode_weights(cfg.mode, prob.g_A, prob.g_C);

  MultiscaleResult out;
  std::vector<double> carry;  // upscaled estimate from the previous scale
  int prev_n = 0;

  for (int scale_n : cfg.scales) {
    const ScaleBundle& bundle = bundles.get(scale_n);
    const int np = scale_n * scale_n;

    std::vector<double> rho0;
    if (carry.empty())
      rho0.assign(np, cfg.rho_init);
    else
      rho0 = upscale_nearest(carry, prev_n, scale_n);

    ScaleResult result;
    if (ckpt) {
      if (auto loaded = ckpt->load(scale_n); loaded.has_value()) {
        result = std::move(*loaded);
        out.scales.push_back(result);
        out.lambda_finest = result.lambda;
        carry = out.scales.back().rho;
        prev_n = scale_n;
        continue;
      }
    }

    DensityProblem dp;
    dp.scatter = bundle.scatter;
    dp.atten = bundle.atten.get();
    dp.g_A = prob.g_A;
    dp.g_C = prob.g_C;
    std::vector<double> p_zero(np, 0.0);
    dp.p_hat = p_zero;
    dp.w1 = w1;
    dp.w2 = w2;
    dp.L = bundle.L.get();
    dp.cfg = &cfg;

    if (cfg.lambda_rho > 0.0) {
      result.lambda = cfg.lambda_rho;
      result.rho = solve_density_scale(dp, rho0, cfg.lambda_rho, &result.trace);
      result.discrepancy = 0.0;
    } else {
      // discrepancy-principle selection over the candidate ladder
      const std::vector<double> lambdas = lambda_candidates(cfg);
      std::map<double, std::pair<std::vector<double>, DensityTrace>> memo;
      const int rows_c = cfg.mode != DataMode::kAttenOnly ? bundle.scatter->n_rows() : 0;
      const int rows_a = cfg.mode != DataMode::kScatterOnly ? bundle.atten->K_rho.rows() : 0;
      const double tau = rows_c + rows_a + bundle.L->rows();
      const double sigma2 = discrepancy_sigma2(prob, w1, w2, tau);
      const bool verbose = std::getenv("SCATTERCT_VERBOSE") != nullptr;

      const auto F = [&](double lam) -> std::optional<double> {
        const auto t0 = std::chrono::steady_clock::now();
        DensityTrace t;
        std::vector<double> rho;
        try {
          rho = solve_density_scale(dp, rho0, lam, &t);
        } catch (const SolverDivergence&) {
          if (verbose)
            std::fprintf(stderr, "[scale %d] lambda=%.3g: no fixed-point convergence\n",
                         scale_n, lam);
          return std::nullopt;
        }
        double r2 = 0.0;
        for (double v : t.stacked_residual) r2 += v * v;
        const double f = r2 / tau - sigma2;
        if (verbose) {
          int fpi_total = 0, lsqr_total = 0;
          for (int c : t.fpi_counts) fpi_total += c;
          for (int c : t.lsqr_iterations) lsqr_total += c;
          const double dt =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          std::fprintf(stderr,
                       "[scale %d] lambda=%.3g: F=%.3e epi=%d fpi_total=%d lsqr_total=%d "
                       "(%.1fs)\n",
                       scale_n, lam, f, t.epi_iterations, fpi_total, lsqr_total, dt);
        }
        memo[lam] = {std::move(rho), std::move(t)};
        return f;
      };

      std::map<double, double> f_memo;
      const double lam = bisect_discrepancy(lambdas, F, f_memo);
      auto& [rho, t] = memo.at(lam);
      result.lambda = lam;
      result.rho = std::move(rho);
      result.trace = std::move(t);
      result.discrepancy = f_memo.at(lam);
    }
    result.scale_n = scale_n;
    if (ckpt) ckpt->save(result);

    carry = result.rho;
    prev_n = scale_n;
    out.lambda_finest = result.lambda;
    out.scales.push_back(std::move(result));
  }
  return out;
}

}  // namespace sct
