#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "scatterct/recon.hpp"
#include "scatterct/recon_internal.hpp"

namespace sct {

namespace {

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double rel_mse(std::span<const double> est, std::span<const double> truth) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    num += (est[i] - truth[i]) * (est[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  return den > 0.0 ? num / den : -1.0;
}

}  // namespace

CyclicResult cyclic_descent(const ReconProblem& prob, const MaterialMap* truth,
                            ScaleCheckpoint* ckpt) {
  const ReconConfig& cfg = prob.cfg;
  const int finest = cfg.scales.back();
  const int np = finest * finest;

  CyclicResult out;

  // Zero data has no defined weights; the pure-penalty minimizer is zero.
  if (sq_norm(prob.g_A) == 0.0 && sq_norm(prob.g_C) == 0.0) {
    out.rho.assign(np, 0.0);
    out.p.assign(np, 0.0);
    out.trace.converged_n = 1;
    out.trace.iterates.push_back({1, out.rho, out.p, 0.0,
                                  truth ? rel_mse(out.rho, truth->rho) : -1.0,
                                  truth ? rel_mse(out.p, truth->p) : -1.0});
    return out;
  }

  const auto [w1, w2] = mode_weights(cfg.mode, prob.g_A, prob.g_C);

  BundleCache bundles(prob);
  out.trace.multiscale = multiscale_density_impl(prob, bundles, ckpt);
  out.trace.lambda_rho = out.trace.multiscale.lambda_finest;
  for (const ScaleResult& sr : out.trace.multiscale.scales)
    for (int c : sr.trace.fpi_counts) out.trace.fpi_counts.push_back(c);

  const ScaleBundle& bundle = bundles.get(finest);
  std::vector<double> rho = out.trace.multiscale.scales.back().rho;

  // NLM reference image is the first density estimate.
  const std::vector<double>& i_ref = rho;
  const auto [lo, hi] = std::minmax_element(i_ref.begin(), i_ref.end());
  const double bandwidth = cfg.nlm.bandwidth_frac * (*hi - *lo);
  const NlmWeights nlm = nlm_weights(i_ref, finest, cfg.nlm.patch, cfg.nlm.search, bandwidth);

  PhotoelectricProblem pp;
  pp.scatter = bundle.scatter;
  pp.atten = bundle.atten.get();
  pp.g_A = prob.g_A;
  pp.g_C = prob.g_C;
  pp.rho_hat = rho;
  pp.nlm = &nlm;
  pp.w1 = w1;
  pp.w2 = w2;
  pp.cfg = &cfg;

  const std::vector<double> p_zero(np, 0.0);
  std::vector<double> p;
  if (cfg.lambda_p > 0.0) {
    out.trace.lambda_p = cfg.lambda_p;
    p = solve_photoelectric(pp, p_zero, cfg.lambda_p);
  } else {
    // lambda_p by the discrepancy principle over the same candidate ladder
    const std::vector<double> lambdas = lambda_candidates(cfg);
    std::map<double, std::vector<double>> memo;
    int tau = static_cast<int>(nlm.W.rows());
    if (cfg.mode != DataMode::kAttenOnly) tau += bundle.scatter->n_rows();
    if (cfg.mode != DataMode::kScatterOnly) tau += bundle.atten->K_rho.rows();
    const double sigma2 = discrepancy_sigma2(prob, w1, w2, tau);

    const auto F = [&](double lam) -> std::optional<double> {
      PhotoelectricTrace t;
      std::vector<double> pl = solve_photoelectric(pp, p_zero, lam, &t);
      double r2 = 0.0;
      for (double v : t.stacked_residual) r2 += v * v;
      memo[lam] = std::move(pl);
      return r2 / tau - sigma2;
    };
    std::map<double, double> f_memo;
    out.trace.lambda_p = bisect_discrepancy(lambdas, F, f_memo);
    p = std::move(memo.at(out.trace.lambda_p));
  }

  out.trace.iterates.push_back({1, rho, p, -1.0, truth ? rel_mse(rho, truth->rho) : -1.0,
                                truth ? rel_mse(p, truth->p) : -1.0});

  // n > 1: warm-started density / photoelectric alternation at the finest
  // scale until the density iterates stabilize
  DensityProblem dp;
  dp.scatter = bundle.scatter;
  dp.atten = bundle.atten.get();
  dp.g_A = prob.g_A;
  dp.g_C = prob.g_C;
  dp.w1 = w1;
  dp.w2 = w2;
  dp.L = bundle.L.get();
  dp.cfg = &cfg;

  for (int n = 2; n <= cfg.n_max; ++n) {
    dp.p_hat = p;
    DensityTrace dt;
    std::vector<double> rho_n = solve_density_scale(dp, rho, out.trace.lambda_rho, &dt);
    for (int c : dt.fpi_counts) out.trace.fpi_counts.push_back(c);

    double change = 0.0;
    for (int c = 0; c < np; ++c) change += (rho_n[c] - rho[c]) * (rho_n[c] - rho[c]);
    const bool converged = change < cfg.eps_cyclic * (1.0 + sq_norm(rho));

    pp.rho_hat = rho_n;
    std::vector<double> p_n = solve_photoelectric(pp, p, out.trace.lambda_p);

    rho = std::move(rho_n);
    p = std::move(p_n);
    out.trace.iterates.push_back({n, rho, p, change, truth ? rel_mse(rho, truth->rho) : -1.0,
                                  truth ? rel_mse(p, truth->p) : -1.0});
    if (converged) {
      out.trace.converged_n = n;
      break;
    }
  }

  out.rho = std::move(rho);
  out.p = std::move(p);
  return out;
}

}  // namespace sct
