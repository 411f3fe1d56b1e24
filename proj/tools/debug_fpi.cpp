// Scratch instrumentation for the density fixed point; dev only.
#include <cstdio>
#include <memory>

#include "scatterct/eval.hpp"
#include "scatterct/recon.hpp"
#include "scatterct/recon_internal.hpp"

using namespace sct;

int main(int argc, char** argv) {
  const int scale = argc > 1 ? std::atoi(argv[1]) : 10;
  const double lambda = argc > 2 ? std::atof(argv[2]) : 1.0;

  const ScanGeometry geom0 = default_scan_geometry(20, 20.0, 21);
  const Spectrum spec = Spectrum::kramers(140.0, 1.0e6);
  const Phantom ph = make_phantom("phantom2", geom0.grid);
  const MaterialMap truth = ph.map();
  const AttenuationSystem atten0 = build_attenuation_system(geom0);
  auto model0 = std::make_shared<ScatterModel>(geom0, spec);
  const ScatterSystem frozen = assemble_scatter(model0, truth);
  std::vector<double> g_A = forward_attenuation(atten0, truth);
  std::vector<double> g_C = forward_scatter(frozen, truth.rho);
  const NoiseResult na = add_noise(g_A, 50.0, 424241);
  const NoiseResult nc = add_noise(g_C, 50.0, 424242);

  // coarse-scale problem
  ScanGeometry geom = geom0;
  geom.grid.n = scale;
  const AttenuationSystem atten = build_attenuation_system(geom);
  auto model = std::make_shared<ScatterModel>(geom, spec);
  const SparseOperator L = build_gradient(scale);
  ReconConfig cfg;
  const auto [w1, w2] = data_weights(na.noisy, nc.noisy);
  std::printf("w1=%g w2=%g |g_C|=%g |g_A|=%g\n", w1, w2, 1 / w1, 1 / w2);

  const int np = scale * scale;
  std::vector<double> rho(np, 0.4), p_hat(np, 0.0);

  const double sw1 = std::sqrt(w1), sw2 = std::sqrt(w2), slam = std::sqrt(lambda);
  std::vector<double> d(L.rows(), 1.0);

  for (int fpi = 1; fpi <= 20; ++fpi) {
    const SparseOperator K_C = model->assemble(MaterialMap(geom.grid, rho, p_hat));
    StackedOp K;
    K.add_block(&K_C, sw1);
    K.add_block(&atten.K_rho, sw2);
    // row-scaled M == L while d == 1
    K.add_block(&L, slam);
    std::vector<double> rhs(K.rows(), 0.0);
    for (size_t i = 0; i < nc.noisy.size(); ++i) rhs[i] = sw1 * nc.noisy[i];
    for (size_t i = 0; i < na.noisy.size(); ++i) rhs[nc.noisy.size() + i] = sw2 * na.noisy[i];

    std::vector<double> r = K.matvec(rho);
    double obj = 0.0;
    for (size_t i = 0; i < r.size(); ++i) obj += (rhs[i] - r[i]) * (rhs[i] - r[i]);

    const LsqrResult sol = lsqr_solve(K, rhs, cfg.lsqr_tol, cfg.lsqr_max_iter);
    double change = 0.0, mx = 0.0, mn = 1e30;
    for (int c = 0; c < np; ++c) {
      change += (sol.x[c] - rho[c]) * (sol.x[c] - rho[c]);
      mx = std::max(mx, sol.x[c]);
      mn = std::min(mn, sol.x[c]);
    }
    std::printf("fpi %2d: obj=%.8e change=%.3e lsqr_it=%d stop=%d rho[min,max]=[%.3f, %.3f]\n",
                fpi, obj, change, sol.iterations, sol.stop_reason, mn, mx);
    rho = sol.x;
    if (change < cfg.eps_fpi) break;
  }
  const Phantom ps = make_phantom("phantom2", geom.grid);
  std::printf("rmse=%.4f\n", rmse(rho, ps.map().rho));
  return 0;
}
