// Timing harness for the desk-scale reconstruction; not installed, dev only.
#include <chrono>
#include <cstdio>
#include <memory>

#include "scatterct/eval.hpp"
#include "scatterct/recon.hpp"

using namespace sct;
using Clock = std::chrono::steady_clock;

static double secs(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

int main(int argc, char** argv) {
  const DataMode mode = argc > 1 && std::string(argv[1]) == "atten"     ? DataMode::kAttenOnly
                        : argc > 1 && std::string(argv[1]) == "scatter" ? DataMode::kScatterOnly
                                                                        : DataMode::kBoth;
  const ScanGeometry geom = default_scan_geometry(20, 20.0, 21);
  const Spectrum spec = Spectrum::kramers(140.0, 1.0e6);
  const Phantom ph = make_phantom("phantom2", geom.grid);
  const MaterialMap truth = ph.map();

  auto t0 = Clock::now();
  const AttenuationSystem atten = build_attenuation_system(geom);
  auto model = std::make_shared<ScatterModel>(geom, spec);
  auto t1 = Clock::now();
  std::printf("build: atten+scatter model %.2fs, events=%lld nnz-ish\n", secs(t0, t1),
              static_cast<long long>(model->n_events()));

  const ScatterSystem frozen = assemble_scatter(model, truth);
  auto t2 = Clock::now();
  std::printf("assemble K_C: %.3fs (nnz=%lld rows=%d)\n", secs(t1, t2),
              static_cast<long long>(frozen.K_C.nnz()), frozen.K_C.rows());

  std::vector<double> g_A = forward_attenuation(atten, truth);
  std::vector<double> g_C = forward_scatter(frozen, truth.rho);
  const NoiseResult na = add_noise(g_A, 50.0, 424241);
  const NoiseResult nc = add_noise(g_C, 50.0, 424242);

  ReconProblem prob;
  prob.geom = &geom;
  prob.spectrum = &spec;
  prob.g_A = na.noisy;
  prob.g_C = nc.noisy;
  prob.sigma_A = na.sigma;
  prob.sigma_C = nc.sigma;
  prob.cfg.mode = mode;
  prob.cfg.scales = {10, 20};

  auto t3 = Clock::now();
  const CyclicResult res = cyclic_descent(prob, &truth);
  auto t4 = Clock::now();

  std::printf("cyclic_descent: %.1fs\n", secs(t3, t4));
  std::printf("lambda_rho=%g lambda_p=%g converged_n=%d\n", res.trace.lambda_rho,
              res.trace.lambda_p, res.trace.converged_n);
  for (const auto& s : res.trace.multiscale.scales) {
    const Phantom ps = make_phantom("phantom2", Grid2D(s.scale_n, 20.0));
    std::printf("  scale %d: lambda=%g epi=%d rmse=%.4f fpi=[", s.scale_n, s.lambda,
                s.trace.epi_iterations, rmse(s.rho, ps.map().rho));
    for (int c : s.trace.fpi_counts) std::printf("%d ", c);
    std::printf("] lsqr_iters=[");
    for (size_t i = 0; i < s.trace.lsqr_iterations.size() && i < 20; ++i)
      std::printf("%d ", s.trace.lsqr_iterations[i]);
    std::printf("...]\n");
  }
  for (const auto& it : res.trace.iterates)
    std::printf("  n=%d rho_change=%.3e rmse_rho=%.4f rmse_p=%.4f\n", it.n, it.rho_change,
                it.rmse_rho, it.rmse_p);
  int fpi_max = 0;
  for (int c : res.trace.fpi_counts) fpi_max = std::max(fpi_max, c);
  std::printf("max fpi count: %d\n", fpi_max);
  return 0;
}
