#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "scatterct/recon.hpp"

namespace sct {

/// Per-scale operator bundle shared across lambda candidates and cyclic
/// iterations (the scatter cache is the expensive part).
struct ScaleBundle {
  int scale_n = 0;
  ScanGeometry geom;
  std::shared_ptr<AttenuationSystem> atten;
  std::shared_ptr<ScatterModel> scatter;
  std::shared_ptr<SparseOperator> L;
};

ScaleBundle make_scale_bundle(const ScanGeometry& geom, const Spectrum& spectrum,
                              const ReconConfig& cfg, int scale_n);

class BundleCache {
 public:
  explicit BundleCache(const ReconProblem& prob) : prob_(&prob) {}
  const ScaleBundle& get(int scale_n) {
    auto it = cache_.find(scale_n);
    if (it == cache_.end())
      it = cache_
               .emplace(scale_n, make_scale_bundle(*prob_->geom, *prob_->spectrum, prob_->cfg,
                                                   scale_n))
               .first;
    return it->second;
  }

 private:
  const ReconProblem* prob_;
  std::map<int, ScaleBundle> cache_;
};

std::pair<double, double> mode_weights(DataMode mode, std::span<const double> g_A,
                                       std::span<const double> g_C);
double discrepancy_sigma2(const ReconProblem& prob, double w1, double w2, double tau);
MultiscaleResult multiscale_density_impl(const ReconProblem& prob, BundleCache& bundles,
                                         ScaleCheckpoint* ckpt);

/// Discrepancy-principle winner over an ascending candidate ladder. F(lambda)
/// grows with lambda, so the sign change is located by bisection over the
/// grid; the bracketing pair is evaluated and argmin |F| returned. `F` returns
/// nullopt when a candidate's solve fails (counts as the under-regularized
/// side). Every evaluated (lambda, F) lands in f_memo.
double bisect_discrepancy(std::span<const double> lambdas,
                          const std::function<std::optional<double>(double)>& F,
                          std::map<double, double>& f_memo);

}  // namespace sct
