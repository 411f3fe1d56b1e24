#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scatterct/recon.hpp"

namespace sct {

SparseOperator build_gradient(int n) {
  if (n < 1) throw std::invalid_argument("build_gradient: n must be >= 1");
  const int np = n * n;
  const int per_dir = n * (n - 1);
  std::vector<Triplet> tr;
  tr.reserve(4 * static_cast<size_t>(per_dir));
  // horizontal differences within each row (I kron L_H on row-major images)
  int r = 0;
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n - 1; ++col, ++r) {
      tr.push_back({r, row * n + col, -1.0});
      tr.push_back({r, row * n + col + 1, 1.0});
    }
  // vertical differences between adjacent rows (L_V kron I)
  for (int row = 0; row < n - 1; ++row)
    for (int col = 0; col < n; ++col, ++r) {
      tr.push_back({r, row * n + col, -1.0});
      tr.push_back({r, (row + 1) * n + col, 1.0});
    }
  return SparseOperator::from_triplets(2 * per_dir, np, std::move(tr));
}

std::vector<double> update_edge_weights(std::span<const double> d, const SparseOperator& L,
                                        std::span<const double> rho) {
  if (static_cast<int>(d.size()) != L.rows())
    throw std::invalid_argument("update_edge_weights: weight size mismatch");
  std::vector<double> g = L.matvec(rho);
  double gmax = 0.0;
  for (size_t i = 0; i < g.size(); ++i) {
    g[i] *= d[i];
    gmax = std::max(gmax, std::abs(g[i]));
  }
  std::vector<double> out(d.begin(), d.end());
  if (gmax == 0.0) return out;
  for (size_t i = 0; i < g.size(); ++i) {
    const double t = g[i] / gmax;
    out[i] = d[i] * (1.0 - t * t);
  }
  return out;
}

std::pair<double, double> data_weights(std::span<const double> g_A,
                                       std::span<const double> g_C) {
  double na = 0.0, nc = 0.0;
  for (double v : g_A) na += v * v;
  for (double v : g_C) nc += v * v;
  na = std::sqrt(na);
  nc = std::sqrt(nc);
  if (na == 0.0 && nc == 0.0)
    throw std::invalid_argument("data_weights: both datasets are empty");
  const double w1 = nc > 0.0 ? 1.0 / nc : 0.0;
  const double w2 = na > 0.0 ? 1.0 / na : 0.0;
  return {w1, w2};
}

std::vector<double> lambda_candidates(const ReconConfig& cfg) {
  std::vector<double> out(cfg.lambda_count);
  const double llo = std::log10(cfg.lambda_lo);
  const double lhi = std::log10(cfg.lambda_hi);
  for (int i = 0; i < cfg.lambda_count; ++i) {
    const double f = cfg.lambda_count == 1 ? 0.0 : static_cast<double>(i) / (cfg.lambda_count - 1);
    out[i] = std::pow(10.0, llo + f * (lhi - llo));
  }
  return out;
}

double select_lambda(std::span<const double> candidates,
                     const std::function<std::vector<double>(double)>& residual_fn,
                     double tau, double sigma) {
  if (candidates.empty()) throw std::invalid_argument("select_lambda: no candidates");
  double best_lambda = 0.0;
  double best_absf = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double lam : candidates) {
    const std::vector<double> r = residual_fn(lam);
    double r2 = 0.0;
    for (double v : r) r2 += v * v;
    if (!std::isfinite(r2)) continue;
    const double f = r2 / tau - sigma * sigma;
    if (std::abs(f) < best_absf) {
      best_absf = std::abs(f);
      best_lambda = lam;
      any = true;
    }
  }
  if (!any) throw std::runtime_error("select_lambda: every candidate was non-finite");
  return best_lambda;
}

std::vector<double> upscale_nearest(std::span<const double> img, int n_from, int n_to) {
  if (static_cast<int>(img.size()) != n_from * n_from)
    throw std::invalid_argument("upscale_nearest: size mismatch");
  std::vector<double> out(static_cast<size_t>(n_to) * n_to);
  for (int r = 0; r < n_to; ++r) {
    const int rs = std::min(n_from - 1, static_cast<int>((r + 0.5) * n_from / n_to));
    for (int c = 0; c < n_to; ++c) {
      const int cs = std::min(n_from - 1, static_cast<int>((c + 0.5) * n_from / n_to));
      out[static_cast<size_t>(r) * n_to + c] = img[static_cast<size_t>(rs) * n_from + cs];
    }
  }
  return out;
}

NlmWeights nlm_weights(std::span<const double> i_ref, int n, int patch, int search,
                       double bandwidth) {
  if (static_cast<int>(i_ref.size()) != n * n)
    throw std::invalid_argument("nlm_weights: image size mismatch");
  if (patch < 1 || patch % 2 == 0 || search < 1 || search % 2 == 0)
    throw std::invalid_argument("nlm_weights: patch and search must be odd");
  const int pr = patch / 2;
  const int sr = search / 2;

  // Gaussian patch kernel, sigma = patch radius / 2 (min 0.5), normalized.
  std::vector<double> kernel(static_cast<size_t>(patch) * patch);
  {
    const double sig = std::max(0.5, pr / 2.0);
    double s = 0.0;
    for (int dy = -pr; dy <= pr; ++dy)
      for (int dx = -pr; dx <= pr; ++dx) {
        const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sig * sig));
        kernel[(dy + pr) * patch + (dx + pr)] = w;
        s += w;
      }
    for (double& w : kernel) w /= s;
  }

  const auto at = [&](int r, int c) {  // replicate-pad access
    r = std::clamp(r, 0, n - 1);
    c = std::clamp(c, 0, n - 1);
    return i_ref[static_cast<size_t>(r) * n + c];
  };
  const auto patch_dist2 = [&](int r0, int c0, int r1, int c1) {
    double s = 0.0;
    for (int dy = -pr; dy <= pr; ++dy)
      for (int dx = -pr; dx <= pr; ++dx) {
        const double diff = at(r0 + dy, c0 + dx) - at(r1 + dy, c1 + dx);
        s += kernel[(dy + pr) * patch + (dx + pr)] * diff * diff;
      }
    return s;
  };

  const bool flat = !(bandwidth > 0.0);
  std::vector<Triplet> tr;
  tr.reserve(static_cast<size_t>(n) * n * search);
  std::vector<std::pair<int, double>> row_entries;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      row_entries.clear();
      double sum = 0.0;
      for (int dy = -sr; dy <= sr; ++dy) {
        const int rr = r + dy;
        if (rr < 0 || rr >= n) continue;
        for (int dx = -sr; dx <= sr; ++dx) {
          const int cc = c + dx;
          if (cc < 0 || cc >= n) continue;
          double w = 1.0;
          if (!flat) {
            const double d2 = patch_dist2(r, c, rr, cc);
            w = std::exp(-d2 / (bandwidth * bandwidth));
          }
          row_entries.emplace_back(rr * n + cc, w);
          sum += w;
        }
      }
      const int row = r * n + c;
      for (auto& [col, w] : row_entries) tr.push_back({row, col, w / sum});
    }
  }
  NlmWeights out;
  out.W = SparseOperator::from_triplets(n * n, n * n, std::move(tr));
  return out;
}

}  // namespace sct
