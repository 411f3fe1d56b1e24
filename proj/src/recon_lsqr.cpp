#include <cmath>
#include <stdexcept>
#include <vector>

#include "scatterct/recon.hpp"

namespace sct {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::runtime_error(std::string("lsqr_solve: non-finite ") + what);
}

}  // namespace

LsqrResult lsqr_solve(const LinOp& A, std::span<const double> b, double tol, int max_iter) {
  const int m = A.rows(), n = A.cols();
  if (static_cast<int>(b.size()) != m) throw std::invalid_argument("lsqr_solve: rhs size");
  check_finite(b, "rhs");

  LsqrResult res;
  res.x.assign(n, 0.0);

  std::vector<double> u(b.begin(), b.end());
  double beta = norm2(u);
  const double bnorm = beta;
  if (beta == 0.0) return res;  // x = 0 is exact
  for (double& v : u) v /= beta;

  std::vector<double> v(n);
  A.rmatvec(u, std::span<double>(v));
  double alpha = norm2(v);
  if (alpha == 0.0) {
    res.residual_norm = beta;
    return res;  // A^T b = 0: x = 0 minimizes
  }
  for (double& w : v) w /= alpha;

  std::vector<double> w = v;
  std::vector<double> tmp_m(m), tmp_n(n);

  double phibar = beta;
  double rhobar = alpha;
  double anorm2 = 0.0;

  const double atol = tol, btol = tol;

  for (int iter = 1; iter <= max_iter; ++iter) {
    // Golub-Kahan bidiagonalization step
    A.matvec(v, std::span<double>(tmp_m));
    for (int i = 0; i < m; ++i) u[i] = tmp_m[i] - alpha * u[i];
    beta = norm2(u);
    if (beta > 0.0)
      for (double& y : u) y /= beta;
    anorm2 += alpha * alpha + beta * beta;

    A.rmatvec(u, std::span<double>(tmp_n));
    for (int i = 0; i < n; ++i) v[i] = tmp_n[i] - beta * v[i];
    alpha = norm2(v);
    if (alpha > 0.0)
      for (double& y : v) y /= alpha;

    if (!std::isfinite(alpha) || !std::isfinite(beta))
      throw std::runtime_error("lsqr_solve: non-finite bidiagonalization");

    // plane rotation
    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho;
    const double s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;

    const double t1 = phi / rho;
    const double t2 = -theta / rho;
    for (int i = 0; i < n; ++i) {
      res.x[i] += t1 * w[i];
      w[i] = v[i] + t2 * w[i];
    }

    res.iterations = iter;
    res.residual_norm = phibar;

    const double anorm = std::sqrt(anorm2);
    const double xnorm = norm2(res.x);
    const double arnorm = alpha * std::abs(c) * phibar;  // ||A^T r||

    if (phibar <= btol * bnorm + atol * anorm * xnorm) {
      res.stop_reason = 1;
      break;
    }
    if (anorm > 0.0 && phibar > 0.0 && arnorm / (anorm * phibar) <= atol) {
      res.stop_reason = 2;
      break;
    }
    if (iter == max_iter) res.stop_reason = 3;
  }

  check_finite(res.x, "solution");
  return res;
}

}  // namespace sct
