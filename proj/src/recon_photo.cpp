#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scatterct/recon.hpp"

namespace sct {

SparseOperator scatter_jacobian_p(const ScatterModel& model, std::span<const double> rho_hat,
                                  std::span<const double> p) {
  SparseOperator::Builder builder(model.n_rows(), model.n_cols());
  model.forward_with_jacobian(rho_hat, p,
                              [&](int row, double /*model_value*/, std::span<const int> cols,
                                  std::span<const double> vals) {
                                for (size_t k = 0; k < cols.size(); ++k)
                                  builder.add(row, cols[k], vals[k]);
                              });
  return builder.take();
}

namespace {

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

/// Accumulates w * (J^T J) and w * (J^T f) from sparse rows of J.
void accumulate_row(Eigen::MatrixXd& H, Eigen::VectorXd& grad, double w,
                    std::span<const int> cols, std::span<const double> vals, double f_row) {
  const size_t s = cols.size();
  for (size_t a = 0; a < s; ++a) {
    const double va = w * vals[a];
    grad(cols[a]) += va * f_row;
    for (size_t b = 0; b <= a; ++b) H(cols[a], cols[b]) += va * vals[b];
  }
}

}  // namespace

std::vector<double> solve_photoelectric(const PhotoelectricProblem& prob,
                                        std::span<const double> p_init, double lambda_p,
                                        PhotoelectricTrace* trace) {
  const ReconConfig& cfg = *prob.cfg;
  const LmParams& lm = cfg.lm;
  const bool use_scatter = prob.scatter && prob.w1 > 0.0;
  const bool use_atten = prob.atten && prob.w2 > 0.0;
  if (!use_scatter && !use_atten)
    throw std::invalid_argument("solve_photoelectric: no active data term");
  if (!prob.nlm) throw std::invalid_argument("solve_photoelectric: missing NLM weights");

  const int np = static_cast<int>(p_init.size());
  const SparseOperator R = identity_minus(prob.nlm->W);

  // attenuation data with the fixed density part removed
  std::vector<double> c_A;
  if (use_atten) {
    c_A.assign(prob.g_A.begin(), prob.g_A.end());
    std::vector<double> t(prob.atten->K_rho.rows());
    prob.atten->K_rho.matvec(prob.rho_hat, std::span<double>(t));
    for (size_t i = 0; i < c_A.size(); ++i) c_A[i] -= t[i];
  }

  // constant Gauss-Newton blocks: w2 * K_p^T K_p and lambda * R^T R
  Eigen::MatrixXd H_const = Eigen::MatrixXd::Zero(np, np);
  if (use_atten) {
    for (int r = 0; r < prob.atten->K_p.rows(); ++r) {
      const auto row = prob.atten->K_p.row(r);
      for (size_t a = 0; a < row.cols.size(); ++a)
        for (size_t b = 0; b <= a; ++b)
          H_const(row.cols[a], row.cols[b]) += prob.w2 * row.vals[a] * row.vals[b];
    }
  }
  for (int r = 0; r < R.rows(); ++r) {
    const auto row = R.row(r);
    for (size_t a = 0; a < row.cols.size(); ++a)
      for (size_t b = 0; b <= a; ++b)
        H_const(row.cols[a], row.cols[b]) += lambda_p * row.vals[a] * row.vals[b];
  }

  std::vector<double> p(p_init.begin(), p_init.end());

  // residual-only evaluation (for trial steps)
  const auto residual2_at = [&](std::span<const double> pt) {
    double r2 = 0.0;
    if (use_atten) {
      std::vector<double> fa(c_A);
      std::vector<double> t(prob.atten->K_p.rows());
      prob.atten->K_p.matvec(pt, std::span<double>(t));
      for (size_t i = 0; i < fa.size(); ++i) fa[i] -= t[i];
      r2 += prob.w2 * sq_norm(fa);
    }
    if (use_scatter) {
      const std::vector<double> model = prob.scatter->forward(prob.rho_hat, pt);
      for (size_t i = 0; i < model.size(); ++i) {
        const double d = prob.g_C[i] - model[i];
        r2 += prob.w1 * d * d;
      }
    }
    std::vector<double> fr = R.matvec(pt);
    r2 += lambda_p * sq_norm(fr);
    return r2;
  };

  PhotoelectricTrace local;
  PhotoelectricTrace& tr = trace ? *trace : local;
  tr = PhotoelectricTrace{};
  tr.lambda = lambda_p;

  Eigen::MatrixXd H(np, np);
  Eigen::VectorXd grad(np);
  std::vector<double> best_p = p;
  double best_r2 = residual2_at(p);
  double mu = -1.0;
  tr.residual_history.push_back(best_r2);

  for (int iter = 1; iter <= lm.max_iter; ++iter) {
    tr.lm_iterations = iter;

    // full evaluation at p: residual, J^T J, J^T f
    H = H_const;
    grad.setZero();
    double r2 = 0.0;

    if (use_atten) {
      std::vector<double> fa(c_A);
      std::vector<double> t(prob.atten->K_p.rows());
      prob.atten->K_p.matvec(p, std::span<double>(t));
      for (size_t i = 0; i < fa.size(); ++i) fa[i] -= t[i];
      r2 += prob.w2 * sq_norm(fa);
      // d f_a / d p = -w2^(1/2) K_p, so J^T f gets -w2 * K_p^T fa
      std::vector<double> g(np, 0.0);
      prob.atten->K_p.rmatvec_add(fa, std::span<double>(g), 1.0);
      for (int c = 0; c < np; ++c) grad(c) -= prob.w2 * g[c];
    }
    if (use_scatter) {
      std::vector<double> model(prob.scatter->n_rows(), 0.0);
      prob.scatter->forward_with_jacobian(
          prob.rho_hat, p,
          [&](int row, double m, std::span<const int> cols, std::span<const double> vals) {
            model[row] = m;
            const double f_row = prob.g_C[row] - m;
            // d f_c / d p = -sqrt(w1) * dmodel/dp
            accumulate_row(H, grad, prob.w1, cols, vals, -f_row);
          });
      for (size_t i = 0; i < model.size(); ++i) {
        const double d = prob.g_C[i] - model[i];
        r2 += prob.w1 * d * d;
      }
    }
    {
      std::vector<double> fr = R.matvec(p);
      r2 += lambda_p * sq_norm(fr);
      std::vector<double> g(np, 0.0);
      R.rmatvec_add(fr, std::span<double>(g), 1.0);
      for (int c = 0; c < np; ++c) grad(c) += lambda_p * g[c];
    }
    H = H.selfadjointView<Eigen::Lower>();

    if (mu < 0.0) mu = lm.damping_init_scale * H.diagonal().mean();

    bool accepted = false;
    int rejects = 0;
    while (!accepted) {
      Eigen::MatrixXd Hd = H;
      Hd.diagonal().array() += mu;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hd);
      bool ok = ldlt.info() == Eigen::Success;
      Eigen::VectorXd delta;
      if (ok) {
        delta = ldlt.solve(-grad);
        ok = delta.allFinite();
      }
      if (ok) {
        const double pnorm = std::sqrt(sq_norm(p));
        if (delta.norm() <= lm.step_tol * (pnorm + lm.step_tol)) {
          tr.converged = true;
          break;
        }
        std::vector<double> pt(np);
        for (int c = 0; c < np; ++c) pt[c] = p[c] + delta(c);
        const double r2_t = residual2_at(pt);
        if (r2_t < r2) {
          p = std::move(pt);
          tr.residual_history.push_back(r2_t);
          if (r2_t < best_r2) {
            best_r2 = r2_t;
            best_p = p;
          }
          mu /= lm.damping_down;
          accepted = true;
          break;
        }
      }
      mu *= lm.damping_up;
      if (++rejects > lm.max_rejects) break;
    }
    if (tr.converged) break;
    if (!accepted) {
      tr.warning_no_decrease = true;
      break;
    }
  }

  p = best_p;
  for (double& v : p) v = std::max(0.0, v);

  // stacked residual at the returned (clamped) iterate
  {
    tr.stacked_residual.clear();
    const double sw1 = std::sqrt(prob.w1), sw2 = std::sqrt(prob.w2), slam = std::sqrt(lambda_p);
    if (use_scatter) {
      const std::vector<double> model = prob.scatter->forward(prob.rho_hat, p);
      for (size_t i = 0; i < model.size(); ++i)
        tr.stacked_residual.push_back(sw1 * (prob.g_C[i] - model[i]));
    }
    if (use_atten) {
      std::vector<double> t(prob.atten->K_p.rows());
      prob.atten->K_p.matvec(p, std::span<double>(t));
      for (size_t i = 0; i < c_A.size(); ++i)
        tr.stacked_residual.push_back(sw2 * (c_A[i] - t[i]));
    }
    std::vector<double> fr = R.matvec(p);
    for (double v : fr) tr.stacked_residual.push_back(-slam * v);
    tr.final_residual2 = sq_norm(tr.stacked_residual);
  }
  return p;
}

}  // namespace sct
