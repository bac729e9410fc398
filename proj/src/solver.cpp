#include "occmom/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace occmom {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kUnbounded:
      return "unbounded";
    case SolveStatus::kNumericalFailure:
      return "numerical_failure";
    case SolveStatus::kIterationLimit:
      return "iteration_limit";
  }
  return "?";
}

namespace {

double inf_norm(const Eigen::Ref<const Eigen::VectorXd>& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense block with the upper-triangle coefficient entries grouped by variable.
struct Block {
  int size = 0;
  MatrixXd C0;
  std::vector<int> vars;    // distinct variables, ascending
  std::vector<int> start;   // entry ranges per variable, size vars.size() + 1
  std::vector<int> rows;
  std::vector<int> cols;
  std::vector<double> coefs;

  MatrixXd linear(const VectorXd& dy) const {
    MatrixXd M = MatrixXd::Zero(size, size);
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const double v = dy(vars[k]);
      if (v == 0.0) continue;
      for (int e = start[k]; e < start[k + 1]; ++e) {
        M(rows[e], cols[e]) += coefs[e] * v;
        if (rows[e] != cols[e]) M(cols[e], rows[e]) += coefs[e] * v;
      }
    }
    return M;
  }

  MatrixXd affine(const VectorXd& y) const { return C0 + linear(y); }

  /// out_i += <C_i, X> for symmetric X.
  void adjoint(const MatrixXd& X, VectorXd& out) const {
    for (std::size_t k = 0; k < vars.size(); ++k) {
      double acc = 0.0;
      for (int e = start[k]; e < start[k + 1]; ++e)
        acc += coefs[e] * (rows[e] == cols[e] ? X(rows[e], cols[e]) : 2.0 * X(rows[e], cols[e]));
      out(vars[k]) += acc;
    }
  }
};

Block make_block(int size, const std::vector<PsdEntry>& entries) {
  Block b;
  b.size = size;
  b.C0 = MatrixXd::Zero(size, size);
  std::vector<PsdEntry> sorted;
  for (const auto& e : entries) {
    if (e.row > e.col) throw std::invalid_argument("PSD entries must be in the upper triangle");
    if (e.row < 0 || e.col >= size) throw std::invalid_argument("PSD entry out of range");
    if (e.var < 0) {
      b.C0(e.row, e.col) += e.coef;
      if (e.row != e.col) b.C0(e.col, e.row) += e.coef;
    } else if (e.coef != 0.0) {
      sorted.push_back(e);
    }
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const PsdEntry& a, const PsdEntry& c) { return a.var < c.var; });
  for (const auto& e : sorted) {
    if (b.vars.empty() || b.vars.back() != e.var) {
      b.vars.push_back(e.var);
      b.start.push_back(static_cast<int>(b.rows.size()));
    }
    b.rows.push_back(e.row);
    b.cols.push_back(e.col);
    b.coefs.push_back(e.coef);
  }
  b.start.push_back(static_cast<int>(b.rows.size()));
  return b;
}

/// Largest step alpha with Z + alpha dZ PSD, given the Cholesky factor of Z.
double max_step(const MatrixXd& L, const MatrixXd& dZ) {
  const auto tri = L.triangularView<Eigen::Lower>();
  MatrixXd T = tri.solve(dZ);
  T = tri.solve(T.transpose()).transpose();
  const MatrixXd Ts = 0.5 * (T + T.transpose());
  const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(Ts, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

bool cholesky(const MatrixXd& Z, MatrixXd& L) {
  Eigen::LLT<MatrixXd> llt(0.5 * (Z + Z.transpose()));
  if (llt.info() != Eigen::Success) return false;
  L = llt.matrixL();
  return L.diagonal().minCoeff() > 0.0 && L.allFinite();
}

/// Nesterov-Todd scaling for one block: W = G G' with G' S G = D = G^-1 X G^-T.
struct NtScaling {
  MatrixXd G;
  MatrixXd Ginv;
  VectorXd d;
  MatrixXd W;
};

bool nt_scaling(const MatrixXd& Ls, const MatrixXd& Lx, NtScaling& nt) {
  Eigen::BDCSVD<MatrixXd> svd(Ls.transpose() * Lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  if (!(sv.minCoeff() > 0.0) || !sv.allFinite()) return false;
  const VectorXd isqrt = sv.cwiseSqrt().cwiseInverse();
  nt.d = sv;
  nt.G = Lx * svd.matrixV() * isqrt.asDiagonal();
  // G^-1 = D^1/2 V' Lx^-1
  MatrixXd VtLinv = Lx.transpose().triangularView<Eigen::Upper>().solve(svd.matrixV()).transpose();
  nt.Ginv = sv.cwiseSqrt().asDiagonal() * VtLinv;
  nt.W = nt.G * nt.G.transpose();
  nt.W = 0.5 * (nt.W + nt.W.transpose());
  return nt.G.allFinite() && nt.Ginv.allFinite();
}

struct Iterate {
  VectorXd y;
  VectorXd lambda;
  std::vector<MatrixXd> X;
  std::vector<MatrixXd> S;
};

struct RawBlock {
  int size = 0;
  std::vector<PsdEntry> entries;

  MatrixXd evaluate(const VectorXd& y) const {
    MatrixXd F = MatrixXd::Zero(size, size);
    for (const auto& e : entries) {
      const double v = e.var < 0 ? e.coef : e.coef * y(e.var);
      F(e.row, e.col) += v;
      if (e.row != e.col) F(e.col, e.row) += v;
    }
    return F;
  }
};

struct IpmResult {
  SolveStatus status = SolveStatus::kIterationLimit;
  Iterate it;
  int iterations = 0;
  std::string message;
};

/// Infeasible primal-dual path following on   min c.y  s.t.  A y = b,
/// F_k(y) PSD, with A of full row rank.
IpmResult run_ipm(const MatrixXd& A, const VectorXd& b, const VectorXd& c, const std::vector<Block>& blocks,
                  const SolverOptions& opts, double report_scale, double report_offset) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(A.rows());
  const int nb = static_cast<int>(blocks.size());
  int total_order = 0;
  for (const auto& blk : blocks) total_order += blk.size;

  IpmResult out;
  Iterate& it = out.it;
  it.y = VectorXd::Zero(n);
  it.lambda = VectorXd::Zero(m);
  for (const auto& blk : blocks) {
    const double s = blk.size;
    double x0 = std::max(10.0, std::sqrt(s));
    double s0 = std::max({10.0, std::sqrt(s), blk.C0.norm()});
    for (std::size_t k = 0; k < blk.vars.size(); ++k) {
      double fro = 0.0;
      for (int e = blk.start[k]; e < blk.start[k + 1]; ++e)
        fro += blk.coefs[e] * blk.coefs[e] * (blk.rows[e] == blk.cols[e] ? 1.0 : 2.0);
      fro = std::sqrt(fro);
      x0 = std::max(x0, s * (1.0 + std::abs(c(blk.vars[k]))) / (1.0 + fro));
      s0 = std::max(s0, fro);
    }
    it.X.push_back(x0 * MatrixXd::Identity(blk.size, blk.size));
    it.S.push_back(s0 * MatrixXd::Identity(blk.size, blk.size));
  }
  if (nb == 0) {
    out.status = SolveStatus::kNumericalFailure;
    out.message = "program has no cone constraints";
    return out;
  }

  const double b_norm = b.norm();
  double C0_norm = 0.0;
  for (const auto& blk : blocks) C0_norm = std::max(C0_norm, blk.C0.norm());
  const double c_norm2 = c.norm();

  Iterate best = it;
  double best_merit = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::kIterationLimit;
  int iter = 0;

  std::vector<MatrixXd> R(nb);
  std::vector<NtScaling> nt(nb);
  std::vector<MatrixXd> Ls(nb), Lx(nb);

  for (iter = 0; iter <= opts.max_iterations; ++iter) {
    VectorXd rd = c - A.transpose() * it.lambda;
    {
      VectorXd adj = VectorXd::Zero(n);
      for (int k = 0; k < nb; ++k) blocks[k].adjoint(it.X[k], adj);
      rd -= adj;
    }
    const VectorXd req = b - A * it.y;
    double rp_cone = 0.0;
    double mu = 0.0;
    double c0x = 0.0;
    for (int k = 0; k < nb; ++k) {
      R[k] = it.S[k] - blocks[k].affine(it.y);
      rp_cone = std::max(rp_cone, R[k].norm());
      mu += (it.X[k].cwiseProduct(it.S[k])).sum();
      c0x += (blocks[k].C0.cwiseProduct(it.X[k])).sum();
    }
    mu /= total_order;
    const double pobj = c.dot(it.y);
    const double dobj = b.dot(it.lambda) - c0x;
    const double pinf = std::max(m ? req.norm() / (1.0 + b_norm) : 0.0, rp_cone / (1.0 + C0_norm));
    const double dinf = rd.norm() / (1.0 + c_norm2);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double compl_gap = mu * total_order / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (opts.verbose) {
      std::fprintf(stderr, "%3d pobj %+.10e dobj %+.10e pinf %.2e dinf %.2e gap %.2e mu %.2e |y| %.2e\n", iter,
                   pobj * report_scale + report_offset, dobj * report_scale + report_offset, pinf, dinf, gap, mu,
                   inf_norm(it.y));
    }

    const double merit = std::max({pinf, dinf, gap});
    if (merit < best_merit && std::isfinite(merit)) {
      best_merit = merit;
      best = it;
    }

    if (pinf <= opts.feasibility_tolerance && dinf <= opts.feasibility_tolerance && gap <= opts.gap_tolerance &&
        compl_gap <= 10 * opts.gap_tolerance) {
      status = SolveStatus::kOptimal;
      break;
    }

    // Certificates from diverging iterates.
    {
      const VectorXd dual_lin = c - rd;  // A' lambda + F*(X)
      if (dobj > 0.0 && dual_lin.norm() <= 1e-8 * dobj && pinf > 1e-6) {
        status = SolveStatus::kInfeasible;
        break;
      }
      const double pray = -pobj;
      if (pray > 0.0 && dinf > 1e-6) {
        const double ay = m ? (A * it.y).norm() : 0.0;
        double lmin = 0.0;
        for (int k = 0; k < nb; ++k) {
          const MatrixXd L = blocks[k].linear(it.y);
          lmin = std::min(lmin, Eigen::SelfAdjointEigenSolver<MatrixXd>(L, Eigen::EigenvaluesOnly).eigenvalues()(0));
        }
        if (ay <= 1e-8 * pray && -lmin <= 1e-8 * pray) {
          status = SolveStatus::kUnbounded;
          break;
        }
      }
    }
    if (iter == opts.max_iterations) break;

    bool ok = true;
    for (int k = 0; k < nb && ok; ++k)
      ok = cholesky(it.S[k], Ls[k]) && cholesky(it.X[k], Lx[k]) && nt_scaling(Ls[k], Lx[k], nt[k]);
    if (!ok) {
      status = SolveStatus::kNumericalFailure;
      out.message = "loss of positive definiteness in iterates";
      break;
    }

    // Schur complement M_ij = sum_k <C_ki, W_k C_kj W_k>.
    MatrixXd M = MatrixXd::Zero(n, n);
    for (int k = 0; k < nb; ++k) {
      const Block& blk = blocks[k];
      const MatrixXd& W = nt[k].W;
      if (blk.size == 1) {
        const double w2 = W(0, 0) * W(0, 0);
        VectorXd cs(blk.vars.size());
        for (std::size_t i = 0; i < blk.vars.size(); ++i) {
          cs(i) = 0.0;
          for (int e = blk.start[i]; e < blk.start[i + 1]; ++e) cs(i) += blk.coefs[e];
        }
        for (std::size_t i = 0; i < blk.vars.size(); ++i)
          for (std::size_t j = 0; j < blk.vars.size(); ++j) M(blk.vars[i], blk.vars[j]) += cs(i) * cs(j) * w2;
        continue;
      }
      MatrixXd P(blk.size, blk.size);
      for (std::size_t j = 0; j < blk.vars.size(); ++j) {
        const int e0 = blk.start[j];
        const int ne = blk.start[j + 1] - e0;
        std::vector<int> r(blk.rows.begin() + e0, blk.rows.begin() + e0 + ne);
        std::vector<int> cc(blk.cols.begin() + e0, blk.cols.begin() + e0 + ne);
        VectorXd coef(ne);
        for (int e = 0; e < ne; ++e) coef(e) = blk.coefs[e0 + e] * (r[e] == cc[e] ? 0.5 : 1.0);
        const MatrixXd Wr = W(Eigen::all, r) * coef.asDiagonal();
        P.noalias() = Wr * W(cc, Eigen::all);
        P += P.transpose().eval();
        for (std::size_t i = j; i < blk.vars.size(); ++i) {
          double acc = 0.0;
          for (int e = blk.start[i]; e < blk.start[i + 1]; ++e) {
            const double mult = blk.rows[e] == blk.cols[e] ? 1.0 : 2.0;
            acc += blk.coefs[e] * mult * P(blk.rows[e], blk.cols[e]);
          }
          M(blk.vars[i], blk.vars[j]) += acc;
          if (i != j) M(blk.vars[j], blk.vars[i]) += acc;
        }
      }
    }

    // Factor [M -A'; A 0] through M and the Schur complement A M^-1 A'.
    const double max_diag = std::max(M.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    Eigen::LLT<MatrixXd> llt_m;
    Eigen::LLT<MatrixXd> llt_k;
    MatrixXd MinvAt;
    double reg = opts.regularization;
    bool factored = false;
    for (int attempt = 0; attempt < 6 && !factored; ++attempt, reg *= 100.0) {
      MatrixXd Mr = M;
      for (int i = 0; i < n; ++i) Mr(i, i) += reg * std::abs(M(i, i)) + 1e-15 * max_diag;
      llt_m.compute(Mr);
      if (llt_m.info() != Eigen::Success) continue;
      if (m > 0) {
        MinvAt = llt_m.solve(A.transpose());
        MatrixXd K = A * MinvAt;
        K = 0.5 * (K + K.transpose());
        const double kd = std::max(K.diagonal().cwiseAbs().maxCoeff(), 1e-300);
        for (int i = 0; i < m; ++i) K(i, i) += reg * std::abs(K(i, i)) + 1e-15 * kd;
        llt_k.compute(K);
        if (llt_k.info() != Eigen::Success) continue;
      }
      factored = true;
    }
    if (!factored) {
      status = SolveStatus::kNumericalFailure;
      out.message = "Schur complement factorization failed";
      break;
    }

    auto solve_kkt = [&](const VectorXd& h, const VectorXd& r_eq, VectorXd& dy, VectorXd& dl) {
      const VectorXd u = llt_m.solve(h);
      if (m > 0) {
        dl = llt_k.solve(r_eq - A * u);
        dy = u + MinvAt * dl;
      } else {
        dl = VectorXd::Zero(0);
        dy = u;
      }
    };

    std::vector<MatrixXd> dX(nb), dS(nb);
    VectorXd dy, dl;
    // Newton direction for a scaled complementarity target. The refinement
    // measures the residual of the full step through the block operators,
    // not through M, so rounding in M does not leak into the dual residual.
    auto direction = [&](const std::vector<MatrixXd>& Rtilde) {
      VectorXd h = -rd;
      std::vector<MatrixXd> Rc(nb);
      for (int k = 0; k < nb; ++k) {
        Rc[k] = nt[k].G * Rtilde[k] * nt[k].G.transpose();
        const MatrixXd T = Rc[k] + nt[k].W * R[k] * nt[k].W;
        blocks[k].adjoint(0.5 * (T + T.transpose()), h);
      }
      auto finish = [&]() {
        for (int k = 0; k < nb; ++k) {
          dS[k] = blocks[k].linear(dy) - R[k];
          dX[k] = Rc[k] - nt[k].W * dS[k] * nt[k].W;
          dX[k] = 0.5 * (dX[k] + dX[k].transpose());
        }
      };
      solve_kkt(h, req, dy, dl);
      finish();
      for (int ref = 0; ref < 3; ++ref) {
        VectorXd e = rd - A.transpose() * dl;
        VectorXd adj = VectorXd::Zero(n);
        for (int k = 0; k < nb; ++k) blocks[k].adjoint(dX[k], adj);
        e -= adj;
        const VectorXd ep = req - A * dy;
        if (e.norm() + ep.norm() <= 1e-15 * (1.0 + rd.norm() + req.norm())) break;
        VectorXd cy, cl;
        solve_kkt(-e, ep, cy, cl);
        dy += cy;
        dl += cl;
        finish();
      }
    };
    auto steps = [&](double& ap, double& ad) {
      ap = std::numeric_limits<double>::infinity();
      ad = std::numeric_limits<double>::infinity();
      for (int k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(Ls[k], dS[k]));
        ad = std::min(ad, max_step(Lx[k], dX[k]));
      }
    };

    // Predictor.
    std::vector<MatrixXd> Rt(nb);
    for (int k = 0; k < nb; ++k) Rt[k] = -MatrixXd(nt[k].d.asDiagonal());
    direction(Rt);
    double ap = 0.0, ad = 0.0;
    steps(ap, ad);
    const double ap_aff = std::min(1.0, ap);
    const double ad_aff = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (int k = 0; k < nb; ++k)
      mu_aff += ((it.X[k] + ad_aff * dX[k]).cwiseProduct(it.S[k] + ap_aff * dS[k])).sum();
    mu_aff /= total_order;
    const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap_aff, ad_aff), 2));
    double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, expon), 0.0, 1.0);
    if (std::min(ap_aff, ad_aff) < 0.2) sigma = std::max(sigma, 0.5);

    // Corrector with the second-order term in the scaled space.
    for (int k = 0; k < nb; ++k) {
      const MatrixXd dXs = nt[k].Ginv * dX[k] * nt[k].Ginv.transpose();
      const MatrixXd dSs = nt[k].G.transpose() * dS[k] * nt[k].G;
      const MatrixXd cross = dXs * dSs + dSs * dXs;
      const VectorXd& d = nt[k].d;
      const int s = blocks[k].size;
      MatrixXd& T = Rt[k];
      for (int i = 0; i < s; ++i) {
        for (int j = 0; j < s; ++j) {
          const double rhs = (i == j ? 2.0 * (sigma * mu - d(i) * d(i)) : 0.0) - cross(i, j);
          T(i, j) = rhs / (d(i) + d(j));
        }
      }
    }
    direction(Rt);
    steps(ap, ad);
    const double gamma = 0.9 + 0.09 * std::min(ap_aff, ad_aff);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (opts.verbose) std::fprintf(stderr, "    sigma %.2e ap %.3f ad %.3f\n", sigma, ap, ad);
    if (!(ap > 1e-12) || !(ad > 1e-12) || !dy.allFinite()) {
      status = SolveStatus::kNumericalFailure;
      out.message = "step length collapsed";
      break;
    }

    it.y += ap * dy;
    it.lambda += ad * dl;
    for (int k = 0; k < nb; ++k) {
      it.S[k] += ap * dS[k];
      it.X[k] += ad * dX[k];
      it.S[k] = 0.5 * (it.S[k] + it.S[k].transpose());
      it.X[k] = 0.5 * (it.X[k] + it.X[k].transpose());
    }
    if (!it.y.allFinite() || inf_norm(it.y) > 1e14 || inf_norm(it.lambda) > 1e14) {
      status = SolveStatus::kNumericalFailure;
      out.message = "iterates diverged";
      break;
    }
  }

  const bool stalled = status == SolveStatus::kNumericalFailure || status == SolveStatus::kIterationLimit;
  if (stalled && best_merit <= opts.reduced_tolerance) {
    status = SolveStatus::kOptimal;
    out.message = "optimal to reduced accuracy";
  }
  out.status = status;
  out.iterations = iter;
  if (stalled) out.it = best;
  return out;
}

}  // namespace

ConicSolution InteriorPointBackend::solve(const ConicProgram& cp, const SolverOptions& opts) const {
  ConicSolution sol;
  const int n = static_cast<int>(cp.num_vars);
  if (n == 0) throw std::invalid_argument("conic program has no variables");
  if (cp.c.size() != n) throw std::invalid_argument("objective size mismatch");

  // ---- equality rows: scale, drop dependent rows, detect inconsistency
  const int m_all = static_cast<int>(cp.equalities.size());
  MatrixXd A_all = MatrixXd::Zero(m_all, n);
  VectorXd b_all(m_all);
  VectorXd row_scale = VectorXd::Ones(m_all);
  for (int r = 0; r < m_all; ++r) {
    for (const auto& [v, c] : cp.equalities[r].terms) {
      if (static_cast<int>(v) >= n) throw std::invalid_argument("equality references unknown variable");
      A_all(r, static_cast<int>(v)) += c;
    }
    b_all(r) = cp.equalities[r].rhs;
    const double mx = A_all.row(r).cwiseAbs().maxCoeff();
    if (mx > 0.0) row_scale(r) = 1.0 / mx;
    A_all.row(r) *= row_scale(r);
    b_all(r) *= row_scale(r);
  }

  sol.y = VectorXd::Zero(n);
  sol.eq_duals = VectorXd::Zero(m_all);
  sol.nonneg_duals = VectorXd::Zero(static_cast<int>(cp.nonneg.size()));
  for (const auto& pb : cp.blocks) sol.psd_duals.push_back(MatrixXd::Zero(pb.size, pb.size));

  std::vector<int> keep;
  if (m_all > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A_all.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    const auto& perm = qr.colsPermutation().indices();
    for (int k = 0; k < rank; ++k) keep.push_back(perm(k));
    std::sort(keep.begin(), keep.end());
    std::vector<bool> kept(m_all, false);
    for (int r : keep) kept[r] = true;
    MatrixXd As(static_cast<int>(keep.size()), n);
    VectorXd bs(static_cast<int>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      As.row(static_cast<int>(k)) = A_all.row(keep[k]);
      bs(static_cast<int>(k)) = b_all(keep[k]);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qs;
    if (!keep.empty()) qs.compute(As.transpose());
    for (int r = 0; r < m_all; ++r) {
      if (kept[r]) continue;
      double predicted = 0.0;
      if (!keep.empty()) predicted = qs.solve(A_all.row(r).transpose()).dot(bs);
      if (std::abs(b_all(r) - predicted) > 1e-8 * (1.0 + inf_norm(bs) + std::abs(b_all(r)))) {
        sol.status = SolveStatus::kInfeasible;
        sol.message = "inconsistent linear equality constraints";
        return sol;
      }
    }
  }

  // ---- cones: PSD blocks then 1x1 blocks for nonnegative rows
  std::vector<RawBlock> raw;
  for (const auto& pb : cp.blocks) {
    for (const auto& e : pb.entries) {
      if (e.row > e.col) throw std::invalid_argument("PSD entries must be in the upper triangle");
      if (e.row < 0 || e.col >= pb.size) throw std::invalid_argument("PSD entry out of range");
      if (e.var >= n) throw std::invalid_argument("PSD entry references unknown variable");
    }
    raw.push_back({pb.size, pb.entries});
  }
  for (const auto& row : cp.nonneg) {
    RawBlock rb{1, {{-1, 0, 0, row.constant}}};
    for (const auto& [v, c] : row.terms) rb.entries.push_back({static_cast<int>(v), 0, 0, c});
    raw.push_back(std::move(rb));
  }

  std::vector<Block> blocks;
  for (const auto& rb : raw) blocks.push_back(make_block(rb.size, rb.entries));

  const int m = static_cast<int>(keep.size());
  MatrixXd A(m, n);
  VectorXd b(m);
  for (int k = 0; k < m; ++k) {
    A.row(k) = A_all.row(keep[k]);
    b(k) = b_all(keep[k]);
  }
  const double c_norm = std::max(1.0, cp.c.cwiseAbs().maxCoeff());
  const VectorXd c = cp.c / c_norm;
  const IpmResult r = run_ipm(A, b, c, blocks, opts, c_norm, cp.offset);

  sol.status = r.status;
  sol.iterations = r.iterations;
  sol.message = r.message.empty() ? to_string(r.status) : r.message;
  sol.y = r.it.y;
  for (int k = 0; k < m; ++k) sol.eq_duals(keep[k]) = r.it.lambda(k) * row_scale(keep[k]) * c_norm;
  const int npsd = static_cast<int>(cp.blocks.size());
  for (int k = 0; k < static_cast<int>(raw.size()); ++k) {
    if (k < npsd)
      sol.psd_duals[k] = r.it.X[k] * c_norm;
    else
      sol.nonneg_duals(k - npsd) = r.it.X[k](0, 0) * c_norm;
  }

  // Objectives and residuals in the original data.
  sol.objective_value = cp.c.dot(sol.y) + cp.offset;
  double dual = sol.eq_duals.dot(VectorXd::Map(b_all.data(), m_all).cwiseQuotient(row_scale));
  VectorXd rdual = cp.c;
  for (int rr = 0; rr < m_all; ++rr)
    for (const auto& [v, cf] : cp.equalities[rr].terms) rdual(static_cast<int>(v)) -= cf * sol.eq_duals(rr);
  double C0_norm = 0.0;
  double pr = 0.0;
  {
    VectorXd Ay = VectorXd::Zero(m_all);
    VectorXd ball(m_all);
    for (int rr = 0; rr < m_all; ++rr) {
      for (const auto& [v, cf] : cp.equalities[rr].terms) Ay(rr) += cf * sol.y(static_cast<int>(v));
      ball(rr) = cp.equalities[rr].rhs;
    }
    if (m_all) pr = (Ay - ball).norm() / (1.0 + ball.norm());
  }
  for (std::size_t rb = 0; rb < raw.size(); ++rb) {
    const int k = static_cast<int>(rb);
    const MatrixXd X = k < npsd ? sol.psd_duals[k] : MatrixXd::Constant(1, 1, sol.nonneg_duals(k - npsd));
    const MatrixXd C0 = raw[rb].evaluate(VectorXd::Zero(n));
    C0_norm = std::max(C0_norm, C0.norm());
    dual -= (C0.cwiseProduct(X)).sum();
    for (const auto& e : raw[rb].entries) {
      if (e.var < 0) continue;
      rdual(e.var) -= e.coef * (e.row == e.col ? X(e.row, e.col) : 2.0 * X(e.row, e.col));
    }
  }
  for (std::size_t rb = 0; rb < raw.size(); ++rb) {
    const MatrixXd F = raw[rb].evaluate(sol.y);
    const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(F, Eigen::EigenvaluesOnly).eigenvalues()(0);
    pr = std::max(pr, std::max(0.0, -lmin) / (1.0 + C0_norm));
  }
  sol.dual_objective = dual + cp.offset;
  sol.residuals.primal = pr;
  sol.residuals.dual = rdual.norm() / (1.0 + cp.c.norm());
  sol.residuals.gap = std::abs(sol.objective_value - sol.dual_objective) /
                      (1.0 + std::abs(sol.objective_value) + std::abs(sol.dual_objective));
  return sol;
}

ConicSolution solve_conic(const ConicProgram& cp, const SolverOptions& opts) {
  return InteriorPointBackend().solve(cp, opts);
}

std::vector<MeasureMoments> extract_moment_matrices(const ConicSolution& sol, const ConicProgram& cp,
                                                    bool require_optimal) {
  if (require_optimal && sol.status != SolveStatus::kOptimal)
    throw std::logic_error("moment matrices requested from a non-optimal solution");
  std::vector<MeasureMoments> out;
  for (const auto& mu : cp.measures) {
    MeasureMoments mm;
    mm.id = mu.id;
    mm.known = mu.known();
    const std::size_t nvars = mu.known() ? (mu.vars.empty() ? 0 : *std::max_element(mu.vars.begin(), mu.vars.end()) + 1)
                                         : mu.unknown_basis.nvars();
    mm.basis = basis(std::max(nvars, mu.unknown_basis.nvars()), mu.vars, mu.degree);
    mm.moments.resize(mm.basis.size());
    for (std::size_t i = 0; i < mm.basis.size(); ++i) {
      const Monomial& m = mm.basis[i];
      if (mu.id == MeasureId::kTrajectory) {
        mm.moments[i] = sol.y(static_cast<Eigen::Index>(mu.offset + mu.unknown_basis.index(m)));
        continue;
      }
      double v = known_moment(mu.known_factors, m);
      if (!mu.known()) {
        Monomial free_part(m.size());
        for (auto u : mu.unknown_vars) free_part[u] = m[u];
        v *= sol.y(static_cast<Eigen::Index>(mu.offset + mu.unknown_basis.index(free_part)));
      }
      mm.moments[i] = v;
    }
    mm.matrix = moment_matrix(mm.basis, mm.moments, mu.degree / 2);
    out.push_back(std::move(mm));
  }
  return out;
}

}  // namespace occmom
