#include "reachsos/sdp_solver.h"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <Eigen/Sparse>

namespace reachsos {

std::string to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kFeasible: return "feasible";
    case SdpStatus::kInfeasible: return "infeasible";
    case SdpStatus::kNumericalFailure: return "numerical_failure";
    case SdpStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

double SdpSolution::value(const VarRef& v) const {
  if (v.is_scalar()) return scalars.at(v.row);
  return blocks.at(v.block)(v.row, v.col);
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Entry {
  int r;
  int c;
  double a;  // multiplies X_rc of a symmetric X
};

// Rows of A restricted to one PSD block.
struct BlockRows {
  int n = 0;
  std::vector<int> cons;
  std::vector<std::vector<Entry>> entries;
  std::vector<std::vector<int>> support;
  std::vector<MatrixXd> dense;
};

struct Cones {
  std::vector<MatrixXd> psd;
  VectorXd lp;
};

double dot(const Cones& a, const Cones& b) {
  double s = a.lp.dot(b.lp);
  for (std::size_t k = 0; k < a.psd.size(); ++k) {
    s += a.psd[k].cwiseProduct(b.psd[k]).sum();
  }
  return s;
}

double norm(const Cones& a) { return std::sqrt(dot(a, a)); }

// Largest α ≤ ∞ keeping L Lᵀ + α D positive semidefinite.
double max_step_psd(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& d) {
  const auto L = llt.matrixL();
  MatrixXd y = L.solve(d);
  MatrixXd z = L.solve(y.transpose());
  z = 0.5 * (z + z.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(z, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : kInf;
}

double max_step_lp(const VectorXd& x, const VectorXd& dx) {
  double alpha = kInf;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) alpha = std::min(alpha, -x(i) / dx(i));
  }
  return alpha;
}

class InteriorPoint {
 public:
  InteriorPoint(const ConicForm& conic, const SdpOptions& opts)
      : conic_(conic), opts_(opts) {
    m_ = conic.num_rows();
    nb_ = static_cast<int>(conic.psd_dims.size());
    nlp_ = conic.lp_dim;
    setup();
  }

  SdpSolution run();

 private:
  void setup();
  VectorXd apply_a(const Cones& x) const;
  void add_at(const VectorXd& y, Cones* out, double sign) const;
  void fill_schur();
  bool build_schur();
  void nt_scaling();
  void solve_direction(const Cones& rc, Cones* dx, Cones* ds, VectorXd* dy);
  double primal_step(const Cones& dx) const;
  double dual_step(const Cones& ds) const;
  SdpSolution finish(SdpStatus status, std::string message);

  const ConicForm& conic_;
  SdpOptions opts_;
  int m_ = 0;
  int nb_ = 0;
  int nlp_ = 0;
  double nu_ = 0.0;

  std::vector<BlockRows> blocks_;
  SpMat alp_;
  Cones c_;
  VectorXd b_;
  VectorXd row_scale_;
  double bscale_ = 1.0;
  double cscale_ = 1.0;
  double bnorm_ = 0.0;
  double cnorm_ = 0.0;

  Cones x_, s_;
  VectorXd y_;
  std::optional<SdpIterate> reported_;

  const SdpIterate& reported() const {
    return reported_ ? *reported_ : history_.back();
  }
  VectorXd rp_;
  Cones rd_;

  std::vector<Eigen::LLT<MatrixXd>> xchol_, schol_;
  std::vector<MatrixXd> g_, ginv_, w_;
  std::vector<VectorXd> lambda_;
  VectorXd dlp_;
  Cones wrdw_;
  MatrixXd schur_;
  // Factored in place; the Schur matrix is the largest allocation.
  std::optional<Eigen::LLT<Eigen::Ref<MatrixXd>>> schur_llt_;

  std::vector<SdpIterate> history_;
  int iterations_ = 0;
};

void InteriorPoint::setup() {
  row_scale_ = VectorXd::Ones(m_);
  for (int i = 0; i < m_; ++i) {
    double sq = 0.0;
    for (const ConicEntry& e : conic_.rows[i]) {
      sq += (e.block < nb_ && e.row != e.col) ? 0.5 * e.value * e.value
                                              : e.value * e.value;
    }
    row_scale_(i) = sq > 0.0 ? 1.0 / std::sqrt(sq) : 1.0;
  }

  blocks_.resize(nb_);
  for (int k = 0; k < nb_; ++k) blocks_[k].n = conic_.psd_dims[k];
  std::vector<Eigen::Triplet<double>> lp_trip;
  for (int i = 0; i < m_; ++i) {
    for (const ConicEntry& e : conic_.rows[i]) {
      const double a = e.value * row_scale_(i);
      if (e.block == nb_) {
        lp_trip.emplace_back(i, e.row, a);
        continue;
      }
      BlockRows& br = blocks_[e.block];
      if (br.cons.empty() || br.cons.back() != i) {
        br.cons.push_back(i);
        br.entries.emplace_back();
      }
      br.entries.back().push_back({e.row, e.col, a});
    }
  }
  alp_.resize(m_, nlp_);
  alp_.setFromTriplets(lp_trip.begin(), lp_trip.end());
  alp_.makeCompressed();

  for (BlockRows& br : blocks_) {
    for (const auto& ents : br.entries) {
      std::vector<int> idx;
      for (const Entry& e : ents) {
        idx.push_back(e.r);
        idx.push_back(e.c);
      }
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      MatrixXd d = MatrixXd::Zero(idx.size(), idx.size());
      for (const Entry& e : ents) {
        const auto p = std::lower_bound(idx.begin(), idx.end(), e.r) - idx.begin();
        const auto q = std::lower_bound(idx.begin(), idx.end(), e.c) - idx.begin();
        if (p == q) {
          d(p, p) += e.a;
        } else {
          d(p, q) += 0.5 * e.a;
          d(q, p) += 0.5 * e.a;
        }
      }
      br.support.push_back(std::move(idx));
      br.dense.push_back(std::move(d));
    }
  }

  b_.resize(m_);
  for (int i = 0; i < m_; ++i) b_(i) = conic_.b[i] * row_scale_(i);
  c_.psd.resize(nb_);
  for (int k = 0; k < nb_; ++k) {
    c_.psd[k] = MatrixXd::Zero(blocks_[k].n, blocks_[k].n);
  }
  c_.lp = VectorXd::Zero(nlp_);
  for (const ConicEntry& e : conic_.c) {
    if (e.block == nb_) {
      c_.lp(e.row) += e.value;
    } else if (e.row == e.col) {
      c_.psd[e.block](e.row, e.row) += e.value;
    } else {
      c_.psd[e.block](e.row, e.col) += 0.5 * e.value;
      c_.psd[e.block](e.col, e.row) += 0.5 * e.value;
    }
  }
  bscale_ = std::max(1.0, b_.norm());
  cscale_ = std::max(1.0, norm(c_));
  b_ /= bscale_;
  for (auto& cb : c_.psd) cb /= cscale_;
  c_.lp /= cscale_;
  bnorm_ = b_.norm();
  cnorm_ = norm(c_);

  nu_ = nlp_;
  for (int d : conic_.psd_dims) nu_ += d;

  // Infeasible starting point scaled to the data.
  x_.psd.resize(nb_);
  s_.psd.resize(nb_);
  for (int k = 0; k < nb_; ++k) {
    const BlockRows& br = blocks_[k];
    const double n = br.n;
    double ratio = 0.0, anorm = 0.0;
    for (std::size_t j = 0; j < br.cons.size(); ++j) {
      const double an = br.dense[j].norm();
      ratio = std::max(ratio, (1.0 + std::abs(b_(br.cons[j]))) / (1.0 + an));
      anorm = std::max(anorm, an);
    }
    const double xi = std::max({10.0, std::sqrt(n), std::sqrt(n) * ratio});
    const double eta = std::max({10.0, std::sqrt(n), anorm, c_.psd[k].norm()});
    x_.psd[k] = xi * MatrixXd::Identity(br.n, br.n);
    s_.psd[k] = eta * MatrixXd::Identity(br.n, br.n);
  }
  {
    double ratio = 0.0, anorm = 0.0;
    for (int col = 0; col < nlp_; ++col) {
      for (SpMat::InnerIterator it(alp_, col); it; ++it) {
        const double an = std::abs(it.value());
        ratio = std::max(ratio, (1.0 + std::abs(b_(it.row()))) / (1.0 + an));
        anorm = std::max(anorm, an);
      }
    }
    const double n = std::max(1, nlp_);
    const double xi = std::max({10.0, std::sqrt(n), std::sqrt(n) * ratio});
    const double eta = std::max({10.0, std::sqrt(n), anorm, c_.lp.norm()});
    x_.lp = VectorXd::Constant(nlp_, xi);
    s_.lp = VectorXd::Constant(nlp_, eta);
  }
  y_ = VectorXd::Zero(m_);
}

VectorXd InteriorPoint::apply_a(const Cones& x) const {
  VectorXd out = alp_ * x.lp;
  for (int k = 0; k < nb_; ++k) {
    const BlockRows& br = blocks_[k];
    const MatrixXd& xk = x.psd[k];
    for (std::size_t j = 0; j < br.cons.size(); ++j) {
      double s = 0.0;
      for (const Entry& e : br.entries[j]) s += e.a * xk(e.r, e.c);
      out(br.cons[j]) += s;
    }
  }
  return out;
}

void InteriorPoint::add_at(const VectorXd& y, Cones* out, double sign) const {
  out->lp += sign * (alp_.transpose() * y);
  for (int k = 0; k < nb_; ++k) {
    const BlockRows& br = blocks_[k];
    MatrixXd& z = out->psd[k];
    for (std::size_t j = 0; j < br.cons.size(); ++j) {
      const double yj = sign * y(br.cons[j]);
      if (yj == 0.0) continue;
      for (const Entry& e : br.entries[j]) {
        if (e.r == e.c) {
          z(e.r, e.r) += yj * e.a;
        } else {
          z(e.r, e.c) += 0.5 * yj * e.a;
          z(e.c, e.r) += 0.5 * yj * e.a;
        }
      }
    }
  }
}

void InteriorPoint::nt_scaling() {
  g_.resize(nb_);
  ginv_.resize(nb_);
  w_.resize(nb_);
  lambda_.resize(nb_);
  for (int k = 0; k < nb_; ++k) {
    const MatrixXd L = xchol_[k].matrixL();
    const MatrixXd R = schol_[k].matrixL();
    Eigen::BDCSVD<MatrixXd> svd(R.transpose() * L,
                                Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd sv = svd.singularValues();
    const MatrixXd& V = svd.matrixV();
    const VectorXd isq = sv.cwiseSqrt().cwiseInverse();
    g_[k] = L * V * isq.asDiagonal();
    const MatrixXd linvt_v =
        L.transpose().triangularView<Eigen::Upper>().solve(V);
    ginv_[k] = sv.cwiseSqrt().asDiagonal() * linvt_v.transpose();
    w_[k] = g_[k] * g_[k].transpose();
    lambda_[k] = sv;
  }
  dlp_ = x_.lp.cwiseQuotient(s_.lp);
}

void InteriorPoint::fill_schur() {
  schur_.setZero(m_, m_);
  for (int k = 0; k < nb_; ++k) {
    const BlockRows& br = blocks_[k];
    const MatrixXd& W = w_[k];
    const int nc = static_cast<int>(br.cons.size());
    MatrixXd wsub, t;
    for (int jj = 0; jj < nc; ++jj) {
      const std::vector<int>& idx = br.support[jj];
      wsub.resize(br.n, idx.size());
      for (std::size_t q = 0; q < idx.size(); ++q) wsub.col(q) = W.col(idx[q]);
      t.noalias() = wsub * br.dense[jj] * wsub.transpose();
      const int j = br.cons[jj];
      for (int ii = jj; ii < nc; ++ii) {
        double s = 0.0;
        for (const Entry& e : br.entries[ii]) s += e.a * t(e.r, e.c);
        schur_(br.cons[ii], j) += s;
      }
    }
  }
  for (int col = 0; col < nlp_; ++col) {
    const double d = dlp_(col);
    for (SpMat::InnerIterator it(alp_, col); it; ++it) {
      for (SpMat::InnerIterator jt(alp_, col); jt && jt.row() <= it.row();
           ++jt) {
        schur_(it.row(), jt.row()) += d * it.value() * jt.value();
      }
    }
  }
}

bool InteriorPoint::build_schur() {
  fill_schur();
  if (m_ == 0) return true;
  const double scale = std::max(1e-300, schur_.diagonal().cwiseAbs().maxCoeff());
  schur_llt_.emplace(schur_);
  if (schur_llt_->info() == Eigen::Success) return true;
  for (double shift = 1e-14; shift <= 1e-6; shift *= 10.0) {
    fill_schur();
    schur_.diagonal().array() += shift * scale;
    schur_llt_.emplace(schur_);
    if (schur_llt_->info() == Eigen::Success) return true;
  }
  return false;
}

void InteriorPoint::solve_direction(const Cones& rc, Cones* dx, Cones* ds,
                                    VectorXd* dy) {
  Cones tmp;
  tmp.psd.resize(nb_);
  for (int k = 0; k < nb_; ++k) tmp.psd[k] = rc.psd[k] - wrdw_.psd[k];
  tmp.lp = rc.lp - wrdw_.lp;
  const VectorXd h = rp_ - apply_a(tmp);
  *dy = m_ > 0 ? VectorXd(schur_llt_->solve(h)) : VectorXd();
  *ds = rd_;
  add_at(*dy, ds, -1.0);
  dx->psd.resize(nb_);
  for (int k = 0; k < nb_; ++k) {
    MatrixXd v = rc.psd[k] - w_[k] * ds->psd[k] * w_[k];
    dx->psd[k] = 0.5 * (v + v.transpose());
    ds->psd[k] = 0.5 * (ds->psd[k] + ds->psd[k].transpose()).eval();
  }
  dx->lp = rc.lp - dlp_.cwiseProduct(ds->lp);
}

double InteriorPoint::primal_step(const Cones& dx) const {
  double a = max_step_lp(x_.lp, dx.lp);
  for (int k = 0; k < nb_; ++k) a = std::min(a, max_step_psd(xchol_[k], dx.psd[k]));
  return a;
}

double InteriorPoint::dual_step(const Cones& ds) const {
  double a = max_step_lp(s_.lp, ds.lp);
  for (int k = 0; k < nb_; ++k) a = std::min(a, max_step_psd(schol_[k], ds.psd[k]));
  return a;
}

SdpSolution InteriorPoint::run() {
  SdpStatus status = SdpStatus::kIterationLimit;
  std::string message = "iteration limit reached";
  int stalls = 0;
  // Best iterate so far by max(rp, rd, gap), restored if the run degrades.
  struct Snapshot {
    Cones x, s;
    VectorXd y;
    SdpIterate rec;
    double merit = std::numeric_limits<double>::infinity();
  } best;
  for (int iter = 0;; ++iter) {
    iterations_ = iter;
    rp_ = b_ - apply_a(x_);
    rd_ = c_;
    for (int k = 0; k < nb_; ++k) rd_.psd[k] -= s_.psd[k];
    rd_.lp -= s_.lp;
    add_at(y_, &rd_, -1.0);

    SdpIterate rec;
    rec.iteration = iter;
    rec.primal_objective = dot(c_, x_) * bscale_ * cscale_;
    rec.dual_objective = b_.dot(y_) * bscale_ * cscale_;
    rec.complementarity = dot(x_, s_) * bscale_ * cscale_;
    rec.primal_residual = rp_.norm() / (1.0 + bnorm_);
    rec.dual_residual = norm(rd_) / (1.0 + cnorm_);
    const double pobj = dot(c_, x_), dobj = b_.dot(y_);
    rec.relative_gap =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double mu = dot(x_, s_) / std::max(1.0, nu_);

    if (opts_.verbose) {
      std::fprintf(stderr, "%3d  p %+.8e  d %+.8e  rp %.2e  rd %.2e  gap %.2e\n",
                   iter, rec.primal_objective, rec.dual_objective,
                   rec.primal_residual, rec.dual_residual, rec.relative_gap);
    }
    if (!std::isfinite(rec.primal_residual) || !std::isfinite(rec.dual_residual) ||
        !std::isfinite(mu)) {
      history_.push_back(rec);
      status = SdpStatus::kNumericalFailure;
      message = "non-finite iterate";
      break;
    }
    const double merit = std::max(
        {rec.primal_residual, rec.dual_residual, rec.relative_gap});
    if (merit < best.merit) best = {x_, s_, y_, rec, merit};
    if (rec.primal_residual <= opts_.feasibility_tol &&
        rec.dual_residual <= opts_.feasibility_tol &&
        rec.relative_gap <= opts_.gap_tol) {
      history_.push_back(rec);
      status = SdpStatus::kOptimal;
      message = "converged";
      break;
    }
    if (dobj > 0.0) {
      Cones ray = s_;
      add_at(y_, &ray, 1.0);
      if (norm(ray) / dobj <= opts_.infeasibility_tol) {
        history_.push_back(rec);
        status = SdpStatus::kInfeasible;
        message = "primal infeasible; dual improving ray found";
        break;
      }
    }
    if (iter >= opts_.max_iterations) {
      history_.push_back(rec);
      break;
    }

    xchol_.assign(nb_, {});
    schol_.assign(nb_, {});
    bool chol_ok = true;
    for (int k = 0; k < nb_ && chol_ok; ++k) {
      xchol_[k].compute(x_.psd[k]);
      schol_[k].compute(s_.psd[k]);
      chol_ok = xchol_[k].info() == Eigen::Success &&
                schol_[k].info() == Eigen::Success;
    }
    if (!chol_ok) {
      history_.push_back(rec);
      status = SdpStatus::kNumericalFailure;
      message = "iterate left the cone";
      break;
    }
    nt_scaling();
    if (!build_schur()) {
      history_.push_back(rec);
      status = SdpStatus::kNumericalFailure;
      message = "singular Newton system";
      break;
    }
    wrdw_.psd.resize(nb_);
    for (int k = 0; k < nb_; ++k) wrdw_.psd[k] = w_[k] * rd_.psd[k] * w_[k];
    wrdw_.lp = dlp_.cwiseProduct(rd_.lp);

    // Predictor.
    Cones rc;
    rc.psd.resize(nb_);
    for (int k = 0; k < nb_; ++k) rc.psd[k] = -x_.psd[k];
    rc.lp = -x_.lp;
    Cones dxa, dsa;
    VectorXd dya;
    solve_direction(rc, &dxa, &dsa, &dya);
    const double ap_aff = std::min(1.0, primal_step(dxa));
    const double ad_aff = std::min(1.0, dual_step(dsa));
    double mu_aff = 0.0;
    {
      Cones xa = x_, sa = s_;
      for (int k = 0; k < nb_; ++k) {
        xa.psd[k] += ap_aff * dxa.psd[k];
        sa.psd[k] += ad_aff * dsa.psd[k];
      }
      xa.lp += ap_aff * dxa.lp;
      sa.lp += ad_aff * dsa.lp;
      mu_aff = dot(xa, sa) / std::max(1.0, nu_);
    }
    const double sigma =
        std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector.
    for (int k = 0; k < nb_; ++k) {
      const MatrixXd dxh = ginv_[k] * dxa.psd[k] * ginv_[k].transpose();
      const MatrixXd dsh = g_[k].transpose() * dsa.psd[k] * g_[k];
      MatrixXd r = -0.5 * (dxh * dsh + dsh * dxh);
      const VectorXd& lam = lambda_[k];
      r.diagonal().array() += sigma * mu - lam.array().square();
      for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.cols(); ++j) {
          r(i, j) *= 2.0 / (lam(i) + lam(j));
        }
      }
      rc.psd[k] = g_[k] * r * g_[k].transpose();
    }
    rc.lp = ((sigma * mu - x_.lp.array() * s_.lp.array() -
              dxa.lp.array() * dsa.lp.array()) /
             s_.lp.array())
                .matrix();
    Cones dx, ds;
    VectorXd dy;
    solve_direction(rc, &dx, &ds, &dy);
    const double ap = std::min(1.0, opts_.step_fraction * primal_step(dx));
    const double ad = std::min(1.0, opts_.step_fraction * dual_step(ds));
    rec.primal_step = ap;
    rec.dual_step = ad;
    rec.sigma = sigma;
    history_.push_back(rec);

    if (!std::isfinite(ap) || !std::isfinite(ad)) {
      status = SdpStatus::kNumericalFailure;
      message = "non-finite step";
      break;
    }
    for (int k = 0; k < nb_; ++k) {
      x_.psd[k] += ap * dx.psd[k];
      s_.psd[k] += ad * ds.psd[k];
    }
    x_.lp += ap * dx.lp;
    s_.lp += ad * ds.lp;
    if (m_ > 0) y_ += ad * dy;

    stalls = std::max(ap, ad) < 1e-8 ? stalls + 1 : 0;
    if (stalls >= 3) {
      status = SdpStatus::kNumericalFailure;
      message = "step length stalled";
      iterations_ = iter + 1;
      // Re-evaluate residuals for the report.
      rp_ = b_ - apply_a(x_);
      break;
    }
  }
  reported_.reset();
  if (status != SdpStatus::kOptimal && status != SdpStatus::kInfeasible &&
      !history_.empty()) {
    const SdpIterate& last = history_.back();
    const double last_merit = std::max(
        {last.primal_residual, last.dual_residual, last.relative_gap});
    if (best.merit < last_merit) {
      x_ = std::move(best.x);
      s_ = std::move(best.s);
      y_ = std::move(best.y);
      reported_ = best.rec;
      message += "; returning iterate " + std::to_string(best.rec.iteration);
    }
    if (reported().primal_residual <= opts_.loose_feasibility_tol) {
      message = "primal feasible (" + message + ")";
      status = SdpStatus::kFeasible;
    }
  }
  return finish(status, message);
}

SdpSolution InteriorPoint::finish(SdpStatus status, std::string message) {
  SdpSolution sol;
  sol.status = status;
  sol.message = std::move(message);
  sol.iterations = iterations_;
  sol.history = history_;
  if (!history_.empty()) {
    sol.primal_residual = reported().primal_residual;
    sol.dual_residual = reported().dual_residual;
    sol.relative_gap = reported().relative_gap;
  }
  std::vector<MatrixXd> xb(nb_);
  for (int k = 0; k < nb_; ++k) xb[k] = x_.psd[k] * bscale_;
  const VectorXd xlp = x_.lp * bscale_;
  const VectorXd y = (y_.array() * row_scale_.array()).matrix() * cscale_;

  sol.objective = conic_.objective_offset - dot(c_, x_) * bscale_ * cscale_;
  sol.dual_bound = conic_.objective_offset - b_.dot(y_) * bscale_ * cscale_;

  sol.blocks = std::move(xb);
  for (const ScalarMap& m : conic_.scalar_maps) {
    double v = m.offset;
    if (m.plus >= 0) v += xlp(m.plus);
    if (m.minus >= 0) v -= xlp(m.minus);
    sol.scalars.push_back(v);
  }
  int src_count = 0;
  for (int r : conic_.source_row) src_count = std::max(src_count, r + 1);
  sol.duals.assign(src_count, 0.0);
  for (int i = 0; i < m_; ++i) {
    if (conic_.source_row[i] >= 0) sol.duals[conic_.source_row[i]] = y(i);
  }
  if (status == SdpStatus::kInfeasible) {
    VectorXd ray = (y_.array() * row_scale_.array()).matrix();
    const double by = VectorXd::Map(conic_.b.data(), m_).dot(ray);
    sol.infeasibility_ray = ray / by;
  }
  return sol;
}

}  // namespace

double infeasibility_ray_violation(const ConicForm& conic,
                                   const Eigen::VectorXd& y) {
  const int nb = static_cast<int>(conic.psd_dims.size());
  std::vector<MatrixXd> z(nb);
  for (int k = 0; k < nb; ++k) {
    z[k] = MatrixXd::Zero(conic.psd_dims[k], conic.psd_dims[k]);
  }
  VectorXd zlp = VectorXd::Zero(conic.lp_dim);
  double by = 0.0;
  for (int i = 0; i < conic.num_rows(); ++i) {
    by += conic.b[i] * y(i);
    for (const ConicEntry& e : conic.rows[i]) {
      if (e.block == nb) {
        zlp(e.row) += y(i) * e.value;
      } else if (e.row == e.col) {
        z[e.block](e.row, e.row) += y(i) * e.value;
      } else {
        z[e.block](e.row, e.col) += 0.5 * y(i) * e.value;
        z[e.block](e.col, e.row) += 0.5 * y(i) * e.value;
      }
    }
  }
  double worst = std::abs(by - 1.0);
  for (const MatrixXd& zk : z) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(zk, Eigen::EigenvaluesOnly);
    worst = std::max(worst, eig.eigenvalues().maxCoeff());
  }
  if (zlp.size() > 0) worst = std::max(worst, zlp.maxCoeff());
  return worst;
}

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options) {
  const ConicForm conic = to_conic(problem);
  if (conic.contradictory_row >= 0) {
    SdpSolution sol;
    sol.status = SdpStatus::kInfeasible;
    sol.message = "equality " + std::to_string(conic.contradictory_row) +
                  " has no variables but a nonzero right-hand side";
    return sol;
  }
  if (conic.psd_dims.empty() && conic.lp_dim == 0) {
    SdpSolution sol;
    sol.status = SdpStatus::kOptimal;
    sol.message = "empty problem";
    sol.objective = sol.dual_bound = conic.objective_offset;
    for (const ScalarMap& m : conic.scalar_maps) sol.scalars.push_back(m.offset);
    sol.duals.assign(problem.equalities.size(), 0.0);
    return sol;
  }
  const double schur_bytes = 8.0 * conic.num_rows() * conic.num_rows();
  const double memory = static_cast<double>(sysconf(_SC_PHYS_PAGES)) *
                        static_cast<double>(sysconf(_SC_PAGE_SIZE));
  if (memory > 0.0 && schur_bytes > memory) {
    SdpSolution sol;
    sol.status = SdpStatus::kNumericalFailure;
    std::ostringstream os;
    os.precision(3);
    os << "dense Newton system for " << conic.num_rows() << " equalities needs "
       << schur_bytes / 1e9 << " GB, more than the " << memory / 1e9
       << " GB of physical memory";
    sol.message = os.str();
    return sol;
  }
  InteriorPoint ipm(conic, options);
  return ipm.run();
}

SdpSolution read_sdpa_solution(const SdpProblem& problem,
                               const ConicForm& conic, std::istream& in) {
  SdpSolution sol;
  const int nb = static_cast<int>(conic.psd_dims.size());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty solution file");
  std::istringstream yline(line);
  VectorXd y(conic.num_rows());
  for (int i = 0; i < conic.num_rows(); ++i) {
    if (!(yline >> y(i))) throw std::runtime_error("short dual vector");
  }
  std::vector<MatrixXd> x(nb);
  for (int k = 0; k < nb; ++k) {
    x[k] = MatrixXd::Zero(conic.psd_dims[k], conic.psd_dims[k]);
  }
  VectorXd xlp = VectorXd::Zero(conic.lp_dim);
  int mat, blk, i, j;
  double v;
  while (in >> mat >> blk >> i >> j >> v) {
    if (mat != 2) continue;
    --blk, --i, --j;
    if (blk == nb) {
      xlp(i) = v;
    } else if (blk >= 0 && blk < nb) {
      x[blk](i, j) = v;
      x[blk](j, i) = v;
    }
  }
  for (const ScalarMap& m : conic.scalar_maps) {
    double s = m.offset;
    if (m.plus >= 0) s += xlp(m.plus);
    if (m.minus >= 0) s -= xlp(m.minus);
    sol.scalars.push_back(s);
  }
  double cx = 0.0;
  for (const ConicEntry& e : conic.c) {
    cx += e.value * (e.block == nb ? xlp(e.row) : x[e.block](e.row, e.col));
  }
  double rp = 0.0, bn = 0.0;
  for (int r = 0; r < conic.num_rows(); ++r) {
    double ax = 0.0;
    for (const ConicEntry& e : conic.rows[r]) {
      ax += e.value * (e.block == nb ? xlp(e.row) : x[e.block](e.row, e.col));
    }
    rp += (ax - conic.b[r]) * (ax - conic.b[r]);
    bn += conic.b[r] * conic.b[r];
  }
  sol.primal_residual = std::sqrt(rp) / (1.0 + std::sqrt(bn));
  sol.objective = conic.objective_offset - cx;
  sol.dual_bound = conic.objective_offset -
                   VectorXd::Map(conic.b.data(), conic.num_rows()).dot(y);
  sol.duals.assign(problem.equalities.size(), 0.0);
  for (int r = 0; r < conic.num_rows(); ++r) {
    if (conic.source_row[r] >= 0) sol.duals[conic.source_row[r]] = y(r);
  }
  sol.blocks = std::move(x);
  sol.status = sol.primal_residual <= 1e-6 ? SdpStatus::kFeasible
                                           : SdpStatus::kNumericalFailure;
  sol.message = "read from external solution file";
  return sol;
}

}  // namespace reachsos
