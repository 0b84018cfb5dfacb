#include "cccm/optim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "cccm/error.h"

namespace cccm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dims(const QpProblem& p) {
  const int n = p.num_vars();
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidDim, "QP: " + what);
  };
  if (n == 0) bad("no variables");
  if (p.h.rows() != n || p.h.cols() != n) bad("H must be n x n");
  if (p.a_eq.rows() != p.num_eq() || (p.num_eq() > 0 && p.a_eq.cols() != n)) {
    bad("A_eq dimensions");
  }
  if (p.a_in.rows() != p.num_in() || (p.num_in() > 0 && p.a_in.cols() != n)) {
    bad("A_in dimensions");
  }
  if (n > kQpMaxProblemSize || p.num_eq() + p.num_in() > kQpMaxProblemSize) {
    bad("problem exceeds the dense small-problem bounds");
  }
  if ((p.h - p.h.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    bad("H is not symmetric");
  }
}

// One Goldfarb-Idnani solve for a positive definite Hessian.
struct DualActiveSet {
  const MatX& h;
  const VecX& c;
  const QpProblem& prob;

  VecX x;
  VecX lambda_eq;
  VecX lambda_in;
  QpStatus status = QpStatus::kMaxIter;
  int iterations = 0;

  struct Active {
    int index;    // into the stacked constraint list
    double sign;  // -1 when an equality was flipped to be "violated"
    double u;     // multiplier of the signed constraint
  };

  int m_eq() const { return prob.num_eq(); }

  VecX normal(int i) const {
    return i < m_eq() ? VecX(prob.a_eq.row(i).transpose())
                      : VecX(prob.a_in.row(i - m_eq()).transpose());
  }
  double rhs(int i) const {
    return i < m_eq() ? prob.b_eq[i] : prob.b_in[i - m_eq()];
  }
  bool is_eq(int i) const { return i < m_eq(); }

  // Returns false on detected infeasibility.
  bool add_constraint(int p, double sign, std::vector<Active>& active,
                      const MatX& h_inv, int max_iter) {
    const VecX np = sign * normal(p);
    const double bp = sign * rhs(p);
    double up = 0.0;
    while (true) {
      if (++iterations > max_iter) return true;
      const int k = static_cast<int>(active.size());
      VecX z = h_inv * np;
      VecX r;
      if (k > 0) {
        MatX n_act(np.size(), k);
        for (int j = 0; j < k; ++j) {
          n_act.col(j) = active[j].sign * normal(active[j].index);
        }
        const MatX hn = h_inv * n_act;
        const MatX m = n_act.transpose() * hn;
        r = m.ldlt().solve(hn.transpose() * np);
        z -= hn * r;
      }
      const double sp = np.dot(x) - bp;
      const double curvature = z.dot(np);
      const bool z_zero =
          curvature <= 1e-12 * std::max(1.0, np.dot(h_inv * np));

      double t1 = kInf;
      int drop = -1;
      for (int j = 0; j < k; ++j) {
        if (is_eq(active[j].index)) continue;
        if (r[j] > 1e-14) {
          const double ratio = active[j].u / r[j];
          if (ratio < t1) {
            t1 = ratio;
            drop = j;
          }
        }
      }
      const double t2 = z_zero ? kInf : -sp / curvature;
      if (!z_zero && t2 <= 0.0) {
        // Already satisfied (can happen for equalities).
        active.push_back({p, sign, up});
        return true;
      }
      const double t = std::min(t1, t2);
      if (t == kInf) return false;

      if (!z_zero) x += t * z;
      for (int j = 0; j < k; ++j) active[j].u -= t * r[j];
      up += t;
      if (t == t2) {
        active.push_back({p, sign, up});
        return true;
      }
      active.erase(active.begin() + drop);
    }
  }

  void run(int max_iter) {
    const int n = static_cast<int>(c.size());
    const Eigen::LLT<MatX> llt(h);
    const MatX h_inv = llt.solve(MatX::Identity(n, n));
    x = -h_inv * c;
    std::vector<Active> active;

    for (int i = 0; i < m_eq(); ++i) {
      const VecX ni = normal(i);
      const double s = ni.dot(x) - rhs(i);
      const double sign = s > 0.0 ? -1.0 : 1.0;
      // Dependent equality rows: keep only if consistent.
      VecX z = h_inv * ni;
      if (!active.empty()) {
        MatX n_act(n, active.size());
        for (std::size_t j = 0; j < active.size(); ++j) {
          n_act.col(j) = active[j].sign * normal(active[j].index);
        }
        const MatX hn = h_inv * n_act;
        z -= hn * (n_act.transpose() * hn).ldlt().solve(hn.transpose() * ni);
      }
      if (z.dot(ni) <= 1e-12 * std::max(1.0, ni.dot(h_inv * ni))) {
        if (std::abs(s) > kQpFeasibilityTol) {
          status = QpStatus::kInfeasible;
          finish(active);
          return;
        }
        continue;
      }
      if (!add_constraint(i, sign, active, h_inv, max_iter)) {
        status = QpStatus::kInfeasible;
        finish(active);
        return;
      }
      if (iterations > max_iter) {
        status = QpStatus::kMaxIter;
        finish(active);
        return;
      }
    }

    while (true) {
      int worst = -1;
      double worst_s = -kQpFeasibilityTol * 0.01;
      for (int i = 0; i < prob.num_in(); ++i) {
        const int idx = m_eq() + i;
        bool is_active = false;
        for (const Active& a : active) is_active |= a.index == idx;
        if (is_active) continue;
        const double s = prob.a_in.row(i).dot(x) - prob.b_in[i];
        if (s < worst_s) {
          worst_s = s;
          worst = idx;
        }
      }
      if (worst < 0) {
        status = QpStatus::kOptimal;
        break;
      }
      if (!add_constraint(worst, 1.0, active, h_inv, max_iter)) {
        status = QpStatus::kInfeasible;
        break;
      }
      if (iterations > max_iter) {
        status = QpStatus::kMaxIter;
        break;
      }
    }
    finish(active);
  }

  void finish(const std::vector<Active>& active) {
    lambda_eq = VecX::Zero(prob.num_eq());
    lambda_in = VecX::Zero(prob.num_in());
    for (const Active& a : active) {
      if (is_eq(a.index)) {
        lambda_eq[a.index] = a.sign * a.u;
      } else {
        lambda_in[a.index - m_eq()] = a.u;
      }
    }
  }
};

bool positive_definite(const MatX& h) {
  const Eigen::SelfAdjointEigenSolver<MatX> eig(h, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  return eig.eigenvalues().minCoeff() > 1e-10 * scale;
}

Vec3 orthogonal_unit(const Vec3& a) {
  const Vec3 helper = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return a.cross(helper).normalized();
}

Eigen::Matrix<double, 5, Eigen::Dynamic> residual_jacobian(
    const RobotModel& model, const Configuration& q, const Vec3& target_p,
    const Vec3& target_axis) {
  constexpr double kStep = 1e-6;
  const int n = model.dof();
  Eigen::Matrix<double, 5, Eigen::Dynamic> jac(5, n);
  Configuration qp = q, qm = q;
  for (int j = 0; j < n; ++j) {
    qp[j] += kStep;
    qm[j] -= kStep;
    jac.col(j) = (pose_residual(model, qp, target_p, target_axis) -
                  pose_residual(model, qm, target_p, target_axis)) /
                 (2.0 * kStep);
    qp[j] = q[j];
    qm[j] = q[j];
  }
  return jac;
}

}  // namespace

const char* qp_status_name(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal:
      return "optimal";
    case QpStatus::kInfeasible:
      return "infeasible";
    case QpStatus::kMaxIter:
      return "max_iter";
    case QpStatus::kUnbounded:
      return "unbounded";
  }
  return "unknown";
}

double qp_kkt_residual(const QpProblem& p, const VecX& x,
                       const VecX& lambda_eq, const VecX& lambda_in) {
  VecX grad = p.h * x + p.c;
  if (p.num_eq() > 0) grad -= p.a_eq.transpose() * lambda_eq;
  if (p.num_in() > 0) grad -= p.a_in.transpose() * lambda_in;
  double res = grad.cwiseAbs().maxCoeff();
  if (p.num_eq() > 0) {
    res = std::max(res, (p.a_eq * x - p.b_eq).cwiseAbs().maxCoeff());
  }
  if (p.num_in() > 0) {
    const VecX slack = p.a_in * x - p.b_in;
    for (int i = 0; i < p.num_in(); ++i) {
      res = std::max(res, std::max(0.0, -slack[i]));
      res = std::max(res, std::max(0.0, -lambda_in[i]));
      res = std::max(res, std::abs(lambda_in[i] * slack[i]));
    }
  }
  return res;
}

QpSolution solve_qp(const QpProblem& problem, int max_iter) {
  check_dims(problem);
  const int n = problem.num_vars();
  QpSolution sol;

  if (positive_definite(problem.h)) {
    DualActiveSet das{problem.h, problem.c, problem, {}, {}, {}};
    das.run(max_iter);
    sol.x = das.x;
    sol.lambda_eq = das.lambda_eq;
    sol.lambda_in = das.lambda_in;
    sol.status = das.status;
    sol.iterations = das.iterations;
  } else {
    // Proximal point: x+ = argmin f(x) + rho/2 |x - x_k|^2, each subproblem
    // strictly convex.
    const double rho = 1e-2 * std::max(1.0, problem.h.cwiseAbs().maxCoeff());
    const MatX h_reg = problem.h + rho * MatX::Identity(n, n);
    VecX xk = VecX::Zero(n);
    sol.status = QpStatus::kMaxIter;
    constexpr int kMaxOuter = 5000;
    for (int outer = 0; outer < kMaxOuter; ++outer) {
      const VecX c_reg = problem.c - rho * xk;
      DualActiveSet das{h_reg, c_reg, problem, {}, {}, {}};
      das.run(max_iter);
      sol.iterations += das.iterations;
      if (das.status != QpStatus::kOptimal) {
        sol.x = das.x;
        sol.lambda_eq = das.lambda_eq;
        sol.lambda_in = das.lambda_in;
        sol.status = das.status;
        break;
      }
      const double move = (das.x - xk).cwiseAbs().maxCoeff();
      xk = das.x;
      sol.x = das.x;
      sol.lambda_eq = das.lambda_eq;
      sol.lambda_in = das.lambda_in;
      if (!xk.allFinite() || xk.cwiseAbs().maxCoeff() > 1e12) {
        sol.status = QpStatus::kUnbounded;
        break;
      }
      if (move < 1e-12 * std::max(1.0, xk.cwiseAbs().maxCoeff())) {
        sol.status = QpStatus::kOptimal;
        break;
      }
    }
  }

  sol.kkt_residual =
      qp_kkt_residual(problem, sol.x, sol.lambda_eq, sol.lambda_in);
  if (sol.status == QpStatus::kOptimal && sol.kkt_residual >= kQpKktTol) {
    sol.status = QpStatus::kMaxIter;
  }
  return sol;
}

Eigen::Matrix<double, 5, 1> pose_residual(const RobotModel& model,
                                          const Configuration& q,
                                          const Vec3& target_p,
                                          const Vec3& target_axis) {
  const ContainerPose pose = forward_kinematics(model, q);
  const Vec3 a = target_axis.normalized();
  const Vec3 z = pose.z_axis();
  const Vec3 e1 = orthogonal_unit(a);
  const Vec3 e2 = a.cross(e1);

  const Vec3 c = a.cross(z);
  const double sin_t = c.norm();
  const double cos_t = a.dot(z);
  Vec3 w = Vec3::Zero();
  if (sin_t > 1e-12) {
    w = std::atan2(sin_t, cos_t) / sin_t * c;
  } else if (cos_t < 0.0) {
    w = std::numbers::pi * e1;
  }
  Eigen::Matrix<double, 5, 1> r;
  r.head<3>() = pose.position() - target_p;
  r[3] = e1.dot(w);
  r[4] = e2.dot(w);
  return r;
}

PoseSolveResult damped_pose_solve(const RobotModel& model,
                                  const Vec3& target_p,
                                  const Vec3& target_axis,
                                  const Configuration& q_seed,
                                  const VecX& weights,
                                  const PoseSolveOptions& options) {
  const int n = model.dof();
  if (weights.size() != n) {
    throw Error(ErrorCode::kInvalidDim, "pose solve needs one weight per joint");
  }
  const MatX w = weights.asDiagonal();
  PoseSolveResult out;
  out.q = model.clamp(q_seed);
  Eigen::Matrix<double, 5, 1> r =
      pose_residual(model, out.q, target_p, target_axis);
  double norm = r.norm();
  double mu = options.initial_damping;

  while (norm >= options.tolerance && out.iterations < options.max_iterations) {
    ++out.iterations;
    const auto jac = residual_jacobian(model, out.q, target_p, target_axis);
    const MatX lhs = jac.transpose() * jac + mu * w;
    const VecX step = lhs.ldlt().solve(-jac.transpose() * r);
    const Configuration candidate = model.clamp(out.q + step);
    const Eigen::Matrix<double, 5, 1> r_new =
        pose_residual(model, candidate, target_p, target_axis);
    if (r_new.norm() < norm) {
      out.q = candidate;
      r = r_new;
      norm = r_new.norm();
      mu = std::max(mu * 0.5, 1e-12);
    } else {
      mu *= 2.0;
      if (mu > 1e8) break;
    }
  }
  out.residual = norm;
  out.converged = norm < options.tolerance;
  return out;
}

}  // namespace cccm
