#include "shooting.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

// Layout: node i -> [5i, 5i+4) = (x, y, theta, couple, kappa_i) with kappa
// only used for i < N, then (Fx, Fy) at the end.
struct Layout {
  int n;
  int node(int i) const { return 5 * i; }
  int force() const { return 5 * (n + 1); }
  int size() const { return 5 * (n + 1) + 2; }
};

struct Segment {
  double nu1, nu2, theta;
  Eigen::Matrix<double, 5, 1> residual;
};

// Residual of element e given its inputs
// (x, y, angle, couple)_e, kappa_e, (x, y, angle, couple)_{e+1}, F.
Segment segment(const cosserat::RodGeometry& g, int e, double c,
                const Eigen::Matrix<double, 11, 1>& v) {
  const auto sec = g.element_section(e);
  const auto rest = g.intrinsic(e);
  const double ds = g.ds();
  const double kappa = v[4];
  const double theta = v[2] + c * ds * kappa;
  const double fx = v[9], fy = v[10];
  const double n1 = fx * std::cos(theta) + fy * std::sin(theta);
  const double n2 = -fx * std::sin(theta) + fy * std::cos(theta);
  Segment s;
  s.theta = theta;
  s.nu1 = rest.nu1 + n1 / sec.EA;
  s.nu2 = rest.nu2 + n2 / sec.GA;
  const double tau = s.nu1 * n2 - s.nu2 * n1;
  const double scale = 1.0 / sec.EI;
  s.residual[0] = v[5] - v[0] - ds * (s.nu1 * std::cos(theta) - s.nu2 * std::sin(theta));
  s.residual[1] = v[6] - v[1] - ds * (s.nu1 * std::sin(theta) + s.nu2 * std::cos(theta));
  s.residual[2] = v[7] - v[2] - ds * kappa;
  s.residual[3] = (v[8] - v[3] + ds * tau) * scale * ds;
  s.residual[4] = (sec.EI * (kappa - rest.kappa) - (v[3] - (1.0 - c) * ds * tau)) * scale * ds;
  return s;
}

Eigen::Matrix<double, 11, 1> gather(const Layout& l, const Eigen::VectorXd& u, int e) {
  Eigen::Matrix<double, 11, 1> v;
  v.segment<5>(0) = u.segment<5>(l.node(e));
  v.segment<4>(5) = u.segment<4>(l.node(e + 1));
  v.segment<2>(9) = u.segment<2>(l.force());
  return v;
}

Eigen::VectorXd residual(const cosserat::RodGeometry& g, const Layout& l, double c,
                         const Eigen::Vector2d& target, double mu, const Eigen::VectorXd& u) {
  Eigen::VectorXd r(l.size());
  for (int e = 0; e < l.n; ++e) r.segment<5>(5 * e) = segment(g, e, c, gather(l, u, e)).residual;
  const int tip = l.node(l.n);
  const int f = l.force();
  int k = 5 * l.n;
  r[k++] = u[0];
  r[k++] = u[1];
  r[k++] = u[2];
  r[k++] = u[tip + 3] / mu;
  r[k++] = u[f] / mu - (target.x() - u[tip]);
  r[k++] = u[f + 1] / mu - (target.y() - u[tip + 1]);
  // The unused tip curvature slot is pinned to zero.
  r[k++] = u[tip + 4];
  return r;
}

Eigen::MatrixXd jacobian(const cosserat::RodGeometry& g, const Layout& l, double c, double mu,
                         const Eigen::VectorXd& u) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(l.size(), l.size());
  for (int e = 0; e < l.n; ++e) {
    const auto v = gather(l, u, e);
    int columns[11];
    for (int k = 0; k < 5; ++k) columns[k] = l.node(e) + k;
    for (int k = 0; k < 4; ++k) columns[5 + k] = l.node(e + 1) + k;
    columns[9] = l.force();
    columns[10] = l.force() + 1;
    for (int k = 0; k < 11; ++k) {
      const double h = 1e-6 * std::max(std::abs(v[k]), 1e-6);
      auto up = v, down = v;
      up[k] += h;
      down[k] -= h;
      jac.block<5, 1>(5 * e, columns[k]) =
          (segment(g, e, c, up).residual - segment(g, e, c, down).residual) / (2.0 * h);
    }
  }
  const int tip = l.node(l.n);
  const int f = l.force();
  int k = 5 * l.n;
  jac(k++, 0) = 1.0;
  jac(k++, 1) = 1.0;
  jac(k++, 2) = 1.0;
  jac(k++, tip + 3) = 1.0 / mu;
  jac(k, f) = 1.0 / mu;
  jac(k++, tip) = 1.0;
  jac(k, f + 1) = 1.0 / mu;
  jac(k++, tip + 1) = 1.0;
  jac(k++, tip + 4) = 1.0;
  return jac;
}

}  // namespace

ShootingResult shoot_reach(const cosserat::RodGeometry& g, const Eigen::Vector2d& target,
                           double mu, const ShapeGuess& guess, const ShootingConfig& config) {
  const Layout l{g.elements()};
  const double ds = g.ds();
  const double c = config.offset;
  if (guess.x.size() != l.n + 1 || guess.y.size() != l.n + 1 || guess.angle.size() != l.n + 1) {
    throw std::invalid_argument("shoot_reach: guess must have one sample per node");
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(l.size());
  for (int i = 0; i <= l.n; ++i) {
    u[l.node(i)] = guess.x[i];
    u[l.node(i) + 1] = guess.y[i];
    u[l.node(i) + 2] = guess.angle[i];
    if (i < l.n) u[l.node(i) + 4] = (guess.angle[i + 1] - guess.angle[i]) / ds;
  }

  ShootingResult result;
  Eigen::VectorXd r = residual(g, l, c, target, mu, u);
  for (; result.iterations < config.max_newton; ++result.iterations) {
    const double norm = r.lpNorm<Eigen::Infinity>();
    if (!(norm >= config.tolerance)) break;
    const Eigen::VectorXd delta = jacobian(g, l, c, mu, u).partialPivLu().solve(r);
    double scale = 1.0;
    bool moved = false;
    for (int back = 0; back < 50 && !moved; ++back, scale *= 0.5) {
      const Eigen::VectorXd trial = u - scale * delta;
      const Eigen::VectorXd tr = residual(g, l, c, target, mu, trial);
      if (tr.allFinite() && tr.norm() < r.norm()) {
        u = trial;
        r = tr;
        moved = true;
      }
    }
    if (!moved) break;
  }

  result.w = cosserat::DeformationField::uniform(l.n, {});
  result.x.resize(l.n + 1);
  result.y.resize(l.n + 1);
  for (int i = 0; i <= l.n; ++i) {
    result.x[i] = u[l.node(i)];
    result.y[i] = u[l.node(i) + 1];
  }
  for (int e = 0; e < l.n; ++e) {
    const Segment s = segment(g, e, c, gather(l, u, e));
    result.w.set(e, {s.nu1, s.nu2, u[l.node(e) + 4]});
  }
  result.force = u.segment<2>(l.force());
  result.residual = r.lpNorm<Eigen::Infinity>();
  result.converged = result.residual < config.tolerance;
  return result;
}

}  // namespace oracle
