#include "fibredrive/dynamics.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace fibredrive {

namespace {

int min_constraint_depth(const HamiltonianLink& link) {
  int d = kMaxJetDepth;
  for (const ScalarField& phi : link.constraints)
    d = std::min(d, phi.max_depth());
  return d;
}

struct RelationSource {
  ScalarField c0;
  std::vector<ScalarField> cmu;
};

Eigen::VectorXd eval_relation_rhs(const std::vector<RelationSource>& rel,
                                  const ChartPoint& p) {
  Eigen::VectorXd c0(rel.size());
  for (std::size_t r = 0; r < rel.size(); ++r)
    c0[static_cast<Eigen::Index>(r)] = field_value(rel[r].c0, p);
  return c0;
}

Eigen::MatrixXd eval_relation_matrix(const std::vector<RelationSource>& rel,
                                     int m, const ChartPoint& p) {
  Eigen::MatrixXd C(rel.size(), m);
  for (std::size_t r = 0; r < rel.size(); ++r)
    for (int mu = 0; mu < m; ++mu)
      C(static_cast<Eigen::Index>(r), mu) = field_value(rel[r].cmu[mu], p);
  return C;
}

}  // namespace

const char* to_string(StabilisationStatus s) {
  switch (s) {
    case StabilisationStatus::finished:
      return "finished";
    case StabilisationStatus::empty_final_set:
      return "empty_final_set";
    case StabilisationStatus::max_rounds_exceeded:
      return "max_rounds_exceeded";
    case StabilisationStatus::rank_instability:
      return "rank_instability";
  }
  return "unknown";
}

std::vector<ConstraintFunction> StabilisationReport::active_constraints() const {
  std::vector<ConstraintFunction> out;
  for (const StabilisationRound& r : rounds)
    for (const ConstraintFunction& c : r.new_constraints)
      if (!c.identically_zero) out.push_back(c);
  return out;
}

std::vector<ConstraintFunction> primary_constraints(
    const LagrangianModel& model, const HamiltonianLink& link,
    const SecondOrderField& x0) {
  std::vector<ConstraintFunction> out;
  LagrangianModel m = model;
  HamiltonianLink l = link;
  VectorField x0e = x0.accel;
  int depth = std::min({model.L.max_depth() - 1, min_constraint_depth(link) - 1,
                        x0e.max_depth()});
  for (int mu = 0; mu < link.m; ++mu) {
    ConstraintFunction c;
    c.level = 1;
    c.name = "chi_" + std::to_string(mu + 1);
    c.provenance = "pairing of EL(X0) with gamma_" + std::to_string(mu + 1);
    c.eval = ScalarField(
        model.n, model.n,
        [m, l, x0e, mu](auto q, auto v) { return chi_of(m, l, x0e, mu, q, v); },
        depth);
    out.push_back(std::move(c));
  }
  return out;
}

double x0_independence_residual(const LagrangianModel& model,
                                const HamiltonianLink& link,
                                const SecondOrderField& x0a,
                                const SecondOrderField& x0b,
                                const ChartPoint& p) {
  model.require_domain(p);
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  std::span<const double> qs(q), vs(v);
  double res = 0.0;
  for (int mu = 0; mu < link.m; ++mu) {
    double a = chi_of(model, link, x0a.accel, mu, qs, vs);
    double b = chi_of(model, link, x0b.accel, mu, qs, vs);
    res = std::max(res, std::abs(a - b));
  }
  return res;
}

SecondOrderField primary_field_D0(const LagrangianModel& model,
                                  const HamiltonianLink& link,
                                  const SecondOrderField& x0) {
  LagrangianModel m = model;
  HamiltonianLink l = link;
  VectorField x0e = x0.accel;
  int depth =
      std::min({model.L.max_depth() - 1, link.H.max_depth() - 1,
                min_constraint_depth(link) - 1, x0e.max_depth()});
  return {VectorField(
      model.n, model.n, model.n,
      [m, l, x0e](auto q, auto v) { return d0_accel_of(m, l, x0e, q, v); },
      depth)};
}

VerticalField gamma_vertical(const LagrangianModel& model,
                             const HamiltonianLink& link, int mu) {
  LagrangianModel m = model;
  ScalarField phi = link.constraints.at(static_cast<std::size_t>(mu));
  int depth = std::min(model.L.max_depth() - 1, phi.max_depth() - 1);
  return {VectorField(
      model.n, model.n, model.n,
      [m, phi](auto q, auto v) { return gamma_of(m, phi, q, v); }, depth)};
}

SecondOrderField field_Du(const LagrangianModel& model,
                          const HamiltonianLink& link,
                          const SecondOrderField& d0,
                          const std::vector<ScalarField>& u) {
  if (static_cast<int>(u.size()) != link.m)
    throw DimensionError("field_Du: one multiplier per constraint required");
  LagrangianModel m = model;
  HamiltonianLink l = link;
  VectorField base = d0.accel;
  std::vector<ScalarField> us = u;
  int depth = std::min({base.max_depth(), model.L.max_depth() - 1,
                        min_constraint_depth(link) - 1});
  for (const ScalarField& f : us) depth = std::min(depth, f.max_depth());
  return {VectorField(
      model.n, model.n, model.n,
      [m, l, base, us](auto q, auto v) {
        auto A = base.eval(q, v);
        for (std::size_t mu = 0; mu < us.size(); ++mu) {
          auto w = us[mu].eval(q, v);
          auto g = gamma_of(m, l.constraints[mu], q, v);
          for (std::size_t i = 0; i < A.size(); ++i) A[i] += w * g[i];
        }
        return A;
      },
      depth)};
}

std::vector<ScalarField> constant_multipliers(int n,
                                              const Eigen::VectorXd& values) {
  std::vector<ScalarField> out;
  out.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    double c = values[k];
    out.emplace_back(n, n, [c](auto q, auto) {
      using S = typename decltype(q)::value_type;
      return S(c);
    });
  }
  return out;
}

ScalarField lie_along(const ScalarField& g, const SecondOrderField& f) {
  ScalarField ge = g;
  VectorField acc = f.accel;
  int depth = std::min(g.max_depth() - 1, acc.max_depth());
  return ScalarField(
      g.base_dim(), g.fibre_dim(),
      [ge, acc](auto q, auto v) {
        using S = typename decltype(q)::value_type;
        std::vector<S> A = acc.eval(q, v);
        return directional(ge, q, v, v, std::span<const S>(A));
      },
      depth);
}

ScalarField lie_along_vertical(const ScalarField& g, const VerticalField& y) {
  ScalarField ge = g;
  VectorField comp = y.comp;
  int depth = std::min(g.max_depth() - 1, comp.max_depth());
  return ScalarField(
      g.base_dim(), g.fibre_dim(),
      [ge, comp](auto q, auto v) {
        using S = typename decltype(q)::value_type;
        std::vector<S> c = comp.eval(q, v);
        return directional(ge, q, v, std::span<const S>(),
                           std::span<const S>(c));
      },
      depth);
}

double d0_prim_residual(const LagrangianModel& model,
                        const HamiltonianLink& link,
                        const SecondOrderField& d0, const SecondOrderField& x0,
                        const ChartPoint& p) {
  model.require_domain(p);
  Eigen::VectorXd a = field_value(d0.accel, p);
  Eigen::VectorXd el = euler_lagrange(model, p, a).covector;
  if (link.m == 0) return el.cwiseAbs().maxCoeff();

  Eigen::MatrixXd dl = dlambda(model, link, p);
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  std::span<const double> qs(q), vs(v);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(model.n);
  for (int mu = 0; mu < link.m; ++mu)
    rhs += chi_of(model, link, x0.accel, mu, qs, vs) * dl.row(mu).transpose();
  return (el - rhs).cwiseAbs().maxCoeff();
}

ProjectionResult newton_project(const LagrangianModel& model,
                                std::span<const ConstraintFunction> constraints,
                                const ChartPoint& seed, double tol,
                                int max_iter) {
  const int n = model.n;
  ProjectionResult out;
  if (!model.in_domain(seed)) {
    out.status = ProjectionStatus::excluded;
    out.point = seed;
    return out;
  }
  if (constraints.empty()) {
    out.status = ProjectionStatus::converged;
    out.point = seed;
    return out;
  }

  const int c = static_cast<int>(constraints.size());
  auto residual = [&](const ChartPoint& p) {
    Eigen::VectorXd r(c);
    for (int k = 0; k < c; ++k) r[k] = field_value(constraints[k].eval, p);
    return r;
  };

  ChartPoint z = seed;
  Eigen::VectorXd r = residual(z);
  if (!r.allFinite()) {
    out.status = ProjectionStatus::failed;
    out.point = seed;
    return out;
  }

  for (int it = 0; it < max_iter; ++it) {
    if (r.cwiseAbs().maxCoeff() <= tol) {
      out.status = ProjectionStatus::converged;
      out.point = z;
      out.residual = r.cwiseAbs().maxCoeff();
      return out;
    }
    Eigen::MatrixXd J(c, 2 * n);
    std::vector<double> q = to_std(z.q), v = to_std(z.v);
    for (int k = 0; k < c; ++k) {
      auto [gq, gv] = full_gradient(constraints[k].eval,
                                    std::span<const double>(q),
                                    std::span<const double>(v));
      for (int i = 0; i < n; ++i) {
        J(k, i) = gq[static_cast<std::size_t>(i)];
        J(k, n + i) = gv[static_cast<std::size_t>(i)];
      }
    }
    Eigen::VectorXd dz = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(J)
                             .solve(-r);
    if (!dz.allFinite()) {
      out.status = ProjectionStatus::failed;
      out.point = z;
      return out;
    }

    double step = 1.0;
    bool accepted = false;
    double rn = r.norm();
    for (int h = 0; h < 40 && !accepted; ++h, step *= 0.5) {
      Eigen::VectorXd qn = z.q + step * dz.head(n);
      Eigen::VectorXd vn = z.v + step * dz.tail(n);
      if (!qn.allFinite() || !vn.allFinite()) continue;
      ChartPoint zn(qn, vn);
      if (!model.in_domain(zn)) continue;
      Eigen::VectorXd rnew = residual(zn);
      if (!rnew.allFinite()) continue;
      if (rnew.norm() < (1.0 - 0.25 * step) * rn || rnew.norm() < tol) {
        z = zn;
        r = rnew;
        accepted = true;
      }
    }
    if (!accepted) break;  // stalled: no descent direction survives damping
  }

  out.point = z;
  out.residual = r.cwiseAbs().maxCoeff();
  out.status = out.residual <= tol ? ProjectionStatus::converged
                                   : ProjectionStatus::excluded;
  return out;
}

StabilisationReport stabilise(const LagrangianModel& model,
                              const HamiltonianLink& link,
                              const SecondOrderField& d0,
                              std::span<const ChartPoint> seeds,
                              const StabilisationOptions& opts) {
  if (seeds.empty()) throw DimensionError("stabilise: no seed points");
  for (const ChartPoint& p : seeds) model.require_domain(p);

  StabilisationReport rep;
  rep.kernel_dim = link.m;

  // Round 1: primary constraints, flagged when they vanish on every seed.
  SecondOrderField x0 = zero_second_order_field(model.n);
  std::vector<ConstraintFunction> chis = primary_constraints(model, link, x0);
  StabilisationRound round1;
  round1.level = 1;
  for (ConstraintFunction& c : chis) {
    double cmax = 0.0;
    for (const ChartPoint& p : seeds)
      cmax = std::max(cmax, std::abs(field_value(c.eval, p)));
    rep.max_primary_abs = std::max(rep.max_primary_abs, cmax);
    c.identically_zero = cmax <= opts.tol_class;
    round1.new_constraints.push_back(c);
  }
  rep.rounds.push_back(std::move(round1));

  std::vector<ConstraintFunction> newest;
  for (const ConstraintFunction& c : rep.rounds[0].new_constraints)
    if (!c.identically_zero) newest.push_back(c);

  std::vector<VerticalField> gammas;
  for (int mu = 0; mu < link.m; ++mu)
    gammas.push_back(gamma_vertical(model, link, mu));

  std::vector<RelationSource> relation_sources;
  bool surface_empty = false;

  auto project_all = [&](const std::vector<ConstraintFunction>& active) {
    std::vector<ChartPoint> samples;
    int excluded = 0, failed = 0;
    for (const ChartPoint& s : seeds) {
      ProjectionResult pr =
          newton_project(model, active, s, opts.newton_tol, opts.newton_max_iter);
      switch (pr.status) {
        case ProjectionStatus::converged:
          samples.push_back(pr.point);
          break;
        case ProjectionStatus::excluded:
          ++excluded;
          break;
        case ProjectionStatus::failed:
          ++failed;
          break;
      }
    }
    if (samples.empty()) {
      if (excluded == 0)
        throw SurfaceSamplingError(model.name +
                                   ": Newton projection failed at every seed");
      surface_empty = true;
    }
    return samples;
  };

  rep.status = StabilisationStatus::finished;
  while (!newest.empty()) {
    if (static_cast<int>(rep.rounds.size()) >= opts.max_rounds) {
      rep.status = StabilisationStatus::max_rounds_exceeded;
      break;
    }
    std::vector<ConstraintFunction> active = rep.active_constraints();
    std::vector<ChartPoint> samples = project_all(active);
    if (surface_empty) {
      rep.status = StabilisationStatus::empty_final_set;
      break;
    }

    // One more derivative level must be available for every newest
    // constraint; otherwise the compiled jet depth is the effective cap.
    bool depth_ok = d0.accel.max_depth() >= 0;
    for (const ConstraintFunction& c : newest)
      depth_ok = depth_ok && c.eval.max_depth() >= 1;
    if (!depth_ok) {
      rep.status = StabilisationStatus::max_rounds_exceeded;
      break;
    }

    StabilisationRound round;
    round.level = rep.rounds.back().level + 1;
    bool instability = false;

    for (const ConstraintFunction& chi : newest) {
      ScalarField c0_field = lie_along(chi.eval, d0);
      std::vector<ScalarField> cmu_fields;
      for (int mu = 0; mu < link.m; ++mu)
        cmu_fields.push_back(lie_along_vertical(chi.eval, gammas[mu]));

      int n_relation = 0, n_newc = 0;
      std::vector<Eigen::VectorXd> rows;
      for (const ChartPoint& p : samples) {
        Eigen::VectorXd row(link.m + 1);
        for (int mu = 0; mu < link.m; ++mu)
          row[mu] = field_value(cmu_fields[static_cast<std::size_t>(mu)], p);
        row[link.m] = field_value(c0_field, p);
        double scale = 1.0 + row.cwiseAbs().maxCoeff();
        bool has_mu = link.m > 0 &&
                      row.head(link.m).cwiseAbs().maxCoeff() > opts.tol_class * scale;
        bool big0 = std::abs(row[link.m]) > opts.tol_class * scale;
        if (has_mu) {
          ++n_relation;
          rows.push_back(row);
        } else if (big0) {
          ++n_newc;
        }
      }

      if (n_relation > 0 && n_newc > 0) {
        instability = true;
        break;
      }
      if (n_relation > 0) {
        for (Eigen::VectorXd& r : rows)
          round.multiplier_relations.push_back(std::move(r));
        relation_sources.push_back({c0_field, cmu_fields});
      } else if (n_newc > 0) {
        ConstraintFunction next;
        next.level = round.level;
        next.name = chi.name + "'";
        next.provenance = "derivative of " + chi.name + " along D0";
        next.eval = c0_field;
        round.new_constraints.push_back(std::move(next));
      }
    }

    if (instability) {
      rep.status = StabilisationStatus::rank_instability;
      rep.rounds.push_back(std::move(round));
      break;
    }

    newest = round.new_constraints;
    rep.rounds.push_back(std::move(round));
  }

  // Final surface samples (best effort for non-finished statuses).
  if (!surface_empty) {
    try {
      rep.final_samples = project_all(rep.active_constraints());
    } catch (const SurfaceSamplingError&) {
      rep.final_samples.clear();
    }
  }

  // Multiplier bookkeeping: an index is determined when its axis lies in the
  // row space of the relation coefficients at every final sample.
  std::vector<bool> determined(static_cast<std::size_t>(link.m),
                               !relation_sources.empty() && link.m > 0);
  if (!relation_sources.empty() && !rep.final_samples.empty()) {
    for (const ChartPoint& p : rep.final_samples) {
      Eigen::MatrixXd C = eval_relation_matrix(relation_sources, link.m, p);
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(C);
      Eigen::MatrixXd proj = cod.pseudoInverse() * C;  // projector onto rowspace
      for (int mu = 0; mu < link.m; ++mu) {
        Eigen::VectorXd e = Eigen::VectorXd::Unit(link.m, mu);
        if ((proj * e - e).cwiseAbs().maxCoeff() > 1e-6)
          determined[static_cast<std::size_t>(mu)] = false;
      }
    }
  } else if (relation_sources.empty()) {
    std::fill(determined.begin(), determined.end(), false);
  }

  const int m = link.m;
  auto rel = relation_sources;  // captured by the multiplier closures
  for (int mu = 0; mu < m; ++mu) {
    if (!determined[static_cast<std::size_t>(mu)]) {
      rep.free_multipliers.push_back(mu);
      continue;
    }
    // Value field of the determined multiplier: least-squares solve of the
    // relation rows at the evaluation point. Double-level only.
    rep.determined_u.emplace(
        mu, ScalarField(
                model.n, model.n,
                [rel, m, mu](auto qs, auto vs) {
                  using S = typename decltype(qs)::value_type;
                  Eigen::VectorXd q(qs.size()), v(vs.size());
                  for (std::size_t i = 0; i < qs.size(); ++i)
                    q[static_cast<Eigen::Index>(i)] = scalar_value(qs[i]);
                  for (std::size_t i = 0; i < vs.size(); ++i)
                    v[static_cast<Eigen::Index>(i)] = scalar_value(vs[i]);
                  ChartPoint p(q, v);
                  Eigen::MatrixXd C = eval_relation_matrix(rel, m, p);
                  Eigen::VectorXd c0 = eval_relation_rhs(rel, p);
                  Eigen::VectorXd u =
                      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(C)
                          .solve(-c0);
                  return S(u[mu]);
                },
                0));
  }

  // Tangency of the final field on the final samples.
  if (!rep.final_samples.empty()) {
    std::vector<ScalarField> u_fields;
    Eigen::VectorXd zeros = Eigen::VectorXd::Zero(m);
    std::vector<ScalarField> zero_fields = constant_multipliers(model.n, zeros);
    for (int mu = 0; mu < m; ++mu) {
      auto it = rep.determined_u.find(mu);
      u_fields.push_back(it != rep.determined_u.end()
                             ? it->second
                             : zero_fields[static_cast<std::size_t>(mu)]);
    }
    SecondOrderField df = m > 0 ? field_Du(model, link, d0, u_fields) : d0;
    for (const ConstraintFunction& c : rep.active_constraints()) {
      for (const ChartPoint& p : rep.final_samples) {
        Eigen::VectorXd a = field_value(df.accel, p);
        double lie = directional_derivative(c.eval, p, p.v, a);
        rep.final_tangency_max = std::max(rep.final_tangency_max, std::abs(lie));
      }
    }
  }

  return rep;
}

Trajectory integrate(const LagrangianModel& model, const SecondOrderField& field,
                     const ChartPoint& p0, double t_end, double dt,
                     std::span<const ConstraintFunction> log_constraints) {
  if (dt <= 0.0 || t_end <= 0.0)
    throw DimensionError("integrate: t_end and dt must be positive");
  model.require_domain(p0);

  const long steps = std::max(1L, std::lround(t_end / dt));
  const double h = t_end / static_cast<double>(steps);

  Trajectory traj;
  for (const ConstraintFunction& c : log_constraints) {
    traj.constraint_names.push_back(c.name);
    traj.constraint_residuals.emplace_back();
  }

  auto accel_at = [&](const Eigen::VectorXd& q,
                      const Eigen::VectorXd& v) -> std::optional<Eigen::VectorXd> {
    if (!q.allFinite() || !v.allFinite()) return std::nullopt;
    ChartPoint p(q, v);
    if (!model.in_domain(p)) return std::nullopt;
    Eigen::VectorXd a = field_value(field.accel, p);
    if (!a.allFinite()) return std::nullopt;
    return a;
  };

  auto log_state = [&](double t, const ChartPoint& p, const Eigen::VectorXd& a) {
    traj.times.push_back(t);
    traj.states.push_back(p);
    traj.energy.push_back(energy(model, p));
    traj.el_residual.push_back(
        euler_lagrange(model, p, a).covector.cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < log_constraints.size(); ++k)
      traj.constraint_residuals[k].push_back(
          std::abs(field_value(log_constraints[k].eval, p)));
  };

  Eigen::VectorXd q = p0.q, v = p0.v;
  {
    auto a0 = accel_at(q, v);
    if (!a0) {
      traj.status = TrajectoryStatus::domain_exit;
      return traj;
    }
    log_state(0.0, p0, *a0);
  }

  for (long s = 0; s < steps; ++s) {
    auto k1 = accel_at(q, v);
    if (!k1) break;
    auto k2 = accel_at(q + 0.5 * h * v, v + 0.5 * h * *k1);
    if (!k2) break;
    Eigen::VectorXd v2 = v + 0.5 * h * *k1;
    auto k3 = accel_at(q + 0.5 * h * v2, v + 0.5 * h * *k2);
    if (!k3) break;
    Eigen::VectorXd v3 = v + 0.5 * h * *k2;
    auto k4 = accel_at(q + h * v3, v + h * *k3);
    if (!k4) break;

    Eigen::VectorXd qn =
        q + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + (v + h * *k3));
    Eigen::VectorXd vn = v + (h / 6.0) * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);

    if (!qn.allFinite() || !vn.allFinite()) {
      traj.status = TrajectoryStatus::non_finite;
      return traj;
    }
    ChartPoint pn(qn, vn);
    if (!model.in_domain(pn)) {
      traj.status = TrajectoryStatus::domain_exit;
      return traj;
    }
    auto an = accel_at(qn, vn);
    if (!an) {
      traj.status = TrajectoryStatus::domain_exit;
      return traj;
    }
    q = qn;
    v = vn;
    log_state(static_cast<double>(s + 1) * h, pn, *an);
  }

  if (traj.times.size() != static_cast<std::size_t>(steps) + 1 &&
      traj.status == TrajectoryStatus::completed)
    traj.status = TrajectoryStatus::domain_exit;
  return traj;
}

}  // namespace fibredrive
