#pragma once
// Frozen-coefficient linear solver.  The flow splits along the spectrum of
// L(a(tau)): the stable part marches by an integrating-factor RK4 with the
// exact lattice exponential, the axial coefficients solve a scalar ODE whose
// unique bounded solution is a backward exponential-kernel integral, and the
// quadratic coefficients are plain tail integrals.

#include "cylflow/fit.hpp"
#include "cylflow/modulation.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

namespace cylflow {

/// One stored flow: tau grid, symmetry path, its velocity, and the graph
/// perturbation per node, all in a fixed coefficient basis.
struct FlowPath {
    std::vector<double> taus;
    std::vector<SymmetryParams> sigma;
    std::vector<ModulationVector> sigma_dot;
    std::vector<SpectralField> xi;

    int size() const { return static_cast<int>(taus.size()); }

    void require_consistent() const {
        CYLFLOW_REQUIRE(!taus.empty(), "flow path: empty grid");
        CYLFLOW_REQUIRE(sigma.size() == taus.size() && sigma_dot.size() == taus.size() &&
                            xi.size() == taus.size(),
                        "flow path: ragged columns");
        for (size_t k = 1; k < taus.size(); ++k)
            CYLFLOW_REQUIRE(taus[k] > taus[k - 1], "flow path: taus not increasing");
    }

    /// Constant-in-tau path sitting at the round cylinder.
    static FlowPath rest(const Trunc& tr, double basis_w, double a0, double tau_max,
                         double dt) {
        FlowPath p;
        const int m = static_cast<int>(std::round(tau_max / dt));
        for (int k = 0; k <= m; ++k) {
            p.taus.push_back(k * dt);
            p.sigma.push_back(SymmetryParams::identity(tr.n_axis, a0));
            p.sigma_dot.push_back(ModulationVector::zero(tr.n_axis));
            p.xi.emplace_back(tr, basis_w);
        }
        return p;
    }
};

namespace detail {

inline int locate(const std::vector<double>& taus, double t) {
    const auto it = std::upper_bound(taus.begin(), taus.end(), t);
    int k = static_cast<int>(it - taus.begin()) - 1;
    return std::clamp(k, 0, static_cast<int>(taus.size()) - 2);
}

inline double lerp(const std::vector<double>& taus, const std::vector<double>& v, double t) {
    if (t <= taus.front()) return v.front();
    if (t >= taus.back()) return v.back();
    const int k = locate(taus, t);
    const double w = (t - taus[k]) / (taus[k + 1] - taus[k]);
    return (1.0 - w) * v[k] + w * v[k + 1];
}

/// Coefficients of the Lagrange cubic through 4 path nodes, in powers of
/// (x - x0); clamped 4-point stencil around interval k.
inline Eigen::Vector4d local_cubic(const std::vector<double>& taus,
                                   const std::vector<double>& v, int k, double x0) {
    const int m = static_cast<int>(taus.size());
    if (m < 4) { // degenerate grids: constant/linear fallback
        Eigen::Vector4d c = Eigen::Vector4d::Zero();
        c(0) = v[k];
        if (m >= 2) {
            const int j = std::min(k, m - 2);
            c(1) = (v[j + 1] - v[j]) / (taus[j + 1] - taus[j]);
            c(0) = v[j] + c(1) * (x0 - taus[j]);
        }
        return c;
    }
    const int s = std::clamp(k - 1, 0, m - 4);
    Eigen::Matrix4d V;
    Eigen::Vector4d b;
    for (int r = 0; r < 4; ++r) {
        const double d = taus[s + r] - x0;
        V(r, 0) = 1.0;
        V(r, 1) = d;
        V(r, 2) = d * d;
        V(r, 3) = d * d * d;
        b(r) = v[s + r];
    }
    return V.fullPivLu().solve(b);
}

inline double eval_poly(const Eigen::Vector4d& c, double d) {
    return c(0) + d * (c(1) + d * (c(2) + d * c(3)));
}

/// Integral of the cubic from the expansion point to offset d.
inline double int_poly(const Eigen::Vector4d& c, double d) {
    return d * (c(0) + d * (c(1) / 2.0 + d * (c(2) / 3.0 + d * c(3) / 4.0)));
}

} // namespace detail

/// Cumulative integral on the path grid, fourth order: each interval
/// integrates the local Lagrange cubic exactly.
inline std::vector<double> cumulative_integral(const std::vector<double>& taus,
                                               const std::vector<double>& v) {
    CYLFLOW_REQUIRE(taus.size() == v.size() && !taus.empty(), "cumulative_integral: bad sizes");
    std::vector<double> out(taus.size(), 0.0);
    for (size_t k = 0; k + 1 < taus.size(); ++k) {
        const auto c = detail::local_cubic(taus, v, static_cast<int>(k), taus[k]);
        out[k + 1] = out[k] + detail::int_poly(c, taus[k + 1] - taus[k]);
    }
    return out;
}

/// Power-law tail model fitted on the trailing half of the grid.
struct TailFit {
    double amplitude = 0.0; // signed, from the last node
    double exponent = 0.0;  // |f| ~ amplitude * tau^{-exponent}
    bool usable = false;
};

inline TailFit fit_tail(const std::vector<double>& taus, const std::vector<double>& f) {
    TailFit t;
    // Sources that vanish analytically still carry roundoff residue; below
    // this floor the trailing values are noise, not a decay law, and the tail
    // they would contribute is far under double precision anyway.
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::fabs(v));
    const double floor = 1e-13 * (1.0 + fmax);

    std::vector<double> xs, ys;
    const double t0 = 0.5 * taus.back();
    for (size_t k = 0; k < taus.size(); ++k)
        if (taus[k] >= t0 && taus[k] > 0.0 && std::fabs(f[k]) > floor) {
            xs.push_back(taus[k]);
            ys.push_back(std::fabs(f[k]));
        }
    if (xs.size() < 4 || std::fabs(f.back()) <= floor) return t;
    t.exponent = -fit_loglog(xs, ys).slope;
    t.amplitude = f.back();
    t.usable = true;
    return t;
}

/// Unique bounded solution of  x' - a(tau) x = f(tau)  on [0, infinity):
///   x(tau) = -int_tau^inf f(t) exp(-int_tau^t a)  dt.
/// Grid intervals use 2-point Gauss on cubic interpolants of f and a (local
/// error h^5); past the grid the fitted power-law tail is integrated against
/// the frozen end value of a, and its size is reported as the error budget.
struct BoundedSolution {
    std::vector<double> x;
    double x0 = 0.0;
    double tail_value = 0.0;
    double tail_budget = 0.0;
    double tail_exponent = 0.0;
};

inline BoundedSolution ode_bounded_solve(const std::vector<double>& taus,
                                         const std::vector<double>& a,
                                         const std::vector<double>& f) {
    CYLFLOW_REQUIRE(taus.size() == a.size() && taus.size() == f.size() && taus.size() >= 2,
                    "ode_bounded_solve: bad sizes");
    for (double av : a)
        if (!(av > 0.0)) throw config_error("ode_bounded_solve: a must stay positive");
    for (double fv : f)
        if (!std::isfinite(fv)) throw config_error("ode_bounded_solve: f not finite");

    const int m = static_cast<int>(taus.size());
    BoundedSolution sol;
    sol.x.assign(m, 0.0);

    // Tail: x(tau_M) = -int_{tau_M}^inf f e^{-a_M (t - tau_M)} with the fitted
    // power shape, integrated by fine midpoint steps until the kernel dies.
    const TailFit tail = fit_tail(taus, f);
    sol.tail_exponent = tail.exponent;
    if (tail.usable) {
        const double aM = a.back(), tM = taus.back();
        if (!(tail.exponent > -5.0))
            throw config_error("ode_bounded_solve: source grows too fast for a tail estimate");
        const double hs = 0.02 / aM;
        double acc = 0.0;
        for (double s = 0.5 * hs; s * aM < 40.0; s += hs)
            acc += hs * tail.amplitude * std::pow(1.0 + s / tM, -tail.exponent) *
                   std::exp(-aM * s);
        sol.tail_value = -acc;
        sol.tail_budget = std::fabs(acc);
    }
    sol.x[m - 1] = sol.tail_value;

    static const double gauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (int k = m - 2; k >= 0; --k) {
        const double h = taus[k + 1] - taus[k];
        const auto ca = detail::local_cubic(taus, a, k, taus[k]);
        const auto cf = detail::local_cubic(taus, f, k, taus[k]);
        double ik = 0.0;
        for (double g : gauss) {
            const double d = g * h;
            ik += 0.5 * h * detail::eval_poly(cf, d) * std::exp(-detail::int_poly(ca, d));
        }
        sol.x[k] = std::exp(-detail::int_poly(ca, h)) * sol.x[k + 1] - ik;
    }
    sol.x0 = sol.x[0];
    return sol;
}

/// Zero-eigenvalue boundary case:  g' = h  with  g -> 0,  so
/// g(tau) = -int_tau^inf h.  The tail integral needs genuine integrability.
inline BoundedSolution gamma_solve(const std::vector<double>& taus,
                                   const std::vector<double>& h) {
    CYLFLOW_REQUIRE(taus.size() == h.size() && taus.size() >= 2, "gamma_solve: bad sizes");
    for (double hv : h)
        if (!std::isfinite(hv)) throw config_error("gamma_solve: source not finite");

    const int m = static_cast<int>(taus.size());
    BoundedSolution sol;
    sol.x.assign(m, 0.0);

    const TailFit tail = fit_tail(taus, h);
    sol.tail_exponent = tail.exponent;
    if (tail.usable) {
        if (!(tail.exponent > 1.05))
            throw config_error("gamma_solve: source tail not integrable");
        // int_{tau_M}^inf amp (t/tau_M)^{-p} dt, closed form
        sol.tail_value = -tail.amplitude * taus.back() / (tail.exponent - 1.0);
        sol.tail_budget = std::fabs(sol.tail_value);
    }
    sol.x[m - 1] = sol.tail_value;

    static const double gauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (int k = m - 2; k >= 0; --k) {
        const double step = taus[k + 1] - taus[k];
        const auto ch = detail::local_cubic(taus, h, k, taus[k]);
        double ik = 0.0;
        for (double g : gauss) ik += 0.5 * step * detail::eval_poly(ch, g * step);
        sol.x[k] = sol.x[k + 1] - ik;
    }
    sol.x0 = sol.x[0];
    return sol;
}

/// Axial and quadratic initial coefficients; when supplied they override the
/// bounded-solution choice (used by oracles), otherwise the solver picks the
/// unique values that keep the trajectories bounded and decaying.
struct CorrectionCoeffs {
    Eigen::VectorXd beta;
    Eigen::MatrixXd gamma;
};

struct FrozenProblem {
    FlowPath base;       // the frozen path (sigma, xi) with its velocities
    SpectralField eta0;  // stable initial part, orthogonal to every mode
    std::optional<CorrectionCoeffs> corrections;
    double tau_max = 40.0;
    double dt = 0.01;
    double delta = 0.01; // admissibility window for the output a-path
};

struct FrozenResult {
    FlowPath path;
    std::vector<Eigen::VectorXd> beta;  // per node
    std::vector<Eigen::MatrixXd> gamma; // per node, symmetric
    Eigen::VectorXd beta0;
    Eigen::MatrixXd gamma0;
    double beta_tail_budget = 0.0;
    double gamma_tail_budget = 0.0;
    double max_orthogonality = 0.0;     // constraint residual over all nodes
    double max_projection_defect = 0.0; // per-step re-projection correction
};

namespace detail {

/// e^{-s L(a_mid)} applied in the a_mid Hermite basis, where the operator is
/// diagonal with eigenvalues a_mid (|alpha| + m^2 - 2).
inline void lattice_exp_inplace(SpectralField& u, double a_mid, double s) {
    for_each_index(u.tr, [&](int idx, int a0, int a1, int f) {
        const int m = fourier_m(f);
        u.c(idx) *= std::exp(-s * a_mid * (a0 + a1 + m * m - 2));
    });
}

inline SpectralField lerp_field(const std::vector<double>& taus,
                                const std::vector<SpectralField>& v, double t) {
    if (t <= taus.front()) return v.front();
    if (t >= taus.back()) return v.back();
    const int k = locate(taus, t);
    const double w = (t - taus[k]) / (taus[k + 1] - taus[k]);
    return (1.0 - w) * v[k] + w * v[k + 1];
}

} // namespace detail

/// Solve the frozen-coefficient Cauchy problem.  The stable block
///   xi_S' + L(a0(tau)) xi_S = -Q N(a0, xi0)
/// marches with a Lawson RK4 step: per step the operator is frozen at the
/// midpoint weight (exact exponential via the basis connection), the affine
/// remainder (a(t) - a_mid) dL and the interpolated source are fourth-order
/// stage terms, and the iterate is re-projected onto ran Q at each node (the
/// removed mass is reported, not hidden).  Axial coefficients solve
///   beta' = a0 beta + f,  f = -<N, y_i>_a - da0 <xi0, (|y|^2/2) y_i>_a,
/// by the bounded-solution integral; quadratic coefficients solve
///   gamma' = h,  h = -<N, M_ij>_a + da0 (<xi0, y_i y_j>_a - <xi0, (|y|^2/2) M_ij>_a),
/// with M_ij = a y_i y_j - delta_ij, by tail integrals.  The da0 terms are the
/// moving-frame corrections (mode and weight drift along the frozen a-path),
/// frozen at xi0 like the nonlinearity.  The symmetry path integrates
///   sigma' = F(sigma0) xi + M(sigma0, xi0).
inline FrozenResult solve_frozen(const FrozenProblem& p) {
    p.base.require_consistent();
    CYLFLOW_REQUIRE(p.base.size() >= 2, "solve_frozen: base path needs at least two nodes");
    const Trunc tr = p.eta0.tr;
    const double w = p.eta0.basis_w;
    CYLFLOW_REQUIRE(p.base.xi[0].compatible(p.eta0), "solve_frozen: basis mismatch");
    CYLFLOW_REQUIRE(p.dt > 0.0 && p.tau_max > p.dt, "solve_frozen: bad grid controls");
    const double a0_init = p.base.sigma[0].a;
    if (!(a0_init >= 0.5 + 2.0 * p.delta))
        throw config_error("solve_frozen: initial dilation below 1/2 + 2 delta");

    const int m = static_cast<int>(std::round(p.tau_max / p.dt));
    std::vector<double> taus(m + 1);
    for (int k = 0; k <= m; ++k) taus[k] = k * p.dt;

    // Frozen data at the output nodes.
    std::vector<double> a0(m + 1), da0(m + 1);
    std::vector<SpectralField> xi0, n0;
    xi0.reserve(m + 1);
    n0.reserve(m + 1);
    std::vector<double> lam(m + 1); // e^{-int a0}, the W-mode prefactor
    for (int k = 0; k <= m; ++k) {
        const double t = taus[k];
        const int j = detail::locate(p.base.taus, t);
        const double u = std::clamp((t - p.base.taus[j]) / (p.base.taus[j + 1] - p.base.taus[j]),
                                    0.0, 1.0);
        a0[k] = (1.0 - u) * p.base.sigma[j].a + u * p.base.sigma[j + 1].a;
        da0[k] = (1.0 - u) * p.base.sigma_dot[j].da + u * p.base.sigma_dot[j + 1].da;
        xi0.push_back(detail::lerp_field(p.base.taus, p.base.xi, t));
        n0.push_back(N_apply(a0[k], xi0[k]));
    }
    {
        const auto cum = cumulative_integral(taus, a0);
        for (int k = 0; k <= m; ++k) lam[k] = std::exp(-cum[k]);
    }

    // Scalar sources for the axial / quadratic coefficients.
    const int na = tr.n_axis;
    std::vector<ProjectionSet> ps;
    ps.reserve(m + 1);
    for (int k = 0; k <= m; ++k) ps.emplace_back(tr, w, a0[k], lam[k]);

    std::vector<std::vector<double>> f(na, std::vector<double>(m + 1));
    std::vector<std::vector<double>> h(na * na, std::vector<double>(m + 1));
    for (int k = 0; k <= m; ++k) {
        for (const auto& md : ps[k].modes) {
            if (md.label[0] == 'y' && md.label[1] == '[' &&
                md.label.find("w[") == std::string::npos) {
                // y[i]: the stored field is y_i / ||y_i||^2; scale back up.
                const int i = md.label[2] - '0';
                const SpectralField yi = (1.0 / md.norm_sq) * md.field;
                f[i][k] = -inner_product(n0[k], yi, a0[k]) -
                          da0[k] * inner_product(xi0[k], detail::half_ysq_mul(yi), a0[k]);
            } else if (md.label[0] == 'y' && md.label[1] == 'y') {
                const int i = md.label[3] - '0', j = md.label[5] - '0';
                const SpectralField M = (1.0 / md.norm_sq) * md.field; // a y_i y_j - delta
                // d/da of M is y_i y_j = (M + delta_ij) / a.
                SpectralField dM = (1.0 / a0[k]) * M;
                if (i == j) dM.c(0) += 1.0 / a0[k];
                const double v = -inner_product(n0[k], M, a0[k]) +
                                 da0[k] * (inner_product(xi0[k], dM, a0[k]) -
                                           inner_product(xi0[k], detail::half_ysq_mul(M), a0[k]));
                h[i * na + j][k] = v;
                if (i != j) h[j * na + i][k] = v;
            }
        }
    }

    FrozenResult res;
    res.beta0 = Eigen::VectorXd::Zero(na);
    res.gamma0 = Eigen::MatrixXd::Zero(na, na);
    std::vector<Eigen::VectorXd> beta(m + 1, Eigen::VectorXd::Zero(na));
    std::vector<Eigen::MatrixXd> gamma(m + 1, Eigen::MatrixXd::Zero(na, na));

    if (!p.corrections) {
        for (int i = 0; i < na; ++i) {
            const auto sol = ode_bounded_solve(taus, a0, f[i]);
            res.beta_tail_budget = std::max(res.beta_tail_budget, sol.tail_budget);
            for (int k = 0; k <= m; ++k) beta[k](i) = sol.x[k];
            res.beta0(i) = sol.x0;
        }
        for (int i = 0; i < na; ++i)
            for (int j = i; j < na; ++j) {
                const auto sol = gamma_solve(taus, h[i * na + j]);
                res.gamma_tail_budget = std::max(res.gamma_tail_budget, sol.tail_budget);
                for (int k = 0; k <= m; ++k) gamma[k](i, j) = gamma[k](j, i) = sol.x[k];
                res.gamma0(i, j) = res.gamma0(j, i) = sol.x0;
            }
    } else {
        // Forward march from the supplied initial coefficients with the same
        // interval kernels (variation of constants / plain quadrature).
        res.beta0 = p.corrections->beta;
        res.gamma0 = p.corrections->gamma;
        static const double gauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
        beta[0] = res.beta0;
        gamma[0] = res.gamma0;
        for (int k = 0; k < m; ++k) {
            const double step = taus[k + 1] - taus[k];
            const auto ca = detail::local_cubic(taus, a0, k, taus[k]);
            for (int i = 0; i < na; ++i) {
                const auto cf = detail::local_cubic(taus, f[i], k, taus[k]);
                double ik = 0.0;
                for (double g : gauss) {
                    const double d = g * step;
                    ik += 0.5 * step * detail::eval_poly(cf, d) *
                          std::exp(-detail::int_poly(ca, d));
                }
                beta[k + 1](i) = std::exp(detail::int_poly(ca, step)) * (beta[k](i) + ik);
            }
            for (int i = 0; i < na; ++i)
                for (int j = i; j < na; ++j) {
                    const auto chh = detail::local_cubic(taus, h[i * na + j], k, taus[k]);
                    double ik = 0.0;
                    for (double g : gauss) ik += 0.5 * step * detail::eval_poly(chh, g * step);
                    gamma[k + 1](i, j) = gamma[k + 1](j, i) = gamma[k](i, j) + ik;
                }
        }
    }

    // Stable block.
    SpectralField xis = ps[0].q_project(p.eta0);
    {
        const double defect = norm0(p.eta0 - xis, a0[0]);
        if (defect > 1e-10 * (1.0 + norm0(p.eta0, a0[0])))
            throw config_error("solve_frozen: eta0 not orthogonal to the spectral modes");
        res.max_projection_defect = defect;
    }

    std::vector<SpectralField> xi_out;
    xi_out.reserve(m + 1);
    std::vector<SpectralField> g_nodes; // -Q N at nodes
    g_nodes.reserve(m + 1);
    for (int k = 0; k <= m; ++k) g_nodes.push_back(-1.0 * ps[k].q_project(n0[k]));

    auto reconstruct = [&](int k, const SpectralField& stable) {
        SpectralField out = stable;
        for (int mi = 0; mi < ps[k].count(); ++mi) {
            const auto& md = ps[k].modes[mi];
            if (md.label[0] == 'y' && md.label[1] == '[' &&
                md.label.find("w[") == std::string::npos)
                out = out + beta[k](md.label[2] - '0') * md.field;
            else if (md.label[0] == 'y' && md.label[1] == 'y')
                out = out + gamma[k](md.label[3] - '0', md.label[5] - '0') * md.field;
        }
        return out;
    };

    // Stage evaluations read the base path directly, so the effective source
    // is independent of the solver grid and the step keeps its full order.
    const auto a_of = [&](double t) {
        const int j = detail::locate(p.base.taus, t);
        const double u = std::clamp(
            (t - p.base.taus[j]) / (p.base.taus[j + 1] - p.base.taus[j]), 0.0, 1.0);
        return (1.0 - u) * p.base.sigma[j].a + u * p.base.sigma[j + 1].a;
    };

    xi_out.push_back(reconstruct(0, xis));
    for (int k = 0; k < m; ++k) {
        const double t0 = taus[k], step = p.dt;
        const double t_mid = t0 + 0.5 * step;
        const double a_mid = a_of(t_mid);
        const SpectralField g_mid_w =
            -1.0 * ProjectionSet(tr, w, a_mid, 1.0)
                       .q_project(N_apply(a_mid, detail::lerp_field(p.base.taus, p.base.xi, t_mid)));

        const auto to_mid = [&](const SpectralField& u) {
            return detail::change_hermite_weight(u, a_mid);
        };
        const SpectralField g0 = to_mid(g_nodes[k]);
        const SpectralField g1 = to_mid(g_mid_w);
        const SpectralField g2 = to_mid(g_nodes[k + 1]);

        auto rhs = [&](double s, const SpectralField& u_amid, const SpectralField& g) {
            // u is the Lawson variable: xi = E(s) u, result = E(-s) G(t, xi).
            SpectralField xi_loc = u_amid;
            detail::lattice_exp_inplace(xi_loc, a_mid, s);
            SpectralField G =
                -1.0 * (apply_L(xi_loc, a_of(t0 + s)) - apply_L(xi_loc, a_mid)) + g;
            detail::lattice_exp_inplace(G, a_mid, -s);
            return G;
        };

        const SpectralField u0 = to_mid(xis);
        const SpectralField k1 = rhs(0.0, u0, g0);
        const SpectralField k2 = rhs(0.5 * step, u0 + (0.5 * step) * k1, g1);
        const SpectralField k3 = rhs(0.5 * step, u0 + (0.5 * step) * k2, g1);
        const SpectralField k4 = rhs(step, u0 + step * k3, g2);
        SpectralField u1 = u0 + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        detail::lattice_exp_inplace(u1, a_mid, step);
        SpectralField next = detail::change_hermite_weight(u1, w);

        const SpectralField proj = ps[k + 1].q_project(next);
        res.max_projection_defect =
            std::max(res.max_projection_defect, norm0(next - proj, a0[k + 1]));
        xis = proj;
        xi_out.push_back(reconstruct(k + 1, xis));
        if (!xis.c.allFinite()) throw divergence_error("stable block diverged", taus[k + 1]);
    }

    // Symmetry path: velocity from the updated xi (linear part) plus the
    // frozen remainder, then a cumulative integral per component.
    std::vector<ModulationVector> sdot(m + 1, ModulationVector::zero(na));
    for (int k = 0; k <= m; ++k) {
        SymmetryParams s0k = SymmetryParams::identity(na, a0[k]);
        sdot[k] = modulation_linear(s0k, xi_out[k], ps[k]) +
                  modulation_rhs(s0k, xi0[k], ps[k]).nonlinear;
    }
    FlowPath out;
    out.taus = taus;
    out.xi = std::move(xi_out);
    out.sigma_dot = sdot;
    {
        std::vector<double> comp(m + 1);
        SymmetryParams sinit = SymmetryParams::identity(na, a0_init);
        std::vector<SymmetryParams> sig(m + 1, sinit);
        auto integrate_into = [&](auto getter, auto setter) {
            for (int k = 0; k <= m; ++k) comp[k] = getter(sdot[k]);
            const auto cum = cumulative_integral(taus, comp);
            for (int k = 0; k <= m; ++k) setter(sig[k], cum[k]);
        };
        integrate_into([](const ModulationVector& v) { return v.da; },
                       [&](SymmetryParams& s, double c) { s.a = a0_init + c; });
        for (int l = 0; l < 2; ++l)
            integrate_into([l](const ModulationVector& v) { return v.dz(l); },
                           [l](SymmetryParams& s, double c) { s.z(l) = c; });
        for (int l = 0; l < 2; ++l)
            for (int j = 0; j < na; ++j)
                integrate_into([l, j](const ModulationVector& v) { return v.dg_tilt(l, j); },
                               [l, j](SymmetryParams& s, double c) { s.g_tilt(l, j) = c; });
        for (int k = 0; k <= m; ++k)
            if (std::fabs(sig[k].a - a0_init) > p.delta)
                throw divergence_error("dilation left the admissibility window", taus[k]);
        out.sigma = std::move(sig);
    }

    for (int k = 0; k <= m; ++k)
        res.max_orthogonality =
            std::max(res.max_orthogonality, orthogonality_residual(out.xi[k], ps[k]));

    res.path = std::move(out);
    res.beta = std::move(beta);
    res.gamma = std::move(gamma);
    res.path.require_consistent();
    return res;
}

/// Per-node margins for the decay class: velocity bound, perturbation decay,
/// and the pivot cap.  Negative margin means the bound fails at that node.
struct MembershipReport {
    bool pass = true;
    double min_sigma_margin = std::numeric_limits<double>::infinity();
    double min_xi_margin = std::numeric_limits<double>::infinity();
    double min_pivot_margin = std::numeric_limits<double>::infinity();
    double worst_sigma_tau = 0.0, worst_xi_tau = 0.0, worst_pivot_tau = 0.0;
};

inline MembershipReport membership_check(const FlowPath& path, double delta, double c0,
                                         double c, int s = 2) {
    path.require_consistent();
    MembershipReport rep;
    const double b = pivot_weight(delta);
    for (int k = 0; k < path.size(); ++k) {
        const double tau = path.taus[k];
        const double bracket = std::sqrt(1.0 + tau * tau);
        const double ms = c0 * delta / (bracket * bracket) - path.sigma_dot[k].norm();
        const double nx = sobolev_norm(path.xi[k], s, 0.5);
        const double mx = delta / (bracket * bracket) - nx;
        const double np = sobolev_norm(path.xi[k], s, b);
        const double mp = c - np * np;
        if (ms < rep.min_sigma_margin) { rep.min_sigma_margin = ms; rep.worst_sigma_tau = tau; }
        if (mx < rep.min_xi_margin) { rep.min_xi_margin = mx; rep.worst_xi_tau = tau; }
        if (mp < rep.min_pivot_margin) { rep.min_pivot_margin = mp; rep.worst_pivot_tau = tau; }
    }
    rep.pass = rep.min_sigma_margin >= 0.0 && rep.min_xi_margin >= 0.0 &&
               rep.min_pivot_margin >= 0.0;
    return rep;
}

} // namespace cylflow
