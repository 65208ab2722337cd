#pragma once

#include <cstdio>
#include <utility>

#include "cylflow/frozen.hpp"
#include "cylflow/rng.hpp"

namespace cylflow {

/// Controls shared by the fixed-point construction.  delta is the size of the
/// decay class, c0 the velocity envelope constant, c_pivot the cap on the
/// squared pivot-weight norm; a0 must sit at least 2 delta above 1/2.
struct ManifoldParams {
    double delta = 0.01;
    double c0 = 10.0;
    double c_pivot = 1.0;
    int s = 2;
    double a0 = 0.55;
    double tau_max = 40.0;
    double dt = 0.01;
    double tol = 1e-9;
    int max_iter = 40;
};

/// Euclidean distance on the concatenated (a, z, g) coordinates.  The blocks
/// carry different units; mixing them in one norm is a documented choice, the
/// envelope constant c0 absorbs the scales.
inline double sigma_distance(const SymmetryParams& p, const SymmetryParams& q) {
    CYLFLOW_REQUIRE(p.n_axis() == q.n_axis(), "sigma_distance: axis count mismatch");
    const double da = p.a - q.a;
    return std::sqrt(da * da + (p.z - q.z).squaredNorm() + (p.g_tilt - q.g_tilt).squaredNorm());
}

/// The iteration norm: sup over the grid of
///   c0^{-1} <tau> |sigma1 - sigma0| + <tau>^2 ||xi1 - xi0||_s.
/// Finite only because the grid is; the <tau> weights make one unit of norm
/// mean "stays within the decay class envelopes".
inline double path_norm(const FlowPath& u1, const FlowPath& u0, double c0, int s = 2) {
    u1.require_consistent();
    u0.require_consistent();
    if (u1.size() != u0.size()) throw config_error("path_norm: grids differ in length");
    double sup = 0.0;
    for (int k = 0; k < u1.size(); ++k) {
        if (u1.taus[k] != u0.taus[k]) throw config_error("path_norm: grids differ at a node");
        const double br = std::sqrt(1.0 + u1.taus[k] * u1.taus[k]);
        const double v = sigma_distance(u1.sigma[k], u0.sigma[k]) * br / c0 +
                         sobolev_norm(u1.xi[k] - u0.xi[k], s, 0.5) * br * br;
        sup = std::max(sup, v);
    }
    return sup;
}

/// Smallest velocity constant for which the path satisfies
/// |sigma_dot| <= c0 delta <tau>^{-2} on its grid.
inline double min_velocity_constant(const FlowPath& path, double delta) {
    path.require_consistent();
    double c0 = 0.0;
    for (int k = 0; k < path.size(); ++k) {
        const double brsq = 1.0 + path.taus[k] * path.taus[k];
        c0 = std::max(c0, path.sigma_dot[k].norm() * brsq / delta);
    }
    return c0;
}

/// A candidate initial perturbation paired with the smallness it was built
/// for.  Structural validity (size, pivot cap, orthogonality) is what the
/// iteration needs; the far-field shape clause is sampling-time only.
struct SeedFunction {
    SpectralField eta0;
    double delta = 0.01;
};

/// Everything checkable about a seed.  far/growth margins are minima of
/// (value - required) over the far-field sample points; graph margin is the
/// smallest reconstructed radius over the quadrature nodes.
struct SeedReport {
    double norm_s = 0.0;
    double pivot_norm_sq = 0.0;
    double orthogonality = 0.0;
    double min_far_margin = 0.0;
    double min_graph_margin = 0.0;
    bool structural = false; // norm, pivot, orthogonality
    bool far_field = false;  // sampled positivity/growth
    bool pass = false;
};

namespace detail {

/// Far-field sample points: radii between the region boundary R and 2R along
/// the axis and diagonal directions, all Fourier angles of the truncation.
template <class Fn>
inline void for_each_far_sample(const Trunc& tr, double R, Fn&& fn) {
    static const double rad[] = {1.0, 1.2, 1.5, 1.75, 2.0};
    const int nt = 2 * tr.band + 3;
    const double inv = 1.0 / std::sqrt(2.0);
    for (double m : rad) {
        const double r = m * R;
        for (int j = 0; j < nt; ++j) {
            const double th = 2.0 * M_PI * j / nt;
            if (tr.n_axis == 1) {
                fn(r, 0.0, th);
                fn(-r, 0.0, th);
            } else {
                fn(r, 0.0, th);
                fn(-r, 0.0, th);
                fn(0.0, r, th);
                fn(0.0, -r, th);
                fn(r * inv, r * inv, th);
                fn(-r * inv, r * inv, th);
                fn(r * inv, -r * inv, th);
                fn(-r * inv, -r * inv, th);
            }
        }
    }
}

} // namespace detail

/// Measure a seed against the admission clauses at (a0, delta): size below
/// delta, squared pivot norm below c_pivot / 2, orthogonality to the
/// non-stable modes, and the far-field clause
///   eta >= max(delta, delta^2 |y|^2 / far_C)  for |y|^2 >= far_C / delta
/// sampled on rays (positivity and quadratic growth keep the surface
/// graphical where the Gaussian weight no longer controls it).
///
/// far_C defaults to 1: the region then starts at |y|^2 = 1/delta.  Pulling
/// it closer is not a free choice on a truncated basis: a polynomial that
/// clears delta on [R, infinity) carries weighted-norm mass ~ its values near
/// the moment peak, and for R below ~7 that cost alone exceeds the (e1)
/// budget no matter the degree split.
inline SeedReport seed_report(const SeedFunction& sf, const ManifoldParams& mp,
                              double far_C = 1.0) {
    CYLFLOW_REQUIRE(far_C > 0.0 && mp.delta > 0.0, "seed_report: bad parameters");
    const Trunc& tr = sf.eta0.tr;
    SeedReport rep;
    rep.norm_s = sobolev_norm(sf.eta0, mp.s, 0.5);
    rep.pivot_norm_sq = std::pow(pivot_norm(sf.eta0, mp.s, mp.delta), 2);
    const ProjectionSet ps(tr, sf.eta0.basis_w, mp.a0, 1.0);
    rep.orthogonality = orthogonality_residual(sf.eta0, ps);
    rep.structural = rep.norm_s < mp.delta && rep.pivot_norm_sq <= 0.5 * mp.c_pivot &&
                     rep.orthogonality <= 1e-10 * (1.0 + rep.norm_s);

    const double R = std::sqrt(1.0 / (far_C * mp.delta));
    double far = std::numeric_limits<double>::infinity();
    detail::for_each_far_sample(tr, R, [&](double y0, double y1, double th) {
        const double v = eval_at(sf.eta0, y0, y1, th);
        const double need =
            std::max(mp.delta, mp.delta * mp.delta * (y0 * y0 + y1 * y1) / far_C);
        far = std::min(far, v - need);
    });
    rep.min_far_margin = far;

    auto g = padded_grid(tr, sf.eta0.basis_w, sf.eta0.basis_w);
    rep.min_graph_margin =
        (g->to_values(sf.eta0).array() + cylinder_radius(mp.a0)).minCoeff();
    rep.far_field = rep.min_far_margin >= 0.0 && rep.min_graph_margin > 0.0;
    rep.pass = rep.structural && rep.far_field;
    return rep;
}

/// Shape controls for sample_seed.  target_frac sets ||eta0||_s / delta; the
/// random part has coefficient decay rho per lattice level and degree at most
/// deg - 2; the radial core clears the far-field requirement by core_margin.
struct SeedControls {
    double target_frac = 0.4;
    double far_C = 1.0;
    double rho = 0.25;
    double core_margin = 4.0;
    int budget = 200;
};

/// Draw a seed: random smooth stable-sector noise plus a tiny positive radial
/// core (|y|^2/2)^{deg/2} that owns the far field, both projected off the
/// non-stable modes.  The core is kept at full strength; the noise is scaled
/// by the positive root of the norm quadratic so the sum has Sobolev norm
/// exactly target_frac * delta.  Rescaling the sum instead would shrink the
/// core below the far-field floor whenever its own norm is not negligible.
/// Rejection repeats the draw until the report passes.
inline SeedFunction sample_seed(Rng& rng, const Trunc& tr, double basis_w,
                                const ManifoldParams& mp, const SeedControls& sc = {}) {
    CYLFLOW_REQUIRE(tr.deg >= 8 && tr.deg % 2 == 0,
                    "sample_seed: need even Hermite degree >= 8 for the far-field core");
    const double target = sc.target_frac * mp.delta;
    CYLFLOW_REQUIRE(target > 0.0 && target < mp.delta, "sample_seed: target outside (0, delta)");
    const ProjectionSet ps(tr, basis_w, mp.a0, 1.0);

    SpectralField core = SpectralField::constant(tr, basis_w, 1.0);
    for (int rep = 0; rep < tr.deg / 2; ++rep) core = detail::half_ysq_mul(core);
    const double R2 = 1.0 / (sc.far_C * mp.delta);
    core = (sc.core_margin * mp.delta / std::pow(0.5 * R2, tr.deg / 2)) * core;
    core = ps.q_project(core);
    const double core_nsq = std::pow(sobolev_norm(core, mp.s, 0.5), 2);
    CYLFLOW_REQUIRE(core_nsq < target * target,
                    "sample_seed: far-field core alone exceeds the norm target "
                    "(raise target_frac or lower far_C / core_margin)");

    for (int trial = 0; trial < sc.budget; ++trial) {
        SpectralField u(tr, basis_w);
        for_each_index(tr, [&](int idx, int a0, int a1, int f) {
            const double g = rng.normal(); // always drawn: keeps the stream aligned
            if (a0 + a1 > tr.deg - 2) return;
            u.c(idx) = g * std::pow(sc.rho, a0 + a1 + fourier_m(f)) /
                       std::sqrt(basis_norm_sq(tr, basis_w, a0, a1, f));
        });
        u = ps.q_project(u);
        u = (1.0 / sobolev_norm(u, mp.s, 0.5)) * u;
        const double cross =
            0.5 * (std::pow(sobolev_norm(u + core, mp.s, 0.5), 2) - 1.0 - core_nsq);
        const double scale =
            -cross + std::sqrt(cross * cross + target * target - core_nsq);
        u = scale * u + core;
        SeedFunction sf{std::move(u), mp.delta};
        if (seed_report(sf, mp, sc.far_C).pass) return sf;
    }
    throw config_error("sample_seed: rejection budget exhausted");
}

struct PsiResult {
    FlowPath path;
    CorrectionCoeffs coeffs;
    double max_orthogonality = 0.0;
};

/// One application of the solution map: check the base path is inside the
/// decay class, then solve the frozen-coefficient problem along it.  The
/// returned coefficients are the bounded-solution values at tau = 0.
inline PsiResult psi(const FlowPath& base, const SeedFunction& seed, const ManifoldParams& mp) {
    CYLFLOW_REQUIRE(seed.delta == mp.delta, "psi: seed delta differs from run delta");
    const auto rep = membership_check(base, mp.delta, mp.c0, mp.c_pivot, mp.s);
    if (!rep.pass) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "psi: base path leaves the decay class (sigma margin %.3e at tau %.2f, "
                      "xi margin %.3e at tau %.2f)",
                      rep.min_sigma_margin, rep.worst_sigma_tau, rep.min_xi_margin,
                      rep.worst_xi_tau);
        throw config_error(msg);
    }
    const double ns = sobolev_norm(seed.eta0, mp.s, 0.5);
    if (!(ns < mp.delta)) throw config_error("psi: seed norm not below delta");
    if (!(std::pow(pivot_norm(seed.eta0, mp.s, mp.delta), 2) <= 0.5 * mp.c_pivot))
        throw config_error("psi: seed pivot norm above the cap");

    FrozenProblem p;
    p.base = base;
    p.eta0 = seed.eta0;
    p.tau_max = base.taus.back();
    p.dt = base.taus[1] - base.taus[0];
    p.delta = mp.delta;
    for (int k = 1; k < base.size(); ++k)
        CYLFLOW_REQUIRE(std::fabs(base.taus[k] - base.taus[k - 1] - p.dt) <= 1e-12 * p.dt,
                        "psi: base grid not uniform");
    auto r = solve_frozen(p);
    return {std::move(r.path), CorrectionCoeffs{r.beta0, r.gamma0}, r.max_orthogonality};
}

struct FixedPointResult {
    FlowPath path;
    CorrectionCoeffs coeffs;
    std::vector<double> distances;  // path_norm of consecutive iterates
    std::vector<double> ratios;     // successive quotients of distances
    std::vector<double> coeff_gaps; // sup-norm change of (beta, gamma) per pass
    double max_orthogonality = 0.0; // constraint residual of the final pass
    int iterations = 0;
};

/// Iterate psi from the rest path until the iterates are tol-close in
/// path_norm.  Ratios above one twice is treated as divergence.  The ratio
/// history is returned rather than policed against a contraction envelope
/// here: from the second pass on the distances are dominated by the response
/// to the deterministic far-field core of the seed, whose size is set by
/// delta and the far-field radius (not by the noise norm), so early ratios
/// can sit near the envelope while the map still converges.  Callers that
/// certify an envelope should check the returned ratios.
inline FixedPointResult fixed_point(const SeedFunction& seed, const ManifoldParams& mp) {
    CYLFLOW_REQUIRE(mp.tol > 0.0 && mp.max_iter >= 1, "fixed_point: bad controls");
    const Trunc& tr = seed.eta0.tr;
    FlowPath u = FlowPath::rest(tr, seed.eta0.basis_w, mp.a0, mp.tau_max, mp.dt);
    FixedPointResult out;
    int rises = 0;
    bool have_prev = false;
    CorrectionCoeffs prev;
    for (int it = 1; it <= mp.max_iter; ++it) {
        PsiResult st = psi(u, seed, mp);
        const double d = path_norm(st.path, u, mp.c0, mp.s);
        if (!out.distances.empty()) {
            const double d_prev = out.distances.back();
            const double r = d / d_prev;
            out.ratios.push_back(r);
            if (r >= 1.0 && ++rises >= 2) {
                char msg[120];
                std::snprintf(msg, sizeof msg,
                              "fixed point stopped contracting at delta = %.4g (ratio %.3g)",
                              mp.delta, r);
                throw divergence_error(msg);
            }
        }
        out.distances.push_back(d);
        if (have_prev)
            out.coeff_gaps.push_back((st.coeffs.beta - prev.beta).lpNorm<Eigen::Infinity>() +
                                     (st.coeffs.gamma - prev.gamma).lpNorm<Eigen::Infinity>());
        prev = st.coeffs;
        have_prev = true;
        u = std::move(st.path);
        out.max_orthogonality = st.max_orthogonality;
        out.iterations = it;
        if (d < mp.tol) {
            out.path = std::move(u);
            out.coeffs = std::move(prev);
            return out;
        }
    }
    char msg[120];
    std::snprintf(msg, sizeof msg, "fixed point did not reach tol in %d iterations (delta %.4g)",
                  mp.max_iter, mp.delta);
    throw divergence_error(msg);
}

struct PhiResult {
    CorrectionCoeffs coeffs;
    SpectralField field; // beta_i S^(1,0)(i) + gamma_ij S^(2,0)(i,j) at a0
    FixedPointResult fp;
};

/// The quadratic correction: run the fixed point, then assemble the span
/// coefficients into one field.  By construction it equals xi(0) - Q eta0.
inline PhiResult phi(const SeedFunction& seed, const ManifoldParams& mp) {
    FixedPointResult fp = fixed_point(seed, mp);
    const Trunc& tr = seed.eta0.tr;
    const ProjectionSet ps(tr, seed.eta0.basis_w, mp.a0, 1.0);
    SpectralField f(tr, seed.eta0.basis_w);
    for (const auto& md : ps.modes) {
        if (md.label[0] == 'y' && md.label[1] == '[' &&
            md.label.find("w[") == std::string::npos)
            f = f + fp.coeffs.beta(md.label[2] - '0') * md.field;
        else if (md.label[0] == 'y' && md.label[1] == 'y')
            f = f + fp.coeffs.gamma(md.label[3] - '0', md.label[5] - '0') * md.field;
    }
    return {fp.coeffs, std::move(f), std::move(fp)};
}

struct ResidualReport {
    std::vector<double> taus;      // interior nodes
    std::vector<double> residuals; // ||xi_dot + L xi + N + dW sigma_dot||_{s-2}
    double max_residual = 0.0;
};

/// Self-consistency of a stored path against the unfrozen equation: the time
/// derivative is the fourth-order central difference, everything else is
/// evaluated at the node, and lambda comes from the path's own dilation
/// history.  Ends are skipped: the stencil needs two neighbors per side.
inline ResidualReport nonlinear_residual(const FlowPath& path, int s = 2) {
    path.require_consistent();
    const int m = path.size();
    CYLFLOW_REQUIRE(m >= 5, "nonlinear_residual: need at least five nodes");
    const double dt = path.taus[1] - path.taus[0];
    for (int k = 1; k < m; ++k)
        CYLFLOW_REQUIRE(std::fabs(path.taus[k] - path.taus[k - 1] - dt) <= 1e-12 * dt,
                        "nonlinear_residual: grid not uniform");
    std::vector<double> a(m), lam(m);
    for (int k = 0; k < m; ++k) a[k] = path.sigma[k].a;
    const auto cum = cumulative_integral(path.taus, a);
    for (int k = 0; k < m; ++k) lam[k] = std::exp(-cum[k]);

    ResidualReport rep;
    const Trunc& tr = path.xi[0].tr;
    const double w = path.xi[0].basis_w;
    for (int k = 2; k <= m - 3; ++k) {
        SpectralField xidot = (1.0 / (12.0 * dt)) * (path.xi[k - 2] - path.xi[k + 2]) +
                              (8.0 / (12.0 * dt)) * (path.xi[k + 1] - path.xi[k - 1]);
        SpectralField R = xidot + apply_L(path.xi[k], a[k]) + N_apply(a[k], path.xi[k]) +
                          dW_eval(tr, w, path.sigma[k], path.sigma_dot[k], lam[k]);
        const double r = sobolev_norm(R, s - 2, 0.5);
        rep.taus.push_back(path.taus[k]);
        rep.residuals.push_back(r);
        rep.max_residual = std::max(rep.max_residual, r);
    }
    return rep;
}

/// Dimension of the removed span: multiplicity sum of the non-positive
/// lattice eigenvalues a (|alpha| + m^2 - 2), i.e. |alpha| + m^2 <= 2.
inline int stable_codimension(int n_axis) {
    return 1 + 2 + n_axis + 2 * n_axis + n_axis * (n_axis + 1) / 2;
}

} // namespace cylflow
