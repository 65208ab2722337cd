#pragma once

#include "cylflow/fit.hpp"
#include "cylflow/operator.hpp"

namespace cylflow {

/// Radius profile of the cylinder graph, v = 1/sqrt(a) (one angular factor).
inline double cylinder_radius(double a) { return 1.0 / std::sqrt(a); }

inline SpectralField cylinder_profile(const Trunc& tr, double w, double a) {
    return SpectralField::constant(tr, w, cylinder_radius(a));
}

/// Collocation grid with 3/2-rule padding: the rational nonlinearities are
/// evaluated pointwise here and the result is re-expanded; padding keeps the
/// quadratic part of the aliasing out of the retained band.
inline std::shared_ptr<const Quadrature> padded_grid(const Trunc& tr, double w, double measure) {
    const int Q = (3 * (tr.deg + 1)) / 2 + 3;
    const int nt = 3 * tr.band + 4;
    return Quadrature::shared(tr, w, measure, Q, nt);
}

/// Full second-order jet of a profile on a grid; derivatives are taken in
/// coefficient space (exact) and synthesized.
struct GraphJet {
    Eigen::VectorXd v;          // profile values
    Eigen::VectorXd p0, p1;     // d/dy_i
    Eigen::VectorXd q;          // d/dtheta
    Eigen::VectorXd r00, r01, r11;
    Eigen::VectorXd t0, t1;     // mixed y_i theta
    Eigen::VectorXd s;          // theta theta
    int n_axis = 1;
};

inline GraphJet graph_jet(const SpectralField& v, const Quadrature& g) {
    GraphJet j;
    j.n_axis = v.tr.n_axis;
    const auto d0 = dy(v, 0);
    const auto dt = dtheta(v);
    j.v = g.to_values(v);
    j.p0 = g.to_values(d0);
    j.q = g.to_values(dt);
    j.r00 = g.to_values(dy(d0, 0));
    j.t0 = g.to_values(dtheta(d0));
    j.s = g.to_values(dtheta(dt));
    if (j.n_axis == 2) {
        const auto d1 = dy(v, 1);
        j.p1 = g.to_values(d1);
        j.r01 = g.to_values(dy(d1, 0));
        j.r11 = g.to_values(dy(d1, 1));
        j.t1 = g.to_values(dtheta(d1));
    } else {
        j.p1 = j.r01 = j.r11 = j.t1 = Eigen::VectorXd::Zero(j.v.size());
    }
    return j;
}

inline void require_graph(const Eigen::VectorXd& v_values) {
    if (v_values.minCoeff() <= 0.0)
        throw divergence_error("graph condition violated: profile nonpositive at a node");
}

namespace detail {
/// sqrt of the area-element discriminant D = 1 + |grad_y v|^2 + v^{-2} v_theta^2.
inline Eigen::VectorXd jet_D(const GraphJet& j) {
    return (1.0 + j.p0.array().square() + j.p1.array().square() +
            j.q.array().square() / j.v.array().square())
        .matrix();
}

/// The gradient remainder beyond the quasilinear part: collects the curvature
/// of the area element. All four terms carry a + sign (the variational and
/// the second-fundamental-form derivations agree).
inline Eigen::VectorXd jet_N1(const GraphJet& j) {
    const auto& v = j.v.array();
    const Eigen::ArrayXd D = jet_D(j).array();
    Eigen::ArrayXd term = j.r00.array() * j.p0.array().square() +
                          2.0 * j.r01.array() * j.p0.array() * j.p1.array() +
                          j.r11.array() * j.p1.array().square();
    term += 2.0 / v.square() * j.q.array() *
            (j.t0.array() * j.p0.array() + j.t1.array() * j.p1.array());
    term += j.s.array() * j.q.array().square() / v.pow(4);
    term += j.q.array().square() / v.pow(3);
    return (term / D).matrix();
}

/// Pointwise values of the quasilinear gradient operator
/// -Delta_y v + a y.grad v - v^{-2} v_tt - a v + v^{-1} + N1.
inline Eigen::VectorXd jet_gradient(const GraphJet& j, const Quadrature& g, double a) {
    Eigen::ArrayXd e = -(j.r00.array() + j.r11.array());
    e += a * (g.ycoord.col(0).array() * j.p0.array());
    if (j.n_axis == 2) e += a * (g.ycoord.col(1).array() * j.p1.array());
    e += -j.s.array() / j.v.array().square() - a * j.v.array() + 1.0 / j.v.array();
    return (e + jet_N1(j).array()).matrix();
}
} // namespace detail

/// Weighted area of the graph {(y, v(y, theta) omega(theta))}: the integrand
/// carries the full ambient Gaussian, including the radial factor e^{-a v^2/2}
/// (without it the cylinder would not be a critical point).
inline double F_value(const SpectralField& v, double a) {
    auto g = padded_grid(v.tr, v.basis_w, a);
    const GraphJet j = graph_jet(v, *g);
    require_graph(j.v);
    const Eigen::ArrayXd integ =
        j.v.array() * detail::jet_D(j).array().sqrt() * (-0.5 * a * j.v.array().square()).exp();
    return g->integrate(integ.matrix());
}

/// Euler-Lagrange operator of F_value as a field (projected back onto the
/// truncation). Vanishes at the cylinder profile.
inline SpectralField F_gradient(const SpectralField& v, double a) {
    auto g = padded_grid(v.tr, v.basis_w, v.basis_w);
    const GraphJet j = graph_jet(v, *g);
    require_graph(j.v);
    return g->from_values(detail::jet_gradient(j, *g, a));
}

/// Directional-derivative pairing: d/de F_value(v + e h) equals
/// <F', J(v) h>_a with the geometric density J(v) = v e^{-a v^2/2} / sqrt(D).
/// (F' alone is not an <.,.>_a-gradient; J carries the area element.)
inline double gradient_pairing(const SpectralField& v, const SpectralField& h, double a) {
    auto g = padded_grid(v.tr, v.basis_w, a);
    const GraphJet j = graph_jet(v, *g);
    require_graph(j.v);
    const Eigen::ArrayXd grad = detail::jet_gradient(j, *g, a).array();
    const Eigen::ArrayXd dens = j.v.array() * (-0.5 * a * j.v.array().square()).exp() /
                                detail::jet_D(j).array().sqrt();
    return g->integrate((grad * dens * g->to_values(h).array()).matrix());
}

/// Nonlinear remainder: N(a, xi) = F'(cyl + xi) - L(a) xi, in the closed form
/// (a - v^{-2}) xi_tt - a v + v^{-1} + 2 a xi + N1(v). Exactly cancels at
/// xi = 0 and starts quadratically.
inline SpectralField N_apply(double a, const SpectralField& xi) {
    auto g = padded_grid(xi.tr, xi.basis_w, xi.basis_w);
    const double c = cylinder_radius(a);
    SpectralField v = xi;
    v.c(0) += c;
    const GraphJet j = graph_jet(v, *g);
    require_graph(j.v);
    const Eigen::VectorXd xitt = g->to_values(lap_theta(xi));
    Eigen::ArrayXd e = (a - 1.0 / j.v.array().square()) * xitt.array();
    e += -a * j.v.array() + 1.0 / j.v.array() + 2.0 * a * g->to_values(xi).array();
    e += detail::jet_N1(j).array();
    return g->from_values(e.matrix());
}

/// Largest pointwise quotient |N(node)| / ((1+|y|) |2-jet of xi|^2 (node)),
/// the shape of the pointwise quadratic bound. Nodes where the jet (and
/// hence N) vanishes to machine precision are skipped.
inline double pointwise_N_ratio(double a, const SpectralField& xi) {
    auto g = padded_grid(xi.tr, xi.basis_w, xi.basis_w);
    const double c = cylinder_radius(a);
    SpectralField v = xi;
    v.c(0) += c;
    const GraphJet j = graph_jet(v, *g);
    require_graph(j.v);
    const Eigen::VectorXd xitt = g->to_values(lap_theta(xi));
    Eigen::ArrayXd nvals = (a - 1.0 / j.v.array().square()) * xitt.array();
    nvals += -a * j.v.array() + 1.0 / j.v.array() + 2.0 * a * (j.v.array() - c);
    nvals += detail::jet_N1(j).array();

    const Eigen::ArrayXd xival = j.v.array() - c;
    Eigen::ArrayXd jet2 = xival.square() + j.p0.array().square() + j.p1.array().square() +
                          j.q.array().square() + j.r00.array().square() +
                          2.0 * j.r01.array().square() + j.r11.array().square() +
                          2.0 * j.t0.array().square() + 2.0 * j.t1.array().square() +
                          j.s.array().square();
    const Eigen::ArrayXd den = (1.0 + g->ysq.array().sqrt()) * jet2;
    const double floor = 1e-13 * (den.maxCoeff() + 1e-300);
    double worst = 0.0;
    for (long p = 0; p < nvals.size(); ++p)
        if (den(p) > floor) worst = std::max(worst, std::abs(nvals(p)) / den(p));
    return worst;
}

/// (max over mode sectors of ||P N(a,xi)||_{0,a}, ||xi||_s^2): the projected
/// quadratic bound; the caller compares lhs against c * rhs.
inline std::pair<double, double> projected_N_bound(double a, const SpectralField& xi,
                                                   const ProjectionSet& ps, int s = 2) {
    CYLFLOW_REQUIRE(a > 0.5 && a < 1.0, "projected_N_bound: a out of band");
    const SpectralField n = N_apply(a, xi);
    double lhs = 0.0;
    for (const char* sector : {"1", "w[", "y[", "yy["}) {
        // tilt modes share the "y[" prefix with the axial ones; project() on
        // "y[" covers both, which only makes the tested bound stronger.
        lhs = std::max(lhs, norm0(ps.project(n, sector), a));
    }
    const double g = sobolev_norm(xi, s, 0.5);
    return {lhs, g * g};
}

/// (||N(a1,x1) - N(a0,x0)||_{0, 1/2}, delta1 (|a1-a0| + ||x1-x0||_s)): the
/// joint Lipschitz modulus on the ball of radius delta1.
inline std::pair<double, double> n_lipschitz(double a0, const SpectralField& xi0, double a1,
                                             const SpectralField& xi1, double delta1, int s = 2) {
    CYLFLOW_REQUIRE(a0 > 0.0 && a0 < 1.0 && a1 > 0.0 && a1 < 1.0, "n_lipschitz: a out of (0,1)");
    if (sobolev_norm(xi0, s, 0.5) > delta1 * (1 + 1e-9) ||
        sobolev_norm(xi1, s, 0.5) > delta1 * (1 + 1e-9))
        throw config_error("n_lipschitz: inputs outside the delta1 ball");
    const double lhs = norm0(N_apply(a1, xi1) - N_apply(a0, xi0), 0.5);
    const double rhs = delta1 * (std::abs(a1 - a0) + sobolev_norm(xi1 - xi0, s, 0.5));
    return {lhs, rhs};
}

struct ConsistencyFit {
    std::vector<double> eps;
    std::vector<double> err;
    double order;
};

/// Central differences of F_value against the gradient pairing; the error
/// decays at second order until it hits the quadrature floor.
inline ConsistencyFit gradient_consistency(const SpectralField& v, const SpectralField& h,
                                           double a, const std::vector<double>& eps_list) {
    ConsistencyFit out;
    const double pair = gradient_pairing(v, h, a);
    for (double e : eps_list) {
        const double fd = (F_value(v + e * h, a) - F_value(v - e * h, a)) / (2.0 * e);
        out.eps.push_back(e);
        out.err.push_back(std::abs(fd - pair));
    }
    out.order = fit_loglog(out.eps, out.err, 1e-12 * (std::abs(pair) + 1.0)).slope;
    return out;
}

} // namespace cylflow
