#pragma once
// Conversions between the original flow variables (x, t) and the blow-up
// variables (y, tau).  The blow-up factor lambda(t) = (2 int_t^T a)^{1/2} is
// the unique solution of lambda lambda_dot = -a with lambda(T) = 0; the slow
// time tau(t) = int_0^t lambda^{-2} diverges logarithmically at T, so grids
// that need late tau must cluster there (see clustered_time_grid).
//
// Two different objects elsewhere share the letter lambda: the orbit-map
// factor exp(-int a dtau) of the modulation module equals lambda(t(tau)) /
// lambda(0) (verified by a test), while the integrating factor inside the
// bounded-solution ODE grows and is local to that solver.

#include "cylflow/manifold.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cylflow {

struct RescalingState {
    double T = 0.0;
    std::vector<double> t;      // grid on [0, T]; first node 0, last node T
    std::vector<double> a;      // dilation samples on t, all positive
    std::vector<double> lambda; // blow-up factor per node; lambda.back() = 0
    std::vector<double> tau;    // slow time per node; tau.back() = +infinity
};

namespace detail {

// Remaining dilation mass I(t) = int_t^T a on [t_j, t_j + s] under the linear
// interpolant of a: matches the trapezoid accumulation at both endpoints.
inline double mass_model(const RescalingState& rs, int j, double s) {
    const double h = rs.t[j + 1] - rs.t[j];
    const double I_j = 0.5 * rs.lambda[j] * rs.lambda[j];
    return I_j - rs.a[j] * s - 0.5 * (rs.a[j + 1] - rs.a[j]) / h * s * s;
}

// int_0^s dt / (2 I_model) by 5-point Gauss-Legendre; the integrand is smooth
// on every interval except the last, where I vanishes at T.
inline double slow_time_increment(const RescalingState& rs, int j, double s) {
    static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                 0.5384693101056831, 0.9061798459386640};
    static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                 0.4786286704993665, 0.2369268850561891};
    double acc = 0.0;
    for (int q = 0; q < 5; ++q) {
        const double sq = 0.5 * s * (1.0 + gx[q]);
        acc += gw[q] / (2.0 * mass_model(rs, j, sq));
    }
    return 0.5 * s * acc;
}

} // namespace detail

/// Build the rescaling from a sampled dilation path.  The grid must start at
/// 0 and end at T; a must be positive throughout.  lambda comes from backward
/// trapezoid accumulation of 2 int_t^T a, tau from per-interval Gauss
/// quadrature of lambda^{-2} under the same piecewise-linear a, so the two
/// parametrizations are consistent by construction.  tau at T itself is
/// infinite and stored as such.
inline RescalingState build_rescaling(const std::vector<double>& t, const std::vector<double>& a,
                                      double T) {
    if (t.size() != a.size() || t.size() < 3)
        throw config_error("rescaling: need >= 3 aligned nodes");
    if (t.front() != 0.0) throw config_error("rescaling: grid must start at t = 0");
    if (!(T > 0.0) || std::fabs(t.back() - T) > 1e-12 * std::max(1.0, T))
        throw config_error("rescaling: grid must end at the blow-up time T > 0");
    double a_max = 0.0;
    for (size_t j = 0; j < t.size(); ++j) {
        if (j > 0 && !(t[j] > t[j - 1])) throw config_error("rescaling: t grid not increasing");
        if (!(a[j] > 0.0)) throw config_error("rescaling: dilation a must be positive");
        a_max = std::max(a_max, a[j]);
    }

    RescalingState rs;
    rs.T = T;
    rs.t = t;
    rs.a = a;
    const int m = static_cast<int>(t.size());
    rs.lambda.assign(m, 0.0);
    double I = 0.0;
    for (int j = m - 2; j >= 0; --j) {
        I += 0.5 * (t[j + 1] - t[j]) * (a[j] + a[j + 1]);
        rs.lambda[j] = std::sqrt(2.0 * I);
    }

    rs.tau.assign(m, 0.0);
    for (int j = 0; j + 2 < m; ++j)
        rs.tau[j + 1] = rs.tau[j] + detail::slow_time_increment(rs, j, t[j + 1] - t[j]);
    rs.tau[m - 1] = std::numeric_limits<double>::infinity();

    // cross-check lambda lambda_dot = -a in the discrete form the
    // accumulation must reproduce exactly; catches ordering or sign slips,
    // while the closed-form oracle tests pin the formula itself
    for (int j = 0; j + 1 < m; ++j) {
        const double lhs = 0.5 * (rs.lambda[j + 1] * rs.lambda[j + 1] - rs.lambda[j] * rs.lambda[j]) /
                           (t[j + 1] - t[j]);
        CYLFLOW_REQUIRE(std::fabs(lhs + 0.5 * (a[j] + a[j + 1])) <= 1e-8 * (1.0 + a_max),
                        "rescaling: lambda ODE residual above tolerance");
    }
    return rs;
}

/// lambda at any t in [0, T], continuous through lambda(T) = 0.
inline double lambda_of(const RescalingState& rs, double t) {
    CYLFLOW_REQUIRE(t >= rs.t.front() && t <= rs.T, "rescaling: t outside [0, T]");
    const int j = detail::locate(rs.t, t);
    return std::sqrt(std::max(0.0, 2.0 * detail::mass_model(rs, j, t - rs.t[j])));
}

inline double a_of_t(const RescalingState& rs, double t) {
    CYLFLOW_REQUIRE(t >= rs.t.front() && t <= rs.T, "rescaling: t outside [0, T]");
    const int j = detail::locate(rs.t, t);
    const double w = (t - rs.t[j]) / (rs.t[j + 1] - rs.t[j]);
    return (1.0 - w) * rs.a[j] + w * rs.a[j + 1];
}

/// Slow time of t.  Only defined up to the second-to-last node: past it the
/// remaining quadrature interval touches the blow-up and the caller should
/// refine the grid instead.
inline double tau_of(const RescalingState& rs, double t) {
    const int m = static_cast<int>(rs.t.size());
    if (!(t >= 0.0 && t <= rs.t[m - 2]))
        throw config_error("rescaling: t beyond the resolved range (refine the grid toward T)");
    const int j = detail::locate(rs.t, std::min(t, rs.t[m - 2]));
    return rs.tau[j] + detail::slow_time_increment(rs, j, t - rs.t[j]);
}

/// Inverse of tau_of by bisection on the same quadrature model, so the
/// composition is the identity to solver precision.
inline double t_of(const RescalingState& rs, double tau) {
    const int m = static_cast<int>(rs.t.size());
    CYLFLOW_REQUIRE(tau >= 0.0 && tau <= rs.tau[m - 2], "rescaling: tau beyond the resolved range");
    const int j = detail::locate(rs.tau, tau);
    double lo = 0.0, hi = rs.t[j + 1] - rs.t[j];
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rs.tau[j] + detail::slow_time_increment(rs, j, mid) < tau ? lo : hi) = mid;
    }
    return rs.t[j] + 0.5 * (lo + hi);
}

/// t-grid with geometric clustering at the blow-up time: the gap T - t
/// shrinks by the factor q per node, which keeps the per-interval error of
/// the log-divergent tau quadrature uniform.
inline std::vector<double> clustered_time_grid(double T, int n, double q = 0.9) {
    CYLFLOW_REQUIRE(T > 0.0 && n >= 3 && q > 0.0 && q < 1.0, "clustered_time_grid: bad controls");
    std::vector<double> t(n);
    for (int j = 0; j + 1 < n; ++j) t[j] = T * (1.0 - std::pow(q, j));
    t[n - 1] = T;
    return t;
}

/// Rotation moving the cylinder axis: exponential of the antisymmetric
/// generator that pairs axis direction i with transversal direction l at
/// angle g_tilt(l, i).  Ambient coordinates are (axis..., transversal 2).
inline Eigen::MatrixXd tilt_rotation(const SymmetryParams& s) {
    const int na = s.n_axis();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(na + 2, na + 2);
    for (int i = 0; i < na; ++i)
        for (int l = 0; l < 2; ++l) {
            A(na + l, i) = s.g_tilt(l, i);
            A(i, na + l) = -s.g_tilt(l, i);
        }
    return A.exp();
}

struct ReconstructedSlice {
    double t = 0.0;
    double tau = 0.0;
    double lambda = 0.0;
    SymmetryParams sigma;   // path parameters interpolated at tau
    Eigen::MatrixXd g;      // tilt_rotation(sigma)
    Eigen::MatrixXd points; // n_points x (n_axis + 2) ambient surface samples
    Eigen::VectorXd radius; // graph value sqrt(k/a) + xi at the same nodes
    double min_radius = 0.0;
};

namespace detail {

inline SymmetryParams sigma_blend(const SymmetryParams& p, const SymmetryParams& q, double w) {
    SymmetryParams s = p;
    s.g_tilt = (1.0 - w) * p.g_tilt + w * q.g_tilt;
    s.z = (1.0 - w) * p.z + w * q.z;
    s.a = (1.0 - w) * p.a + w * q.a;
    return s;
}

} // namespace detail

/// Sample the unrescaled surface X = lambda g (y, (sqrt(k/a) + xi) omega)
/// + (0, z) at the requested times.  Path data is interpolated linearly in
/// tau; sample nodes are the spectral quadrature nodes of the stored fields.
/// min_radius flags loss of graphicality (the map is still evaluated).
inline std::vector<ReconstructedSlice> reconstruct_flow(const FlowPath& path,
                                                        const RescalingState& rs,
                                                        const std::vector<double>& ts) {
    path.require_consistent();
    const Trunc& tr = path.xi.front().tr;
    const double w = path.xi.front().basis_w;
    auto quad = Quadrature::shared(tr, w, w);
    const int np = static_cast<int>(quad->Wflat.size());

    std::vector<ReconstructedSlice> out;
    out.reserve(ts.size());
    for (double t : ts) {
        const double tau = tau_of(rs, t);
        if (!(tau >= path.taus.front() - 1e-12 && tau <= path.taus.back() + 1e-12))
            throw config_error("reconstruct_flow: tau(t) outside the stored path range");

        const int k = detail::locate(path.taus, tau);
        const double bw =
            std::clamp((tau - path.taus[k]) / (path.taus[k + 1] - path.taus[k]), 0.0, 1.0);
        ReconstructedSlice sl;
        sl.t = t;
        sl.tau = tau;
        sl.lambda = lambda_of(rs, t);
        sl.sigma = detail::sigma_blend(path.sigma[k], path.sigma[k + 1], bw);
        sl.g = tilt_rotation(sl.sigma);

        const SpectralField xi = (1.0 - bw) * path.xi[k] + bw * path.xi[k + 1];
        sl.radius = quad->to_values(xi).array() + cylinder_radius(sl.sigma.a);
        sl.min_radius = sl.radius.minCoeff();

        sl.points.resize(np, tr.n_axis + 2);
        Eigen::VectorXd u(tr.n_axis + 2);
        for (int p = 0; p < np; ++p) {
            const double th = quad->thetas(p % quad->n_theta);
            for (int i = 0; i < tr.n_axis; ++i) u(i) = quad->ycoord(p, i);
            u(tr.n_axis) = sl.radius(p) * std::cos(th);
            u(tr.n_axis + 1) = sl.radius(p) * std::sin(th);
            Eigen::VectorXd X = sl.lambda * (sl.g * u);
            X(tr.n_axis) += sl.sigma.z(0);
            X(tr.n_axis + 1) += sl.sigma.z(1);
            sl.points.row(p) = X.transpose();
        }
        out.push_back(std::move(sl));
    }
    return out;
}

struct TangentFlow {
    SymmetryParams sigma_inf;  // extrapolated limit of the parameter path
    double radius = 0.0;       // limiting cylinder radius sqrt(k / a_inf)
    double fit_residual = 0.0; // worst RMS misfit of the <tau>^{-1} tail model
    double drift_bound = 0.0;  // (pi/2) sup |sigma_dot| <tau>^2 along the path
};

/// Limit of the parameter path: each sigma component is extrapolated by the
/// model c_inf + B <tau>^{-1} fitted on the tail half of the grid.  A tail
/// that moves but does not fit the model is reported as divergence.  The
/// limit must stay within the dissipation budget integral |sigma_dot| <=
/// (pi/2) sup |sigma_dot| <tau>^2 of the starting point (doubled for
/// extrapolation slack), which is how "the path returns to sigma(0)" is
/// certified without outside constants.
inline TangentFlow tangent_flow_limit(const FlowPath& path) {
    path.require_consistent();
    const int m = path.size();
    CYLFLOW_REQUIRE(m >= 8 && path.taus.back() >= 4.0,
                    "tangent_flow_limit: path too short for a tail fit");
    const int na = path.sigma.front().n_axis();
    const int nc = 2 * na + 3; // tilt block, z, a
    auto comp = [&](const SymmetryParams& s, int c) -> double {
        if (c < 2 * na) return s.g_tilt(c % 2, c / 2);
        if (c < 2 * na + 2) return s.z(c - 2 * na);
        return s.a;
    };

    int k0 = 0;
    while (path.taus[k0] < 0.5 * path.taus.back()) ++k0;
    const int n = m - k0;

    TangentFlow tf;
    tf.sigma_inf = path.sigma.back();
    double scale = 0.0;
    for (int k = 0; k < m; ++k) scale = std::max(scale, path.sigma_dot[k].norm());
    for (int c = 0; c < nc; ++c) {
        double x1 = 0, x2 = 0, xy = 0, y1 = 0, vlo = 1e300, vhi = -1e300;
        for (int k = k0; k < m; ++k) {
            const double x = 1.0 / std::sqrt(1.0 + path.taus[k] * path.taus[k]);
            const double y = comp(path.sigma[k], c);
            x1 += x; x2 += x * x; xy += x * y; y1 += y;
            vlo = std::min(vlo, y); vhi = std::max(vhi, y);
        }
        const double floor = 1e-13 * (1.0 + std::fabs(y1 / n));
        if (vhi - vlo <= floor) continue; // component already settled: keep the last value
        const double det = n * x2 - x1 * x1;
        const double c_inf = (x2 * y1 - x1 * xy) / det;
        const double slope = (n * xy - x1 * y1) / det;
        double rss = 0.0;
        for (int k = k0; k < m; ++k) {
            const double x = 1.0 / std::sqrt(1.0 + path.taus[k] * path.taus[k]);
            const double r = comp(path.sigma[k], c) - c_inf - slope * x;
            rss += r * r;
        }
        const double rms = std::sqrt(rss / n);
        tf.fit_residual = std::max(tf.fit_residual, rms);
        // the RMS of any bounded residual is at most half the span, so the
        // cut sits at half of that again: a tail the model explains poorly
        if (rms > 0.25 * (vhi - vlo))
            throw divergence_error("tangent_flow_limit: sigma tail does not follow the "
                                   "<tau>^{-1} envelope");
        if (c < 2 * na) tf.sigma_inf.g_tilt(c % 2, c / 2) = c_inf;
        else if (c < 2 * na + 2) tf.sigma_inf.z(c - 2 * na) = c_inf;
        else tf.sigma_inf.a = c_inf;
    }
    CYLFLOW_REQUIRE(tf.sigma_inf.a > 0.0, "tangent_flow_limit: nonpositive limiting dilation");
    tf.radius = cylinder_radius(tf.sigma_inf.a);

    double S = 0.0;
    for (int k = 0; k < m; ++k)
        S = std::max(S, path.sigma_dot[k].norm() * (1.0 + path.taus[k] * path.taus[k]));
    tf.drift_bound = 0.5 * M_PI * S;
    CYLFLOW_REQUIRE(sigma_distance(tf.sigma_inf, path.sigma.front()) <=
                        2.0 * tf.drift_bound + 1e-14,
                    "tangent_flow_limit: limit drifted beyond the dissipation budget");
    return tf;
}

} // namespace cylflow
