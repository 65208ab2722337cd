#pragma once

#include <cmath>

#include "cylflow/grid.hpp"

namespace cylflow {

/// <u, v>_a = integral of u v against e^{-a |y|^2/2} dy dtheta.
/// Quadrature is exact here: both factors are band-limited, and the default
/// grid sizes leave room for one extra |y|^2 factor (weight-drift pairings).
inline double inner_product(const SpectralField& u, const SpectralField& v, double a) {
    CYLFLOW_REQUIRE(u.compatible(v), "inner_product: incompatible fields");
    auto g = Quadrature::shared(u.tr, u.basis_w, a);
    return g->ip_values(g->to_values(u), g->to_values(v));
}

inline double norm0(const SpectralField& u, double a) {
    auto g = Quadrature::shared(u.tr, u.basis_w, a);
    const Eigen::VectorXd vals = g->to_values(u);
    return std::sqrt(std::max(0.0, g->ip_values(vals, vals)));
}

namespace detail {
template <class Fn>
inline void for_each_derivative_word(int dims, int max_order, Fn&& fn) {
    // multi-indices d in N^dims with |d| <= max_order
    std::vector<int> d(dims, 0);
    while (true) {
        int total = 0;
        for (int x : d) total += x;
        if (total <= max_order) fn(d);
        int i = 0;
        while (i < dims) {
            if (++d[i] <= max_order) break;
            d[i] = 0;
            ++i;
        }
        if (i == dims) return;
    }
}
} // namespace detail

/// Weighted Sobolev norm: sum over all mixed derivatives of total order <= s
/// (axis and angular), each measured in the weighted L^2 norm at parameter a.
inline double sobolev_norm(const SpectralField& u, int s, double a) {
    CYLFLOW_REQUIRE(s >= 0, "sobolev_norm: s must be >= 0");
    auto g = Quadrature::shared(u.tr, u.basis_w, a);
    double total = 0.0;
    detail::for_each_derivative_word(u.tr.n_axis + 1, s, [&](const std::vector<int>& d) {
        SpectralField v = u;
        for (int ax = 0; ax < u.tr.n_axis; ++ax)
            for (int rep = 0; rep < d[ax]; ++rep) v = dy(v, ax);
        for (int rep = 0; rep < d[u.tr.n_axis]; ++rep) v = dtheta(v);
        const Eigen::VectorXd vals = g->to_values(v);
        total += g->ip_values(vals, vals);
    });
    return std::sqrt(std::max(0.0, total));
}

inline double pivot_weight(double delta) { return 0.5 - 4.0 * delta; }

/// Norm at the fixed pivot weight b = 1/2 - 4 delta, the widest space the
/// estimates pass through.
inline double pivot_norm(const SpectralField& u, int s, double delta) {
    return sobolev_norm(u, s, pivot_weight(delta));
}

struct InterpBound {
    double lhs;      // ||u||_s at the reference weight 1/2
    double rhs;      // c^{1/6} g^{2/3} with g = ||u||_{s,a}
    double pivot_sq; // ||u||_{s,b}^2, must be <= c for the bound to apply
    bool ok;
};

/// Interpolation bound between the drifting weight a in [1/2, 1/2 + 2 delta]
/// and the pivot: ||u||_s <= c^{1/6} ||u||_{s,a}^{2/3} whenever the pivot
/// square norm is at most c. Holder with exponents (3/2, 3) applied to
/// rho_{1/2} = rho_a^{2/3} rho_{3/2-2a}^{1/3}; the constraint on a keeps
/// 3/2 - 2a above the pivot weight.
inline InterpBound interpolation_check(const SpectralField& u, int s, double a, double delta,
                                       double c) {
    CYLFLOW_REQUIRE(a >= 0.5 && a <= 0.5 + 2.0 * delta + 1e-12,
                    "interpolation_check: a outside [1/2, 1/2 + 2 delta]");
    InterpBound out;
    out.pivot_sq = std::pow(pivot_norm(u, s, delta), 2);
    CYLFLOW_REQUIRE(out.pivot_sq <= c * (1.0 + 1e-12),
                    "interpolation_check: pivot norm exceeds c");
    out.lhs = sobolev_norm(u, s, 0.5);
    const double g = sobolev_norm(u, s, a);
    out.rhs = std::pow(c, 1.0 / 6.0) * std::pow(g, 2.0 / 3.0);
    out.ok = out.lhs <= out.rhs * (1.0 + 1e-10);
    return out;
}

} // namespace cylflow
