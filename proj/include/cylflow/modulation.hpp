#pragma once
// Symmetry parameters sigma = (g, z, a), the orbit map W(sigma) whose
// derivative spans the constraint modes, and the modulation vector fields
// that keep the graph perturbation orthogonal to those modes.

#include "cylflow/nonlinearity.hpp"
#include "cylflow/operator.hpp"

#include <cmath>
#include <string>

namespace cylflow {

/// (g, z, a): tilt block of the rotation (row l multiplies omega^l, column j
/// multiplies y^j), transverse translation z in R^2, dilation a > 0.
struct SymmetryParams {
    Eigen::MatrixXd g_tilt; // 2 x n_axis
    Eigen::VectorXd z;      // size 2
    double a = 1.0;

    static SymmetryParams identity(int n_axis, double a0) {
        SymmetryParams s;
        s.g_tilt = Eigen::MatrixXd::Zero(2, n_axis);
        s.z = Eigen::VectorXd::Zero(2);
        s.a = a0;
        return s;
    }

    int n_axis() const { return static_cast<int>(g_tilt.cols()); }
};

/// Tangent vector at sigma; also the value type of the modulation equations.
struct ModulationVector {
    Eigen::MatrixXd dg_tilt;
    Eigen::VectorXd dz;
    double da = 0.0;

    static ModulationVector zero(int n_axis) {
        ModulationVector v;
        v.dg_tilt = Eigen::MatrixXd::Zero(2, n_axis);
        v.dz = Eigen::VectorXd::Zero(2);
        return v;
    }

    double norm() const {
        return std::sqrt(dg_tilt.squaredNorm() + dz.squaredNorm() + da * da);
    }

    bool finite() const {
        return dg_tilt.allFinite() && dz.allFinite() && std::isfinite(da);
    }

    ModulationVector operator+(const ModulationVector& o) const {
        ModulationVector v = *this;
        v.dg_tilt += o.dg_tilt;
        v.dz += o.dz;
        v.da += o.da;
        return v;
    }
    ModulationVector operator-(const ModulationVector& o) const {
        ModulationVector v = *this;
        v.dg_tilt -= o.dg_tilt;
        v.dz -= o.dz;
        v.da -= o.da;
        return v;
    }
    friend ModulationVector operator*(double s, const ModulationVector& o) {
        ModulationVector v = o;
        v.dg_tilt *= s;
        v.dz *= s;
        v.da *= s;
        return v;
    }
};

/// Pointwise admissibility: a > 0 and |z| / lambda < sqrt(1/a), so the
/// translated cylinder still graphs over the fixed axis.
inline void check_admissible(const SymmetryParams& s, double lambda) {
    if (!(s.a > 0.0)) throw config_error("symmetry parameters: a must be positive");
    if (!(lambda > 0.0)) throw config_error("symmetry parameters: lambda must be positive");
    if (!(s.z.norm() / lambda < std::sqrt(1.0 / s.a)))
        throw config_error("symmetry parameters: |z|/lambda exceeds the cylinder radius");
}

namespace detail {

inline void add_linear_mode(SpectralField& u, int axis, int f, double v) {
    if (u.tr.n_axis == 1) u.at(1, f) += v;
    else if (axis == 0) u.at(1, 0, f) += v;
    else u.at(0, 1, f) += v;
}

} // namespace detail

/// The symmetry orbit through the cylinder, to first order in (g, z):
///   W(sigma) = 1/sqrt(a) + sum_{l,j} g_{l,j} y^j omega^l + lambda^{-1} z_l omega^l.
/// Fourier slots: omega^1 = cos theta (f = 1), omega^2 = sin theta (f = 2).
inline SpectralField W_eval(const Trunc& tr, double basis_w, const SymmetryParams& s,
                            double lambda) {
    check_admissible(s, lambda);
    CYLFLOW_REQUIRE(s.n_axis() == tr.n_axis, "W_eval: axis count mismatch");
    SpectralField u(tr, basis_w);
    u.c(0) = 1.0 / std::sqrt(s.a);
    for (int l = 0; l < 2; ++l) {
        u.c(1 + l) += s.z(l) / lambda;
        for (int j = 0; j < tr.n_axis; ++j)
            detail::add_linear_mode(u, j, 1 + l, s.g_tilt(l, j));
    }
    return u;
}

/// Directional derivative of W_eval in sigma along ds, holding the explicit
/// lambda(tau) dependence fixed.  Lands exactly in the span of the constant,
/// omega^l, and y^j omega^l modes.
///
/// Unlike W_eval this does not bound |z|/lambda: along a converging flow z
/// tends to a nonzero offset while lambda shrinks, yet dz scales with lambda,
/// so the drive dz/lambda stays bounded even though the orbit map itself has
/// left its graph window.
inline SpectralField dW_eval(const Trunc& tr, double basis_w, const SymmetryParams& s,
                             const ModulationVector& ds, double lambda) {
    if (!(s.a > 0.0)) throw config_error("symmetry parameters: a must be positive");
    if (!(lambda > 0.0)) throw config_error("symmetry parameters: lambda must be positive");
    CYLFLOW_REQUIRE(s.n_axis() == tr.n_axis, "dW_eval: axis count mismatch");
    SpectralField u(tr, basis_w);
    u.c(0) = -0.5 * std::pow(s.a, -1.5) * ds.da;
    for (int l = 0; l < 2; ++l) {
        u.c(1 + l) += ds.dz(l) / lambda;
        for (int j = 0; j < tr.n_axis; ++j)
            detail::add_linear_mode(u, j, 1 + l, ds.dg_tilt(l, j));
    }
    return u;
}

namespace detail {

/// True for the broken-symmetry (constraint) modes: the scaling direction,
/// the transverse translations, and the tilts.  The axial translations and
/// quadratic directions are handled by the boundary-value components instead.
inline bool is_constraint_mode(const std::string& label) {
    return label == "1" || label.find("w[") != std::string::npos;
}

/// (|y|^2 / 2) u, exact in coefficient space; u must have degree headroom 2.
inline SpectralField half_ysq_mul(const SpectralField& u) {
    SpectralField out(u.tr, u.basis_w);
    for (int i = 0; i < u.tr.n_axis; ++i) out = out + mul_y(mul_y(u, i), i);
    return 0.5 * out;
}

} // namespace detail

/// Right-hand side of the modulation equations, split into the part linear in
/// xi with sigma-only coefficients and the remainder (nonlinearity plus the
/// drift corrections that carry the previous da iterate).
struct ModulationRhs {
    ModulationVector linear;
    ModulationVector nonlinear;
    ModulationVector total; // linear + nonlinear, same code path
};

/// The xi-linear part alone: 2a <xi, S>_a / ||S||^2_a for the scaling and
/// translation modes, zero for the tilts.  This is the vector field applied
/// to the updated perturbation inside the frozen-coefficient solve.
inline ModulationVector modulation_linear(const SymmetryParams& s, const SpectralField& xi,
                                          const ProjectionSet& ps) {
    CYLFLOW_REQUIRE(std::fabs(ps.a - s.a) <= 1e-12 * (1.0 + std::fabs(s.a)),
                    "modulation_linear: modes not built at the current a");
    auto out = ModulationVector::zero(xi.tr.n_axis);
    for (const auto& md : ps.modes) {
        if (!detail::is_constraint_mode(md.label) || md.label[0] == 'y') continue;
        const double v = 2.0 * s.a * inner_product(xi, md.field, s.a) / md.norm_sq;
        if (md.label == "1") out.da = v;
        else out.dz(md.label[2] - '1') = v;
    }
    return out;
}

/// Solve the three constraint equations for (dg, dz, da).  Each entry is a
/// ratio of weighted inner products against one constraint mode S with
/// eigenvalue lam_S:
///
///   <S, S>_a sdot_S = -lam_S <xi, S>_a - <N(a, xi), S>_a
///                     + <xi, dtau S>_a - da <xi, (|y|^2/2) S>_a
///
/// where dtau S is -(3/(2a)) da S for the scaling mode (chain rule through a)
/// and +a S for the translations (explicit lambda drift), and the last term
/// is the drift of the weight itself.  With these terms the inner products
/// <xi, S>_a are exactly conserved by the continuous dynamics.  Only da feeds
/// back into the drift terms, so the sweep is a scalar fixed point; it is
/// iterated to machine convergence (contraction factor is O(||xi||_0)).
inline ModulationRhs modulation_rhs(const SymmetryParams& s, const SpectralField& xi,
                                    const ProjectionSet& ps) {
    CYLFLOW_REQUIRE(std::fabs(ps.a - s.a) <= 1e-12 * (1.0 + std::fabs(s.a)),
                    "modulation_rhs: modes not built at the current a");
    const int n_axis = xi.tr.n_axis;
    const double a = s.a;
    const SpectralField N = N_apply(a, xi);

    struct Row {
        const EigenMode* md;
        double xi_S, N_S, drift_w;
    };
    std::vector<Row> rows;
    for (const auto& md : ps.modes) {
        if (!detail::is_constraint_mode(md.label)) continue;
        rows.push_back({&md, inner_product(xi, md.field, a), inner_product(N, md.field, a),
                        inner_product(xi, detail::half_ysq_mul(md.field), a)});
    }

    ModulationRhs rhs;
    double da_prev = 0.0;
    for (int pass = 0; pass < 16; ++pass) {
        rhs.linear = ModulationVector::zero(n_axis);
        rhs.nonlinear = ModulationVector::zero(n_axis);
        for (const auto& row : rows) {
            const auto& md = *row.md;
            const double lin = -md.eigenvalue * row.xi_S +
                               (md.label[0] == 'w' ? a * row.xi_S : 0.0);
            double nl = -row.N_S - da_prev * row.drift_w;
            if (md.label == "1") nl += -1.5 / a * da_prev * row.xi_S;
            const double lin_v = lin / md.norm_sq;
            const double nl_v = nl / md.norm_sq;
            if (md.label == "1") {
                rhs.linear.da = lin_v;
                rhs.nonlinear.da = nl_v;
            } else if (md.label[0] == 'w') {
                const int l = md.label[2] - '1';
                rhs.linear.dz(l) = lin_v;
                rhs.nonlinear.dz(l) = nl_v;
            } else { // y[i]w[l]
                const int i = md.label[2] - '0';
                const int l = md.label[6] - '1';
                rhs.linear.dg_tilt(l, i) = lin_v;
                rhs.nonlinear.dg_tilt(l, i) = nl_v;
            }
        }
        rhs.total = rhs.linear + rhs.nonlinear;
        const bool done =
            std::fabs(rhs.total.da - da_prev) <= 1e-15 * (1.0 + std::fabs(rhs.total.da));
        da_prev = rhs.total.da;
        if (done) break;
    }
    if (!rhs.total.finite()) throw divergence_error("modulation right-hand side not finite");
    return rhs;
}

/// max over the constraint modes of |<xi, S>_a| / ||S||_{0,a}.
inline double orthogonality_residual(const SpectralField& xi, const ProjectionSet& ps) {
    double r = 0.0;
    for (const auto& md : ps.modes) {
        if (!detail::is_constraint_mode(md.label)) continue;
        r = std::max(r, std::fabs(inner_product(xi, md.field, ps.a)) / std::sqrt(md.norm_sq));
    }
    return r;
}

/// Projection onto the constraint span only (the solver's Q removes these
/// while the axial and quadratic components evolve by their own equations).
inline SpectralField constraint_project(const SpectralField& u, const ProjectionSet& ps) {
    SpectralField out(u.tr, u.basis_w);
    for (int m = 0; m < ps.count(); ++m)
        if (detail::is_constraint_mode(ps.modes[m].label))
            out = out + ps.coefficient(u, m) * ps.modes[m].field;
    return out;
}

} // namespace cylflow
