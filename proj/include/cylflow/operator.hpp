#pragma once

#include <string>
#include <vector>

#include "cylflow/space.hpp"

namespace cylflow {

/// Linearization around the cylinder of radius sqrt(k/a), k = 1 (one angular
/// factor): L(a) = -Delta_y + a y.grad_y - a Delta_theta - 2a.
/// On the Hermite(a) x Fourier lattice it is diagonal with eigenvalue
/// lambda(alpha, m) = a (|alpha| + m^2 - 2). In the fixed computational basis
/// Hermite(w) the diagonal is the same and the parameter mismatch adds a
/// strictly degree-lowering coupling, so the operator maps the truncation to
/// itself and its truncated spectrum is exact.
inline double lattice_eigenvalue(double a, int alpha_total, int m) {
    return a * (alpha_total + m * m - 2);
}

inline SpectralField apply_L(const SpectralField& u, double a) {
    CYLFLOW_REQUIRE(a > 0.0, "apply_L: a must be positive");
    const double w = u.basis_w;
    SpectralField out(u.tr, w);
    for_each_index(u.tr, [&](int idx, int a0, int a1, int f) {
        const int m = fourier_m(f);
        double v = lattice_eigenvalue(a, a0 + a1, m) * u.c(idx);
        // (-d^2/dy^2 + a y d/dy) P_m = a m P_m + (m+1)(m+2)(a/w - 1) P_{m+2},
        // read backwards: index (a0, f) receives from (a0+2, f).
        if (a0 + 2 <= u.tr.deg) {
            const int src = u.tr.n_axis == 1 ? u.idx(a0 + 2, f) : u.idx(a0 + 2, a1, f);
            v += (a0 + 1) * (a0 + 2) * (a / w - 1.0) * u.c(src);
        }
        if (u.tr.n_axis == 2 && a1 + 2 <= u.tr.deg)
            v += (a1 + 1) * (a1 + 2) * (a / w - 1.0) * u.c(u.idx(a0, a1 + 2, f));
        out.c(idx) = v;
    });
    return out;
}

/// One explicit direction of the non-stable spectrum.
struct EigenMode {
    std::string label;
    double eigenvalue;
    SpectralField field;
    double norm_sq; // ||field||_{0,a}^2, closed form
};

/// The zero and unstable directions at weight a: the scaling direction
/// (constant), transverse translations (omega^l), the axial directions (y_i),
/// tilts (y_i omega^l), and the quadratic directions (a y_i y_j - delta_ij).
/// All are distinct lattice points of the Hermite(a) x Fourier basis, hence
/// mutually orthogonal under <.,.>_a; projections are plain Fourier quotients.
class ProjectionSet {
public:
    double a;
    double lambda_w; // prefactor carried by the translation modes
    Trunc tr;
    double basis_w;
    std::vector<EigenMode> modes;

    ProjectionSet(const Trunc& t, double w, double a_, double lambda_w_ = 1.0)
        : a(a_), lambda_w(lambda_w_), tr(t), basis_w(w) {
        CYLFLOW_REQUIRE(a > 0.0 && lambda_w > 0.0, "ProjectionSet: bad parameters");
        CYLFLOW_REQUIRE(t.deg >= 2 && t.band >= 1, "ProjectionSet: truncation too small");
        const double Z = std::pow(2.0 * M_PI / a, 0.5 * tr.n_axis) * 2.0 * M_PI;

        { // scaling: -(1/2) a^{-3/2} * 1, eigenvalue -2a
            EigenMode md{"1", -2.0 * a, SpectralField(tr, w), 0.25 / (a * a * a) * Z};
            md.field.c(0) = -0.5 / (a * std::sqrt(a));
            modes.push_back(std::move(md));
        }
        for (int l = 1; l <= 2; ++l) { // translations: lambda_w^{-1} omega^l, eigenvalue -a
            EigenMode md{"w[" + std::to_string(l) + "]", -a, SpectralField(tr, w),
                         Z / (2.0 * lambda_w * lambda_w)};
            md.field.c(l) = 1.0 / lambda_w;
            modes.push_back(std::move(md));
        }
        for (int i = 0; i < tr.n_axis; ++i) { // axial: y_i / ||y_i||^2, eigenvalue -a
            EigenMode md{"y[" + std::to_string(i) + "]", -a, SpectralField(tr, w), a / Z};
            set_hermite(md.field, i, 1, 0, a / Z);
            modes.push_back(std::move(md));
        }
        for (int i = 0; i < tr.n_axis; ++i) // tilts: y_i omega^l, eigenvalue 0
            for (int l = 1; l <= 2; ++l) {
                EigenMode md{"y[" + std::to_string(i) + "]w[" + std::to_string(l) + "]", 0.0,
                             SpectralField(tr, w), Z / (2.0 * a)};
                set_hermite(md.field, i, 1, l, 1.0);
                modes.push_back(std::move(md));
            }
        for (int i = 0; i < tr.n_axis; ++i) // quadratics: (a y_i y_j - delta_ij)/norm^2
            for (int j = i; j < tr.n_axis; ++j) {
                const double nsq = (i == j ? 2.0 : 1.0) * Z;
                EigenMode md{"yy[" + std::to_string(i) + "," + std::to_string(j) + "]", 0.0,
                             SpectralField(tr, w), 1.0 / nsq};
                if (i == j) {
                    // a y^2 - 1 = a P_2^{(w)}(y) + (a/w - 1)
                    set_hermite(md.field, i, 2, 0, a / nsq);
                    md.field.c(0) += (a / w - 1.0) / nsq;
                } else {
                    md.field.at(1, 1, 0) = a / nsq;
                }
                modes.push_back(std::move(md));
            }
    }

    int count() const { return static_cast<int>(modes.size()); }

    /// Component of u along mode m: <u, S>_a / ||S||^2_a.
    double coefficient(const SpectralField& u, int m) const {
        return inner_product(u, modes[m].field, a) / modes[m].norm_sq;
    }

    /// Orthogonal projection onto the full non-stable span.
    SpectralField project_all(const SpectralField& u) const {
        SpectralField out(tr, basis_w);
        for (int m = 0; m < count(); ++m) out = out + coefficient(u, m) * modes[m].field;
        return out;
    }

    /// Projection onto the modes whose label matches prefix (e.g. "y[", "w[").
    SpectralField project(const SpectralField& u, const std::string& label_prefix) const {
        bool any = false;
        SpectralField out(tr, basis_w);
        for (int m = 0; m < count(); ++m)
            if (modes[m].label.rfind(label_prefix, 0) == 0) {
                any = true;
                out = out + coefficient(u, m) * modes[m].field;
            }
        if (!any) throw config_error("project: unknown mode label " + label_prefix);
        return out;
    }

    SpectralField q_project(const SpectralField& u) const { return u - project_all(u); }

    /// Gram matrix of the normalized modes; its rank is the dimension
    /// actually spanned (reported, not assumed).
    Eigen::MatrixXd gram() const {
        Eigen::MatrixXd G(count(), count());
        for (int i = 0; i < count(); ++i)
            for (int j = 0; j <= i; ++j) {
                const double g = inner_product(modes[i].field, modes[j].field, a) /
                                 std::sqrt(modes[i].norm_sq * modes[j].norm_sq);
                G(i, j) = G(j, i) = g;
            }
        return G;
    }

    int gram_rank(double tol = 1e-8) const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram());
        const double top = es.eigenvalues().cwiseAbs().maxCoeff();
        int r = 0;
        for (int i = 0; i < count(); ++i)
            if (es.eigenvalues()(i) > tol * top) ++r;
        return r;
    }

private:
    void set_hermite(SpectralField& u, int axis, int degree, int f, double v) const {
        if (tr.n_axis == 1) u.at(degree, f) = v;
        else if (axis == 0) u.at(degree, 0, f) = v;
        else u.at(0, degree, f) = v;
    }
};

namespace detail {
/// Map monic Hermite(w) coefficients to monic Hermite(a2) coefficients,
/// axis by axis, via the triangular connection matrices.
inline SpectralField change_hermite_weight(const SpectralField& u, double to_w) {
    const Eigen::MatrixXd C = hermite_connection(u.tr.deg, u.basis_w, to_w);
    SpectralField out(u.tr, u.basis_w); // coefficients relabeled below
    out.basis_w = to_w;
    const int nf = u.tr.nf(), nh = u.tr.nh();
    if (u.tr.n_axis == 1) {
        Eigen::Map<const Eigen::MatrixXd> X(u.c.data(), nf, nh);
        Eigen::Map<Eigen::MatrixXd>(out.c.data(), nf, nh) = X * C.transpose();
    } else {
        Eigen::Map<const Eigen::MatrixXd> X(u.c.data(), nh * nf, nh);
        Eigen::MatrixXd T = X * C.transpose(); // axis 0 transformed
        for (int a0 = 0; a0 < nh; ++a0) {
            Eigen::Map<const Eigen::MatrixXd> Y(T.col(a0).data(), nf, nh);
            Eigen::Map<Eigen::MatrixXd>(out.c.data() + static_cast<long>(a0) * nh * nf, nf, nh) =
                Y * C.transpose();
        }
    }
    return out;
}
} // namespace detail

/// e^{-tau L-bar} on the stable range: transform to the a-adapted basis where
/// L(a) is diagonal, check the non-stable lattice points carry (numerically)
/// nothing, scale by the exact exponentials, transform back.
inline SpectralField propagate_stable(const SpectralField& u, double a, double tau,
                                      double guard_tol = 1e-8) {
    CYLFLOW_REQUIRE(a > 0.0 && tau >= 0.0, "propagate_stable: bad parameters");
    SpectralField d = detail::change_hermite_weight(u, a);
    const double scale_ref = norm0(u, a) + 1e-300;
    for_each_index(d.tr, [&](int idx, int a0, int a1, int f) {
        const int m = fourier_m(f);
        const double lam = lattice_eigenvalue(a, a0 + a1, m);
        if (lam <= 0.0) {
            const double comp =
                std::abs(d.c(idx)) * std::sqrt(basis_norm_sq(d.tr, a, a0, a1, f));
            CYLFLOW_REQUIRE(comp <= guard_tol * scale_ref,
                            "propagate_stable: input has a non-stable component");
            d.c(idx) = 0.0;
        } else {
            d.c(idx) *= std::exp(-tau * lam);
        }
    });
    return detail::change_hermite_weight(d, u.basis_w);
}

/// Dense assembly of L(a) in the normalized basis and its full generalized
/// spectrum at measure a; the oracle the diagonal formula is checked against.
inline Eigen::VectorXd dense_spectrum(const Trunc& tr, double basis_w, double a) {
    const long dim = tr.dim();
    CYLFLOW_REQUIRE(dim <= 3000, "dense_spectrum: truncation too large for dense assembly");
    auto g = Quadrature::shared(tr, basis_w, a);
    const long np = g->n_points();
    Eigen::MatrixXd V(np, dim), LV(np, dim);
    for (long j = 0; j < dim; ++j) {
        SpectralField e(tr, basis_w);
        e.c(j) = 1.0 / g->scale(j);
        V.col(j) = g->to_values(e);
        LV.col(j) = g->to_values(apply_L(e, a));
    }
    Eigen::MatrixXd WV = g->Wflat.asDiagonal() * V;
    Eigen::MatrixXd A = V.transpose() * (g->Wflat.asDiagonal() * LV);
    Eigen::MatrixXd G = V.transpose() * WV;
    A = 0.5 * (A + A.transpose()).eval(); // symmetric analytically; drop roundoff skew
    G = 0.5 * (G + G.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, G);
    CYLFLOW_REQUIRE(es.info() == Eigen::Success, "dense_spectrum: eigensolver failed");
    return es.eigenvalues();
}

} // namespace cylflow
