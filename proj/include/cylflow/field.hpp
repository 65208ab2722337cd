#pragma once

#include <Eigen/Dense>

#include "cylflow/errors.hpp"
#include "cylflow/hermite.hpp"

namespace cylflow {

/// Truncation of the Hermite (x) Fourier basis over R^{n_axis} x S^1:
/// per-axis Hermite degree <= deg, angular band <= band.
struct Trunc {
    int n_axis = 1; // 1 or 2 axis directions
    int deg = 24;   // max Hermite degree per axis
    int band = 8;   // max Fourier mode

    int nh() const { return deg + 1; }
    int nf() const { return 2 * band + 1; }
    int dim() const {
        int d = nf();
        for (int i = 0; i < n_axis; ++i) d *= nh();
        return d;
    }
    bool operator==(const Trunc& o) const {
        return n_axis == o.n_axis && deg == o.deg && band == o.band;
    }
};

/// Angular index convention: f = 0 is the constant, f = 2m-1 is cos(m theta),
/// f = 2m is sin(m theta).
inline int fourier_m(int f) { return (f + 1) / 2; }
inline double fourier_norm_sq(int f) { return f == 0 ? 2.0 * M_PI : M_PI; }
inline double fourier_eval(int f, double theta) {
    if (f == 0) return 1.0;
    const int m = fourier_m(f);
    return (f % 2 == 1) ? std::cos(m * theta) : std::sin(m * theta);
}

/// Coefficients of a function on the cylinder in the monic Hermite basis with
/// Gaussian parameter basis_w per axis, tensored with the Fourier basis.
struct SpectralField {
    Trunc tr;
    double basis_w = 0.5;
    Eigen::VectorXd c;

    SpectralField() = default;
    SpectralField(const Trunc& t, double w) : tr(t), basis_w(w), c(Eigen::VectorXd::Zero(t.dim())) {}

    int idx(int a0, int f) const { return a0 * tr.nf() + f; }
    int idx(int a0, int a1, int f) const { return (a0 * tr.nh() + a1) * tr.nf() + f; }

    double& at(int a0, int f) { return c(idx(a0, f)); }
    double at(int a0, int f) const { return c(idx(a0, f)); }
    double& at(int a0, int a1, int f) { return c(idx(a0, a1, f)); }
    double at(int a0, int a1, int f) const { return c(idx(a0, a1, f)); }

    static SpectralField constant(const Trunc& t, double w, double value) {
        SpectralField out(t, w);
        out.c(0) = value;
        return out;
    }

    bool compatible(const SpectralField& o) const {
        return tr == o.tr && basis_w == o.basis_w;
    }
};

/// Visit every coefficient with its lattice index (alpha per axis, fourier f).
template <class Fn>
inline void for_each_index(const Trunc& tr, Fn&& fn) {
    const int nf = tr.nf();
    if (tr.n_axis == 1) {
        for (int a0 = 0; a0 <= tr.deg; ++a0)
            for (int f = 0; f < nf; ++f) fn(a0 * nf + f, a0, 0, f);
    } else {
        for (int a0 = 0; a0 <= tr.deg; ++a0)
            for (int a1 = 0; a1 <= tr.deg; ++a1)
                for (int f = 0; f < nf; ++f) fn((a0 * tr.nh() + a1) * nf + f, a0, a1, f);
    }
}

/// Square norm of a single basis element at Gaussian parameter w
/// (product of 1d Hermite norms and the angular norm).
inline double basis_norm_sq(const Trunc& tr, double w, int a0, int a1, int f) {
    double v = hermite_norm_sq(a0, w) * fourier_norm_sq(f);
    if (tr.n_axis == 2) v *= hermite_norm_sq(a1, w);
    return v;
}

/// Value of the series at one point of the cylinder.  O(dim) per call; fine
/// for spot checks, use a Quadrature for whole-grid synthesis.
inline double eval_at(const SpectralField& u, double y0, double y1, double theta) {
    const Eigen::VectorXd h0 = hermite_eval(u.tr.deg, u.basis_w, y0);
    const Eigen::VectorXd h1 =
        u.tr.n_axis == 2 ? hermite_eval(u.tr.deg, u.basis_w, y1) : Eigen::VectorXd();
    double v = 0.0;
    for_each_index(u.tr, [&](int idx, int a0, int a1, int f) {
        double t = u.c(idx) * h0(a0) * fourier_eval(f, theta);
        if (u.tr.n_axis == 2) t *= h1(a1);
        v += t;
    });
    return v;
}

/// d/dy_axis in coefficient space: exact, degree drops by one.
inline SpectralField dy(const SpectralField& u, int axis) {
    CYLFLOW_REQUIRE(axis >= 0 && axis < u.tr.n_axis, "dy: bad axis");
    SpectralField out(u.tr, u.basis_w);
    for_each_index(u.tr, [&](int idx, int a0, int a1, int f) {
        const int d = axis == 0 ? a0 : a1;
        if (d == 0) return;
        const int src = idx;
        const int dst = axis == 0 ? (u.tr.n_axis == 1 ? out.idx(a0 - 1, f) : out.idx(a0 - 1, a1, f))
                                  : out.idx(a0, a1 - 1, f);
        out.c(dst) += d * u.c(src);
    });
    return out;
}

/// Multiplication by the coordinate y_axis: y P_m = P_{m+1} + (m/w) P_{m-1}.
/// Degree-raising; coefficients pushed past the truncation are dropped, so the
/// input must have zero top-degree coefficients along the axis for exactness.
inline SpectralField mul_y(const SpectralField& u, int axis) {
    CYLFLOW_REQUIRE(axis >= 0 && axis < u.tr.n_axis, "mul_y: bad axis");
    SpectralField out(u.tr, u.basis_w);
    for_each_index(u.tr, [&](int idx, int a0, int a1, int f) {
        const int d = axis == 0 ? a0 : a1;
        auto dst = [&](int nd) {
            return u.tr.n_axis == 1 ? out.idx(nd, f)
                                    : (axis == 0 ? out.idx(nd, a1, f) : out.idx(a0, nd, f));
        };
        if (d + 1 <= u.tr.deg) out.c(dst(d + 1)) += u.c(idx);
        if (d >= 1) out.c(dst(d - 1)) += (d / u.basis_w) * u.c(idx);
    });
    return out;
}

/// d/dtheta in coefficient space: rotates each cos/sin pair.
inline SpectralField dtheta(const SpectralField& u) {
    SpectralField out(u.tr, u.basis_w);
    for_each_index(u.tr, [&](int idx, int, int, int f) {
        if (f == 0) return;
        const int m = fourier_m(f);
        if (f % 2 == 1) out.c(idx + 1) -= m * u.c(idx); // cos -> -m sin
        else out.c(idx - 1) += m * u.c(idx);            // sin -> m cos
    });
    return out;
}

/// Angular Laplacian: diagonal, eigenvalue -m^2.
inline SpectralField lap_theta(const SpectralField& u) {
    SpectralField out(u.tr, u.basis_w);
    for_each_index(u.tr, [&](int idx, int, int, int f) {
        const int m = fourier_m(f);
        out.c(idx) = -static_cast<double>(m) * m * u.c(idx);
    });
    return out;
}

inline SpectralField operator+(const SpectralField& a, const SpectralField& b) {
    CYLFLOW_REQUIRE(a.compatible(b), "field +: incompatible");
    SpectralField out = a;
    out.c += b.c;
    return out;
}

inline SpectralField operator-(const SpectralField& a, const SpectralField& b) {
    CYLFLOW_REQUIRE(a.compatible(b), "field -: incompatible");
    SpectralField out = a;
    out.c -= b.c;
    return out;
}

inline SpectralField operator*(double s, const SpectralField& a) {
    SpectralField out = a;
    out.c *= s;
    return out;
}

} // namespace cylflow
