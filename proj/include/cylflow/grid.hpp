#pragma once

#include <memory>
#include <unordered_map>

#include <Eigen/Dense>

#include "cylflow/field.hpp"

namespace cylflow {

/// Tensor quadrature over R^{n_axis} x S^1 against the measure
/// e^{-a |y|^2 / 2} dy dtheta, together with synthesis/analysis tables for
/// the Hermite(basis_w) x Fourier basis of a given truncation.
///
/// Synthesis (to_values) is exact for any a. Analysis (from_values) uses the
/// orthogonality of the basis and therefore requires a == basis_w; it is the
/// exact inverse of synthesis when Q > deg and n_theta > 2 band.
class Quadrature {
public:
    Trunc tr;
    double basis_w;
    double a;
    int Q;
    int n_theta;

    Quad1D axis;               // nodes/weights for e^{-a y^2/2} dy
    Eigen::VectorXd thetas;    // equispaced on [0, 2 pi)
    double theta_w;            // 2 pi / n_theta
    // Tables use the L^2-normalized basis: monic values at high degree span
    // many orders of magnitude, and analysis through them loses digits to
    // cancellation. Coefficients are scaled diagonally at the boundary.
    Eigen::MatrixXd B;         // B(q, n) = P_n^{(basis_w)}(y_q) / ||P_n||, Q x (deg+1)
    Eigen::MatrixXd Trig;      // Trig(j, f) = trig_f(theta_j) / ||trig_f||, n_theta x nf
    Eigen::MatrixXd Bw;        // analysis table: weights(q) B(q,n)
    Eigen::MatrixXd Trigw;     // theta_w Trig(j,f)
    Eigen::VectorXd scale;     // monic -> normalized coefficient scaling, per index
    Eigen::VectorXd Wflat;     // full quadrature weight per flattened point
    Eigen::VectorXd ysq;       // |y|^2 per flattened point
    Eigen::MatrixXd ycoord;    // n_points x n_axis node coordinates

    Quadrature(const Trunc& t, double w, double a_, int Q_, int n_theta_)
        : tr(t), basis_w(w), a(a_), Q(Q_), n_theta(n_theta_) {
        CYLFLOW_REQUIRE(tr.n_axis == 1 || tr.n_axis == 2, "Quadrature: n_axis must be 1 or 2");
        axis = gauss_hermite(Q, a);
        thetas.resize(n_theta);
        for (int j = 0; j < n_theta; ++j) thetas(j) = 2.0 * M_PI * j / n_theta;
        theta_w = 2.0 * M_PI / n_theta;

        B.resize(Q, tr.nh());
        for (int q = 0; q < Q; ++q) B.row(q) = hermite_eval(tr.deg, basis_w, axis.nodes(q)).transpose();
        for (int n = 0; n <= tr.deg; ++n) B.col(n) /= std::sqrt(hermite_norm_sq(n, basis_w));
        Trig.resize(n_theta, tr.nf());
        for (int j = 0; j < n_theta; ++j)
            for (int f = 0; f < tr.nf(); ++f)
                Trig(j, f) = fourier_eval(f, thetas(j)) / std::sqrt(fourier_norm_sq(f));

        Bw = axis.weights.asDiagonal() * B;
        Trigw = theta_w * Trig;

        scale.resize(tr.dim());
        for_each_index(tr, [&](int idx, int a0, int a1, int f) {
            scale(idx) = std::sqrt(basis_norm_sq(tr, basis_w, a0, a1, f));
        });

        const int np = n_points();
        Wflat.resize(np);
        ysq.resize(np);
        ycoord.resize(np, tr.n_axis);
        if (tr.n_axis == 1) {
            for (int q = 0; q < Q; ++q)
                for (int j = 0; j < n_theta; ++j) {
                    const int p = q * n_theta + j;
                    Wflat(p) = axis.weights(q) * theta_w;
                    ysq(p) = axis.nodes(q) * axis.nodes(q);
                    ycoord(p, 0) = axis.nodes(q);
                }
        } else {
            for (int q0 = 0; q0 < Q; ++q0)
                for (int q1 = 0; q1 < Q; ++q1)
                    for (int j = 0; j < n_theta; ++j) {
                        const int p = (q0 * Q + q1) * n_theta + j;
                        Wflat(p) = axis.weights(q0) * axis.weights(q1) * theta_w;
                        ysq(p) = axis.nodes(q0) * axis.nodes(q0) + axis.nodes(q1) * axis.nodes(q1);
                        ycoord(p, 0) = axis.nodes(q0);
                        ycoord(p, 1) = axis.nodes(q1);
                    }
        }
    }

    int n_points() const {
        return (tr.n_axis == 1 ? Q : Q * Q) * n_theta;
    }

    Eigen::VectorXd to_values(const SpectralField& u) const {
        CYLFLOW_REQUIRE(u.tr == tr && u.basis_w == basis_w, "to_values: basis mismatch");
        const int nf = tr.nf(), nh = tr.nh();
        const Eigen::VectorXd cn = u.c.cwiseProduct(scale);
        Eigen::VectorXd vals(n_points());
        if (tr.n_axis == 1) {
            Eigen::Map<const Eigen::MatrixXd> C(cn.data(), nf, nh); // col a0, row f
            Eigen::MatrixXd V = Trig * C * B.transpose();           // n_theta x Q
            for (int q = 0; q < Q; ++q)
                for (int j = 0; j < n_theta; ++j) vals(q * n_theta + j) = V(j, q);
        } else {
            Eigen::Map<const Eigen::MatrixXd> C(cn.data(), nh * nf, nh); // col a0, row a1*nf+f
            Eigen::MatrixXd T1 = C * B.transpose();                     // (nh*nf) x Q
            for (int q0 = 0; q0 < Q; ++q0) {
                Eigen::Map<const Eigen::MatrixXd> X(T1.col(q0).data(), nf, nh);
                Eigen::MatrixXd V = Trig * X * B.transpose(); // n_theta x Q over q1
                for (int q1 = 0; q1 < Q; ++q1)
                    for (int j = 0; j < n_theta; ++j) vals((q0 * Q + q1) * n_theta + j) = V(j, q1);
            }
        }
        return vals;
    }

    SpectralField from_values(const Eigen::VectorXd& vals) const {
        CYLFLOW_REQUIRE(a == basis_w, "from_values: analysis needs measure == basis weight");
        CYLFLOW_REQUIRE(Q > tr.deg && n_theta > 2 * tr.band, "from_values: grid below exactness");
        CYLFLOW_REQUIRE(vals.size() == n_points(), "from_values: size mismatch");
        const int nf = tr.nf(), nh = tr.nh();
        SpectralField u(tr, basis_w);
        if (tr.n_axis == 1) {
            Eigen::MatrixXd V(n_theta, Q);
            for (int q = 0; q < Q; ++q)
                for (int j = 0; j < n_theta; ++j) V(j, q) = vals(q * n_theta + j);
            Eigen::MatrixXd C = Trigw.transpose() * V * Bw; // nf x nh
            Eigen::Map<Eigen::MatrixXd>(u.c.data(), nf, nh) = C;
        } else {
            Eigen::MatrixXd T1(nh * nf, Q); // per q0: (a1*nf+f)
            for (int q0 = 0; q0 < Q; ++q0) {
                Eigen::MatrixXd V(n_theta, Q);
                for (int q1 = 0; q1 < Q; ++q1)
                    for (int j = 0; j < n_theta; ++j) V(j, q1) = vals((q0 * Q + q1) * n_theta + j);
                Eigen::MatrixXd X = Trigw.transpose() * V * Bw; // nf x nh over a1
                Eigen::Map<Eigen::MatrixXd>(T1.col(q0).data(), nf, nh) = X;
            }
            Eigen::Map<Eigen::MatrixXd>(u.c.data(), nh * nf, nh) = T1 * Bw;
        }
        u.c.array() /= scale.array();
        return u;
    }

    double integrate(const Eigen::VectorXd& vals) const { return Wflat.dot(vals); }

    double ip_values(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
        return Wflat.dot(f.cwiseProduct(g));
    }

    /// Shared, cached construction; grids are immutable once built.
    static std::shared_ptr<const Quadrature> shared(const Trunc& tr, double w, double a,
                                                    int Q = -1, int n_theta = -1) {
        if (Q < 0) Q = tr.deg + 3;
        if (n_theta < 0) n_theta = 2 * tr.band + 3;
        thread_local std::unordered_map<std::string, std::shared_ptr<const Quadrature>> cache;
        char key[128];
        std::snprintf(key, sizeof key, "%d|%d|%d|%d|%d|%a|%a", tr.n_axis, tr.deg, tr.band, Q,
                      n_theta, w, a);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        auto g = std::make_shared<const Quadrature>(tr, w, a, Q, n_theta);
        if (cache.size() > 64) cache.clear();
        cache.emplace(key, g);
        return g;
    }
};

} // namespace cylflow
