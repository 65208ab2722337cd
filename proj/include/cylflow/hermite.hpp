#pragma once

#include <cmath>
#include <Eigen/Dense>

#include "cylflow/errors.hpp"

namespace cylflow {

/// Monic Hermite-type polynomials attached to the Gaussian weight
/// e^{-w y^2 / 2}:  P_0 = 1, P_1 = y, P_{n+1} = y P_n - (n/w) P_{n-1}.
/// They are orthogonal with ||P_n||^2 = n! w^{-n} sqrt(2 pi / w), satisfy
/// P_n' = n P_{n-1}, and diagonalize -d^2/dy^2 + w y d/dy with eigenvalue w n.

inline double hermite_norm_sq(int n, double w) {
    CYLFLOW_REQUIRE(n >= 0 && w > 0.0, "hermite_norm_sq: bad arguments");
    double v = std::sqrt(2.0 * M_PI / w);
    for (int j = 1; j <= n; ++j) v *= static_cast<double>(j) / w;
    return v;
}

/// P_0(y), ..., P_N(y) by forward recurrence.
inline Eigen::VectorXd hermite_eval(int N, double w, double y) {
    Eigen::VectorXd p(N + 1);
    p(0) = 1.0;
    if (N >= 1) p(1) = y;
    for (int n = 1; n < N; ++n)
        p(n + 1) = y * p(n) - (static_cast<double>(n) / w) * p(n - 1);
    return p;
}

/// h_n = P_n / ||P_n||: values stay moderate at high degree, unlike monic.
inline Eigen::VectorXd hermite_eval_normalized(int N, double w, double y) {
    Eigen::VectorXd h(N + 1);
    h(0) = 1.0 / std::sqrt(std::sqrt(2.0 * M_PI / w));
    if (N >= 1) h(1) = y * std::sqrt(w) * h(0);
    for (int n = 1; n < N; ++n)
        h(n + 1) = y * std::sqrt(w / (n + 1.0)) * h(n) -
                   std::sqrt(static_cast<double>(n) / (n + 1.0)) * h(n - 1);
    return h;
}

struct Quad1D {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights; // include the Gaussian factor: sum w_q f(y_q) == integral f e^{-a y^2/2}
};

/// Gauss quadrature for the weight e^{-a y^2 / 2} on the line.
/// Exact for polynomials of degree <= 2Q - 1. Nodes come from the Jacobi
/// matrix (Golub-Welsch), then two Newton polishes on P_Q; weights use the
/// Christoffel function, w_q = 1 / sum_{n<Q} h_n(y_q)^2, which keeps full
/// relative accuracy even for the far-out nodes (the eigenvector-based
/// formula loses ~6 digits there and that error is what quadrature of
/// near-degree-2Q polynomials actually feels).
inline Quad1D gauss_hermite(int Q, double a) {
    CYLFLOW_REQUIRE(Q >= 1 && a > 0.0, "gauss_hermite: bad arguments");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(Q);
    Eigen::VectorXd off(Q - 1 > 0 ? Q - 1 : 0);
    for (int n = 1; n < Q; ++n) off(n - 1) = std::sqrt(static_cast<double>(n) / a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    CYLFLOW_REQUIRE(es.info() == Eigen::Success, "gauss_hermite: eigensolver failed");
    Quad1D q;
    q.nodes = es.eigenvalues();
    q.weights.resize(Q);
    for (int i = 0; i < Q; ++i) {
        double y = q.nodes(i);
        for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXd h = hermite_eval_normalized(Q, a, y);
            // P_Q' = Q P_{Q-1}; in normalized terms the Newton step is
            y -= h(Q) / (h(Q - 1) * std::sqrt(Q * a));
        }
        const Eigen::VectorXd h = hermite_eval_normalized(Q - 1, a, y);
        q.nodes(i) = y;
        q.weights(i) = 1.0 / h.squaredNorm();
    }
    return q;
}

/// Change of Gaussian parameter: columns give P_n^{(from)} expanded in the
/// P_j^{(to)} basis. Unit upper-left triangular in degree (both families are
/// monic) and banded by parity; well conditioned for from ~= to.
inline Eigen::MatrixXd hermite_connection(int N, double from_w, double to_w) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N + 1, N + 1);
    C(0, 0) = 1.0;
    if (N == 0) return C;
    C(1, 1) = 1.0;
    for (int n = 1; n < N; ++n) {
        // col_{n+1} = y * col_n - (n/from) col_{n-1}, with
        // y P_j^{(to)} = P_{j+1}^{(to)} + (j/to) P_{j-1}^{(to)}.
        for (int j = 0; j <= n; ++j) {
            const double cnj = C(j, n);
            if (cnj == 0.0) continue;
            C(j + 1, n + 1) += cnj;
            if (j >= 1) C(j - 1, n + 1) += cnj * (static_cast<double>(j) / to_w);
        }
        for (int j = 0; j <= n - 1; ++j)
            C(j, n + 1) -= (static_cast<double>(n) / from_w) * C(j, n - 1);
    }
    return C;
}

} // namespace cylflow
