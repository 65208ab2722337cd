#include <catch2/catch_amalgamated.hpp>

#include "cylflow/rescaling.hpp"
#include "helpers.hpp"

#include <cmath>

using namespace cylflow;

namespace {

const Trunc tr1{1, 12, 4};
const double w = 0.5;

// constant dilation: lambda and tau have closed forms
RescalingState constant_state(double a0, double T, int n = 300, double q = 0.95) {
    const auto t = clustered_time_grid(T, n, q);
    return build_rescaling(t, std::vector<double>(t.size(), a0), T);
}

} // namespace

TEST_CASE("constant dilation reproduces the closed forms") {
    const double a0 = 0.55, T = 1.25;
    const auto rs = constant_state(a0, T);
    const int m = static_cast<int>(rs.t.size());

    CHECK(rs.tau[0] == 0.0);
    CHECK(rs.lambda[0] == Catch::Approx(std::sqrt(2.0 * a0 * T)).epsilon(1e-13));
    CHECK(rs.lambda[m - 1] == 0.0);
    CHECK(std::isinf(rs.tau[m - 1]));

    for (int j = 0; j < m - 1; ++j) {
        const double lam = std::sqrt(2.0 * a0 * (T - rs.t[j]));
        const double tau = -std::log(1.0 - rs.t[j] / T) / (2.0 * a0);
        CHECK(rs.lambda[j] == Catch::Approx(lam).margin(1e-12));
        CHECK(rs.tau[j] == Catch::Approx(tau).margin(1e-10 * (1.0 + tau)));
        if (j > 0) {
            CHECK(rs.lambda[j] < rs.lambda[j - 1]);
            CHECK(rs.tau[j] > rs.tau[j - 1]);
        }
    }

    SECTION("the blow-up factor in slow time is the decaying orbit exponential") {
        for (int j = 0; j < m - 1; ++j)
            CHECK(rs.lambda[j] ==
                  Catch::Approx(rs.lambda[0] * std::exp(-a0 * rs.tau[j])).margin(1e-9));
    }

    SECTION("interpolants agree with the closed forms off the nodes") {
        for (double t : {0.1234, 0.5, 0.9321, 1.1}) {
            CHECK(lambda_of(rs, t) == Catch::Approx(std::sqrt(2.0 * a0 * (T - t))).margin(1e-12));
            CHECK(tau_of(rs, t) ==
                  Catch::Approx(-std::log(1.0 - t / T) / (2.0 * a0)).margin(1e-10));
        }
        CHECK(lambda_of(rs, T) == Catch::Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("slow time and its inverse compose to the identity") {
    const auto rs = constant_state(0.4, 2.0);
    const int m = static_cast<int>(rs.t.size());
    for (int j = 1; j < m - 1; j += 17)
        CHECK(t_of(rs, rs.tau[j]) == Catch::Approx(rs.t[j]).margin(1e-12));
    for (double t : {0.01, 0.777, 1.5, 1.9})
        CHECK(t_of(rs, tau_of(rs, t)) == Catch::Approx(t).margin(1e-10));
}

TEST_CASE("rescaling validates its inputs") {
    const auto t = clustered_time_grid(1.0, 50);
    std::vector<double> a(t.size(), 0.5);

    SECTION("nonpositive dilation") {
        a[7] = 0.0;
        CHECK_THROWS_AS(build_rescaling(t, a, 1.0), config_error);
        a[7] = -0.2;
        CHECK_THROWS_AS(build_rescaling(t, a, 1.0), config_error);
    }

    SECTION("grid endpoints") {
        CHECK_THROWS_AS(build_rescaling(t, a, 1.5), config_error);
        auto shifted = t;
        shifted[0] = 0.01;
        CHECK_THROWS_AS(build_rescaling(shifted, a, 1.0), config_error);
    }

    SECTION("queries outside the resolved range") {
        const auto rs = build_rescaling(t, a, 1.0);
        CHECK_THROWS_AS(tau_of(rs, -0.1), config_error);
        CHECK_THROWS_AS(tau_of(rs, 0.5 * (rs.t[t.size() - 2] + 1.0)), config_error);
        CHECK_THROWS_AS(t_of(rs, rs.tau[t.size() - 2] + 1.0), invariant_error);
    }

    SECTION("clustered grid shape") {
        CHECK(t.front() == 0.0);
        CHECK(t.back() == 1.0);
        for (size_t j = 2; j + 1 < t.size(); ++j)
            CHECK((t[j] - t[j - 1]) < (t[j - 1] - t[j - 2]));
    }
}

TEST_CASE("tilt rotations are orthogonal and act in the tilt plane") {
    SymmetryParams s = SymmetryParams::identity(1, 0.55);
    const double th = 0.3;
    s.g_tilt(0, 0) = th;
    const auto g = tilt_rotation(s);
    CHECK((g.transpose() * g - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(g.determinant() == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(g(0, 0) == Catch::Approx(std::cos(th)));
    CHECK(g(1, 0) == Catch::Approx(std::sin(th)));
    CHECK(g(2, 2) == 1.0);

    SymmetryParams id2 = SymmetryParams::identity(2, 0.55);
    CHECK((tilt_rotation(id2) - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("a static path reconstructs to a shrinking round cylinder") {
    const double a0 = 0.55, T = 1.0;
    const auto rs = constant_state(a0, T);
    const FlowPath path = FlowPath::rest(tr1, w, a0, 10.0, 0.1);

    // late samples approach the blow-up; radius must track lambda exactly
    const std::vector<double> ts = {0.0, 0.6, 0.95, 0.9995};
    const auto slices = reconstruct_flow(path, rs, ts);
    REQUIRE(slices.size() == ts.size());
    auto quad = Quadrature::shared(tr1, w, w);
    for (const auto& sl : slices) {
        CHECK(sl.min_radius == Catch::Approx(cylinder_radius(a0)));
        double rmax = 0.0;
        for (int p = 0; p < sl.points.rows(); ++p) {
            const double rt = std::hypot(sl.points(p, 1), sl.points(p, 2));
            rmax = std::max(rmax, rt);
            CHECK(rt == Catch::Approx(sl.lambda * cylinder_radius(a0)).margin(1e-12));
            CHECK(sl.points(p, 0) ==
                  Catch::Approx(sl.lambda * quad->ycoord(p, 0)).margin(1e-12));
        }
        CHECK(rmax / sl.lambda == Catch::Approx(cylinder_radius(a0)).epsilon(1e-12));
    }
    CHECK(slices[3].lambda < 0.05 * slices[0].lambda);

    SECTION("samples beyond the stored path range are rejected") {
        const double t_late = t_of(rs, 10.5);
        CHECK_THROWS_AS(reconstruct_flow(path, rs, {t_late}), config_error);
    }
}

TEST_CASE("round trip through the unrescaled surface recovers the graph") {
    const double a0 = 0.6, T = 0.8;
    const auto rs = constant_state(a0, T);

    FlowPath path = FlowPath::rest(tr1, w, a0, 8.0, 0.1);
    Rng rng(71);
    const auto bump = testing::random_smooth_field(tr1, w, rng);
    for (int k = 0; k < path.size(); ++k) {
        path.sigma[k].g_tilt(0, 0) = 0.25;
        path.sigma[k].g_tilt(1, 0) = -0.1;
        path.sigma[k].z << 0.2, -0.05;
        path.xi[k] = (0.03 / sobolev_norm(bump, 2, 0.5)) * bump;
    }

    const auto slices = reconstruct_flow(path, rs, {0.1, 0.45});
    auto quad = Quadrature::shared(tr1, w, w);
    for (const auto& sl : slices) {
        for (int p = 0; p < sl.points.rows(); ++p) {
            Eigen::VectorXd X = sl.points.row(p).transpose();
            X(1) -= sl.sigma.z(0);
            X(2) -= sl.sigma.z(1);
            const Eigen::VectorXd u = (sl.g.transpose() * X) / sl.lambda;
            CHECK(u(0) == Catch::Approx(quad->ycoord(p, 0)).margin(1e-10));
            CHECK(std::hypot(u(1), u(2)) == Catch::Approx(sl.radius(p)).margin(1e-10));
        }
    }
}

TEST_CASE("tangent flow limit extrapolates the parameter path") {
    SECTION("static path returns its parameters exactly") {
        const FlowPath path = FlowPath::rest(tr1, w, 0.52, 10.0, 0.1);
        const auto tf = tangent_flow_limit(path);
        CHECK(tf.sigma_inf.a == 0.52);
        CHECK(tf.sigma_inf.z.cwiseAbs().maxCoeff() == 0.0);
        CHECK(tf.sigma_inf.g_tilt.cwiseAbs().maxCoeff() == 0.0);
        CHECK(tf.radius == Catch::Approx(std::sqrt(1.0 / 0.52)).epsilon(1e-14));
        CHECK(tf.fit_residual == 0.0);
        CHECK(tf.drift_bound == 0.0);
    }

    SECTION("a <tau>^{-1} tail is extrapolated to its limit") {
        FlowPath path = FlowPath::rest(tr1, w, 0.55, 30.0, 0.1);
        const double a_inf = 0.57, Ba = -0.02, Bz = 0.01;
        for (int k = 0; k < path.size(); ++k) {
            const double tau = path.taus[k];
            const double br = std::sqrt(1.0 + tau * tau);
            path.sigma[k].a = a_inf + Ba / br;
            path.sigma[k].z(0) = Bz / br;
            path.sigma_dot[k].da = -Ba * tau / (br * br * br);
            path.sigma_dot[k].dz(0) = -Bz * tau / (br * br * br);
        }
        const auto tf = tangent_flow_limit(path);
        CHECK(tf.sigma_inf.a == Catch::Approx(a_inf).margin(1e-12));
        CHECK(tf.sigma_inf.z(0) == Catch::Approx(0.0).margin(1e-12));
        CHECK(tf.radius == Catch::Approx(std::sqrt(1.0 / a_inf)).epsilon(1e-10));
        CHECK(tf.fit_residual <= 1e-12);
    }

    SECTION("an oscillating tail is reported as divergence") {
        FlowPath path = FlowPath::rest(tr1, w, 0.55, 30.0, 0.1);
        for (int k = 0; k < path.size(); ++k) {
            path.sigma[k].a = 0.55 + 0.05 * std::sin(path.taus[k]);
            path.sigma_dot[k].da = 0.05 * std::cos(path.taus[k]);
        }
        CHECK_THROWS_AS(tangent_flow_limit(path), divergence_error);
    }

    SECTION("a drift beyond the velocity budget violates the invariant") {
        FlowPath path = FlowPath::rest(tr1, w, 0.55, 30.0, 0.1);
        for (int k = 0; k < path.size(); ++k)
            path.sigma[k].z(0) = (path.taus[k] >= 1.0) ? 0.5 : 0.5 * path.taus[k];
        // sigma_dot left at rest: the reported velocities cannot explain the move
        CHECK_THROWS_AS(tangent_flow_limit(path), invariant_error);
    }

    SECTION("short paths are rejected") {
        const FlowPath path = FlowPath::rest(tr1, w, 0.55, 2.0, 0.5);
        CHECK_THROWS_AS(tangent_flow_limit(path), invariant_error);
    }
}
