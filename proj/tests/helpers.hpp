#pragma once

#include "cylflow/nonlinearity.hpp"
#include "cylflow/rng.hpp"

namespace cylflow::testing {

/// Random field with summable spectral decay; scale controls the magnitude.
inline SpectralField random_field(const Trunc& tr, double w, Rng& rng, double scale = 1.0,
                                  double decay = 2.0) {
    SpectralField u(tr, w);
    for_each_index(tr, [&](int idx, int a0, int a1, int f) {
        const double lat = 1.0 + a0 + a1 + fourier_m(f);
        u.c(idx) = scale * rng.normal() / std::pow(lat, decay);
    });
    return u;
}

/// Random field with exponential decay of the normalized coefficients: the
/// texture of actual flow profiles. Plain power-law draws are huge at the
/// outer quadrature nodes and break the graph condition.
inline SpectralField random_smooth_field(const Trunc& tr, double w, Rng& rng, double scale = 1.0,
                                         double rho = 0.25) {
    SpectralField u(tr, w);
    for_each_index(tr, [&](int idx, int a0, int a1, int f) {
        const int lat = a0 + a1 + fourier_m(f);
        u.c(idx) = scale * rng.normal() * std::pow(rho, lat) /
                   std::sqrt(basis_norm_sq(tr, w, a0, a1, f));
    });
    return u;
}

/// Perturbation with the given Sobolev size, shrunk until its pointwise range
/// on the padded grid stays inside (1 - margin) of the cylinder radius, so
/// cyl + u (and nearby profiles) satisfy the graph condition with room.
inline SpectralField graph_safe_field(const Trunc& tr, double w, Rng& rng, double a,
                                      double target_s_norm, double margin = 0.5) {
    auto u = random_smooth_field(tr, w, rng);
    u = (target_s_norm / sobolev_norm(u, 2, 0.5)) * u;
    auto g = padded_grid(tr, w, w);
    const double cap = (1.0 - margin) * cylinder_radius(a);
    for (int tries = 0; tries < 60; ++tries) {
        if (g->to_values(u).cwiseAbs().maxCoeff() <= cap) break;
        u = 0.5 * u;
    }
    return u;
}

} // namespace cylflow::testing
