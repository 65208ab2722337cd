#pragma once
// Artifact layer: spectral fields as JSON or raw little-endian binary, CSV
// tables for spectra / parameter paths / flows / surface clouds, and a
// manifest pinning every artifact by content hash.  Floating-point text is
// rendered with %.17g and JSON through the shortest-round-trip dump, so a
// fixed configuration reproduces every file byte for byte.

#include "cylflow/hash.hpp"
#include "cylflow/rescaling.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cylflow::io {

using json = nlohmann::json;

inline std::string g17(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", x);
    return b;
}

inline std::string hex64(std::uint64_t h) {
    char b[24];
    std::snprintf(b, sizeof b, "0x%016llx", static_cast<unsigned long long>(h));
    return b;
}

inline void write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw config_error("io: cannot open for writing: " + p.string());
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw config_error("io: short write: " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw config_error("io: cannot open: " + p.string());
    std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return body;
}

inline void write_json(const std::filesystem::path& p, const json& j) {
    write_file(p, j.dump(2) + "\n");
}

inline json parse_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw config_error("io: malformed JSON");
    return j;
}

inline json read_json(const std::filesystem::path& p) { return parse_json(read_file(p)); }

// ---- spectral fields ----

inline json field_to_json(const SpectralField& u) {
    json j;
    j["trunc"] = {{"n_axis", u.tr.n_axis}, {"deg", u.tr.deg}, {"band", u.tr.band}};
    j["basis_weight"] = u.basis_w;
    j["coeffs"] = std::vector<double>(u.c.data(), u.c.data() + u.c.size());
    return j;
}

inline SpectralField field_from_json(const json& j) {
    try {
        SpectralField u(Trunc{j.at("trunc").at("n_axis").get<int>(),
                              j.at("trunc").at("deg").get<int>(),
                              j.at("trunc").at("band").get<int>()},
                        j.at("basis_weight").get<double>());
        const auto v = j.at("coeffs").get<std::vector<double>>();
        if (v.size() != static_cast<size_t>(u.c.size()))
            throw config_error("field json: coefficient count does not match the truncation");
        for (size_t i = 0; i < v.size(); ++i) u.c(static_cast<long>(i)) = v[i];
        return u;
    } catch (const json::exception& e) {
        throw config_error(std::string("field json: ") + e.what());
    }
}

namespace detail {

inline void put_u64(std::string& s, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline std::uint64_t get_u64(const std::string& s, size_t& at) {
    if (at + 8 > s.size()) throw config_error("field binary: truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at++])) << (8 * b);
    return v;
}

} // namespace detail

/// Raw alternative to the JSON form: "CYLF" magic, version, truncation,
/// basis weight, then the coefficients, every word little-endian 64-bit.
inline std::string field_to_binary(const SpectralField& u) {
    std::string s = "CYLF";
    detail::put_u64(s, 1); // format version
    detail::put_u64(s, static_cast<std::uint64_t>(u.tr.n_axis));
    detail::put_u64(s, static_cast<std::uint64_t>(u.tr.deg));
    detail::put_u64(s, static_cast<std::uint64_t>(u.tr.band));
    detail::put_u64(s, std::bit_cast<std::uint64_t>(u.basis_w));
    detail::put_u64(s, static_cast<std::uint64_t>(u.c.size()));
    for (long i = 0; i < u.c.size(); ++i) detail::put_u64(s, std::bit_cast<std::uint64_t>(u.c(i)));
    return s;
}

inline SpectralField field_from_binary(const std::string& s) {
    if (s.size() < 4 || s.compare(0, 4, "CYLF") != 0)
        throw config_error("field binary: bad magic");
    size_t at = 4;
    if (detail::get_u64(s, at) != 1) throw config_error("field binary: unknown version");
    const int n_axis = static_cast<int>(detail::get_u64(s, at));
    const int deg = static_cast<int>(detail::get_u64(s, at));
    const int band = static_cast<int>(detail::get_u64(s, at));
    const double w = std::bit_cast<double>(detail::get_u64(s, at));
    SpectralField u(Trunc{n_axis, deg, band}, w);
    const auto count = detail::get_u64(s, at);
    if (count != static_cast<std::uint64_t>(u.c.size()))
        throw config_error("field binary: coefficient count does not match the truncation");
    for (std::uint64_t i = 0; i < count; ++i)
        u.c(static_cast<long>(i)) = std::bit_cast<double>(detail::get_u64(s, at));
    return u;
}

// ---- CSV tables ----

/// One row per Hermite x Fourier lattice point (m >= 0, the cos/sin pair
/// collapsed): multi-index, angular number, eigenvalue a(|alpha| + m^2 - 2),
/// and its sign class.  Sorted by lattice level, then index.
inline std::string spectrum_csv(const Trunc& tr, double a) {
    CYLFLOW_REQUIRE(a > 0.0, "spectrum_csv: weight a must be positive");
    struct Row {
        int level, a0, a1, m;
    };
    std::vector<Row> rows;
    for_each_index(tr, [&](int, int a0, int a1, int f) {
        if (f != 0 && f % 2 == 0) return; // sin partner of the same m
        const int m = fourier_m(f);
        rows.push_back({a0 + a1 + m * m - 2, a0, a1, m});
    });
    std::sort(rows.begin(), rows.end(), [](const Row& l, const Row& r) {
        return std::tie(l.level, l.a0, l.a1, l.m) < std::tie(r.level, r.a0, r.a1, r.m);
    });
    std::string s = "alpha_multi_index,fourier_m,eigenvalue,classification\n";
    for (const auto& r : rows) {
        s += std::to_string(r.a0);
        if (tr.n_axis == 2) s += ";" + std::to_string(r.a1);
        const char* cls = r.level < 0 ? "unstable" : (r.level == 0 ? "zero" : "stable");
        s += "," + std::to_string(r.m) + "," + g17(a * r.level) + "," + cls + "\n";
    }
    return s;
}

namespace detail {

inline void sigma_header(std::string& s, int na, const char* pre) {
    s += std::string(",") + pre + "a";
    for (int l = 0; l < 2; ++l) s += "," + std::string(pre) + "z_" + std::to_string(l + 1);
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < na; ++i)
            s += "," + std::string(pre) + "tilt_" + std::to_string(l) + "_" + std::to_string(i);
}

inline void sigma_row(std::string& s, const SymmetryParams& sp) {
    s += "," + g17(sp.a);
    for (int l = 0; l < 2; ++l) s += "," + g17(sp.z(l));
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < sp.n_axis(); ++i) s += "," + g17(sp.g_tilt(l, i));
}

inline void sigma_dot_row(std::string& s, const ModulationVector& v) {
    s += "," + g17(v.da);
    for (int l = 0; l < 2; ++l) s += "," + g17(v.dz(l));
    for (int l = 0; l < 2; ++l)
        for (long i = 0; i < v.dg_tilt.cols(); ++i) s += "," + g17(v.dg_tilt(l, i));
}

} // namespace detail

/// Parameter path: per node tau, sigma coordinates, then their velocities.
inline std::string sigma_path_csv(const FlowPath& p) {
    p.require_consistent();
    const int na = p.sigma.front().n_axis();
    std::string s = "tau";
    detail::sigma_header(s, na, "");
    detail::sigma_header(s, na, "d");
    s += "\n";
    for (int k = 0; k < p.size(); ++k) {
        s += g17(p.taus[k]);
        detail::sigma_row(s, p.sigma[k]);
        detail::sigma_dot_row(s, p.sigma_dot[k]);
        s += "\n";
    }
    return s;
}

/// Flow summary: per node tau, the Sobolev size of the graph function, the
/// sigma coordinates, and the constraint-orthogonality residual of xi.
inline std::string flow_csv(const FlowPath& p, int s_order = 2) {
    p.require_consistent();
    const Trunc& tr = p.xi.front().tr;
    const double w = p.xi.front().basis_w;
    const int na = p.sigma.front().n_axis();
    std::string s = "tau,norm_xi_s";
    detail::sigma_header(s, na, "");
    s += ",orthogonality\n";
    for (int k = 0; k < p.size(); ++k) {
        const ProjectionSet ps(tr, w, p.sigma[k].a, 1.0);
        s += g17(p.taus[k]) + "," + g17(sobolev_norm(p.xi[k], s_order, 0.5));
        detail::sigma_row(s, p.sigma[k]);
        s += "," + g17(orthogonality_residual(p.xi[k], ps)) + "\n";
    }
    return s;
}

/// Surface point cloud: one row per sample point of every slice.
inline std::string surface_csv(const std::vector<ReconstructedSlice>& slices) {
    CYLFLOW_REQUIRE(!slices.empty(), "surface_csv: no slices");
    const int D = static_cast<int>(slices.front().points.cols());
    std::string s = "t";
    for (int d = 0; d < D; ++d) s += ",x_" + std::to_string(d + 1);
    s += ",radius\n";
    for (const auto& sl : slices)
        for (int p = 0; p < sl.points.rows(); ++p) {
            s += g17(sl.t);
            for (int d = 0; d < D; ++d) s += "," + g17(sl.points(p, d));
            s += "," + g17(sl.radius(p)) + "\n";
        }
    return s;
}

// ---- manifest ----

/// manifest.json for a run directory: every artifact with size and content
/// hash, sorted by name.  Re-hashing the files must reproduce it exactly.
inline void write_manifest(const std::filesystem::path& dir, std::vector<std::string> names) {
    std::sort(names.begin(), names.end());
    json j;
    j["artifacts"] = json::array();
    for (const auto& name : names) {
        const std::string body = read_file(dir / name);
        j["artifacts"].push_back(
            {{"file", name}, {"bytes", body.size()}, {"fnv1a64", hex64(fnv1a64(body))}});
    }
    write_json(dir / "manifest.json", j);
}

} // namespace cylflow::io
