// cylflow: spectra, frozen-coefficient runs, stable-manifold construction,
// invariant verification, and rescaled-surface reconstruction from one
// binary.  Every subcommand writes its artifacts into --out together with a
// manifest.json listing each file with a content hash; a fixed config and
// seed reproduce every artifact byte for byte.
//
// Exit codes: 0 success, 1 failed check or broken internal invariant,
// 2 bad configuration, 3 numerical divergence.

#include "cylflow/io.hpp"

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace cylflow;
using io::json;

namespace {

struct RunConfig {
    // common
    std::string out = "cylflow_out";
    std::string config_path;
    int n_axis = 1;
    int deg = 24;
    int band = 8;
    double basis_w = 0.5;
    int jobs = 1;
    // spectrum
    double a = 0.5;
    // dynamics (manifold, simulate, verify, reconstruct)
    double delta = 0.01;
    double a0 = 0.55;
    double tol = 1e-9;
    double tau_max = 40.0;
    double dt = 0.01;
    std::uint64_t seed = 42;
    int seeds = 1;
    int max_iter = 40;
    double seed_frac = 0.1;
    // simulate
    int snapshot_every = 200;
    // verify
    std::string suite = "nonlinearity";
    double eps = 0.05;
    // reconstruct
    int slices = 9;
};

// ---- config file: [section] headers over key = value lines ----

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw config_error("config: " + key + " is not a number (got '" + v + "')");
    return x;
}

long long to_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw config_error("config: " + key + " is not an integer (got '" + v + "')");
    return x;
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool assign_common(RunConfig& c, const std::string& key, const std::string& v) {
    if (key == "out") c.out = v;
    else if (key == "naxis") c.n_axis = static_cast<int>(to_int(key, v));
    else if (key == "deg") c.deg = static_cast<int>(to_int(key, v));
    else if (key == "band") c.band = static_cast<int>(to_int(key, v));
    else if (key == "basis_w") c.basis_w = to_double(key, v);
    else if (key == "jobs") c.jobs = static_cast<int>(to_int(key, v));
    else return false;
    return true;
}

bool assign_dynamics(RunConfig& c, const std::string& key, const std::string& v) {
    if (key == "delta") c.delta = to_double(key, v);
    else if (key == "a0") c.a0 = to_double(key, v);
    else if (key == "tol") c.tol = to_double(key, v);
    else if (key == "tau_max") c.tau_max = to_double(key, v);
    else if (key == "dt") c.dt = to_double(key, v);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "seed_frac") c.seed_frac = to_double(key, v);
    else return false;
    return true;
}

void load_config_file(RunConfig& c, const std::string& path, const std::string& subcommand) {
    const std::string body = io::read_file(path);
    std::string section;
    size_t at = 0;
    int lineno = 0;
    while (at <= body.size()) {
        const auto nl = body.find('\n', at);
        std::string line = trimmed(body.substr(at, nl == std::string::npos ? nl : nl - at));
        at = nl == std::string::npos ? body.size() + 1 : nl + 1;
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line = trimmed(line.substr(0, h));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("config: unterminated section header at line " +
                                   std::to_string(lineno));
            section = trimmed(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config: expected key = value at line " + std::to_string(lineno));
        const std::string key = trimmed(line.substr(0, eq));
        const std::string val = trimmed(line.substr(eq + 1));
        if (section != "common" && section != subcommand) continue; // other subcommands' keys
        bool ok = false;
        if (section == "common") {
            ok = assign_common(c, key, val);
        } else if (section == "spectrum") {
            if (key == "a") { c.a = to_double(key, val); ok = true; }
        } else if (section == "manifold") {
            ok = assign_dynamics(c, key, val);
            if (!ok && key == "seeds") { c.seeds = static_cast<int>(to_int(key, val)); ok = true; }
            if (!ok && key == "max_iter") { c.max_iter = static_cast<int>(to_int(key, val)); ok = true; }
        } else if (section == "simulate") {
            ok = assign_dynamics(c, key, val);
            if (!ok && key == "snapshot_every") {
                c.snapshot_every = static_cast<int>(to_int(key, val));
                ok = true;
            }
        } else if (section == "verify") {
            ok = assign_dynamics(c, key, val);
            if (!ok && key == "suite") { c.suite = val; ok = true; }
            if (!ok && key == "eps") { c.eps = to_double(key, val); ok = true; }
        } else if (section == "reconstruct") {
            ok = assign_dynamics(c, key, val);
            if (!ok && key == "slices") { c.slices = static_cast<int>(to_int(key, val)); ok = true; }
            if (!ok && key == "max_iter") { c.max_iter = static_cast<int>(to_int(key, val)); ok = true; }
        } else {
            throw config_error("config: unknown section [" + section + "]");
        }
        if (!ok)
            throw config_error("config: unknown key '" + key + "' in section [" + section + "]");
    }
}

// ---- validation (module preconditions are checked before dispatch) ----

void require_cfg(bool ok, const std::string& msg) {
    if (!ok) throw config_error("config: " + msg);
}

void validate_common(const RunConfig& c) {
    require_cfg(c.n_axis == 1 || c.n_axis == 2,
                "naxis must be 1 or 2 (got " + std::to_string(c.n_axis) + ")");
    require_cfg(c.deg >= 4, "deg must be at least 4 (got " + std::to_string(c.deg) + ")");
    require_cfg(c.band >= 1, "band must be at least 1 (got " + std::to_string(c.band) + ")");
    require_cfg(c.basis_w > 0.0, "basis_w must be positive");
    require_cfg(c.jobs >= 1, "jobs must be at least 1 (got " + std::to_string(c.jobs) + ")");
    require_cfg(!c.out.empty(), "out directory must not be empty");
}

void validate_dynamics(const RunConfig& c) {
    require_cfg(c.delta > 0.0 && c.delta <= 0.1, "delta must lie in (0, 0.1]");
    require_cfg(c.a0 >= 0.5 + 2.0 * c.delta, "a0 must be at least 1/2 + 2 delta");
    require_cfg(c.tol > 0.0, "tol must be positive");
    require_cfg(c.dt > 0.0, "dt must be positive");
    require_cfg(c.tau_max >= 5.0 * c.dt, "tau_max must cover at least five steps of dt");
    require_cfg(c.seed_frac > 0.0 && c.seed_frac < 1.0, "seed_frac must lie in (0, 1)");
    require_cfg(c.max_iter >= 1, "max_iter must be at least 1");
    require_cfg(c.deg >= 8 && c.deg % 2 == 0, "deg must be even and at least 8 for seed sampling");
}

ManifoldParams params_from(const RunConfig& c) {
    ManifoldParams mp;
    mp.delta = c.delta;
    mp.a0 = c.a0;
    mp.tau_max = c.tau_max;
    mp.dt = c.dt;
    mp.tol = c.tol;
    mp.max_iter = c.max_iter;
    return mp;
}

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (long r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (long cc = 0; cc < m.cols(); ++cc) row.push_back(m(r, cc));
        a.push_back(row);
    }
    return a;
}

/// Random smooth stable-sector probe of unit Sobolev norm.
SpectralField unit_probe(const Trunc& tr, double w, double a0, Rng& rng) {
    SpectralField u(tr, w);
    for_each_index(tr, [&](int idx, int h0, int h1, int f) {
        u.c(idx) = rng.normal() * std::pow(0.25, h0 + h1 + fourier_m(f)) /
                   std::sqrt(basis_norm_sq(tr, w, h0, h1, f));
    });
    u = ProjectionSet(tr, w, a0, 1.0).q_project(u);
    return (1.0 / sobolev_norm(u, 2, 0.5)) * u;
}

// ---- spectrum ----

int cmd_spectrum(const RunConfig& c) {
    require_cfg(c.a > 0.0, "a must be positive");
    fs::create_directories(c.out);
    const Trunc tr{c.n_axis, c.deg, c.band};
    const std::string csv = io::spectrum_csv(tr, c.a);
    io::write_file(fs::path(c.out) / "spectrum.csv", csv);

    int dim_unstable = 0, dim_zero = 0, dim_stable = 0;
    for_each_index(tr, [&](int, int h0, int h1, int f) {
        const int level = h0 + h1 + fourier_m(f) * fourier_m(f) - 2;
        (level < 0 ? dim_unstable : level == 0 ? dim_zero : dim_stable)++;
    });
    CYLFLOW_REQUIRE(dim_unstable + dim_zero == stable_codimension(c.n_axis),
                    "spectrum: non-stable dimension disagrees with the codimension formula");
    json j;
    j["a"] = c.a;
    j["n_axis"] = c.n_axis;
    j["dimensions"] = {{"unstable", dim_unstable}, {"zero", dim_zero}, {"stable", dim_stable}};
    j["stable_codimension"] = stable_codimension(c.n_axis);
    io::write_json(fs::path(c.out) / "spectrum_summary.json", j);
    io::write_manifest(c.out, {"spectrum.csv", "spectrum_summary.json"});
    std::printf("spectrum: %d lattice modes at a = %s, codimension %d -> %s\n",
                dim_unstable + dim_zero + dim_stable, io::g17(c.a).c_str(),
                stable_codimension(c.n_axis), c.out.c_str());
    return 0;
}

// ---- simulate: one frozen-coefficient solve from the rest path ----

int cmd_simulate(const RunConfig& c) {
    validate_dynamics(c);
    fs::create_directories(c.out);
    const Trunc tr{c.n_axis, c.deg, c.band};
    const auto mp = params_from(c);
    Rng rng(c.seed);
    const auto sf = sample_seed(rng, tr, c.basis_w, mp, SeedControls{.target_frac = c.seed_frac});
    const auto base = FlowPath::rest(tr, c.basis_w, c.a0, c.tau_max, c.dt);
    const auto r = psi(base, sf, mp);

    std::vector<std::string> names = {"flow.csv", "sigma_path.csv", "simulate.json"};
    io::write_file(fs::path(c.out) / "flow.csv", io::flow_csv(r.path, mp.s));
    io::write_file(fs::path(c.out) / "sigma_path.csv", io::sigma_path_csv(r.path));
    for (int k = 0; k < r.path.size(); k += c.snapshot_every) {
        char name[32];
        std::snprintf(name, sizeof name, "xi_%06d.json", k);
        io::write_json(fs::path(c.out) / name, io::field_to_json(r.path.xi[k]));
        names.emplace_back(name);
    }
    json j;
    j["seed"] = c.seed;
    j["max_orthogonality"] = r.max_orthogonality;
    j["norm_xi0_s"] = sobolev_norm(r.path.xi.front(), mp.s, 0.5);
    j["beta"] = vec_json(r.coeffs.beta);
    j["gamma"] = mat_json(r.coeffs.gamma);
    io::write_json(fs::path(c.out) / "simulate.json", j);
    io::write_manifest(c.out, names);
    std::printf("simulate: %d nodes, max orthogonality %s -> %s\n", r.path.size(),
                io::g17(r.max_orthogonality).c_str(), c.out.c_str());
    return 0;
}

// ---- manifold: the stable-manifold fixed point, one report per seed ----

struct SeedRun {
    std::uint64_t seed = 0;
    json report;
    std::string flow_csv, sigma_csv;
};

SeedRun manifold_one(const RunConfig& c, const Trunc& tr, std::uint64_t seed) {
    const auto mp = params_from(c);
    Rng rng(seed);
    const auto sf = sample_seed(rng, tr, c.basis_w, mp, SeedControls{.target_frac = c.seed_frac});
    const auto fp = fixed_point(sf, mp);

    // decay of the converged path against the bracket weight <tau>
    const double hi = std::min(30.0, 0.75 * c.tau_max);
    std::vector<double> br, nx, ns;
    for (int k = 0; k < fp.path.size(); ++k) {
        const double tau = fp.path.taus[k];
        if (tau < 2.0 || tau > hi) continue;
        br.push_back(std::sqrt(1.0 + tau * tau));
        nx.push_back(sobolev_norm(fp.path.xi[k], mp.s, 0.5));
        ns.push_back(sigma_distance(fp.path.sigma[k], fp.path.sigma.back()));
    }
    const auto fx = fit_loglog(br, nx);
    const auto fs2 = fit_loglog(br, ns);
    const auto rr = nonlinear_residual(fp.path, mp.s);

    SeedRun out;
    out.seed = seed;
    json& j = out.report;
    j["seed"] = seed;
    j["iterations"] = fp.iterations;
    j["beta"] = vec_json(fp.coeffs.beta);
    j["gamma"] = mat_json(fp.coeffs.gamma);
    j["distances"] = fp.distances;
    j["ratios"] = fp.ratios;
    j["coeff_gaps"] = fp.coeff_gaps;
    j["decay_fits"] = {{"window", {2.0, hi}},
                       {"xi_exponent", -fx.slope},
                       {"xi_r2", fx.r2},
                       {"sigma_exponent", -fs2.slope},
                       {"sigma_r2", fs2.r2}};
    j["residuals"] = {{"orthogonality_max", fp.max_orthogonality},
                      {"unfrozen_max", rr.max_residual}};
    j["min_velocity_constant"] = min_velocity_constant(fp.path, c.delta);
    out.flow_csv = io::flow_csv(fp.path, mp.s);
    out.sigma_csv = io::sigma_path_csv(fp.path);
    return out;
}

int cmd_manifold(const RunConfig& c) {
    validate_dynamics(c);
    require_cfg(c.seeds >= 1, "seeds must be at least 1");
    fs::create_directories(c.out);
    const Trunc tr{c.n_axis, c.deg, c.band};

    std::vector<SeedRun> runs(c.seeds);
    std::vector<std::exception_ptr> errs(c.seeds);
    const int workers = std::min(c.jobs, c.seeds);
    auto work = [&](int w) {
        // seeds are independent runs; nothing else is shared
        for (int i = w; i < c.seeds; i += workers) {
            try {
                runs[i] = manifold_one(c, tr, c.seed + static_cast<std::uint64_t>(i));
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errs)
        if (e) std::rethrow_exception(e);

    json top;
    top["delta"] = c.delta;
    top["a0"] = c.a0;
    top["n_axis"] = c.n_axis;
    top["deg"] = c.deg;
    top["band"] = c.band;
    top["tau_max"] = c.tau_max;
    top["dt"] = c.dt;
    top["seed_frac"] = c.seed_frac;
    top["runs"] = json::array();
    std::vector<std::string> names = {"manifold.json"};
    for (const auto& r : runs) {
        top["runs"].push_back(r.report);
        char fn[48], sn[48];
        std::snprintf(fn, sizeof fn, "flow_seed%" PRIu64 ".csv", r.seed);
        std::snprintf(sn, sizeof sn, "sigma_seed%" PRIu64 ".csv", r.seed);
        io::write_file(fs::path(c.out) / fn, r.flow_csv);
        io::write_file(fs::path(c.out) / sn, r.sigma_csv);
        names.emplace_back(fn);
        names.emplace_back(sn);
    }
    io::write_json(fs::path(c.out) / "manifold.json", top);
    io::write_manifest(c.out, names);
    for (const auto& r : runs) {
        double rmax = 0.0;
        for (double q : r.report["ratios"].get<std::vector<double>>()) rmax = std::max(rmax, q);
        std::printf("manifold seed %" PRIu64 ": %d passes, max ratio %s, xi exponent %s, "
                    "sigma exponent %s\n",
                    r.seed, r.report["iterations"].get<int>(), io::g17(rmax).c_str(),
                    io::g17(r.report["decay_fits"]["xi_exponent"].get<double>()).c_str(),
                    io::g17(r.report["decay_fits"]["sigma_exponent"].get<double>()).c_str());
    }
    std::printf("manifold: %d run(s) -> %s\n", c.seeds, c.out.c_str());
    return 0;
}

// ---- verify: invariant suites ----

struct CheckList {
    std::vector<std::pair<std::string, bool>> items;
    void add(const std::string& name, bool ok) {
        items.emplace_back(name, ok);
        std::printf("%s  %s\n", ok ? "ok  " : "FAIL", name.c_str());
    }
    bool all() const {
        for (const auto& [n, ok] : items)
            if (!ok) return false;
        return true;
    }
};

json verify_nonlinearity(const RunConfig& c, CheckList& checks) {
    const Trunc tr{c.n_axis, c.deg, c.band};
    const double a = c.a0;
    Rng rng(c.seed);

    double identity = 0.0;
    const auto cyl = cylinder_profile(tr, c.basis_w, a);
    for (int p = 0; p < 5; ++p) {
        const SpectralField xi = c.eps * unit_probe(tr, c.basis_w, a, rng);
        const SpectralField resid =
            F_gradient(cyl + xi, a) - apply_L(xi, a) - N_apply(a, xi);
        identity = std::max(identity, norm0(resid, a));
    }
    checks.add("expansion identity residual <= 1e-8", identity <= 1e-8);

    double order = 1e30;
    for (int p = 0; p < 3; ++p) {
        const SpectralField base = cyl + c.eps * unit_probe(tr, c.basis_w, a, rng);
        const SpectralField h = unit_probe(tr, c.basis_w, a, rng);
        order = std::min(
            order, gradient_consistency(base, h, a, {2e-2, 1e-2, 5e-3, 2.5e-3}).order);
    }
    checks.add("gradient consistency order >= 1.9", order >= 1.9);

    double slope = 0.0, r2 = 0.0;
    std::vector<double> lipschitz;
    if (c.eps > 0.0) {
        const SpectralField shape = unit_probe(tr, c.basis_w, a, rng);
        std::vector<double> es, ns;
        for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            es.push_back(f * c.eps);
            ns.push_back(norm0(N_apply(a, f * c.eps * shape), a));
        }
        const auto fit = fit_loglog(es, ns);
        slope = fit.slope;
        r2 = fit.r2;
        checks.add("quadratic slope within 2.0 +- 0.05", std::fabs(slope - 2.0) <= 0.05);

        for (int p = 0; p < 5; ++p) {
            const SpectralField x1 = c.eps * unit_probe(tr, c.basis_w, a, rng);
            const SpectralField x2 = c.eps * unit_probe(tr, c.basis_w, a, rng);
            lipschitz.push_back(norm0(N_apply(a, x1) - N_apply(a, x2), a) /
                                sobolev_norm(x1 - x2, 2, 0.5));
        }
        double lmax = 0.0;
        for (double l : lipschitz) lmax = std::max(lmax, l);
        // the difference quotient of a quadratic term shrinks with the
        // amplitude; anything of order one here means a scaling bug
        checks.add("lipschitz ratios O(eps)", lmax <= 20.0 * c.eps);
    }
    json j;
    j["eps"] = c.eps;
    j["identity_residual"] = identity;
    j["gradient_consistency_order"] = order;
    j["quadratic_slope"] = slope;
    j["quadratic_r2"] = r2;
    j["lipschitz_ratios"] = lipschitz;
    return j;
}

json verify_interpolation(const RunConfig& c, CheckList& checks) {
    const Trunc tr{c.n_axis, c.deg, c.band};
    Rng rng(c.seed);
    double worst = 1e30;
    bool all_ok = true;
    for (int p = 0; p < 5; ++p) {
        SpectralField u = unit_probe(tr, c.basis_w, c.a0, rng);
        u = (0.5 / pivot_norm(u, 2, c.delta)) * u; // pivot cap c = 1 with slack
        for (double aw : {0.5, 0.5 + c.delta, 0.5 + 2.0 * c.delta}) {
            const auto b = interpolation_check(u, 2, aw, c.delta, 1.0);
            all_ok = all_ok && b.ok;
            worst = std::min(worst, b.rhs / b.lhs);
        }
    }
    checks.add("interpolation bound holds at weights in [1/2, 1/2 + 2 delta]", all_ok);
    json j;
    j["min_rhs_over_lhs"] = worst;
    j["pivot_cap"] = 1.0;
    return j;
}

json verify_orthogonality(const RunConfig& c, CheckList& checks) {
    const Trunc tr{c.n_axis, c.deg, c.band};
    const double a = c.a0;

    // low end of the dense spectrum against the lattice values
    const auto dense = dense_spectrum(tr, c.basis_w, a);
    std::vector<double> expect = {-2.0 * a};
    for (int i = 0; i < c.n_axis + 2; ++i) expect.push_back(-a);
    double spec_err = 0.0;
    for (size_t i = 0; i < expect.size(); ++i)
        spec_err = std::max(spec_err, std::fabs(dense(static_cast<long>(i)) - expect[i]));
    checks.add("dense spectrum matches the lattice at the low end", spec_err <= 1e-9);

    const auto mp = params_from(c);
    Rng rng(c.seed);
    const auto sf = sample_seed(rng, tr, c.basis_w, mp, SeedControls{.target_frac = c.seed_frac});
    const auto base = FlowPath::rest(tr, c.basis_w, c.a0, c.tau_max, c.dt);
    const auto r = psi(base, sf, mp);
    checks.add("constraint orthogonality preserved along the flow <= 1e-6",
               r.max_orthogonality <= 1e-6);
    json j;
    j["dense_spectrum_error"] = spec_err;
    j["max_orthogonality"] = r.max_orthogonality;
    return j;
}

json verify_decay(const RunConfig& c, CheckList& checks) {
    const Trunc tr{c.n_axis, c.deg, c.band};
    const auto run = manifold_one(c, tr, c.seed);
    const double xe = run.report["decay_fits"]["xi_exponent"].get<double>();
    const double se = run.report["decay_fits"]["sigma_exponent"].get<double>();
    checks.add("xi decay exponent >= 1.9", xe >= 1.9);
    checks.add("sigma decay exponent >= 0.9", se >= 0.9);
    json j;
    j["decay_fits"] = run.report["decay_fits"];
    j["ratios"] = run.report["ratios"];
    return j;
}

int cmd_verify(const RunConfig& c) {
    validate_dynamics(c);
    require_cfg(c.eps >= 0.0, "eps must be nonnegative");
    const bool all = c.suite == "all";
    require_cfg(all || c.suite == "nonlinearity" || c.suite == "interpolation" ||
                    c.suite == "orthogonality" || c.suite == "decay",
                "suite must be one of nonlinearity, interpolation, orthogonality, decay, all");
    fs::create_directories(c.out);
    CheckList checks;
    std::vector<std::string> names;
    auto emit = [&](const char* name, json j) {
        const std::string file = std::string("verify_") + name + ".json";
        io::write_json(fs::path(c.out) / file, j);
        names.push_back(file);
    };
    if (all || c.suite == "nonlinearity") emit("nonlinearity", verify_nonlinearity(c, checks));
    if (all || c.suite == "interpolation") emit("interpolation", verify_interpolation(c, checks));
    if (all || c.suite == "orthogonality") emit("orthogonality", verify_orthogonality(c, checks));
    if (all || c.suite == "decay") emit("decay", verify_decay(c, checks));

    json summary;
    for (const auto& [name, ok] : checks.items) summary[name] = ok;
    io::write_json(fs::path(c.out) / "verify.json", summary);
    names.emplace_back("verify.json");
    io::write_manifest(c.out, names);
    std::printf("verify %s: %zu checks, %s -> %s\n", c.suite.c_str(), checks.items.size(),
                checks.all() ? "all passed" : "FAILURES", c.out.c_str());
    return checks.all() ? 0 : 1;
}

// ---- reconstruct: fixed point -> dilation history -> surface cloud ----

int cmd_reconstruct(const RunConfig& c) {
    validate_dynamics(c);
    require_cfg(c.slices >= 2, "slices must be at least 2");
    fs::create_directories(c.out);
    const Trunc tr{c.n_axis, c.deg, c.band};
    const auto mp = params_from(c);
    Rng rng(c.seed);
    const auto sf = sample_seed(rng, tr, c.basis_w, mp, SeedControls{.target_frac = c.seed_frac});
    const auto fp = fixed_point(sf, mp);
    const auto& path = fp.path;

    // Unrescaled time from the path: dt = lambda^2 dtau with
    // lambda(tau) = exp(-int a), lambda(0) = 1; past the grid the frozen-a
    // tail closes the integral, which fixes the extinction time T.
    const int m = path.size();
    std::vector<double> avals(m), lamsq(m);
    for (int k = 0; k < m; ++k) avals[k] = path.sigma[k].a;
    const auto cum = cumulative_integral(path.taus, avals);
    for (int k = 0; k < m; ++k) lamsq[k] = std::exp(-2.0 * cum[k]);
    auto tgrid = cumulative_integral(path.taus, lamsq);
    std::vector<double> ta = avals;
    const double T = tgrid.back() + lamsq.back() / (2.0 * avals.back());
    tgrid.push_back(T);
    ta.push_back(avals.back());
    const auto rs = build_rescaling(tgrid, ta, T);

    std::vector<double> ts;
    for (int j = 0; j < c.slices; ++j) {
        const int k = static_cast<int>(
            std::llround(0.9 * (m - 1) * static_cast<double>(j) / (c.slices - 1)));
        ts.push_back(tgrid[k]); // node times: no interpolation error in t
    }
    const auto slices = reconstruct_flow(path, rs, ts);
    io::write_file(fs::path(c.out) / "surface.csv", io::surface_csv(slices));

    double min_radius = 1e30;
    for (const auto& sl : slices) min_radius = std::min(min_radius, sl.min_radius);
    const auto tf = tangent_flow_limit(path);

    json j;
    j["seed"] = c.seed;
    j["extinction_time"] = T;
    j["lambda_end"] = std::sqrt(lamsq.back());
    j["sample_times"] = ts;
    j["min_radius"] = min_radius;
    j["tangent_flow"] = {{"a_inf", tf.sigma_inf.a},
                         {"z_inf", vec_json(tf.sigma_inf.z)},
                         {"radius", tf.radius},
                         {"fit_residual", tf.fit_residual},
                         {"drift_bound", tf.drift_bound}};
    io::write_json(fs::path(c.out) / "reconstruct.json", j);
    io::write_manifest(c.out, {"surface.csv", "reconstruct.json"});
    std::printf("reconstruct: %d slices to extinction at T = %s, limit radius %s -> %s\n",
                c.slices, io::g17(T).c_str(), io::g17(tf.radius).c_str(), c.out.c_str());
    if (min_radius <= 0.0) {
        std::fprintf(stderr, "reconstruct: surface is not a graph (min radius %g)\n",
                     min_radius);
        return 1;
    }
    return 0;
}

// ---- wiring ----

void add_common(CLI::App* sc, RunConfig& c) {
    sc->add_option("--config", c.config_path, "key = value file applied before flags");
    sc->add_option("--out", c.out, "artifact directory");
    sc->add_option("--naxis", c.n_axis, "axis dimensions (1 or 2)");
    sc->add_option("--deg", c.deg, "Hermite degree cap");
    sc->add_option("--band", c.band, "Fourier band cap");
    sc->add_option("--basis-w", c.basis_w, "basis Gaussian weight");
}

void add_dynamics(CLI::App* sc, RunConfig& c) {
    sc->add_option("--delta", c.delta, "decay-class size");
    sc->add_option("--a0", c.a0, "initial dilation parameter");
    sc->add_option("--seed", c.seed, "rng seed");
    sc->add_option("--tol", c.tol, "iteration tolerance");
    sc->add_option("--tau-max", c.tau_max, "slow-time horizon");
    sc->add_option("--dt", c.dt, "slow-time step");
    sc->add_option("--seed-frac", c.seed_frac, "seed norm as a fraction of delta");
}

int run(int argc, char** argv) {
    RunConfig c;

    // flags override the file, so the file must be applied first: find it
    // before CLI11 sees the command line
    std::string sub, cfg_path;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (sub.empty() && !a.empty() && a[0] != '-') sub = a;
        if (a == "--config" && i + 1 < argc) cfg_path = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0) cfg_path = a.substr(9);
    }
    if (!cfg_path.empty()) load_config_file(c, cfg_path, sub);

    CLI::App app{"spectral toolkit for rescaled curvature flow over a cylinder"};
    app.require_subcommand(1);

    auto* sp = app.add_subcommand("spectrum", "linearization eigenvalues as CSV");
    add_common(sp, c);
    sp->add_option("--a", c.a, "Gaussian weight of the linearization");

    auto* si = app.add_subcommand("simulate", "one frozen-coefficient solve from rest");
    add_common(si, c);
    add_dynamics(si, c);
    si->add_option("--snapshot-every", c.snapshot_every, "field snapshot stride in nodes");

    auto* ma = app.add_subcommand("manifold", "stable-manifold fixed point runs");
    add_common(ma, c);
    add_dynamics(ma, c);
    ma->add_option("--seeds", c.seeds, "number of independent seeds");
    ma->add_option("--max-iter", c.max_iter, "fixed-point pass cap");
    ma->add_option("--jobs", c.jobs, "parallel workers across seeds");

    auto* ve = app.add_subcommand("verify", "invariant suites with pass/fail report");
    add_common(ve, c);
    add_dynamics(ve, c);
    ve->add_option("--suite", c.suite, "nonlinearity | interpolation | orthogonality | decay | all");
    ve->add_option("--eps", c.eps, "probe amplitude (0 probes the rest state)");

    auto* re = app.add_subcommand("reconstruct", "unrescaled surface point cloud");
    add_common(re, c);
    add_dynamics(re, c);
    re->add_option("--max-iter", c.max_iter, "fixed-point pass cap");
    re->add_option("--slices", c.slices, "number of sample times");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    validate_common(c);
    if (sp->parsed()) return cmd_spectrum(c);
    if (si->parsed()) return cmd_simulate(c);
    if (ma->parsed()) return cmd_manifold(c);
    if (ve->parsed()) return cmd_verify(c);
    return cmd_reconstruct(c);
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const divergence_error& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
