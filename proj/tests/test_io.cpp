#include "cylflow/io.hpp"
#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <filesystem>

using namespace cylflow;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    size_t at = 0;
    while (at < s.size()) {
        const auto nl = s.find('\n', at); // writers end every line with \n
        out.push_back(s.substr(at, nl - at));
        at = nl + 1;
    }
    return out;
}

std::vector<std::string> cells_of(const std::string& line) {
    std::vector<std::string> out;
    size_t at = 0;
    while (true) {
        const auto c = line.find(',', at);
        out.push_back(line.substr(at, c == std::string::npos ? c : c - at));
        if (c == std::string::npos) return out;
        at = c + 1;
    }
}

bool same_bits(double x, double y) {
    return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
}

} // namespace

TEST_CASE("numbers render deterministically") {
    CHECK(io::g17(0.1) == "0.10000000000000001");
    CHECK(io::g17(1.0) == "1");
    CHECK(io::g17(-0.5) == "-0.5");
    CHECK(io::g17(-0.0) == "-0");
    CHECK(io::hex64(0xdeadbeefULL) == "0x00000000deadbeef");
}

TEST_CASE("field json round trip is bit exact") {
    const Trunc tr{2, 8, 3};
    Rng rng(7);
    auto u = testing::random_field(tr, 0.5, rng);
    u.c(0) = 0.0;
    u.c(1) = -0.0;
    u.c(2) = 1e-308;
    u.c(3) = M_PI;

    const auto j = io::field_to_json(u);
    const auto v = io::field_from_json(j);
    CHECK(v.tr.n_axis == tr.n_axis);
    CHECK(v.tr.deg == tr.deg);
    CHECK(v.tr.band == tr.band);
    CHECK(v.basis_w == u.basis_w);
    for (long i = 0; i < u.c.size(); ++i) CHECK(same_bits(v.c(i), u.c(i)));

    CHECK(j.dump(2) == io::field_to_json(u).dump(2));

    auto bad = j;
    bad["coeffs"].get_ref<io::json::array_t&>().pop_back();
    CHECK_THROWS_AS(io::field_from_json(bad), config_error);
    bad = j;
    bad.erase("basis_weight");
    CHECK_THROWS_AS(io::field_from_json(bad), config_error);
    CHECK_THROWS_AS(io::parse_json("{ not json"), config_error);
}

TEST_CASE("field binary round trip is bit exact") {
    const Trunc tr{1, 10, 4};
    Rng rng(11);
    auto u = testing::random_field(tr, 0.5, rng);
    u.c(0) = -0.0;
    u.c(1) = 1e308;
    u.c(2) = 0x1p-52;

    const std::string s = io::field_to_binary(u);
    REQUIRE(s.size() == 4 + 8 * 6 + 8 * static_cast<size_t>(u.c.size()));
    const auto v = io::field_from_binary(s);
    CHECK(v.tr.n_axis == tr.n_axis);
    CHECK(v.tr.deg == tr.deg);
    CHECK(v.tr.band == tr.band);
    CHECK(same_bits(v.basis_w, u.basis_w));
    for (long i = 0; i < u.c.size(); ++i) CHECK(same_bits(v.c(i), u.c(i)));

    CHECK_THROWS_AS(io::field_from_binary("XYZW" + s.substr(4)), config_error);
    CHECK_THROWS_AS(io::field_from_binary(s.substr(0, s.size() - 4)), config_error);
    std::string tampered = s;
    tampered[4] = 2; // version word
    CHECK_THROWS_AS(io::field_from_binary(tampered), config_error);
}

TEST_CASE("spectrum table starts with the known low modes at a = 1/2") {
    const Trunc tr{1, 6, 3};
    const auto csv = io::spectrum_csv(tr, 0.5);
    CHECK(csv == io::spectrum_csv(tr, 0.5));

    const auto lines = lines_of(csv);
    REQUIRE(lines.size() == 1 + 7 * 4); // degrees 0..6, angular modes 0..3
    CHECK(lines[0] == "alpha_multi_index,fourier_m,eigenvalue,classification");
    CHECK(lines[1] == "0,0,-1,unstable");
    CHECK(lines[2] == "0,1,-0.5,unstable");
    CHECK(lines[3] == "1,0,-0.5,unstable");
    CHECK(lines[4] == "1,1,0,zero");
    CHECK(lines[5] == "2,0,0,zero");
    CHECK(lines[6] == "2,1,0.5,stable");
    CHECK(lines[7] == "3,0,0.5,stable");

    // every eigenvalue matches its own lattice level and the classes are
    // ordered: no stable row may precede an unstable one
    double prev = -2.0;
    for (size_t k = 1; k < lines.size(); ++k) {
        const auto cells = cells_of(lines[k]);
        REQUIRE(cells.size() == 4);
        const double lam = std::stod(cells[2]);
        CHECK(lam >= prev);
        prev = lam;
        const char* want = lam < 0.0 ? "unstable" : (lam == 0.0 ? "zero" : "stable");
        CHECK(cells[3] == want);
    }

    const auto planar = lines_of(io::spectrum_csv(Trunc{2, 2, 1}, 0.5));
    CHECK(planar[1] == "0;0,0,-1,unstable");
}

TEST_CASE("path tables carry the expected columns") {
    const Trunc tr{1, 8, 3};
    auto p = FlowPath::rest(tr, 0.5, 0.55, 1.0, 0.25);
    Rng rng(3);
    p.xi[2] = testing::random_field(tr, 0.5, rng, 0.01);

    const auto sig = lines_of(io::sigma_path_csv(p));
    REQUIRE(sig.size() == 1 + 5);
    CHECK(sig[0] == "tau,a,z_1,z_2,tilt_0_0,tilt_1_0,da,dz_1,dz_2,dtilt_0_0,dtilt_1_0");
    CHECK(sig[1] == "0,0.55000000000000004,0,0,0,0,0,0,0,0,0");
    CHECK(cells_of(sig[2])[0] == "0.25");

    const auto flow = lines_of(io::flow_csv(p));
    REQUIRE(flow.size() == 1 + 5);
    CHECK(flow[0] == "tau,norm_xi_s,a,z_1,z_2,tilt_0_0,tilt_1_0,orthogonality");
    const auto rest_row = cells_of(flow[1]);
    CHECK(rest_row[1] == "0"); // zero graph function at the rest state
    CHECK(rest_row[7] == "0");
    const auto bumped = cells_of(flow[3]);
    CHECK(bumped[1] == io::g17(sobolev_norm(p.xi[2], 2, 0.5)));
    CHECK(std::stod(bumped[7]) > 0.0); // unprojected noise has mode content
}

TEST_CASE("surface table flattens slices") {
    const double a0 = 0.5, T = 1.0;
    const auto tgrid = clustered_time_grid(T, 200, 0.95);
    const auto rs = build_rescaling(tgrid, std::vector<double>(tgrid.size(), a0), T);
    const Trunc tr{1, 6, 3};
    const auto path = FlowPath::rest(tr, 0.5, a0, 2.0, 0.25);
    const auto slices = reconstruct_flow(path, rs, {0.0, 0.6});

    const auto lines = lines_of(io::surface_csv(slices));
    const auto np = slices.front().points.rows();
    REQUIRE(lines.size() == 1 + 2 * static_cast<size_t>(np));
    CHECK(lines[0] == "t,x_1,x_2,x_3,radius");
    const auto row = cells_of(lines[1]);
    REQUIRE(row.size() == 5);
    CHECK(row[0] == "0");
    CHECK(row[4] == io::g17(slices.front().radius(0)));
    CHECK(cells_of(lines[1 + np])[0] == io::g17(0.6));
}

TEST_CASE("manifest records every artifact with its hash") {
    const fs::path dir = fs::temp_directory_path() / "cylflow_io_manifest_test";
    fs::create_directories(dir);
    io::write_file(dir / "b.csv", "x,y\n1,2\n");
    io::write_file(dir / "a.json", "{}\n");

    io::write_manifest(dir, {"b.csv", "a.json"});
    const auto first = io::read_file(dir / "manifest.json");
    io::write_manifest(dir, {"b.csv", "a.json"});
    CHECK(io::read_file(dir / "manifest.json") == first);

    const auto j = io::parse_json(first);
    REQUIRE(j.at("artifacts").size() == 2);
    CHECK(j.at("artifacts")[0].at("file") == "a.json"); // sorted by name
    CHECK(j.at("artifacts")[1].at("file") == "b.csv");
    CHECK(j.at("artifacts")[1].at("bytes") == 8);
    CHECK(j.at("artifacts")[1].at("fnv1a64") == io::hex64(fnv1a64(std::string("x,y\n1,2\n"))));

    CHECK_THROWS_AS(io::write_manifest(dir, {"missing.txt"}), config_error);
    fs::remove_all(dir);
}
