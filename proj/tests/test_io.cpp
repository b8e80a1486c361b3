#include "oracles.hpp"

#include <opursuit/errors.hpp>
#include <opursuit/io.hpp>

#include <doctest.h>

#include <filesystem>

using namespace opursuit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    fs::path p = fs::temp_directory_path() / ("opursuit_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("format_double round-trips") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(40)) - 20);
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(-0.0) == "0");
    CHECK(format_double(1.5) == "1.5");
}

TEST_CASE("matrix CSV round trip is exact") {
    Rng rng(2);
    Matrix a = oracle::gaussian(rng, 7, 5);
    a(0, 0)  = 1e-300;
    a(1, 1)  = -12345.678901234567;
    CHECK(parse_matrix_csv(matrix_to_csv(a)) == a);

    fs::path dir = scratch("roundtrip");
    write_matrix_csv(dir / "a.csv", a);
    CHECK(read_matrix_csv(dir / "a.csv") == a);
}

TEST_CASE("matrix CSV layout and leniency") {
    Matrix a = parse_matrix_csv("1,2,3\r\n4, 5 ,+6\n\n");
    REQUIRE(a.rows() == 2);
    REQUIRE(a.cols() == 3);
    CHECK(a(1, 2) == 6);
    CHECK(a(0, 1) == 2);
    Matrix b(1, 2);
    b << 0.5, -2;
    CHECK(matrix_to_csv(b) == "0.5,-2\n");
}

TEST_CASE("matrix CSV errors") {
    CHECK_THROWS_AS(parse_matrix_csv(""), IoError);
    CHECK_THROWS_AS(parse_matrix_csv("1,2\n3\n"), IoError);
    CHECK_THROWS_AS(parse_matrix_csv("1,x\n"), IoError);
    CHECK_THROWS_AS(parse_matrix_csv("1,nan\n"), IoError);
    CHECK_THROWS_AS(parse_matrix_csv("1,inf\n"), IoError);
    CHECK_THROWS_AS(parse_matrix_csv("1,,2\n"), IoError);
    CHECK_THROWS_AS(parse_matrix_csv("1e999\n"), IoError);
    CHECK_THROWS_AS(read_matrix_csv("/nonexistent/file.csv"), IoError);
}

TEST_CASE("mask CSV") {
    fs::path dir = scratch("mask");
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> obs(2, 3);
    obs << true, false, true, false, false, true;
    ColumnEntryMask m(obs);
    write_mask_csv(dir / "m.csv", m);
    CHECK(read_text(dir / "m.csv") == "1,0,1\n0,0,1\n");
    CHECK((read_mask_csv(dir / "m.csv").observed() == obs).all());

    write_text(dir / "bad.csv", "1,0.5\n");
    CHECK_THROWS_AS(read_mask_csv(dir / "bad.csv"), IoError);
    write_text(dir / "empty.csv", "0,0\n");
    CHECK_THROWS_AS(read_mask_csv(dir / "empty.csv"), IoError);
}

TEST_CASE("instance sidecar") {
    InstanceSpec s;
    s.p = s.n           = 20;
    s.r                 = 2;
    s.outlier_count     = 3;
    s.seed              = 99;
    s.shuffle_outliers  = true;
    Instance in         = generate(s);
    nlohmann::json j    = instance_sidecar(s, in.truth);
    CHECK(j["schema_version"] == schema_version);
    CHECK(j["r"] == 2);
    CHECK(j["seed"] == 99);
    CHECK(j["mode"] == "random");
    CHECK(j["I0"].get<std::vector<Index>>() == in.truth.I0.indices());

    SidecarInfo info = parse_sidecar(nlohmann::json::parse(j.dump()));
    CHECK(info.r == 2);
    CHECK(info.I0 == in.truth.I0.indices());
    CHECK(info.n == 20);
    CHECK_THROWS_AS(parse_sidecar(nlohmann::json{{"I0", {1}}}), IoError);
    CHECK_THROWS_AS(parse_sidecar(nlohmann::json{{"r", 0}, {"I0", {1}}}), IoError);
}

TEST_CASE("certificate report JSON") {
    CertificateReport rep;
    rep.psi                = 0.25;
    rep.lambda_lo          = 0.1;
    rep.gamma_condition_ok = true;
    rep.conditions.push_back({"a", 1e-12, 1e-8, true});
    rep.conditions.push_back({"b", 0.5, 1.0, true});
    nlohmann::json j = to_json(rep);
    for (const char *key : {"schema_version", "psi", "lambda_lo", "lambda_hi", "gamma_ok", "conditions", "pass"})
        CHECK(j.contains(key));
    CHECK(j["lambda_hi"].is_null());
    CHECK(j["pass"] == true);
    CHECK(j["conditions"].size() == 2);
    CHECK(j["conditions"][1]["name"] == "b");
    CHECK(j["conditions"][1]["measured"] == 0.5);
    CHECK(j["conditions"][1]["bound"] == 1.0);

    rep.conditions[0].pass = false;
    CHECK(to_json(rep)["pass"] == false);
}

TEST_CASE("grid CSV and PGM") {
    ExperimentGrid g;
    g.r_values       = {1, 2};
    g.outlier_counts = {0, 5, 10};
    g.rates.resize(2, 3);
    g.rates << 1, 0.5, 0, 1, 0.25, 0;
    CHECK(grid_to_csv(g) == "r,0,5,10\n1,1,0.5,0\n2,1,0.25,0\n");
    std::string pgm = grid_to_pgm(g);
    const std::string header = "P5\n3 2\n255\n";
    REQUIRE(pgm.size() == header.size() + 6);
    CHECK(pgm.substr(0, header.size()) == header);
    const auto *px = reinterpret_cast<const unsigned char *>(pgm.data() + header.size());
    CHECK(px[0] == 255);
    CHECK(px[1] == 128);
    CHECK(px[2] == 0);
    CHECK(px[4] == 64);
}

TEST_CASE("sweep CSV") {
    std::vector<SweepPoint> pts{{0.5, 1.0}, {1.5, 0.1}};
    CHECK(sweep_to_csv(pts, "sigma_over_s") == "sigma_over_s,rate\n0.5,1\n1.5,0.10000000000000001\n");
}

TEST_CASE("finite_or_null") {
    CHECK(finite_or_null(1.0) == 1.0);
    CHECK(finite_or_null(std::numeric_limits<double>::infinity()).is_null());
    CHECK(finite_or_null(std::nan("")).is_null());
}
