#include <cmath>
#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "squeezesim/config.hpp"
#include "squeezesim/records_io.hpp"

using namespace squeeze;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::filesystem::path scratch_dir() {
    auto d = std::filesystem::temp_directory_path() / "squeezesim_test_config_io";
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("defaults") {
    const RunConfig c = parse_config("");
    CHECK(c.sim.ensemble.n_effective == 4.8e5);
    CHECK(c.sim.ensemble.initial_contrast == 0.97);
    CHECK(c.sim.cavity.g == doctest::Approx(kTwoPi * 447e3));
    CHECK(c.sim.probe.m_t == 4.1e4);
    CHECK(c.master_seed == 1);
    CHECK(echo_config(c) == echo_config(RunConfig{}));
}

TEST_CASE("both key forms") {
    const RunConfig a = parse_config("[transition]\np_ud = 0.6667\n[run]\nmaster_seed = 9\n");
    const RunConfig b = parse_config("transition.p_ud = 0.6667\nrun.master_seed = 9  # trailing comment\n");
    CHECK(a.sim.transition.p_ud == 0.6667);
    CHECK(echo_config(a) == echo_config(b));
    CHECK(parse_config("[cavity]\ndelta_hz = 1.5e8\n").sim.cavity.delta == doctest::Approx(kTwoPi * 1.5e8));
    CHECK(parse_config("[experiment]\nscaling_n = [1e5, 2e5, 4e5]\n").experiment.scaling_n.size() == 3);
}

TEST_CASE("errors name the key") {
    CHECK(error_of("ensemble.n_effective = -1").find("ensemble.n_effective") != std::string::npos);
    CHECK(error_of("ensemble.n_effective = -1").find("range") != std::string::npos);
    CHECK(error_of("[cavity]\ncolour = red").find("cavity.colour") != std::string::npos);
    CHECK(error_of("probe.m_t = 1\nprobe.m_t = 2").find("probe.m_t") != std::string::npos);
    CHECK(error_of("probe.m_t = lots").find("probe.m_t") != std::string::npos);
    CHECK(error_of("transition.p_ud = 1.5").find("transition.p_ud") != std::string::npos);
    CHECK(error_of("model.raman = maybe").find("model.raman") != std::string::npos);
    CHECK_FALSE(error_of("just some words").empty());
    CHECK_THROWS(load_config((scratch_dir() / "does_not_exist.cfg").string()));
}

TEST_CASE("echo is a fixed point and restores every double") {
    Rng rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        RunConfig c;
        c.sim.cavity.delta = kTwoPi * (100e6 + 200e6 * rng.uniform());
        c.sim.cavity.g = kTwoPi * 4e5 * (1 + rng.uniform());
        c.sim.ensemble.set_n(1e4 + 1e6 * rng.uniform());
        c.sim.transition.p_ud = rng.uniform() * 0.9;
        c.sim.probe.m_t = 1e5 * rng.uniform() + 1;
        c.sim.probe.detuning_spread = kTwoPi * 3e5 * rng.uniform();
        c.sim.noise.r_c = 1e-11 * rng.uniform();
        c.sim.model.excess_dephasing = 1e-5 * rng.uniform();
        c.experiment.calibration_mt = {0, 1e5 * rng.uniform()};
        c.master_seed = rng.engine()();
        const std::string e = echo_config(c);
        const RunConfig back = parse_config(e);
        CHECK(echo_config(back) == e);
        CHECK(back.sim.cavity.delta == c.sim.cavity.delta);
        CHECK(back.sim.cavity.g == c.sim.cavity.g);
        CHECK(back.sim.probe.detuning_spread == c.sim.probe.detuning_spread);
        CHECK(back.sim.ensemble.n_effective == c.sim.ensemble.n_effective);
        CHECK(back.sim.noise.r_c == c.sim.noise.r_c);
        CHECK(back.master_seed == c.master_seed);
        CHECK(config_hash(back) == config_hash(c));
    }
}

TEST_CASE("content hash") {
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    RunConfig c;
    const auto h = config_hash(c);
    c.master_seed = 2;
    CHECK(config_hash(c) != h);
}

TEST_CASE("17-digit doubles round trip") {
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        const double v = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.uniform() * 200) - 100);
        CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
    }
}

TEST_CASE("trial records round trip losslessly") {
    SimParams p;
    p.cavity.delta = kTwoPi * 187.123456789e6;
    p.transition.p_ud = 0.6667;
    const auto rs = run_trials(squeezing_protocol(), p, 40, 77);
    const std::string csv = records_to_csv(rs);
    CHECK(csv.rfind("# schema=1\n", 0) == 0);
    CHECK(csv.find("trial,seed,Nd,Np,Nf,omega_p_offset_hz") != std::string::npos);

    const RecordSet back = records_from_csv(csv);
    CHECK(back.labels == rs.labels);
    CHECK(back.master_seed == 77);
    CHECK(back.trials == rs.trials);
    RunConfig a, b;
    a.sim = rs.params;
    b.sim = back.params;
    CHECK(echo_config(a) == echo_config(b));
    CHECK(records_to_csv(back) == csv);

    const auto path = (scratch_dir() / "records.csv").string();
    write_records(rs, path);
    CHECK(read_records(path).trials == rs.trials);
}

TEST_CASE("record schema errors") {
    const auto rs = run_trials(squeezing_protocol(), SimParams{}, 3, 1);
    std::string csv = records_to_csv(rs);

    std::string no_schema = csv.substr(csv.find('\n') + 1);
    CHECK_THROWS_AS(records_from_csv(no_schema), SchemaError);

    std::string missing = csv;
    const auto pos = missing.find(",Np_hz");
    missing.replace(pos, 6, ",Np_x");
    try {
        records_from_csv(missing);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("Np_hz") != std::string::npos);
    }

    std::string bad = csv;
    bad.replace(bad.rfind(',') + 1, 1, "x");
    CHECK_THROWS_AS(records_from_csv(bad), SchemaError);
    CHECK_THROWS_AS(records_from_csv(csv + "1,2,3\n"), SchemaError);
}

TEST_CASE("sweep csv feeds the fitter and sidecars are valid json") {
    const auto s = squeezing_sweep(SimParams{}, log_grid(1e3, 1e5, 8), 300, 3);
    const auto path = (scratch_dir() / "sweep.csv").string();
    write_text(path, sweep_to_csv(s));
    const auto pts = read_r_points(path);
    REQUIRE(pts.size() == 8);
    for (size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].m_t == s.rows[i].m_t);
        CHECK(pts[i].r == s.rows[i].r);
    }
    RunConfig cfg;
    const auto j = nlohmann::json::parse(sidecar_json("sweep", cfg, R"({"k": 1})"));
    CHECK(j["experiment"] == "sweep");
    CHECK(j["config_hash"] == config_hash(cfg));
    CHECK(j["params"]["ensemble"]["n_effective"] == 4.8e5);
    CHECK(j["result"]["k"] == 1);
}
