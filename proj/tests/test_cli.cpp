#include "doctest.h"

#include "oracles.hpp"
#include "rayleigh/cli/commands.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

using namespace rayleigh::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    const fs::path dir = fs::temp_directory_path() / "rayleigh_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path &p, const std::string &text) { std::ofstream(p, std::ios::binary) << text; }

struct Table {
    std::vector<std::string>              header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string &name) const {
        for(std::size_t i = 0; i < header.size(); ++i)
            if(header[i] == name) return i;
        FAIL("no column " << name);
        return 0;
    }
    double at(std::size_t row, const std::string &name) const { return std::stod(rows[row][column(name)]); }
    const std::string &raw(std::size_t row, const std::string &name) const { return rows[row][column(name)]; }
};

Table readCsv(const fs::path &p) {
    std::istringstream in(slurp(p));
    Table              t;
    std::string        line;
    bool               first = true;
    while(std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream        ls(line);
        std::string              cell;
        while(std::getline(ls, cell, ',')) cells.push_back(cell);
        if(first)
            t.header = cells;
        else
            t.rows.push_back(cells);
        first = false;
    }
    return t;
}

RunSummary run(Command c, const fs::path &dir, const std::string &toml, unsigned threads = 1) {
    spit(dir / "run.toml", toml);
    Overrides o;
    o.threads = threads;
    o.out     = dir / "out";
    return runCommand(c, resolveContext(loadConfig(dir / "run.toml"), o, false));
}

std::string configError(const std::string &toml) {
    try {
        parseConfig(toml, ".", "t.toml");
    } catch(const ConfigError &e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("config defaults") {
    const RunConfig c = parseConfig("schema_version = 1\n", "/base");
    CHECK(c.scene.psf == "gaussian");
    CHECK(c.scene.sigma == 1.0);
    CHECK(c.scene.epsilon * static_cast<double>(c.scene.intervals) == doctest::Approx(1e4));
    CHECK(c.scene.truncation == 40);
    CHECK(c.analysis.points == 60);
    CHECK(c.analysis.spacing == "log");
    CHECK(c.analysis.theta2Min == 0.01);
    CHECK(c.analysis.theta2Max == 5.0);
    CHECK(c.montecarlo.seed == 1);
    CHECK(c.output.directory == fs::path("/base/out"));
}

TEST_CASE("config errors carry line and column") {
    CHECK(configError("schema_version = 1\n[scene]\nsigma = 1.0\nsigam = 2.0\n") == "t.toml:4:1: unknown key 'scene.sigam'");
    CHECK(configError("schema_version = 1\n\n[analysis]\npoints = \"many\"\n").rfind("t.toml:4:10: analysis.points: expected an integer", 0) == 0);
    CHECK(configError("schema_version = 1\n[scene]\nsigma = -1\n").rfind("t.toml:3:9: scene.sigma: must be positive", 0) == 0);
    CHECK(configError("schema_version = 1\n[analysis]\ntheta2_min = 0.0\n").find("must be positive for a log grid") != std::string::npos);
    CHECK(configError("schema_version = 1\n[analysis]\ntheta2_min = 0.0\nspacing = \"linear\"\n").empty());
    CHECK(configError("schema_version = 1\n[analysis]\ntheta2_max = 0.001\n").find("theta2_max") != std::string::npos);
    CHECK(configError("schema_version = 1\nextra = 3\n") == "t.toml:2:1: unknown key 'extra'");
    CHECK(configError("schema_version = 1\nscene = 3\n").find("must be a table") != std::string::npos);
    CHECK(configError("[scene]\n").find("missing schema_version") != std::string::npos);
    CHECK(configError("schema_version = 7\n").find("t.toml:1:") == 0);
    CHECK(configError("schema_version = 1\n[scene\n").find("t.toml:2:") == 0);
    CHECK(configError("schema_version = 1\n[scheme]\nkind = \"custom-unitary\"\n").find("unitary_file") != std::string::npos);
    CHECK(configError("schema_version = 1\n[scheme]\nkind = \"custom-unitary\"\nunitary_file = \"nope.csv\"\n").find("t.toml:4:") == 0);
    CHECK(configError("schema_version = 1\n[scene]\npsf = \"tabulated\"\n").find("psf_file") != std::string::npos);
    CHECK(configError("schema_version = 1\n[montecarlo]\nseed = -4\n").find("montecarlo.seed") != std::string::npos);
    CHECK(configError("schema_version = 1\n[montecarlo]\nbound_min = 2.0\nbound_max = 1.0\n").find("bound_max") != std::string::npos);
    CHECK(configError("schema_version = 1\n[output]\nprefix = \"a/b\"\n").find("output.prefix") != std::string::npos);
}

TEST_CASE("rendered config parses back to the same config") {
    const std::string text = "schema_version = 1\n"
                             "[scene]\nsigma = 0.7\nepsilon = 0.1\nintervals = 3\n"
                             "[scheme]\nkind = \"binary-spade\"\noffset = 0.1\n"
                             "[analysis]\npoints = 7\nspacing = \"linear\"\ntheta2_min = 0.0\ntwo_parameter = true\n"
                             "[montecarlo]\nseed = \"18446744073709551615\"\nphotons = 123.5\nbound_max = 4.0\n"
                             "[output]\nprefix = \"x_\"\n";
    const RunConfig   a    = parseConfig(text, "/base");
    CHECK(a.montecarlo.seed == 18446744073709551615ull);
    const std::string once = renderConfig(a);
    const RunConfig   b    = parseConfig(once, "/elsewhere");
    CHECK(renderConfig(b) == once);
    CHECK(b.scene.sigma == 0.7);
    CHECK(*b.montecarlo.photons == 123.5);
    CHECK(b.montecarlo.seed == a.montecarlo.seed);
    CHECK(b.output.directory == fs::path("/base/out"));
}

TEST_CASE("flags override environment which overrides config") {
    const RunConfig base = parseConfig("schema_version = 1\n[output]\ndirectory = \"cfg\"\n", "/base");
    ::setenv("RAYLEIGH_LAB_OUT", "/env/out", 1);
    ::setenv("RAYLEIGH_LAB_THREADS", "3", 1);
    RunContext ctx = resolveContext(base, {}, true);
    CHECK(ctx.config.output.directory == fs::path("/env/out"));
    CHECK(ctx.threads == 3);

    Overrides o;
    o.out     = "/flag/out";
    o.threads = 5;
    o.seed    = 99;
    ctx       = resolveContext(base, o, true);
    CHECK(ctx.config.output.directory == fs::path("/flag/out"));
    CHECK(ctx.threads == 5);
    CHECK(ctx.config.montecarlo.seed == 99);

    ctx = resolveContext(base, {}, false);
    CHECK(ctx.config.output.directory == fs::path("/base/cfg"));

    ::setenv("RAYLEIGH_LAB_THREADS", "zero", 1);
    CHECK_THROWS_AS(resolveContext(base, {}, true), rayleigh::ValidationError);
    ::unsetenv("RAYLEIGH_LAB_OUT");
    ::unsetenv("RAYLEIGH_LAB_THREADS");
}

TEST_CASE("number formatting") {
    CHECK(formatNumber(0.1) == "0.10000000000000001");
    CHECK(formatNumber(2500.0) == "2500");
    CHECK(formatNumber(1.0 / 3.0) == "0.33333333333333331");
    CHECK(formatNumber(1e-300) == "1e-300");
    CHECK(formatNumber(INFINITY) == "inf");
    CHECK(std::stod(formatNumber(std::nextafter(1.0, 2.0))) == std::nextafter(1.0, 2.0));
}

TEST_CASE("crb command") {
    const auto dir = scratch("crb");
    const auto s   = run(Command::crb, dir, "schema_version = 1\n[analysis]\npoints = 9\n");
    REQUIRE(s.exitCode == kExitOk);
    const Table t = readCsv(dir / "out" / "crb.csv");
    REQUIRE(t.rows.size() == 9);
    CHECK(t.header[0] == "theta2_over_sigma");
    const std::vector<std::string> lead(t.header.begin(), t.header.begin() + 7);
    CHECK(lead == std::vector<std::string>{"theta2_over_sigma", "J_direct", "J_spade", "K", "crb_direct", "crb_spade", "crb_quantum"});
    const double N = 1e4;
    for(std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(t.at(i, "crb_spade") == doctest::Approx(4.0 / N).epsilon(1e-6));
        CHECK(t.at(i, "K") == doctest::Approx(N / 4.0).epsilon(1e-6));
        CHECK(t.at(i, "K_per_photon") == doctest::Approx(0.25).epsilon(1e-6));
        CHECK(t.at(i, "crb_quantum_per_photon") == doctest::Approx(4.0).epsilon(1e-6));
    }
    CHECK(t.at(0, "theta2_over_sigma") == 0.01);
    CHECK(t.at(8, "theta2_over_sigma") == 5.0);
    CHECK(t.at(0, "crb_direct") / t.at(0, "crb_spade") > 1e3);
    CHECK(t.at(8, "crb_direct") / t.at(8, "crb_spade") < 1.1);

    const auto m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(m["status"] == "ok");
    CHECK(m["command"] == "crb");
    CHECK(m["outputs"][0] == "crb.csv");
    CHECK(m["diagnostics"]["max_leakage"].get<double>() < 1e-12);
}

TEST_CASE("crb rejects a tabulated PSF") {
    const auto dir = scratch("crb_tab");
    std::string table;
    for(int i = -400; i <= 400; ++i) table += fmt::format("{},{:.17g}\n", i * 0.02, oracle::gaussianAmplitude(i * 0.02, 1.0));
    spit(dir / "psf.csv", table);
    const auto s = run(Command::crb, dir, "schema_version = 1\n[scene]\npsf = \"tabulated\"\npsf_file = \"psf.csv\"\nnormalize = true\n");
    CHECK(s.exitCode == kExitError);
    CHECK(s.error.find("gaussian") != std::string::npos);
    const auto m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(m["status"] == "error");
}

TEST_CASE("fisher on an identity-scattering D = 4 scheme matches a hand computation") {
    // Identity outputs on 4 modes read g's diagonal: a truncated, renormalized
    // Poisson(Q) law with Q = theta^2 / 16.
    const auto  dir = scratch("fisher_identity");
    std::string u;
    for(int r = 0; r < 4; ++r) {
        for(int c = 0; c < 4; ++c) u += fmt::format("{}{},0", c ? "," : "", r == c ? 1 : 0);
        u += "\n";
    }
    spit(dir / "u.csv", u);
    const auto s = run(Command::fisher, dir,
                       "schema_version = 1\n[scene]\ntruncation = 4\nleakage_tolerance = 1e-2\n"
                       "[scheme]\nkind = \"custom-unitary\"\nunitary_file = \"u.csv\"\n"
                       "[analysis]\npoints = 4\nspacing = \"linear\"\ntheta2_min = 0.1\ntheta2_max = 1.0\n");
    REQUIRE(s.exitCode == kExitOk);
    const Table t = readCsv(dir / "out" / "fisher.csv");
    REQUIRE(t.rows.size() == 4);
    for(std::size_t i = 0; i < 4; ++i) {
        const double theta = t.at(i, "theta2");
        const double Q = theta * theta / 16.0, dQ = theta / 8.0;
        double S = 0, dS = 0, fact = 1;
        for(int q = 0; q < 4; ++q) {
            if(q) fact *= q;
            S += std::pow(Q, q) / fact;
            dS += q * std::pow(Q, q - 1) / fact;
        }
        double sum = 0;
        fact       = 1;
        for(int q = 0; q < 4; ++q) {
            if(q) fact *= q;
            const double p = std::pow(Q, q) / fact / S;
            const double r = q / Q - dS / S;
            sum += p * r * r;
        }
        CHECK(t.at(i, "J22") == doctest::Approx(1e4 * dQ * dQ * sum).epsilon(1e-9));
        CHECK(t.at(i, "residual_mass") < 1e-14);
    }
}

TEST_CASE("two-parameter fisher is exactly symmetric") {
    const auto dir = scratch("fisher_two");
    for(const char *kind : {"direct-imaging", "hg-spade", "binary-spade"}) {
        const auto s = run(Command::fisher, dir,
                           fmt::format("schema_version = 1\n[scheme]\nkind = \"{}\"\noffset = 0.05\n[analysis]\npoints = 6\ntwo_parameter = true\ntheta1 = 0.2\n",
                                       kind));
        REQUIRE(s.exitCode == kExitOk);
        const Table t = readCsv(dir / "out" / "fisher.csv");
        for(std::size_t i = 0; i < t.rows.size(); ++i) {
            CHECK(t.raw(i, "J12") == t.raw(i, "J21"));
            CHECK(t.raw(i, "K12") == t.raw(i, "K21"));
        }
    }
}

TEST_CASE("binary SPADE never beats full SPADE") {
    const auto dir = scratch("fisher_binary");
    auto       j22 = [&](const char *kind) {
        const auto s = run(Command::fisher, dir, fmt::format("schema_version = 1\n[scheme]\nkind = \"{}\"\n[analysis]\npoints = 25\n", kind));
        REQUIRE(s.exitCode == kExitOk);
        const Table         t = readCsv(dir / "out" / "fisher.csv");
        std::vector<double> out;
        for(std::size_t i = 0; i < t.rows.size(); ++i) out.push_back(t.at(i, "J22"));
        return out;
    };
    const auto binary = j22("binary-spade"), full = j22("hg-spade");
    REQUIRE(binary.size() == full.size());
    for(std::size_t i = 0; i < binary.size(); ++i) CHECK(binary[i] <= full[i] * (1 + 1e-12));
}

TEST_CASE("scheme-dump") {
    const auto dir = scratch("dump");
    SUBCASE("SPADE at 4 sigma") {
        REQUIRE(run(Command::schemeDump, dir, "schema_version = 1\n[analysis]\ntheta2 = 4.0\n").exitCode == kExitOk);
        const Table t = readCsv(dir / "out" / "scheme.csv");
        CHECK(t.header == std::vector<std::string>{"index", "label", "p", "dp_dtheta1", "dp_dtheta2"});
        REQUIRE(t.rows.size() == 41);
        CHECK(t.at(0, "p") == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
        CHECK(t.raw(40, "label") == "residual");
        double sum = 0;
        for(std::size_t i = 0; i < t.rows.size(); ++i) sum += t.at(i, "p");
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("direct imaging matches intensity quadrature") {
        REQUIRE(run(Command::schemeDump, dir,
                    "schema_version = 1\n[scheme]\nkind = \"direct-imaging\"\npixel_width = 0.5\nextent = 8.0\n[analysis]\ntheta2 = 1.3\ntheta1 = 0.25\n")
                    .exitCode == kExitOk);
        const Table t = readCsv(dir / "out" / "scheme.csv");
        REQUIRE(t.rows.size() == 33);
        const double x1 = 0.25 - 0.65, x2 = 0.25 + 0.65;
        auto I = [&](double x) { return 0.5 * (oracle::gaussianIntensity(x - x1, 1.0) + oracle::gaussianIntensity(x - x2, 1.0)); };
        double sum = 0;
        for(std::size_t j = 0; j < 32; ++j) {
            const double a = 0.25 - 8.0 + 0.5 * j;
            CHECK(t.at(j, "p") == doctest::Approx(oracle::simpson(I, a, a + 0.5, 400)).epsilon(1e-9));
            sum += t.at(j, "p");
        }
        CHECK(t.at(32, "p") == doctest::Approx(1.0 - sum).epsilon(1e-9));
    }
}

TEST_CASE("outputs are identical across thread counts and manifest reruns") {
    const auto dir = scratch("determinism");
    const std::string toml = "schema_version = 1\n[scheme]\nkind = \"direct-imaging\"\n[analysis]\npoints = 5\ntheta2_min = 0.5\ntheta2_max = 2.0\n"
                             "[montecarlo]\ntrials = 60\nseed = 11\n";
    for(Command c : {Command::fisher, Command::simulate, Command::schemeDump, Command::crb}) {
        std::map<std::string, std::string> reference;
        for(unsigned threads : {1u, 4u, 8u}) {
            const auto s = run(c, dir, toml, threads);
            REQUIRE(s.exitCode == kExitOk);
            for(const auto &f : s.files) {
                if(f.extension() != ".csv") continue;
                const std::string bytes = slurp(f);
                if(threads == 1)
                    reference[f.filename().string()] = bytes;
                else
                    CHECK(bytes == reference[f.filename().string()]);
            }
        }
        const auto m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
        CHECK(m["threads"] == 8);
        spit(dir / "echo.toml", m["config"].get<std::string>());
        fs::remove_all(dir / "out");
        const auto s = runCommand(c, resolveContext(loadConfig(dir / "echo.toml"), {}, false));
        REQUIRE(s.exitCode == kExitOk);
        for(const auto &[name, bytes] : reference) CHECK(slurp(dir / "out" / name) == bytes);
    }
}

TEST_CASE("unreliable campaigns exit nonzero but keep their output") {
    const auto dir = scratch("unreliable");
    const auto s   = run(Command::simulate, dir,
                         "schema_version = 1\n[scheme]\nkind = \"direct-imaging\"\npixel_width = 0.2\n"
                           "[analysis]\npoints = 2\nspacing = \"linear\"\ntheta2_min = 0.05\ntheta2_max = 1.0\n"
                           "[montecarlo]\ntrials = 40\nseed = 3\nbound_max = 3.0\n");
    CHECK(s.exitCode == kExitUnreliable);
    const Table t = readCsv(dir / "out" / "simulate.csv");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.raw(0, "unreliable") == "1");
    CHECK(readCsv(dir / "out" / "trials.csv").rows.size() == 80);
    const auto m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(m["status"] == "unreliable");
    CHECK(m["diagnostics"]["unreliable_points"].size() >= 1);
}

TEST_CASE("simulate reports the MLE against the CRB") {
    const auto dir = scratch("simulate");
    const auto s   = run(Command::simulate, dir,
                         "schema_version = 1\n[analysis]\npoints = 1\ntheta2_min = 1.0\n[montecarlo]\ntrials = 400\nseed = 5\nphotons = 2e4\n", 2);
    REQUIRE(s.exitCode == kExitOk);
    const Table t = readCsv(dir / "out" / "simulate.csv");
    CHECK(t.at(0, "photons") == 2e4);
    CHECK(t.at(0, "crb") == doctest::Approx(2e-4).epsilon(1e-6));
    CHECK(t.at(0, "mse_over_crb") == doctest::Approx(t.at(0, "mse") / t.at(0, "crb")));
    CHECK(std::abs(t.at(0, "mse_over_crb") - 1.0) < 5 * t.at(0, "mse_stderr") / t.at(0, "crb") + 0.05);
    CHECK(t.at(0, "convergence_rate") == 1.0);
}
