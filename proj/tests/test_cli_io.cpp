#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "torpot/dinfty.hpp"
#include "torpot/io.hpp"

using namespace torpot;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
    fs::path path;
    ScratchDir() {
        path = fs::temp_directory_path() /
               ("torpot_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int run_cli(const std::string& args) {
    std::string cmd = std::string("\"") + TORPOT_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    int st = std::system(cmd.c_str());
    REQUIRE(st != -1);
    REQUIRE(WIFEXITED(st));
    return WEXITSTATUS(st);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

size_t count_occurrences(const std::string& hay, const std::string& needle) {
    size_t n = 0;
    for (size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

}  // namespace

TEST_CASE("WeightedAtoms JSON round-trip", "[io]") {
    WeightedAtoms a;
    a.d = 2;
    a.pos = {TorusPoint({0.1, -0.2}), TorusPoint({0.4, 0.45})};
    a.w = {0.3, 0.7};
    json j = a;
    WeightedAtoms b = j.get<WeightedAtoms>();
    REQUIRE(b.pos.size() == 2);
    CHECK(b.d == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(b.w[i] == a.w[i]);
        for (int ax = 0; ax < 2; ++ax) CHECK(b.pos[i].x[size_t(ax)] == a.pos[i].x[size_t(ax)]);
    }
    // a row must carry d coordinates plus one weight
    json bad = {{"d", 2}, {"atoms", json::array({json::array({0.1, 0.2})})}};
    CHECK_THROWS_AS(bad.get<WeightedAtoms>(), std::invalid_argument);
}

TEST_CASE("GridDensity and GridSet JSON round-trips", "[io]") {
    GridDensity g{Grid(1, 8), std::vector<double>(8, 0.125)};
    json j = g;
    GridDensity h = j.get<GridDensity>();
    CHECK(h.grid.d == 1);
    CHECK(h.grid.N == 8);
    CHECK(h.mass == g.mass);
    json bad = {{"d", 1}, {"N", 8}, {"mass", std::vector<double>(5, 0.2)}};
    CHECK_THROWS_AS(bad.get<GridDensity>(), std::invalid_argument);

    GridSet s = GridSet::from_runs(Grid(1, 16), {2, 5, 9});
    json js = s;
    GridSet t = js.get<GridSet>();
    CHECK(t.to_runs() == s.to_runs());
    CHECK(t.popcount() == 5);
}

TEST_CASE("RieszSpec JSON: defaults and validation", "[io]") {
    json j = {{"d", 2}, {"s", -1.0}};
    RieszSpec spec = j.get<RieszSpec>();
    CHECK(spec.d == 2);
    CHECK(spec.s == -1.0);
    CHECK(spec.J == 0);
    CHECK(spec.K == 8);
    CHECK(spec.tau == 1e-10);
    json round = spec;
    CHECK(round.at("K").get<int>() == 8);
    // validation runs inside from_json
    json bad = {{"d", 1}, {"s", 1.5}};  // needs s < d
    CHECK_THROWS_AS(bad.get<RieszSpec>(), std::invalid_argument);
}

TEST_CASE("FlowConfig JSON: round-trip, integrator names, defaults", "[io]") {
    FlowConfig c;
    c.d = 1;
    c.s = -0.5;
    c.n_particles = 17;
    c.integrator = FlowConfig::Integrator::euler;
    c.h = 2e-3;
    c.steps = 42;
    c.seed = 1234567;
    c.snapshot_every = 7;
    json j = c;
    FlowConfig back = j.get<FlowConfig>();
    CHECK(back.d == c.d);
    CHECK(back.s == c.s);
    CHECK(back.n_particles == c.n_particles);
    CHECK(back.integrator == FlowConfig::Integrator::euler);
    CHECK(back.h == c.h);
    CHECK(back.steps == c.steps);
    CHECK(back.seed == c.seed);
    CHECK(back.snapshot_every == c.snapshot_every);

    // the step-size default depends on the integrator
    json je = {{"integrator", "euler"}};
    json jr = {{"integrator", "rk4"}};
    CHECK(je.get<FlowConfig>().h == 1e-3);
    CHECK(jr.get<FlowConfig>().h == 5e-3);
    CHECK(json::object().get<FlowConfig>().h == 5e-3);

    json bad_integ = {{"integrator", "verlet"}};
    CHECK_THROWS_AS(bad_integ.get<FlowConfig>(), std::invalid_argument);
    json bad_steps = {{"steps", 0}};
    CHECK_THROWS_AS(bad_steps.get<FlowConfig>(), std::invalid_argument);
}

TEST_CASE("result serializers expose derived fields", "[io]") {
    DinftyEnclosure e;
    e.lo = 0.1;
    e.hi = 0.3;
    e.r_hat = 0.2;
    e.N = 64;
    json j = e;
    CHECK(j.at("mid").get<double>() == Catch::Approx(0.2));
    CHECK(j.at("half_width").get<double>() == Catch::Approx(0.1));

    ClusterStats cs;
    cs.n_clusters = 2;
    cs.sizes = {3, 1};
    json jc = cs;
    CHECK(jc.at("n_clusters").get<int>() == 2);
    CHECK(jc.at("sizes").get<std::vector<int>>() == std::vector<int>{3, 1});
    CHECK(jc.contains("nn_cv"));
}

TEST_CASE("config_hash is canonical and value-sensitive", "[io]") {
    json a = {{"alpha", 1}, {"beta", 2.5}};
    json b;
    b["beta"] = 2.5;  // different insertion order, same content
    b["alpha"] = 1;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    for (char ch : config_hash(a)) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));
    json c = a;
    c["beta"] = 2.5000001;
    CHECK(config_hash(c) != config_hash(a));
    CHECK(config_hash(a) == config_hash(a));
}

TEST_CASE("atomic_write creates directories and leaves no temp files", "[io]") {
    ScratchDir dir;
    fs::path target = dir.path / "nested" / "deeper" / "file.txt";
    atomic_write(target, "hello\nworld\n");
    CHECK(slurp(target) == "hello\nworld\n");
    CHECK_FALSE(fs::exists(target.string() + ".tmp"));
    // overwrite in place
    atomic_write(target, "second");
    CHECK(slurp(target) == "second");
    CHECK_FALSE(fs::exists(target.string() + ".tmp"));
}

TEST_CASE("write_csv formats rows at full precision", "[io]") {
    ScratchDir dir;
    fs::path p = dir.path / "t.csv";
    double val = 0.1234567890123456789;
    write_csv(p, {"a", "b"}, {{1.0, val}, {2.0, 4.0}});
    std::string text = slurp(p);
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "a,b");
    std::getline(lines, line);
    auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    // 17 significant digits reproduce the double exactly
    CHECK(std::stod(line.substr(comma + 1)) == val);
    std::getline(lines, line);
    CHECK(line == "2,4");
}

TEST_CASE("read_json error paths", "[io]") {
    ScratchDir dir;
    CHECK_THROWS_AS(read_json(dir.path / "missing.json"), std::runtime_error);
    fs::path bad = dir.path / "bad.json";
    atomic_write(bad, "{ this is not json");
    CHECK_THROWS_AS(read_json(bad), json::parse_error);
}

TEST_CASE("svg output is well-formed", "[io]") {
    std::vector<TorusPoint> pts{TorusPoint({0.1, 0.2}), TorusPoint({-0.3, 0.4}),
                                TorusPoint({0.0, 0.0})};
    std::vector<TorusPoint> hl{TorusPoint({0.1, 0.2})};
    std::string svg = svg_scatter(pts, 640, "demo", hl);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count_occurrences(svg, "<circle") == pts.size() + hl.size());
    CHECK(svg.find("demo") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);

    // d=1 points sit on the middle line
    std::string svg1 = svg_scatter({TorusPoint({0.25})});
    CHECK(svg1.find("cy=\"320\"") != std::string::npos);

    std::string chart = svg_line_chart({0.0, 1.0, 2.0}, {5.0, 3.0, 4.0}, "energy");
    CHECK(chart.find("<polyline") != std::string::npos);
    CHECK(chart.find("energy") != std::string::npos);
    // constant series must not divide by zero
    CHECK_NOTHROW(svg_line_chart({0.0, 1.0}, {2.0, 2.0}));
    CHECK_THROWS_AS(svg_line_chart({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(svg_line_chart({1.0}, {1.0, 2.0}), std::invalid_argument);
}

// ---- end-to-end runs of the installed binary -------------------------------

TEST_CASE("cli: antipodal atoms give d_infty = 1/2, identical give 0", "[cli]") {
    ScratchDir dir;
    json cfg;
    cfg["rho1"] = {{"d", 1}, {"atoms", json::array({json::array({0.0, 1.0})})}};
    cfg["rho2"] = {{"d", 1}, {"atoms", json::array({json::array({0.5, 1.0})})}};
    fs::path cp = dir.path / "cfg.json";
    write_json(cp, cfg);
    fs::path out = dir.path / "out";
    CHECK(run_cli("dinfty --config " + cp.string() + " --out " + out.string() + " --seed 1") == 0);
    json res = read_json(out / "dinfty.json");
    CHECK(res.at("r_star").get<double>() == Catch::Approx(0.5).margin(1e-12));
    CHECK(res.at("config_hash").get<std::string>() == config_hash(cfg));
    CHECK(res.at("seed").get<std::uint64_t>() == 1);
    CHECK_FALSE(res.at("plan_edges").empty());

    cfg["rho2"] = cfg["rho1"];
    write_json(cp, cfg);
    CHECK(run_cli("dinfty --config " + cp.string() + " --out " + out.string()) == 0);
    res = read_json(out / "dinfty.json");
    CHECK(res.at("r_star").get<double>() == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("cli: enclosure mode for the uniform density", "[cli]") {
    ScratchDir dir;
    json cfg;
    cfg["rho"] = {{"family", "uniform"}, {"d", 1}, {"N", 64}};
    cfg["N"] = 64;
    fs::path cp = dir.path / "cfg.json";
    write_json(cp, cfg);
    fs::path out = dir.path / "out";
    CHECK(run_cli("dinfty --config " + cp.string() + " --out " + out.string()) == 0);
    json res = read_json(out / "dinfty.json");
    CHECK(res.at("enclosure").at("r_hat").get<double>() == Catch::Approx(0.0).margin(1e-12));
    CHECK(res.at("enclosure").at("lo").get<double>() <= 0.0);
}

TEST_CASE("cli: exit codes distinguish infeasible input from errors", "[cli]") {
    ScratchDir dir;
    fs::path out = dir.path / "out";

    // structurally valid config whose parameters are infeasible (negative weight)
    json cfg;
    cfg["rho1"] = {{"d", 1}, {"atoms", json::array({json::array({0.0, -1.0})})}};
    cfg["rho2"] = {{"d", 1}, {"atoms", json::array({json::array({0.5, 1.0})})}};
    fs::path cp = dir.path / "cfg.json";
    write_json(cp, cfg);
    CHECK(run_cli("dinfty --config " + cp.string() + " --out " + out.string()) == 1);

    // malformed JSON
    fs::path bad = dir.path / "bad.json";
    atomic_write(bad, "{ nope");
    CHECK(run_cli("dinfty --config " + bad.string() + " --out " + out.string()) == 2);

    // missing required config
    CHECK(run_cli("dinfty --out " + out.string()) == 2);

    // unknown subcommand is a usage error; --help is not
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("--help") == 0);
}

TEST_CASE("cli: discrepancy of a cosine density matches the closed form", "[cli]") {
    ScratchDir dir;
    json cfg;
    cfg["rho"] = {{"family", "cosine"}, {"d", 1}, {"N", 256}, {"a", 0.5}};
    fs::path cp = dir.path / "cfg.json";
    write_json(cp, cfg);
    fs::path out = dir.path / "out";
    CHECK(run_cli("discrepancy --config " + cp.string() + " --out " + out.string()) == 0);
    json res = read_json(out / "discrepancy.json");
    // best interval for 1 + a cos(2 pi x) is the half circle: D = a/pi
    CHECK(res.at("D").get<double>() == Catch::Approx(0.5 / M_PI).margin(0.01));
    CHECK(res.at("identity_gap").get<double>() < 0.02);
}

TEST_CASE("cli: same seed reproduces outputs byte for byte", "[cli]") {
    ScratchDir dir;
    json cfg;
    cfg["rho1"] = {{"random", {{"d", 2}, {"n", 5}}}};
    cfg["rho2"] = {{"random", {{"d", 2}, {"n", 5}}}};
    fs::path cp = dir.path / "cfg.json";
    write_json(cp, cfg);
    fs::path o1 = dir.path / "o1", o2 = dir.path / "o2";
    CHECK(run_cli("dinfty --config " + cp.string() + " --out " + o1.string() + " --seed 7") == 0);
    CHECK(run_cli("dinfty --config " + cp.string() + " --out " + o2.string() + " --seed 7") == 0);
    CHECK(slurp(o1 / "dinfty.json") == slurp(o2 / "dinfty.json"));
}

TEST_CASE("cli: omitted seed is generated and logged", "[cli]") {
    ScratchDir dir;
    json cfg;
    cfg["rho1"] = {{"random", {{"d", 1}, {"n", 3}}}};
    cfg["rho2"] = {{"random", {{"d", 1}, {"n", 3}}}};
    fs::path cp = dir.path / "cfg.json";
    write_json(cp, cfg);
    fs::path out = dir.path / "out";
    CHECK(run_cli("dinfty --config " + cp.string() + " --out " + out.string()) == 0);
    json res = read_json(out / "dinfty.json");
    CHECK(res.at("seed").is_number());
}

TEST_CASE("cli: spectral energy of a cosine density", "[cli]") {
    ScratchDir dir;
    json cfg;
    cfg["rho"] = {{"family", "cosine"}, {"d", 1}, {"N", 64}, {"a", 0.5}};
    cfg["s"] = -1.0;
    cfg["K"] = 16;
    fs::path cp = dir.path / "cfg.json";
    write_json(cp, cfg);
    fs::path out = dir.path / "out";
    CHECK(run_cli("energy --config " + cp.string() + " --out " + out.string()) == 0);
    json res = read_json(out / "energy.json");
    // only the k = +-1 modes carry mass a/2: E = a^2/4
    CHECK(res.at("E").get<double>() == Catch::Approx(0.0625).margin(1e-10));
    CHECK(res.at("identity_gap").get<double>() < 1e-8);
}

TEST_CASE("cli: potential field norms and csv dump", "[cli]") {
    ScratchDir dir;
    json cfg;
    cfg["spec"] = {{"d", 1}, {"s", 0.5}};
    cfg["rho"] = {{"family", "cosine"}, {"d", 1}, {"N", 64}, {"a", 0.5}};
    fs::path cp = dir.path / "cfg.json";
    write_json(cp, cfg);
    fs::path out = dir.path / "out";
    CHECK(run_cli("potential --config " + cp.string() + " --out " + out.string()) == 0);
    json res = read_json(out / "potential.json");
    // V = a cos(2 pi x + phase) for the single surviving mode
    CHECK(res.at("norms").at("2").get<double>() == Catch::Approx(0.5 / std::sqrt(2.0)).margin(1e-3));
    CHECK(res.at("norms").at("inf").get<double>() == Catch::Approx(0.5).margin(0.01));
    CHECK(std::abs(res.at("mean").get<double>()) < 1e-12);
    std::string csv = slurp(out / "potential.csv");
    CHECK(count_occurrences(csv, "\n") == 65u);  // header + 64 cells
    CHECK(csv.rfind("x0,V", 0) == 0);
}

TEST_CASE("cli: oracle subcommands produce reference values", "[cli]") {
    ScratchDir dir;
    fs::path out = dir.path / "out";

    json expand_cfg;
    expand_cfg["kind"] = "expand";
    expand_cfg["S"] = {{"d", 1}, {"N", 8}, {"runs", json::array({1, 3, 4})}};
    expand_cfg["r"] = 0.125;
    expand_cfg["closed"] = true;
    fs::path cp = dir.path / "expand.json";
    write_json(cp, expand_cfg);
    CHECK(run_cli("oracle --config " + cp.string() + " --out " + out.string()) == 0);
    json res = read_json(out / "oracle.json");
    CHECK(res.at("result").at("runs").get<std::vector<std::int64_t>>() ==
          std::vector<std::int64_t>{0, 5, 3});

    json riesz_cfg;
    riesz_cfg["kind"] = "riesz";
    riesz_cfg["d"] = 1;
    riesz_cfg["s"] = -1.0;
    riesz_cfg["points"] = json::array({json::array({0.25})});
    write_json(cp, riesz_cfg);
    CHECK(run_cli("oracle --config " + cp.string() + " --out " + out.string()) == 0);
    res = read_json(out / "oracle.json");
    // 2 pi^2 B_2(1/4) with B_2(1/4) = 1/16 - 1/4 + 1/6
    double expect = 2.0 * M_PI * M_PI * (1.0 / 16 - 1.0 / 4 + 1.0 / 6);
    CHECK(res.at("values")[0].get<double>() == Catch::Approx(expect).margin(1e-6));

    json bad;
    bad["kind"] = "no_such_oracle";
    write_json(cp, bad);
    CHECK(run_cli("oracle --config " + cp.string() + " --out " + out.string()) == 1);
}
