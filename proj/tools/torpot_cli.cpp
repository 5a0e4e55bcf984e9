// Batch experiment runner: bottleneck distances, discrepancy, Riesz
// potentials, interaction energies, scaling sweeps, particle flows,
// invariant verification, and brute-force oracle generation.
//
// Exit codes: 0 = ok, 1 = infeasible input (valid file, parameters violate a
// precondition or a verification suite failed), 2 = error (malformed config,
// I/O failure, internal error).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "torpot/dinfty.hpp"
#include "torpot/energy.hpp"
#include "torpot/experiments.hpp"
#include "torpot/flow.hpp"
#include "torpot/io.hpp"
#include "torpot/measures.hpp"
#include "torpot/mollifier.hpp"
#include "torpot/oracles.hpp"
#include "torpot/riesz.hpp"
#include "torpot/spectral.hpp"

namespace fs = std::filesystem;
using torpot::json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool full = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON configuration file");
    cmd->add_option("--out", opts.out_dir, "output directory (default: out)");
    cmd->add_option("--seed", opts.seed, "RNG seed (generated and logged when omitted)")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    cmd->add_flag("--full", opts.full, "full-scale runs (e.g. 1000 flow particles)");
}

json load_config(const CommonOpts& opts) {
    if (opts.config_path.empty()) return json::object();
    return torpot::read_json(opts.config_path);
}

std::uint64_t resolve_seed(const CommonOpts& opts, const json& cfg, bool* generated = nullptr) {
    if (generated) *generated = false;
    if (opts.seed_set) return opts.seed;
    if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
    std::random_device rd;
    std::uint64_t s = (std::uint64_t(rd()) << 32) ^ rd();
    if (generated) *generated = true;
    return s;
}

double parse_p(const json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("p must be a number or \"inf\"");
    }
    return j.get<double>();
}

json p_to_json(double p) {
    if (std::isinf(p)) return "inf";
    return p;
}

// Density factory shared by several commands: either an inline density or a
// named family.
torpot::GridDensity make_density(const json& j, std::uint64_t seed) {
    if (j.contains("mass")) return j.get<torpot::GridDensity>();
    std::string family = j.at("family").get<std::string>();
    if (family == "uniform") return torpot::uniform_density(j.at("d").get<int>(), j.at("N").get<int>());
    if (family == "bump")
        return torpot::bump_density(j.at("d").get<int>(), j.at("eps").get<double>(),
                                    j.at("N").get<int>(), j.value("radius", 1.0 / 3.0));
    if (family == "oscillatory") {
        double eps = j.at("eps").get<double>();
        int N = j.value("N", 0);
        if (N == 0) N = torpot::pow2_at_least(std::max(16.0, 16.0 / eps));
        return torpot::oscillatory_density(j.at("d").get<int>(), eps, j.value("M", 1), N).rho;
    }
    if (family == "cosine") {
        int d = j.at("d").get<int>();
        int N = j.at("N").get<int>();
        double a = j.value("a", 0.5);
        if (!(a >= 0 && a <= 1)) throw std::invalid_argument("cosine family: 0 <= a <= 1");
        torpot::GridDensity rho = torpot::uniform_density(d, N);
        for (std::int64_t c = 0; c < rho.grid.cell_count(); ++c) {
            torpot::TorusPoint p = rho.grid.center(c);
            rho.mass[size_t(c)] *= 1.0 + a * std::cos(2.0 * M_PI * p.x[0]);
        }
        return rho;
    }
    if (family == "random") {
        int d = j.at("d").get<int>();
        int N = j.at("N").get<int>();
        torpot::Rng rng(j.value("seed", seed));
        torpot::GridDensity rho = torpot::uniform_density(d, N);
        double total = 0;
        for (double& m : rho.mass) {
            m = torpot::uniform01(rng);
            total += m;
        }
        for (double& m : rho.mass) m /= total;
        return rho;
    }
    throw std::invalid_argument("unknown density family: " + family);
}

torpot::WeightedAtoms make_atoms(const json& j, std::uint64_t seed) {
    if (j.contains("atoms")) {
        auto a = j.get<torpot::WeightedAtoms>();
        a.validate();
        return a;
    }
    if (j.contains("random")) {
        const json& r = j.at("random");
        int d = r.at("d").get<int>();
        int n = r.at("n").get<int>();
        bool equal = r.value("equal_weights", false);
        torpot::Rng rng(r.value("seed", seed));
        torpot::WeightedAtoms a;
        a.d = d;
        double total = 0;
        for (int i = 0; i < n; ++i) {
            std::vector<double> x(size_t(d), 0.0);
            for (double& xi : x) xi = torpot::uniform01(rng) - 0.5;
            a.pos.emplace_back(std::move(x));
            double w = equal ? 1.0 : 0.05 + torpot::uniform01(rng);
            a.w.push_back(w);
            total += w;
        }
        for (double& w : a.w) w /= total;
        return a;
    }
    throw std::invalid_argument("atom specification needs 'atoms' or 'random'");
}

// ---- dinfty ---------------------------------------------------------------

int cmd_dinfty(const CommonOpts& opts) {
    json cfg = load_config(opts);
    if (cfg.empty())
        throw std::runtime_error("dinfty requires --config with an instance file");
    std::uint64_t seed = resolve_seed(opts, cfg);
    json out;
    out["config_hash"] = torpot::config_hash(cfg);
    out["seed"] = seed;
    if (cfg.contains("rho1") && cfg.contains("rho2")) {
        torpot::WeightedAtoms a = make_atoms(cfg.at("rho1"), seed);
        torpot::WeightedAtoms b = make_atoms(cfg.at("rho2"), seed + 1);
        torpot::DinftyResult r = torpot::dinfty_atomic(a, b);
        out["r_star"] = r.r_star;
        out["plan_edges"] = r.plan;
        out["witness_cells"] = r.witness;
        out["witness_margin"] = r.witness_margin;
        out["deficit_at_rstar"] = r.deficit_at_rstar;
        out["predecessor"] = r.predecessor;
        out["enclosure"] = nullptr;
        std::cout << "d_infty = " << r.r_star << " (plan edges: " << r.plan.size() << ")\n";
    } else if (cfg.contains("rho")) {
        int N = cfg.value("N", 0);
        torpot::DinftyEnclosure enc;
        if (cfg.at("rho").contains("atoms") || cfg.at("rho").contains("random")) {
            torpot::WeightedAtoms a = make_atoms(cfg.at("rho"), seed);
            if (N == 0) N = torpot::default_enclosure_resolution(a.d);
            enc = torpot::dinfty_to_uniform(a, N);
        } else {
            torpot::GridDensity rho = make_density(cfg.at("rho"), seed);
            if (N == 0) N = torpot::default_enclosure_resolution(rho.grid.d);
            enc = torpot::dinfty_to_uniform(rho, N);
        }
        out["enclosure"] = enc;
        std::cout << "d_infty(rho, 1) in [" << enc.lo << ", " << enc.hi << "]\n";
    } else {
        throw std::invalid_argument("config needs either rho1+rho2 or rho");
    }
    torpot::write_json(fs::path(opts.out_dir) / "dinfty.json", out);
    return 0;
}

// ---- discrepancy ------------------------------------------------------------

int cmd_discrepancy(const CommonOpts& opts) {
    json cfg = load_config(opts);
    if (cfg.empty()) throw std::runtime_error("discrepancy requires --config");
    std::uint64_t seed = resolve_seed(opts, cfg);
    torpot::GridDensity rho = make_density(cfg.at("rho"), seed);
    double D = torpot::discrepancy_1d(rho);
    torpot::DinftyEnclosure enc =
        torpot::dinfty_to_uniform(rho, cfg.value("N", torpot::default_enclosure_resolution(1)));
    json out{{"config_hash", torpot::config_hash(cfg)},
             {"seed", seed},
             {"D", D},
             {"half_D", 0.5 * D},
             {"enclosure", enc},
             {"identity_gap", std::abs(0.5 * D - enc.midpoint())}};
    torpot::write_json(fs::path(opts.out_dir) / "discrepancy.json", out);
    std::cout << "D = " << D << ", D/2 = " << 0.5 * D << ", enclosure mid = " << enc.midpoint()
              << "\n";
    return 0;
}

// ---- potential --------------------------------------------------------------

int cmd_potential(const CommonOpts& opts) {
    json cfg = load_config(opts);
    if (cfg.empty()) throw std::runtime_error("potential requires --config");
    std::uint64_t seed = resolve_seed(opts, cfg);
    torpot::RieszSpec spec = cfg.at("spec").get<torpot::RieszSpec>();
    torpot::GridDensity rho = make_density(cfg.at("rho"), seed);
    if (spec.K >= rho.grid.N / 2) {
        spec.K = rho.grid.N / 2 - 1;  // keep below the anti-aliasing cutoff
    }
    torpot::PotentialField V = torpot::potential_field(spec, rho);
    json norms;
    norms["1"] = torpot::lp_norm(V, 1.0);
    norms["2"] = torpot::lp_norm(V, 2.0);
    norms["inf"] = torpot::lp_norm(V, std::numeric_limits<double>::infinity());
    json out{{"config_hash", torpot::config_hash(cfg)},
             {"seed", seed},
             {"spec", spec},
             {"norms", norms},
             {"mean", V.mean()}};
    torpot::write_json(fs::path(opts.out_dir) / "potential.json", out);
    if (rho.grid.cell_count() <= (std::int64_t(1) << 22)) {
        std::vector<std::string> header;
        for (int ax = 0; ax < rho.grid.d; ++ax) header.push_back("x" + std::to_string(ax));
        header.push_back("V");
        std::vector<std::vector<double>> rows;
        rows.reserve(size_t(rho.grid.cell_count()));
        for (std::int64_t c = 0; c < rho.grid.cell_count(); ++c) {
            torpot::TorusPoint p = rho.grid.center(c);
            std::vector<double> row(p.x);
            row.push_back(V.value[size_t(c)]);
            rows.push_back(std::move(row));
        }
        torpot::write_csv(fs::path(opts.out_dir) / "potential.csv", header, rows);
    }
    std::cout << "||V||_1 = " << norms["1"].get<double>() << ", ||V||_2 = "
              << norms["2"].get<double>() << ", ||V||_inf = " << norms["inf"].get<double>()
              << "\n";
    return 0;
}

// ---- energy -----------------------------------------------------------------

int cmd_energy(const CommonOpts& opts) {
    json cfg = load_config(opts);
    if (cfg.empty()) throw std::runtime_error("energy requires --config");
    std::uint64_t seed = resolve_seed(opts, cfg);
    torpot::GridDensity rho = make_density(cfg.at("rho"), seed);
    int d = rho.grid.d;
    double s = cfg.at("s").get<double>();
    int K = std::min(cfg.value("K", 16), rho.grid.N / 2 - 1);
    double E = torpot::energy_spectral(rho, torpot::riesz_coeff(d, s), K);
    // cross-check: E_s[rho] = 1/2 || W_{s'} * rho ||_2^2 with s' = (d+s)/2
    torpot::RieszSpec half;
    half.d = d;
    half.s = 0.5 * (d + s);
    half.K = K;
    torpot::PotentialField Vh = torpot::potential_field(half, rho);
    double E_id = 0.5 * std::pow(torpot::lp_norm(Vh, 2.0), 2.0);
    json out{{"config_hash", torpot::config_hash(cfg)},
             {"seed", seed},
             {"d", d},
             {"s", s},
             {"K", K},
             {"E", E},
             {"E_identity", E_id},
             {"identity_gap", std::abs(E - E_id)}};
    if (cfg.contains("perturbed")) {
        const json& pj = cfg.at("perturbed");
        torpot::RieszSpec base;
        base.d = d;
        base.s = s;
        torpot::PerturbedPotential pp(base, pj.at("eps").get<double>(), pj.at("c0").get<double>());
        double Ep = torpot::energy_spectral(rho, pp.coeff_fn(), K);
        out["E_perturbed"] = Ep;
        out["sup_distance"] = pp.sup_distance();
        auto scan = pp.scan_negative(cfg.value("scan_kmax", 64));
        out["negative_coeff_count"] = scan.negative_count;
        out["min_coeff"] = scan.min_coeff;
    }
    torpot::write_json(fs::path(opts.out_dir) / "energy.json", out);
    std::cout << "E = " << E << " (identity gap " << out["identity_gap"].get<double>() << ")\n";
    return 0;
}

// ---- scaling ----------------------------------------------------------------

json scaling_case_to_json(const torpot::ScalingResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back(json{{"eps", row.eps},
                            {"N", row.N},
                            {"N_witness", row.N_witness},
                            {"norm_p", row.norm_p},
                            {"dinf_lb", row.dinf_lb},
                            {"witness_R", row.witness_R}});
    return json{{"d", r.d},         {"s", r.s},
                {"p", p_to_json(r.p)}, {"M", r.M},
                {"slope_norm", r.slope_norm}, {"target_norm", r.target_norm},
                {"slope_lb", r.slope_lb},     {"target_lb", r.target_lb},
                {"rows", rows}};
}

int cmd_scaling(const CommonOpts& opts) {
    json cfg = load_config(opts);
    std::uint64_t seed = resolve_seed(opts, cfg);
    fs::path outdir(opts.out_dir);
    json summary{{"config_hash", torpot::config_hash(cfg)}, {"seed", seed}};

    std::vector<double> eps_default{std::pow(2.0, -4), std::pow(2.0, -5), std::pow(2.0, -6),
                                    std::pow(2.0, -7)};
    json cases = cfg.value("cases", json::array({
                                        json{{"d", 1}, {"s", 0.5}, {"p", 2}},
                                        json{{"d", 1}, {"s", 0.5}, {"p", 1}},
                                        json{{"d", 2}, {"s", 1.0}, {"p", 1}},
                                        json{{"d", 2}, {"s", 1.0}, {"p", 2}},
                                    }));
    json case_results = json::array();
    for (const json& c : cases) {
        std::vector<double> eps =
            c.contains("eps") ? c.at("eps").get<std::vector<double>>()
                              : cfg.value("eps", eps_default);
        torpot::ScalingResult r = torpot::scaling_experiment(
            c.at("d").get<int>(), c.at("s").get<double>(), parse_p(c.at("p")), eps,
            c.value("M", 1));
        case_results.push_back(scaling_case_to_json(r));
        std::ostringstream name;
        name << "scaling_d" << r.d << "_s" << r.s << "_p" << (std::isinf(r.p) ? std::string("inf")
                                                                              : std::to_string(r.p));
        std::vector<std::vector<double>> rows;
        for (const auto& row : r.rows)
            rows.push_back({row.eps, double(row.N), row.norm_p, row.dinf_lb, row.witness_R});
        torpot::write_csv(outdir / (name.str() + ".csv"),
                          {"eps", "N", "norm_p", "dinf_lb", "witness_R"}, rows);
        std::cout << "scaling d=" << r.d << " s=" << r.s << " p=" << r.p
                  << ": slope " << r.slope_norm << " (target " << r.target_norm
                  << "), lb slope " << r.slope_lb << "\n";
    }
    summary["riesz_cases"] = case_results;

    if (cfg.value("ueps", true)) {
        json ucases = cfg.value("ueps_cases",
                                json::array({
                                    json{{"d", 1}, {"beta", 0.5}, {"p", "inf"}},
                                    json{{"d", 2}, {"beta", 1.0}, {"p", "inf"}},
                                    json{{"d", 1}, {"beta", 0.5}, {"p", 2}},
                                    json{{"d", 1}, {"beta", -0.5}, {"p", 2}, {"critical", true}},
                                }));
        json uresults = json::array();
        for (const json& c : ucases) {
            int d = c.at("d").get<int>();
            std::vector<double> eps;
            if (c.contains("eps"))
                eps = c.at("eps").get<std::vector<double>>();
            else if (d == 1)
                eps = eps_default;
            else
                eps = {std::pow(2.0, -3), std::pow(2.0, -4), std::pow(2.0, -5), std::pow(2.0, -6)};
            torpot::Mollifier moll(d);
            torpot::PsihatTable psihat(moll);
            torpot::UepsResult r =
                torpot::ueps_experiment(d, c.at("beta").get<double>(), parse_p(c.at("p")), eps,
                                        psihat);
            json rows = json::array();
            for (const auto& row : r.rows)
                rows.push_back(json{{"eps", row.eps},
                                    {"N", row.N},
                                    {"norm_q", row.norm_q},
                                    {"log_model_ratio", row.log_model_ratio}});
            uresults.push_back(json{{"d", r.d},
                                    {"beta", r.beta},
                                    {"p", p_to_json(r.p)},
                                    {"q", p_to_json(r.q)},
                                    {"slope", r.slope},
                                    {"target", r.target},
                                    {"ratio_spread", r.ratio_spread},
                                    {"critical", c.value("critical", false)},
                                    {"rows", rows}});
            std::cout << "u_eps d=" << r.d << " beta=" << r.beta << " q=" << r.q << ": slope "
                      << r.slope << " (target " << r.target << "), ratio spread "
                      << r.ratio_spread << "\n";
        }
        summary["ueps_cases"] = uresults;
    }
    torpot::write_json(outdir / "scaling_summary.json", summary);
    return 0;
}

// ---- flow -------------------------------------------------------------------

int run_flow_panel(const torpot::FlowConfig& cfg, const fs::path& dir, const json& cfg_json,
                   std::shared_ptr<const torpot::ForceModel> model = nullptr) {
    torpot::FlowResult res = torpot::run_flow(cfg, std::move(model));
    double link = cfg.perturbed ? 2.0 * cfg.eps : 2.0 / std::sqrt(double(cfg.n_particles));
    torpot::ClusterStats stats = torpot::cluster_stats(res.positions, link);

    json summary{{"config", cfg_json},
                 {"config_hash", torpot::config_hash(cfg_json)},
                 {"aborted", res.aborted},
                 {"abort_reason", res.abort_reason},
                 {"energy_initial", res.energy.front()},
                 {"energy_final", res.energy.back()},
                 {"link_radius", link},
                 {"clusters", stats}};
    torpot::write_json(dir / "summary.json", summary);

    std::vector<std::vector<double>> erows;
    for (size_t i = 0; i < res.energy.size(); ++i)
        erows.push_back({double(i) * cfg.h, res.energy[i]});
    torpot::write_csv(dir / "energy.csv", {"t", "E"}, erows);

    std::vector<std::string> header;
    for (int ax = 0; ax < cfg.d; ++ax) header.push_back("x" + std::to_string(ax));
    std::vector<std::vector<double>> prows;
    for (const auto& p : res.positions) prows.push_back(p.x);
    torpot::write_csv(dir / "positions.csv", header, prows);

    torpot::atomic_write(dir / "initial.svg", torpot::svg_scatter(res.initial, 640, "t = 0"));
    std::ostringstream title;
    title << "t = " << cfg.h * cfg.steps << ", clusters = " << stats.n_clusters;
    torpot::atomic_write(dir / "final.svg", torpot::svg_scatter(res.positions, 640, title.str()));
    for (size_t i = 0; i < res.snapshots.size(); ++i) {
        std::ostringstream name;
        name << "snap_" << i << ".svg";
        std::ostringstream t;
        t << "t = " << res.snapshot_times[i];
        torpot::atomic_write(dir / name.str(),
                             torpot::svg_scatter(res.snapshots[i], 640, t.str()));
    }
    std::vector<double> ts, es;
    for (size_t i = 0; i < res.energy.size(); ++i) {
        ts.push_back(double(i) * cfg.h);
        es.push_back(res.energy[i]);
    }
    torpot::atomic_write(dir / "energy.svg", torpot::svg_line_chart(ts, es, "energy"));
    std::cout << "flow -> " << dir.string() << ": E " << res.energy.front() << " -> "
              << res.energy.back() << ", clusters " << stats.n_clusters << ", nn CV "
              << stats.nn_cv << (res.aborted ? " [ABORTED]" : "") << "\n";
    return res.aborted ? 1 : 0;
}

int cmd_flow(const CommonOpts& opts) {
    json cfg = load_config(opts);
    bool seed_generated = false;
    std::uint64_t seed = resolve_seed(opts, cfg, &seed_generated);
    if (seed_generated) std::cout << "seed not supplied; generated " << seed << "\n";
    fs::path outdir(opts.out_dir);

    json panels;
    if (cfg.contains("panels")) {
        panels = cfg.at("panels");
    } else if (!cfg.empty() && cfg.contains("d")) {
        panels = json::array({cfg});
    } else {
        // four-panel recipe: pure kernel, then three perturbation scales
        panels = json::array({
            json{{"name", "pure"}, {"perturbed", false}},
            json{{"name", "eps005"}, {"perturbed", true}, {"eps", 0.05}},
            json{{"name", "eps01"}, {"perturbed", true}, {"eps", 0.1}},
            json{{"name", "eps02"}, {"perturbed", true}, {"eps", 0.2}},
        });
    }
    int rc = 0;
    int idx = 0;
    // the base-kernel table depends only on (s, n, tau); reuse it across panels
    std::map<std::tuple<double, int, double>, std::shared_ptr<const torpot::KernelTable>> tables;
    for (const json& pj : panels) {
        torpot::FlowConfig fc = pj.get<torpot::FlowConfig>();
        if (!pj.contains("seed")) fc.seed = seed;
        if (opts.seed_set) fc.seed = opts.seed;
        if (opts.full) fc.n_particles = 1000;
        if (fc.snapshot_every == 0) fc.snapshot_every = std::max(1, fc.steps / 4);
        std::string name = pj.value("name", "panel" + std::to_string(idx));
        json echo = fc;
        echo["name"] = name;
        std::shared_ptr<const torpot::KernelTable> table;
        if (fc.use_table && fc.d == 2) {
            auto key = std::make_tuple(fc.s, fc.table_n, fc.table_tau);
            auto it = tables.find(key);
            if (it == tables.end()) {
                torpot::RieszSpec sp;
                sp.d = fc.d;
                sp.s = fc.s;
                sp.tau = fc.table_tau;
                it = tables.emplace(key, std::make_shared<torpot::KernelTable>(sp, fc.table_n))
                         .first;
            }
            table = it->second;
        }
        rc = std::max(rc, run_flow_panel(fc, outdir / ("flow_" + name), echo,
                                         torpot::make_force_model(fc, std::move(table))));
        ++idx;
    }
    return rc;
}

// ---- verify -----------------------------------------------------------------

struct Suite {
    std::string name;
    int count = 0;
    double worst = 0.0;
    bool pass = true;
    std::string note;
};

json suite_to_json(const Suite& s) {
    return json{{"name", s.name}, {"count", s.count}, {"worst", s.worst}, {"pass", s.pass},
                {"note", s.note}};
}

int cmd_verify(const CommonOpts& opts) {
    json cfg = load_config(opts);
    std::uint64_t seed = resolve_seed(opts, cfg);
    torpot::Rng rng(seed ? seed : 20240817);
    std::vector<Suite> suites;

    {  // metric axioms
        Suite s{"torus_metric_axioms"};
        for (int d = 1; d <= 3; ++d)
            for (int it = 0; it < 500; ++it) {
                auto rnd = [&] {
                    std::vector<double> x(size_t(d), 0.0);
                    for (double& xi : x) xi = torpot::uniform01(rng) - 0.5;
                    return torpot::TorusPoint(x);
                };
                torpot::TorusPoint a = rnd(), b = rnd(), c = rnd();
                double ab = torus_dist(a, b), ba = torus_dist(b, a);
                double ac = torus_dist(a, c), cb = torus_dist(c, b);
                s.worst = std::max(s.worst, std::abs(ab - ba));
                s.worst = std::max(s.worst, ab - (ac + cb));
                ++s.count;
            }
        s.pass = s.worst <= 1e-12;
        suites.push_back(s);
    }
    {  // expansion against the brute-force double loop
        Suite s{"expand_matches_brute_force"};
        for (int it = 0; it < 40 && s.pass; ++it) {
            int d = 1 + int(torpot::uniform01(rng) * 2.999);
            int N = d == 1 ? 48 : (d == 2 ? 20 : 8);
            torpot::Grid g(d, N);
            torpot::GridSet S(g);
            for (std::int64_t c = 0; c < g.cell_count(); ++c)
                if (torpot::uniform01(rng) < 0.2) S.set(c, true);
            double r = 0.02 + 0.2 * torpot::uniform01(rng);
            if (!(torpot::expand(S, r) == torpot::oracle::expand_brute(S, r))) s.pass = false;
            ++s.count;
        }
        suites.push_back(s);
    }
    {  // regularization identities (exact)
        Suite s{"regularization_identities"};
        for (int it = 0; it < 150 && s.pass; ++it) {
            torpot::Grid g(2, 32);
            torpot::GridSet S(g);
            for (std::int64_t c = 0; c < g.cell_count(); ++c)
                if (torpot::uniform01(rng) < 0.15) S.set(c, true);
            double r = 0.03 + 0.12 * torpot::uniform01(rng);
            torpot::GridSet R = torpot::regularize(S, r);
            if (!S.subset_of(R)) s.pass = false;
            if (!(torpot::expand(R, r) == torpot::expand(S, r))) s.pass = false;
            if (!(torpot::regularize(R, r) == R)) s.pass = false;
            ++s.count;
        }
        suites.push_back(s);
    }
    {  // weighted Hall duality margins
        Suite s{"hall_duality_margins"};
        s.worst = 1.0;
        for (int it = 0; it < 200; ++it) {
            int d = 1 + (it % 2);
            int n = 2 + int(torpot::uniform01(rng) * 10.999);
            int m = 2 + int(torpot::uniform01(rng) * 10.999);
            auto mk = [&](int cnt) {
                torpot::WeightedAtoms a;
                a.d = d;
                double tot = 0;
                for (int i = 0; i < cnt; ++i) {
                    std::vector<double> x(size_t(d), 0.0);
                    for (double& xi : x) xi = torpot::uniform01(rng) - 0.5;
                    a.pos.emplace_back(std::move(x));
                    double w = 0.05 + torpot::uniform01(rng);
                    a.w.push_back(w);
                    tot += w;
                }
                for (double& w : a.w) w /= tot;
                return a;
            };
            torpot::SetFormulationReport rep = torpot::set_formulation_check(mk(n), mk(m));
            ++s.count;
            if (rep.predecessor >= 0) {
                s.worst = std::min(s.worst, rep.witness_margin);
                if (!rep.pass) s.pass = false;
            } else if (rep.deficit_at_rstar >= torpot::kFeasTol) {
                s.pass = false;
            }
        }
        suites.push_back(s);
    }
    {  // permutation-oracle agreement
        Suite s{"bottleneck_permutation_oracle"};
        for (int it = 0; it < 150 && s.pass; ++it) {
            int d = 1 + (it % 2);
            int n = 2 + int(torpot::uniform01(rng) * 4.999);
            torpot::WeightedAtoms a, b;
            a.d = b.d = d;
            for (int i = 0; i < n; ++i) {
                std::vector<double> x(size_t(d), 0.0), y(size_t(d), 0.0);
                for (double& v : x) v = torpot::uniform01(rng) - 0.5;
                for (double& v : y) v = torpot::uniform01(rng) - 0.5;
                a.pos.emplace_back(std::move(x));
                b.pos.emplace_back(std::move(y));
                a.w.push_back(1.0 / n);
                b.w.push_back(1.0 / n);
            }
            double oracle = torpot::oracle::bottleneck_permutation(a, b);
            double got = torpot::dinfty_atomic(a, b).r_star;
            if (got != oracle) s.pass = false;
            ++s.count;
        }
        suites.push_back(s);
    }
    {  // 1D identity D/2 = d_infty
        Suite s{"discrepancy_identity_1d"};
        for (int it = 0; it < 40; ++it) {
            torpot::GridDensity rho = torpot::uniform_density(1, 200);
            double tot = 0;
            for (double& m : rho.mass) {
                m = torpot::uniform01(rng);
                tot += m;
            }
            for (double& m : rho.mass) m /= tot;
            double D = torpot::discrepancy_1d(rho);
            torpot::DinftyEnclosure enc = torpot::dinfty_to_uniform(rho, 64);
            double gap = std::abs(0.5 * D - enc.midpoint());
            double tol = enc.half_width() + 2.0 / 200.0;
            s.worst = std::max(s.worst, gap - tol);
            ++s.count;
        }
        s.pass = s.worst <= 0;
        suites.push_back(s);
    }
    {  // spectral identity of the convolution
        Suite s{"potential_spectral_identity"};
        for (int d = 1; d <= 2; ++d) {
            int N = d == 1 ? 64 : 32;
            torpot::GridDensity rho = torpot::uniform_density(d, N);
            double tot = 0;
            for (double& m : rho.mass) {
                m = torpot::uniform01(rng);
                tot += m;
            }
            for (double& m : rho.mass) m /= tot;
            torpot::RieszSpec spec;
            spec.d = d;
            spec.s = d == 1 ? 0.5 : 1.0;
            spec.K = 8;
            torpot::PotentialField V = torpot::potential_field(spec, rho);
            torpot::SpectralCoeffs vc = torpot::fourier_coeffs(V, spec.K);
            torpot::SpectralCoeffs rc = torpot::fourier_coeffs(rho, spec.K);
            vc.for_each([&](const std::vector<int>& k, std::complex<double> v) {
                double k2 = 0;
                for (int ki : k) k2 += double(ki) * ki;
                std::complex<double> want =
                    k2 == 0 ? 0.0
                            : std::pow(k2, 0.5 * (spec.s - d)) * rc.at(k);
                s.worst = std::max(s.worst, std::abs(v - want));
            });
            ++s.count;
        }
        s.pass = s.worst <= 1e-10;
        suites.push_back(s);
    }
    {  // kernel vs independent spectral oracle
        Suite s{"riesz_kernel_oracle"};
        const std::vector<std::pair<int, double>> specs{{1, 0.5}, {1, -0.5}, {2, 1.0},
                                                        {2, -1.0}, {3, 1.5}};
        for (auto [d, sv] : specs) {
            torpot::RieszSpec spec;
            spec.d = d;
            spec.s = sv;
            torpot::RieszKernel kern(spec);
            for (int it = 0; it < 10; ++it) {
                std::vector<double> x(size_t(d), 0.0);
                for (double& xi : x) xi = torpot::uniform01(rng) - 0.5;
                double r2 = 0;
                for (double xi : x) r2 += xi * xi;
                if (r2 < 1e-3) {
                    --it;
                    continue;
                }
                double got = kern.value(torpot::TorusPoint(x));
                double want = torpot::oracle::riesz_spectral(d, sv, x);
                s.worst = std::max(s.worst, std::abs(got - want));
                ++s.count;
            }
        }
        s.pass = s.worst <= 1e-6;
        suites.push_back(s);
    }
    {  // gradient vs central differences
        Suite s{"riesz_gradient_fd"};
        const std::vector<std::pair<int, double>> specs{{1, 0.5}, {1, -0.5}, {2, 1.0},
                                                        {2, -1.0}, {3, 1.5}};
        for (auto [d, sv] : specs) {
            torpot::RieszSpec spec;
            spec.d = d;
            spec.s = sv;
            torpot::RieszKernel kern(spec);
            for (int it = 0; it < 10; ++it) {
                std::vector<double> x(size_t(d), 0.0);
                for (double& xi : x) xi = torpot::uniform01(rng) - 0.5;
                double r2 = 0;
                for (double xi : x) r2 += xi * xi;
                if (r2 < 1e-2) {
                    --it;
                    continue;
                }
                auto g = kern.gradient(torpot::TorusPoint(x));
                double h = 1e-5;
                for (int ax = 0; ax < d; ++ax) {
                    std::vector<double> xp(x), xm(x);
                    xp[size_t(ax)] += h;
                    xm[size_t(ax)] -= h;
                    double fd = (kern.value(torpot::TorusPoint(xp)) -
                                 kern.value(torpot::TorusPoint(xm))) /
                                (2 * h);
                    double scale = std::max(1.0, std::abs(g[size_t(ax)]));
                    s.worst = std::max(s.worst, std::abs(fd - g[size_t(ax)]) / scale);
                }
                ++s.count;
            }
        }
        s.pass = s.worst <= 1e-4;
        suites.push_back(s);
    }
    {  // moment vanishing of the oscillatory construction
        Suite s{"oscillatory_moments"};
        for (int d = 1; d <= 2; ++d)
            for (int M = 1; M <= 3; ++M) {
                torpot::Mollifier moll(d);
                torpot::IteratedLaplacian psi =
                    torpot::iterated_laplacian(moll, M, 1.0 / 48.0, 0.0);
                std::vector<int> alpha(size_t(d), 0);
                std::function<void(int, int)> rec = [&](int ax, int budget) {
                    if (ax == d) {
                        int total = 0;
                        for (int ai : alpha) total += ai;
                        if (total <= 2 * M - 1) {
                            double m = std::abs(psi.moment(alpha)) / psi.sup_norm;
                            s.worst = std::max(s.worst, m);
                            ++s.count;
                        }
                        return;
                    }
                    for (int a = 0; a <= budget; ++a) {
                        alpha[size_t(ax)] = a;
                        rec(ax + 1, budget - a);
                    }
                    alpha[size_t(ax)] = 0;
                };
                rec(0, 2 * M - 1);
            }
        s.pass = s.worst <= 1e-7;
        suites.push_back(s);
    }
    {  // negativity of perturbed coefficients
        Suite s{"perturbed_negativity"};
        torpot::RieszSpec base;
        base.d = 2;
        base.s = -1.0;
        for (double eps : {0.05, 0.1, 0.2}) {
            torpot::PerturbedPotential pp(base, eps, 50.0);
            auto scan = pp.scan_negative(int(std::ceil(2.0 / eps)));
            if (scan.negative_count < 1) s.pass = false;
            s.worst = std::min(s.worst, scan.min_coeff);
            ++s.count;
        }
        suites.push_back(s);
    }
    Suite cal{"set_diagnostic_calibration"};
    {  // calibration of the layer/isoperimetric diagnostics
        torpot::CalibrationData data =
            torpot::calibrate_set_diagnostics(cfg.value("calibration_seed", 424242), 500);
        json cj{{"d", data.d},
                {"N", data.N},
                {"count", data.count},
                {"seed", data.seed},
                {"r_min", data.r_min},
                {"r_max", data.r_max},
                {"layer_ratio_max", data.layer_ratio_max},
                {"iso_ratio_min", data.iso_ratio_min},
                {"layer_bound", data.layer_bound()},
                {"iso_bound", data.iso_bound()},
                {"degenerate", data.degenerate}};
        torpot::write_json(fs::path(opts.out_dir) / "calibration.json", cj);
        cal.count = data.count;
        cal.worst = data.layer_ratio_max;
        cal.pass = data.layer_ratio_max > 0 && data.iso_ratio_min > 0;
        cal.note = "written to calibration.json";
        suites.push_back(cal);
    }

    json out{{"config_hash", torpot::config_hash(cfg)}, {"seed", seed}};
    json sj = json::array();
    bool all = true;
    for (const Suite& s : suites) {
        sj.push_back(suite_to_json(s));
        all = all && s.pass;
        std::cout << (s.pass ? "PASS " : "FAIL ") << s.name << " (n=" << s.count
                  << ", worst=" << s.worst << ")\n";
    }
    out["suites"] = sj;
    out["all_pass"] = all;
    torpot::write_json(fs::path(opts.out_dir) / "verify.json", out);
    return all ? 0 : 1;
}

// ---- oracle -----------------------------------------------------------------

int cmd_oracle(const CommonOpts& opts) {
    json cfg = load_config(opts);
    if (cfg.empty()) throw std::runtime_error("oracle requires --config");
    std::uint64_t seed = resolve_seed(opts, cfg);
    std::string kind = cfg.at("kind").get<std::string>();
    json out{{"config_hash", torpot::config_hash(cfg)}, {"seed", seed}, {"kind", kind}};
    if (kind == "bottleneck") {
        json values = json::array();
        if (cfg.contains("instances")) {
            for (const json& inst : cfg.at("instances")) {
                torpot::WeightedAtoms a = make_atoms(inst.at("rho1"), seed);
                torpot::WeightedAtoms b = make_atoms(inst.at("rho2"), seed + 1);
                values.push_back(torpot::oracle::bottleneck_permutation(a, b));
            }
        } else {
            const json& r = cfg.at("random");
            int count = r.value("count", 100);
            int n = r.value("n", 5);
            int d = r.value("d", 2);
            torpot::Rng rng(seed);
            for (int it = 0; it < count; ++it) {
                torpot::WeightedAtoms a, b;
                a.d = b.d = d;
                for (int i = 0; i < n; ++i) {
                    std::vector<double> x(size_t(d), 0.0), y(size_t(d), 0.0);
                    for (double& v : x) v = torpot::uniform01(rng) - 0.5;
                    for (double& v : y) v = torpot::uniform01(rng) - 0.5;
                    a.pos.emplace_back(std::move(x));
                    b.pos.emplace_back(std::move(y));
                    a.w.push_back(1.0 / n);
                    b.w.push_back(1.0 / n);
                }
                values.push_back(torpot::oracle::bottleneck_permutation(a, b));
            }
        }
        out["values"] = values;
    } else if (kind == "expand") {
        torpot::GridSet S = cfg.at("S").get<torpot::GridSet>();
        double r = cfg.at("r").get<double>();
        out["result"] = torpot::oracle::expand_brute(S, r, cfg.value("closed", false));
    } else if (kind == "riesz") {
        int d = cfg.at("d").get<int>();
        double s = cfg.at("s").get<double>();
        json values = json::array();
        for (const json& xj : cfg.at("points"))
            values.push_back(torpot::oracle::riesz_spectral(d, s, xj.get<std::vector<double>>()));
        out["values"] = values;
    } else if (kind == "discrepancy") {
        torpot::GridDensity rho = make_density(cfg.at("rho"), seed);
        out["D"] = torpot::oracle::discrepancy_brute(rho);
    } else {
        throw std::invalid_argument("unknown oracle kind: " + kind);
    }
    torpot::write_json(fs::path(opts.out_dir) / "oracle.json", out);
    std::cout << "oracle '" << kind << "' written\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"potential-theory toolkit on the flat torus"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string cmd_name;
    struct Entry {
        const char* name;
        const char* desc;
        int (*fn)(const CommonOpts&);
    };
    const std::vector<Entry> entries{
        {"dinfty", "bottleneck distance between measures", cmd_dinfty},
        {"discrepancy", "1D interval discrepancy and the d_infty identity", cmd_discrepancy},
        {"potential", "Riesz potential field and norms", cmd_potential},
        {"energy", "interaction energies (spectral, perturbed)", cmd_energy},
        {"scaling", "sharpness scaling sweeps", cmd_scaling},
        {"flow", "particle gradient flow panels", cmd_flow},
        {"verify", "invariant suites + diagnostic calibration", cmd_verify},
        {"oracle", "brute-force reference generators", cmd_oracle},
    };
    for (const Entry& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.desc);
        add_common(sub, opts);
        sub->callback([&cmd_name, &e] { cmd_name = e.name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        for (const Entry& e : entries)
            if (cmd_name == e.name) return e.fn(opts);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const torpot::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "infeasible input: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "infeasible input: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
