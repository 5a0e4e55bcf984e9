#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "torpot/dinfty.hpp"
#include "torpot/flow.hpp"
#include "torpot/grid_set.hpp"
#include "torpot/measures.hpp"
#include "torpot/riesz.hpp"

namespace torpot {

using json = nlohmann::json;

// ---- JSON conversions -------------------------------------------------

inline void to_json(json& j, const WeightedAtoms& a) {
    json atoms = json::array();
    for (size_t i = 0; i < a.pos.size(); ++i) {
        json row = json::array();
        for (int ax = 0; ax < a.d; ++ax) row.push_back(a.pos[i].x[size_t(ax)]);
        row.push_back(a.w[i]);
        atoms.push_back(std::move(row));
    }
    j = json{{"d", a.d}, {"atoms", std::move(atoms)}};
}

inline void from_json(const json& j, WeightedAtoms& a) {
    a.d = j.at("d").get<int>();
    a.pos.clear();
    a.w.clear();
    for (const auto& row : j.at("atoms")) {
        if (int(row.size()) != a.d + 1)
            throw std::invalid_argument("atoms row must have d coordinates plus a weight");
        std::vector<double> x(size_t(a.d), 0.0);
        for (int ax = 0; ax < a.d; ++ax) x[size_t(ax)] = row[size_t(ax)].get<double>();
        a.pos.emplace_back(std::move(x));
        a.w.push_back(row[size_t(a.d)].get<double>());
    }
}

inline void to_json(json& j, const GridDensity& g) {
    j = json{{"d", g.grid.d}, {"N", g.grid.N}, {"mass", g.mass}};
}

inline void from_json(const json& j, GridDensity& g) {
    int d = j.at("d").get<int>();
    int N = j.at("N").get<int>();
    g.grid = Grid(d, N);
    g.mass = j.at("mass").get<std::vector<double>>();
    if (std::int64_t(g.mass.size()) != g.grid.cell_count())
        throw std::invalid_argument("mass array size must be N^d");
}

inline void to_json(json& j, const GridSet& s) {
    j = json{{"d", s.grid().d}, {"N", s.grid().N}, {"runs", s.to_runs()}};
}

inline void from_json(const json& j, GridSet& s) {
    Grid g(j.at("d").get<int>(), j.at("N").get<int>());
    s = GridSet::from_runs(g, j.at("runs").get<std::vector<std::int64_t>>());
}

inline void to_json(json& j, const RieszSpec& s) {
    j = json{{"d", s.d}, {"s", s.s}, {"J", s.J}, {"K", s.K}, {"tau", s.tau}};
}

inline void from_json(const json& j, RieszSpec& s) {
    s.d = j.at("d").get<int>();
    s.s = j.at("s").get<double>();
    s.J = j.value("J", 0);
    s.K = j.value("K", 8);
    s.tau = j.value("tau", 1e-10);
    s.validate();
}

inline void to_json(json& j, const PlanEdge& e) { j = json{{"i", e.i}, {"j", e.j}, {"c", e.c}}; }

inline void to_json(json& j, const DinftyResult& r) {
    j = json{{"r_star", r.r_star},
             {"plan", r.plan},
             {"witness", r.witness},
             {"witness_margin", r.witness_margin},
             {"deficit_at_rstar", r.deficit_at_rstar},
             {"predecessor", r.predecessor}};
}

inline void to_json(json& j, const DinftyEnclosure& e) {
    j = json{{"lo", e.lo},       {"hi", e.hi},
             {"r_hat", e.r_hat}, {"N", e.N},
             {"mid", e.midpoint()}, {"half_width", e.half_width()}};
}

inline void to_json(json& j, const ClusterStats& c) {
    j = json{{"n_clusters", c.n_clusters}, {"sizes", c.sizes},
             {"mean_radius", c.mean_radius}, {"max_radius", c.max_radius},
             {"nn_mean", c.nn_mean},         {"nn_std", c.nn_std},
             {"nn_cv", c.nn_cv}};
}

inline void to_json(json& j, const FlowConfig& c) {
    j = json{{"d", c.d},
             {"s", c.s},
             {"n_particles", c.n_particles},
             {"perturbed", c.perturbed},
             {"eps", c.eps},
             {"c0", c.c0},
             {"integrator", c.integrator == FlowConfig::Integrator::rk4 ? "rk4" : "euler"},
             {"h", c.h},
             {"steps", c.steps},
             {"seed", c.seed},
             {"use_table", c.use_table},
             {"table_n", c.table_n},
             {"snapshot_every", c.snapshot_every}};
}

inline void from_json(const json& j, FlowConfig& c) {
    c.d = j.value("d", 2);
    c.s = j.value("s", -1.0);
    c.n_particles = j.value("n_particles", 256);
    c.perturbed = j.value("perturbed", false);
    c.eps = j.value("eps", 0.1);
    c.c0 = j.value("c0", 50.0);
    std::string integ = j.value("integrator", std::string("rk4"));
    if (integ == "rk4")
        c.integrator = FlowConfig::Integrator::rk4;
    else if (integ == "euler")
        c.integrator = FlowConfig::Integrator::euler;
    else
        throw std::invalid_argument("integrator must be 'euler' or 'rk4'");
    c.h = j.value("h", c.integrator == FlowConfig::Integrator::rk4 ? 5e-3 : 1e-3);
    c.steps = j.value("steps", 800);
    c.seed = j.value("seed", std::uint64_t(1));
    c.use_table = j.value("use_table", true);
    c.table_n = j.value("table_n", 512);
    c.snapshot_every = j.value("snapshot_every", 0);
    c.validate();
}

// ---- file helpers ------------------------------------------------------

// Write-then-rename so partially written outputs are never observed.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out.good()) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return json::parse(in);  // throws json::parse_error on malformed input
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
    atomic_write(path, out.str());
}

// FNV-1a over the canonical (sorted-key) JSON dump; echoed into outputs so
// runs can be tied back to the exact configuration that produced them.
inline std::string config_hash(const json& j) {
    std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

// ---- SVG ---------------------------------------------------------------

// Scatter plot of torus points in [-1/2,1/2)^2 (d = 1 uses y = 0).
inline std::string svg_scatter(const std::vector<TorusPoint>& pts, int canvas = 640,
                               const std::string& title = "",
                               const std::vector<TorusPoint>& highlight = {}) {
    auto px = [&](double x) { return (wrap_coord(x) + 0.5) * canvas; };
    std::ostringstream out;
    out << std::setprecision(8);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << canvas << "\" height=\""
        << canvas << "\" viewBox=\"0 0 " << canvas << " " << canvas << "\">\n";
    out << "<rect width=\"" << canvas << "\" height=\"" << canvas
        << "\" fill=\"white\" stroke=\"#888\"/>\n";
    if (!title.empty())
        out << "<text x=\"8\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">" << title
            << "</text>\n";
    for (const auto& p : pts) {
        double x = px(p.x[0]);
        double y = p.dim() > 1 ? canvas - px(p.x[1]) : canvas / 2.0;
        out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2.4\" fill=\"#1f77b4\"/>\n";
    }
    for (const auto& p : highlight) {
        double x = px(p.x[0]);
        double y = p.dim() > 1 ? canvas - px(p.x[1]) : canvas / 2.0;
        out << "<circle cx=\"" << x << "\" cy=\"" << y
            << "\" r=\"5\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

// Poly-line chart (e.g. energy vs time, log-log scaling plots); caller
// supplies already-transformed coordinates.
inline std::string svg_line_chart(const std::vector<double>& xs, const std::vector<double>& ys,
                                  const std::string& title = "", int w = 640, int h = 420) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("svg_line_chart: matching non-empty series required");
    double x0 = xs[0], x1 = xs[0], y0 = ys[0], y1 = ys[0];
    for (size_t i = 0; i < xs.size(); ++i) {
        x0 = std::min(x0, xs[i]);
        x1 = std::max(x1, xs[i]);
        y0 = std::min(y0, ys[i]);
        y1 = std::max(y1, ys[i]);
    }
    if (x1 - x0 < 1e-300) x1 = x0 + 1;
    if (y1 - y0 < 1e-300) y1 = y0 + 1;
    const double mL = 50, mR = 15, mT = 30, mB = 35;
    auto px = [&](double x) { return mL + (x - x0) / (x1 - x0) * (w - mL - mR); };
    auto py = [&](double y) { return h - mB - (y - y0) / (y1 - y0) * (h - mT - mB); };
    std::ostringstream out;
    out << std::setprecision(8);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    out << "<rect x=\"" << mL << "\" y=\"" << mT << "\" width=\"" << (w - mL - mR)
        << "\" height=\"" << (h - mT - mB) << "\" fill=\"none\" stroke=\"#888\"/>\n";
    if (!title.empty())
        out << "<text x=\"" << mL << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
            << title << "</text>\n";
    out << "<text x=\"8\" y=\"" << py(y0) << "\" font-family=\"sans-serif\" font-size=\"10\">"
        << std::setprecision(4) << y0 << "</text>\n";
    out << "<text x=\"8\" y=\"" << py(y1) + 10 << "\" font-family=\"sans-serif\" font-size=\"10\">"
        << y1 << "</text>\n";
    out << "<text x=\"" << px(x0) << "\" y=\"" << h - 12
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << x0 << "</text>\n";
    out << "<text x=\"" << px(x1) - 30 << "\" y=\"" << h - 12
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << x1 << "</text>\n";
    out << std::setprecision(8) << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < xs.size(); ++i) out << px(xs[i]) << "," << py(ys[i]) << " ";
    out << "\"/>\n</svg>\n";
    return out.str();
}

}  // namespace torpot
