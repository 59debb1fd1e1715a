#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "cmflow/ambient.hpp"
#include "cmflow/config.hpp"
#include "cmflow/density.hpp"
#include "cmflow/heat_flow.hpp"
#include "cmflow/hermite.hpp"
#include "cmflow/io.hpp"
#include "cmflow/map_io.hpp"
#include "cmflow/surface.hpp"

namespace cmflow {

namespace fs = std::filesystem;

/// What every run leaves behind besides its typed results.
struct RunArtifacts {
    std::vector<fs::path> files;
    std::map<std::string, std::size_t> remaps;
    DensityAudit audit;
};

namespace experiment_detail {

inline std::string time_tag(double t)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%g", t);
    return buf;
}

template <class Write>
void emit(RunArtifacts& art, const fs::path& path, Write&& write)
{
    std::ofstream os = open_output(path);
    write(os);
    if (!os) throw Error("failed writing " + path.string());
    art.files.push_back(path);
}

/// Both annulus densities reach 1 - amplitude away from the ring.
inline double annulus_amplitude(const Config& cfg)
{
    const double a = cfg.real("amplitude");
    if (!(a < 1.0)) throw ConfigError("'amplitude' must be below 1 to keep the density positive");
    return a;
}

inline HeatFlowOptions heat_options(const Config& cfg)
{
    HeatFlowOptions opt;
    opt.order = cfg.integer("order");
    opt.remap_threshold = cfg.real("heat_remap");
    opt.min_density = cfg.real("min_density");
    return opt;
}

} // namespace experiment_detail

// ---------------------------------------------------------------------------
// Toy redistribution of the annulus density on the periodic unit square.

struct ToyRun {
    int n = 0;
    double dt = 0.0;
    std::vector<TraceRow> trace;
    std::size_t remaps = 0;
};

struct ToyResult : RunArtifacts {
    std::vector<ToyRun> runs;
};

inline ToyResult run_toy_redistribution(const Config& cfg)
{
    using namespace experiment_detail;
    const fs::path out = cfg.text("output_dir");
    const double T = cfg.real("T");
    AnnulusDensity rho0;
    rho0.amplitude = annulus_amplitude(cfg);
    const HeatFlowOptions opt = heat_options(cfg);
    const int mesh = cfg.integer("mesh_cells");

    ToyResult res;
    for (int n : cfg.integers("toy_sizes")) {
        const auto grid = GridSpec<2>::nodal(n, Boundary::Periodic);
        const double dt = cfg.real("dt_scale") / n;
        const HeatFlowResult<2> r = heat_flow_map<2>(rho0, T, dt, grid, opt);
        const std::string stem = "toy_N" + std::to_string(n);
        emit(res, out / (stem + "_energy.csv"), [&](std::ostream& os) { write_trace_csv(os, r.energy_trace); });
        // Image of a uniform mesh under the backward map, the deformed grid.
        std::vector<Vec3> pts;
        for (int i = 0; i <= mesh; ++i)
            for (int j = 0; j <= mesh; ++j) {
                const Point<2> y = r.chain(Point<2>{double(i) / mesh, double(j) / mesh});
                pts.push_back({y[0], y[1], 0.0});
            }
        emit(res, out / (stem + "_grid.ply"), [&](std::ostream& os) { write_ply(os, pts); });
        emit(res, out / (stem + "_map.cmap"), [&](std::ostream& os) { save(r.chain, os); });
        res.audit.merge(r.audit);
        res.remaps[stem] = r.remaps;
        res.runs.push_back({n, dt, r.energy_trace, r.remaps});
    }
    return res;
}

// ---------------------------------------------------------------------------
// Redistribution of the moving annulus density.

struct MovingRow {
    double h = 0.0;
    double dt = 0.0;
    double nu = 0.0;
    double err = 0.0;
};

struct MovingResult : RunArtifacts {
    std::vector<MovingRow> rows;
};

inline MovingResult run_moving_density(const Config& cfg)
{
    using namespace experiment_detail;
    MovingAnnulusDensity rho0;
    rho0.amplitude = annulus_amplitude(cfg);
    auto rho = [&](const Point<2>& x, double t) { return rho0(x, t); };
    HeatFlowOptions opt = heat_options(cfg);
    opt.inner_steps = cfg.integer("inner_steps");
    const double T = cfg.real("T");

    MovingResult res;
    for (int n : cfg.integers("moving_sizes")) {
        const auto grid = GridSpec<2>::nodal(n, Boundary::Periodic);
        const double h = 1.0 / n, dt = cfg.real("dt_ratio") * h;
        for (double nu : cfg.reals("nu_list")) {
            const HeatFlowResult<2> r = redistribute_moving<2>(rho, nu, T, dt, grid, opt);
            res.rows.push_back({h, dt, nu, r.max_deviation});
            res.audit.merge(r.audit);
            res.remaps["N" + std::to_string(n) + "_nu" + fmt17(nu)] = r.remaps;
        }
    }
    emit(res, fs::path(cfg.text("output_dir")) / "moving_errors.csv", [&](std::ostream& os) {
        os << "h,dt,nu,err\n";
        for (const MovingRow& r : res.rows)
            os << fmt17(r.h) << ',' << fmt17(r.dt) << ',' << fmt17(r.nu) << ',' << fmt17(r.err) << '\n';
    });
    return res;
}

// ---------------------------------------------------------------------------
// Curves and surfaces advected by the ambient flow and reparametrized.

struct ChartReport {
    std::string name;
    int dim = 0;
    double t = 0.0;
    RedistStats p, q;
    /// sup over sample points of |Q(y) - P(chi(y))|.
    double invariance = 0.0;
};

struct AdvectionResult : RunArtifacts {
    std::vector<ChartReport> reports;
    std::size_t ambient_remaps = 0;
    double max_ambient_error = 0.0;

    const ChartReport& report(const std::string& name, double t) const
    {
        for (const ChartReport& r : reports) {
            if (r.name == name && std::abs(r.t - t) < 1e-12) return r;
        }
        throw DomainError("no report for " + name);
    }
};

namespace experiment_detail {

template <int P>
std::vector<Chart<P>> select_charts(const Config& cfg)
{
    const std::vector<Chart<P>> catalog = [] {
        if constexpr (P == 1) {
            return curve_catalog();
        } else {
            return surface_catalog();
        }
    }();
    std::vector<Chart<P>> out;
    for (const std::string& w : cfg.words("charts")) {
        if (w == "none") continue;
        if (w == "all") {
            out.insert(out.end(), catalog.begin(), catalog.end());
            continue;
        }
        auto it = std::find_if(catalog.begin(), catalog.end(), [&](const Chart<P>& c) { return c.name == w; });
        if (it == catalog.end()) throw ConfigError("unknown chart '" + w + "'");
        out.push_back(*it);
    }
    const std::string kind = cfg.text("custom_kind");
    if (kind == "none") return out;
    auto need = [&](const char* key) {
        if (!cfg.has(key)) throw ConfigError("custom " + kind + " needs '" + key + "'");
    };
    const std::string name = cfg.text("custom_name");
    if constexpr (P == 1) {
        if (kind == "segment") {
            need("custom_origin");
            need("custom_end");
            out.push_back(Chart<1>::segment(name, cfg.vec3("custom_origin"), cfg.vec3("custom_end")));
        } else if (kind == "circle") {
            need("custom_origin");
            need("custom_radius");
            need("custom_axis");
            out.push_back(
                Chart<1>::circle(name, cfg.vec3("custom_origin"), cfg.real("custom_radius"), cfg.vec3("custom_axis")));
        } else {
            throw ConfigError("custom_kind '" + kind + "' is not a curve (segment, circle)");
        }
    } else {
        need("custom_origin");
        if (kind == "rectangle") {
            need("custom_e1");
            need("custom_e2");
            out.push_back(
                Chart<2>::rectangle(name, cfg.vec3("custom_origin"), cfg.vec3("custom_e1"), cfg.vec3("custom_e2")));
        } else if (kind == "torus") {
            need("custom_radius");
            need("custom_minor");
            need("custom_axis");
            out.push_back(Chart<2>::torus(name, cfg.vec3("custom_origin"), cfg.real("custom_radius"),
                                          cfg.real("custom_minor"), cfg.vec3("custom_axis")));
        } else if (kind == "cylinder") {
            need("custom_radius");
            need("custom_height");
            need("custom_axis");
            out.push_back(Chart<2>::cylinder(name, cfg.vec3("custom_origin"), cfg.real("custom_radius"),
                                             cfg.vec3("custom_axis"), cfg.real("custom_height")));
        } else {
            throw ConfigError("custom_kind '" + kind + "' is not a surface (rectangle, torus, cylinder)");
        }
    }
    return out;
}

template <int P>
double invariance_defect(const Parametrization<P>& q, std::uint64_t seed)
{
    const Parametrization<P> p = q.original();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s < 256; ++s) {
        std::array<double, P> y;
        for (int k = 0; k < P; ++k) y[k] = u(rng);
        const Vec3 a = q(y), b = p(q.pre(y));
        for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

template <int P>
void report_chart(AdvectionResult& res, const Config& cfg, const Parametrization<P>& q, double t,
                  std::vector<StatsRow>& rows)
{
    const fs::path out = cfg.text("output_dir");
    const std::string stem = q.chart.name + "_" + time_tag(t);
    const int cells = P == 1 ? cfg.integer("curve_stat_cells") : cfg.integer("stat_cells");
    std::array<int, P> n;
    n.fill(cells);
    const auto stat_grid = GridSpec<P>::cell_centers(n, q.chart.bcs);
    const Parametrization<P> p = q.original();

    ChartReport rep;
    rep.name = q.chart.name;
    rep.dim = P;
    rep.t = t;
    rep.p = cell_stats<P>(p, stat_grid);
    rep.q = cell_stats<P>(q, stat_grid);
    rep.invariance = invariance_defect<P>(q, static_cast<std::uint64_t>(cfg.integer("seed")));
    rows.push_back({q.chart.name + "_P", rep.p});
    rows.push_back({q.chart.name + "_Q", rep.q});

    const auto n_samples = static_cast<std::size_t>(cfg.integer("samples"));
    const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    const int mesh = cfg.integer("mesh_cells");
    for (const auto* par : {&p, &q}) {
        const std::string which = par == &p ? "P" : "Q";
        emit(res, out / (stem + "_" + which + ".ply"),
             [&](std::ostream& os) { write_ply(os, sample<P>(*par, n_samples, seed)); });
        emit(res, out / (stem + "_" + which + ".obj"), [&](std::ostream& os) {
            write_obj<P>(os, [&](const std::array<double, P>& y) { return (*par)(y); }, q.chart.bcs, mesh);
        });
        emit(res, out / (stem + "_" + which + "_hist.csv"),
             [&](std::ostream& os) { write_histogram_csv(os, par == &p ? rep.p : rep.q); });
    }
    res.reports.push_back(std::move(rep));
}

inline AmbientVelocity velocity_of(const Config& cfg)
{
    const std::string v = cfg.text("velocity");
    if (v == "leveque") return AmbientVelocity::leveque(cfg.real("period"));
    if (v == "zero") return AmbientVelocity::zero();
    throw ConfigError("unknown velocity '" + v + "' (leveque or zero)");
}

} // namespace experiment_detail

/// Curve (P = 1) or surface (P = 2) advection with equiareal reparametrization.
template <int P>
AdvectionResult run_advection(const Config& cfg)
{
    using namespace experiment_detail;
    const fs::path out = cfg.text("output_dir");
    const std::vector<Chart<P>> charts = select_charts<P>(cfg);
    if (charts.empty()) throw ConfigError("no charts selected");
    const double T = cfg.real("T");

    AmbientOptions aopt;
    aopt.order = cfg.integer("ambient_order");
    aopt.remap_threshold = cfg.real("ambient_remap");
    aopt.rk_substeps = cfg.integer("rk_substeps");
    if (cfg.flag("archive_submaps")) aopt.archive_dir = out / "submaps";
    AmbientEvolver ambient(velocity_of(cfg), GridSpec<3>::nodal(cfg.integer("ambient_cells"), Boundary::Periodic),
                           aopt);

    ReparamOptions ropt;
    ropt.nu = cfg.real("nu");
    ropt.cells = cfg.integer("redist_cells");
    ropt.heat = heat_options(cfg);
    std::vector<Reparametrizer<1>> curves;
    std::vector<Reparametrizer<2>> surfaces;
    for (const Chart<P>& c : charts) {
        if constexpr (P == 1) {
            curves.emplace_back(c, ropt);
        } else {
            surfaces.emplace_back(c, ropt);
        }
    }

    AdvectionResult res;
    advect_and_reparametrize(
        ambient, T, cfg.real("ambient_dt"), curves, surfaces, cfg.reals("output_times"),
        [&](double t, AmbientEvolver& a, auto& cs, auto& ss) {
            const auto amb = std::make_shared<const SubmapChain<3>>(a.maps().forward);
            std::vector<StatsRow> rows;
            for (auto& c : cs) report_chart<1>(res, cfg, c.snapshot(amb, t), t, rows);
            for (auto& s : ss) report_chart<2>(res, cfg, s.snapshot(amb, t), t, rows);
            emit(res, out / ("stats_" + time_tag(t) + ".csv"), [&](std::ostream& os) { write_stats_csv(os, rows); });
        });

    for (const auto& c : curves) {
        res.audit.merge(c.audit());
        res.remaps["redist_" + c.chart().name] = c.stepper().remaps();
    }
    for (const auto& s : surfaces) {
        res.audit.merge(s.audit());
        res.remaps["redist_" + s.chart().name] = s.stepper().remaps();
    }
    res.ambient_remaps = ambient.remaps();
    res.remaps["ambient"] = ambient.remaps();
    for (const AmbientCheck& c : ambient.checks()) res.max_ambient_error = std::max(res.max_ambient_error, c.error);
    emit(res, out / "ambient_log.csv", [&](std::ostream& os) {
        os << "t,error,remapped\n";
        for (const AmbientCheck& c : ambient.checks())
            os << fmt17(c.t) << ',' << fmt17(c.error) << ',' << (c.remapped ? 1 : 0) << '\n';
    });
    if (cfg.flag("archive_submaps")) {
        const std::size_t archived = ambient.remaps();
        for (std::size_t i = 0; i < archived; ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "submap_%03zu", i);
            res.files.push_back(out / "submaps" / (std::string(name) + "_forward.cmap"));
            res.files.push_back(out / "submaps" / (std::string(name) + "_backward.cmap"));
        }
    }
    return res;
}

inline AdvectionResult run_curve_advection(const Config& cfg) { return run_advection<1>(cfg); }
inline AdvectionResult run_surface_advection(const Config& cfg) { return run_advection<2>(cfg); }

// ---------------------------------------------------------------------------
// Convergence study: interpolation orders and heat-flow map self-convergence.

struct OrderRow {
    std::string study;
    int m = 0;
    std::string quantity;
    double coarse = 0.0; // h or dt of the coarser run
    double err_coarse = 0.0;
    double err_fine = 0.0;
    double order = 0.0;
};

struct ConvergenceResult : RunArtifacts {
    std::vector<OrderRow> rows;

    double order(const std::string& study, int m, const std::string& quantity) const
    {
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
            if (it->study == study && it->m == m && it->quantity == quantity) return it->order;
        }
        throw DomainError("no order for " + study + "/" + quantity);
    }
};

/// Max errors of a Hermite interpolant of sin/cos data on an n x n periodic grid.
struct InterpolationErrors {
    double value = 0.0;
    double gradient = 0.0;
    double gradient_at_centers = 0.0;
};

inline InterpolationErrors interpolation_errors(int n, int m)
{
    constexpr double tau = 2.0 * std::numbers::pi;
    auto f = [](const auto& x) {
        using std::cos;
        using std::sin;
        return sin(tau * x[0] + 0.3) * cos(2.0 * tau * x[1] + 0.7);
    };
    auto grad = [](const Point<2>& x) {
        return std::array<double, 2>{tau * std::cos(tau * x[0] + 0.3) * std::cos(2.0 * tau * x[1] + 0.7),
                                     -2.0 * tau * std::sin(tau * x[0] + 0.3) * std::sin(2.0 * tau * x[1] + 0.7)};
    };
    const auto grid = GridSpec<2>::nodal(n, Boundary::Periodic);
    const HermiteField<2> h = project<2>(f, grid, m);
    InterpolationErrors e;
    auto grad_err = [&](const Point<2>& x) {
        const auto g = h.gradient(x), want = grad(x);
        return std::max(std::abs(g[0] - want[0]), std::abs(g[1] - want[1]));
    };
    for (const Point<2>& x : default_samples<2>()) {
        e.value = std::max(e.value, std::abs(h.eval(x) - f(x)));
        e.gradient = std::max(e.gradient, grad_err(x));
    }
    const GridSpec<2> centers = grid.dual();
    for (std::size_t i = 0; i < centers.node_count(); ++i) {
        e.gradient_at_centers = std::max(e.gradient_at_centers, grad_err(centers.position(i)));
    }
    return e;
}

inline ConvergenceResult run_convergence(const Config& cfg)
{
    using namespace experiment_detail;
    ConvergenceResult res;
    auto add = [&](std::string study, int m, std::string q, double coarse, double ec, double ef, double ratio) {
        res.rows.push_back({std::move(study), m, std::move(q), coarse, ec, ef, std::log2(ec / ef) / std::log2(ratio)});
    };

    const std::vector<int> sizes = cfg.integers("interp_sizes");
    for (int m : {0, 1}) {
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
            const auto a = interpolation_errors(sizes[i], m), b = interpolation_errors(sizes[i + 1], m);
            const double r = double(sizes[i + 1]) / sizes[i], h = 1.0 / sizes[i];
            add("interpolation", m, "value", h, a.value, b.value, r);
            add("interpolation", m, "gradient", h, a.gradient, b.gradient, r);
            add("interpolation", m, "gradient_at_centers", h, a.gradient_at_centers, b.gradient_at_centers, r);
        }
    }

    // Self-convergence of the heat-flow map for a smooth density.
    auto rho0 = [](const Point<2>& x) {
        return 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * x[0]) * std::sin(2.0 * std::numbers::pi * x[1]);
    };
    const double T = cfg.real("conv_T");
    auto map_gap = [](const HeatFlowResult<2>& a, const HeatFlowResult<2>& b) {
        double d = 0.0;
        for (const Point<2>& x : default_samples<2>()) {
            const Point<2> p = a.chain(x), q = b.chain(x);
            d = std::max({d, std::abs(p[0] - q[0]), std::abs(p[1] - q[1])});
        }
        return d;
    };
    for (int m : {0, 1}) {
        HeatFlowOptions opt = heat_options(cfg);
        opt.order = m;
        std::vector<HeatFlowResult<2>> space;
        const std::vector<int> ns = cfg.integers("conv_sizes");
        for (int n : ns) {
            space.push_back(heat_flow_map<2>(rho0, T, cfg.real("conv_dt"), GridSpec<2>::nodal(n, Boundary::Periodic), opt));
            res.audit.merge(space.back().audit);
        }
        for (std::size_t i = 0; i + 2 < space.size(); ++i) {
            add("heat_flow_map", m, "space", 1.0 / ns[i], map_gap(space[i], space[i + 1]),
                map_gap(space[i + 1], space[i + 2]), double(ns[i + 1]) / ns[i]);
        }
        std::vector<HeatFlowResult<2>> time;
        const std::vector<int> steps = cfg.integers("conv_time_steps");
        const auto grid = GridSpec<2>::nodal(cfg.integer("conv_time_cells"), Boundary::Periodic);
        for (int s : steps) {
            time.push_back(heat_flow_map<2>(rho0, T, T / s, grid, opt));
            res.audit.merge(time.back().audit);
        }
        for (std::size_t i = 0; i + 2 < time.size(); ++i) {
            add("heat_flow_map", m, "time", T / steps[i], map_gap(time[i], time[i + 1]), map_gap(time[i + 1], time[i + 2]),
                double(steps[i + 1]) / steps[i]);
        }
    }

    emit(res, fs::path(cfg.text("output_dir")) / "convergence.csv", [&](std::ostream& os) {
        os << "study,m,quantity,coarse,err_coarse,err_fine,order\n";
        for (const OrderRow& r : res.rows) {
            os << r.study << ',' << r.m << ',' << r.quantity << ',' << fmt17(r.coarse) << ',' << fmt17(r.err_coarse)
               << ',' << fmt17(r.err_fine) << ',' << fmt17(r.order) << '\n';
        }
    });
    return res;
}

} // namespace cmflow
