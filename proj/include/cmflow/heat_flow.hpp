#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cmflow/char_map.hpp"
#include "cmflow/density.hpp"
#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"
#include "cmflow/spectral.hpp"

namespace cmflow {

struct TraceRow {
    double t = 0.0;
    double energy = 0.0;
    double rho_min = 0.0;
    double rho_max = 0.0;
    double mass = 0.0;
};

/**
 * Conservation and maximum-principle audit. Each heat flow is checked
 * against the range of its own initial density; densities whose base
 * changes between rows (outer redistribution steps) only count for mass.
 */
struct DensityAudit {
    std::size_t densities = 0;
    std::size_t flows = 0;
    double mass_error = 0.0;
    /// Largest excursion of any density outside its flow's initial range.
    double overshoot = 0.0;
    /// The same for the implicit heat solutions alone (no transport error).
    double heat_overshoot = 0.0;

    void add_masses(const std::vector<TraceRow>& rows)
    {
        for (const TraceRow& r : rows) {
            mass_error = std::max(mass_error, std::abs(r.mass - 1.0));
            ++densities;
        }
    }

    /// `rows` is one heat flow with its initial density first.
    void add_flow(const std::vector<TraceRow>& rows)
    {
        if (rows.empty()) return;
        add_masses(rows);
        const double lo = rows.front().rho_min, hi = rows.front().rho_max;
        for (const TraceRow& r : rows) overshoot = std::max({overshoot, lo - r.rho_min, r.rho_max - hi});
        ++flows;
    }

    void merge(const DensityAudit& o)
    {
        densities += o.densities;
        flows += o.flows;
        mass_error = std::max(mass_error, o.mass_error);
        overshoot = std::max(overshoot, o.overshoot);
        heat_overshoot = std::max(heat_overshoot, o.heat_overshoot);
    }
};

template <int D>
struct HeatFlowResult {
    /// Newest submap; the full backward map is `chain`, which ends with it.
    MapField<D> map;
    SubmapChain<D> chain;
    std::vector<TraceRow> energy_trace;
    /// Pullback density at the final time.
    DensityField<D> final_density;
    /// max over recorded times of ||rho - 1||_L2 (the moving-density error).
    double max_deviation = 0.0;
    std::size_t remaps = 0;
    /// Every density produced during the run (min, max, mass) for audits.
    std::vector<TraceRow> density_log;
    DensityAudit audit;
};

struct HeatFlowOptions {
    int order = 0;
    /// Step-composition residual that archives the current map. Off by
    /// default: with linear maps the projection residual alone is O(h^2),
    /// so small thresholds remap every step and the unsmoothed chain aliases.
    double remap_threshold = std::numeric_limits<double>::infinity();
    /// Positivity guard on the smoothed density.
    double min_density = 1e-8;
    /// Advance substeps keep max|u| * dt / substeps below this many cells.
    double cfl_cells = 0.5;
    /// ... and the per-substep relative node displacement below this, so substeps cannot fold the map.
    double max_strain = 0.25;
    /// Laplacian used by the implicit step; unset picks the stencil for linear
    /// maps and the spectral symbol for cubic ones. Cubic transport damps
    /// high modes up to ~2.2x harder than the 3-point stencil, which makes the
    /// stencil variant unstable once dt/h^2 is large.
    std::optional<HeatSymbol> heat_symbol;
    /// Heat-flow steps per outer step of redistribute_moving; 0 takes
    /// ceil(nu) so the inner step matches the outer dt.
    int inner_steps = 0;
    /// Derivative slots of log rho for cubic velocities.
    PacketRule packets = PacketRule::Spectral;

    HeatSymbol symbol() const
    {
        return heat_symbol.value_or(order == 1 ? HeatSymbol::Spectral : HeatSymbol::Stencil);
    }
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows)
{
    os << "t,E,rho_min,rho_max,mass\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.energy, r.rho_min, r.rho_max,
                      r.mass);
        os << buf;
    }
}

namespace detail {

template <int D>
TraceRow trace_of(double t, const DensityField<D>& rho)
{
    return {t, l2_energy(rho), rho.min(), rho.max(), rho.mass()};
}

template <int D>
int cfl_substeps(double speed, double dt, const GridSpec<D>& g, double cfl_cells)
{
    const double cells = speed * dt / (cfl_cells * g.min_spacing());
    if (!std::isfinite(cells)) throw NumericalAbort("non-finite diffusion velocity");
    return std::max(1, static_cast<int>(std::ceil(cells)));
}

template <int D>
int substeps_for(const DiffusionVelocity<D>& u, double dt, const GridSpec<D>& g, const HeatFlowOptions& opt)
{
    const auto b = u.bounds(g);
    const double strain = b.gradient * dt / opt.max_strain;
    if (!std::isfinite(strain)) throw NumericalAbort("non-finite diffusion velocity gradient");
    return std::max(cfl_substeps(b.speed, dt, g, opt.cfl_cells), static_cast<int>(std::ceil(strain)));
}

/// Foot point of x under `substeps` frozen Euler steps of length dt/substeps.
template <int D, class U>
Point<D> euler_foot(Point<D> x, const U& u, double dt, int substeps, const GridSpec<D>& g)
{
    const double h = dt / substeps;
    for (int s = 0; s < substeps; ++s) {
        const auto v = u(x);
        for (int k = 0; k < D; ++k) x[k] -= h * v[k];
        clamp_to_walls<D>(x, g);
    }
    return x;
}

/// max |updated(x) - previous(foot(x))| over the remap sample set.
template <int D, class Foot>
double step_residual(const MapField<D>& updated, const MapField<D>& previous, Foot&& foot)
{
    double r = 0.0;
    const auto bcs = updated.grid().boundaries();
    for (const Point<D>& x : default_samples<D>()) {
        Point<D> a = updated(x);
        const Point<D> b = previous(foot(x));
        for (int k = 0; k < D; ++k) a[k] -= b[k];
        a = wrap_difference<D>(a, bcs);
        for (int k = 0; k < D; ++k) r = std::max(r, std::abs(a[k]));
    }
    return r;
}

} // namespace detail

/**
 * Backward characteristic map of the heat flow started at rho0:
 * repeated pullback, implicit heat step, diffusion velocity and map update.
 * When the step-composition residual exceeds the remap threshold, the
 * current map is archived and a fresh one starts from the one-step map.
 */
template <int D, class Rho>
HeatFlowResult<D> heat_flow_map(Rho&& rho0, double T, double dt, const GridSpec<D>& grid,
                                const HeatFlowOptions& opt = {})
{
    if (!(T > 0.0)) throw DomainError("heat flow: T must be positive");
    if (!(dt > 0.0)) throw DomainError("heat flow: dt must be positive");
    const GridSpec<D> dual = grid.dual();
    const HeatSolver<D> solver(dual, opt.symbol());
    const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));

    HeatFlowResult<D> res;
    res.chain = SubmapChain<D>(Direction::Backward, 0.0);
    MapField<D> current = MapField<D>::identity(grid, opt.order);

    auto full_map = [&](const auto& x) {
        auto y = current(x);
        clamp_to_walls<D>(y, grid);
        return res.chain(y);
    };

    auto record = [&](double t, const DensityField<D>& rho) {
        res.energy_trace.push_back(detail::trace_of(t, rho));
        res.density_log.push_back(res.energy_trace.back());
        res.max_deviation = std::max(res.max_deviation, l2_deviation(rho));
    };

    for (int n = 0; n < steps; ++n) {
        const double t = n * dt;
        const double h = std::min(dt, T - t);
        const DensityField<D> rho = pullback_density<D>(rho0, full_map, dual);
        const DensityField<D> smooth = implicit_heat(rho, h, solver);
        if (smooth.min() <= opt.min_density) {
            throw NumericalAbort("density positivity lost at t = " + std::to_string(t) +
                                 " (min " + std::to_string(smooth.min()) + ")");
        }
        record(t, rho);
        res.energy_trace.back().mass = smooth.mass();
        res.density_log.push_back(detail::trace_of(t, smooth));
        const TraceRow& first = res.density_log.front();
        res.audit.heat_overshoot =
            std::max({res.audit.heat_overshoot, first.rho_min - smooth.min(), smooth.max() - first.rho_max});

        const DiffusionVelocity<D> u(smooth, opt.order, opt.packets);
        const int substeps = detail::substeps_for(u, h, grid, opt);
        MapField<D> next = advance(current, u, h, substeps);

        if (std::isfinite(opt.remap_threshold) && !current.is_identity()) {
            const double r = detail::step_residual<D>(next, current, [&](const Point<D>& x) {
                return detail::euler_foot<D>(x, u, h, substeps, grid);
            });
            if (r > opt.remap_threshold) {
                res.chain.append(current, t);
                ++res.remaps;
                next = advance(MapField<D>::identity(grid, opt.order), u, h, substeps);
            }
        }
        current = std::move(next);
    }

    res.final_density = pullback_density<D>(rho0, full_map, dual);
    record(T, res.final_density);
    res.audit.add_flow(res.density_log);
    res.chain.append(current, T);
    res.map = std::move(current);
    return res;
}

/**
 * Outer loop of the redistribution of a time-dependent density. Each step
 * takes the current pulled-back density rho^n on the dual grid, runs a heat
 * flow from its Hermite snapshot over local time nu * dt and pre-composes the
 * resulting map into the backward redistribution map.
 */
template <int D>
class RedistributionStepper {
public:
    RedistributionStepper(GridSpec<D> grid, double nu, HeatFlowOptions opt = {})
        : grid_(std::move(grid)), dual_(grid_.dual()), nu_(nu), opt_(std::move(opt)),
          current_(MapField<D>::identity(grid_, opt_.order))
    {
        if (!(nu > 0.0)) throw DomainError("redistribution: nu must be positive");
        chain_ = SubmapChain<D>(Direction::Backward, 0.0);
    }

    const GridSpec<D>& grid() const { return grid_; }
    const GridSpec<D>& dual() const { return dual_; }
    const MapField<D>& current() const { return current_; }
    const SubmapChain<D>& archived() const { return chain_; }
    std::size_t remaps() const { return remaps_; }
    /// Every density produced by the inner heat flows.
    const std::vector<TraceRow>& density_log() const { return log_; }
    const DensityAudit& audit() const { return audit_; }

    /// chi_[t,0](x): current map first, then archived ones newest first.
    template <class T>
    std::array<T, D> operator()(const std::array<T, D>& x) const
    {
        auto y = current_(x);
        clamp_to_walls<D>(y, grid_);
        return chain_(y);
    }

    /// Archives the current map at time t so the next step starts from the identity.
    void archive(double t)
    {
        if (current_.is_identity()) return;
        chain_.append(current_, t);
        current_ = MapField<D>::identity(grid_, opt_.order);
        ++remaps_;
    }

    /// Closed chain ending at t.
    SubmapChain<D> chain(double t) const
    {
        SubmapChain<D> c = chain_;
        if (!current_.is_identity() || c.empty()) c.append(current_, t);
        return c;
    }

    void step(const DensityField<D>& rho, double t, double dt)
    {
        if (!(dt > 0.0)) throw DomainError("redistribution: dt must be positive");
        const int inner_steps =
            opt_.inner_steps > 0 ? opt_.inner_steps : std::max(1, static_cast<int>(std::ceil(nu_ - 1e-9)));
        const double inner_dt = nu_ * dt / inner_steps;
        HeatFlowOptions inner = opt_;
        inner.remap_threshold = std::numeric_limits<double>::infinity();

        std::vector<double> data = rho.values;
        if (opt_.order == 1) data = derivative_packets<D>(dual_, rho.values, opt_.packets);
        const HermiteField<D> snapshot(dual_, opt_.order, std::move(data));
        auto base = [&](const Point<D>& x) { return snapshot.eval(x); };
        HeatFlowResult<D> local = heat_flow_map<D>(base, inner_steps * inner_dt, inner_dt, grid_, inner);
        log_.insert(log_.end(), local.density_log.begin(), local.density_log.end());
        audit_.merge(local.audit);

        MapField<D> next = compose_project(current_, local.map);
        if (std::isfinite(opt_.remap_threshold) && !current_.is_identity()) {
            const double r = detail::step_residual<D>(next, current_, [&](const Point<D>& x) {
                auto y = local.map(x);
                clamp_to_walls<D>(y, grid_);
                return y;
            });
            if (r > opt_.remap_threshold) {
                chain_.append(current_, t);
                ++remaps_;
                next = local.map;
            }
        }
        current_ = std::move(next);
    }

private:
    GridSpec<D> grid_;
    GridSpec<D> dual_;
    double nu_;
    HeatFlowOptions opt_;
    MapField<D> current_;
    SubmapChain<D> chain_;
    std::size_t remaps_ = 0;
    std::vector<TraceRow> log_;
    DensityAudit audit_;
};

/**
 * Redistribution of a time-dependent density rho0(x, t): each outer step
 * rebuilds the base density from the current redistribution map, runs a
 * heat flow over local time nu * dt and composes its map into the chain.
 */
template <int D, class Rho>
HeatFlowResult<D> redistribute_moving(Rho&& rho0t, double nu, double T, double dt, const GridSpec<D>& grid,
                                      const HeatFlowOptions& opt = {})
{
    if (!(nu > 0.0)) throw DomainError("redistribution: nu must be positive");
    if (!(T > 0.0) || !(dt > 0.0)) throw DomainError("redistribution: T and dt must be positive");
    const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
    RedistributionStepper<D> stepper(grid, nu, opt);
    const GridSpec<D>& dual = stepper.dual();

    HeatFlowResult<D> res;
    for (int n = 0; n <= steps; ++n) {
        const double t = std::min(n * dt, T);
        const auto base_at_t = [&](const Point<D>& x) { return rho0t(x, t); };
        const DensityField<D> rho = pullback_density<D>(base_at_t, stepper, dual);
        res.energy_trace.push_back(detail::trace_of(t, rho));
        res.density_log.push_back(res.energy_trace.back());
        res.max_deviation = std::max(res.max_deviation, l2_deviation(rho));
        if (n == steps) {
            res.final_density = rho;
            break;
        }
        stepper.step(rho, t, std::min(dt, T - t));
    }
    const auto& inner_log = stepper.density_log();
    res.density_log.insert(res.density_log.end(), inner_log.begin(), inner_log.end());
    res.audit.add_masses(res.energy_trace);
    res.audit.merge(stepper.audit());
    res.chain = stepper.chain(T);
    res.map = stepper.current();
    res.remaps = stepper.remaps();
    return res;
}

} // namespace cmflow
