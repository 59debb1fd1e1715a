#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cmflow/ambient.hpp"
#include "cmflow/char_map.hpp"
#include "cmflow/density.hpp"
#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"
#include "cmflow/heat_flow.hpp"
#include "cmflow/jet.hpp"

namespace cmflow {

enum class ChartKind { Segment, Circle, Rectangle, Torus, Cylinder };

namespace detail {

inline Vec3 normalized(Vec3 v)
{
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(n > 0.0)) throw DomainError("chart axis must be nonzero");
    return {v[0] / n, v[1] / n, v[2] / n};
}

/// Orthonormal (u, w) with u x w = n; n = z gives u = x, w = y.
inline std::pair<Vec3, Vec3> frame_of(const Vec3& n)
{
    const Vec3 helper = std::abs(n[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const double d = helper[0] * n[0] + helper[1] * n[1] + helper[2] * n[2];
    const Vec3 u = normalized({helper[0] - d * n[0], helper[1] - d * n[1], helper[2] - d * n[2]});
    const Vec3 w{n[1] * u[2] - n[2] * u[1], n[2] * u[0] - n[0] * u[2], n[0] * u[1] - n[1] * u[0]};
    return {u, w};
}

} // namespace detail

/// Initial parametrization P_0 : [0,1]^P -> R^3 of a curve (P = 1) or surface (P = 2).
template <int P>
struct Chart {
    static_assert(P == 1 || P == 2, "charts are curves or surfaces");

    ChartKind kind = ChartKind::Segment;
    std::string name;
    std::array<Boundary, P> bcs{};
    Vec3 origin{};   // segment start, circle/torus/cylinder center, rectangle corner
    Vec3 e1{}, e2{}; // segment direction b - a, rectangle edges, or the in-plane frame
    Vec3 axis{};     // circle normal, torus/cylinder axis
    double radius = 0.0; // circle, cylinder, torus major R
    double minor = 0.0;  // torus minor r
    double height = 0.0; // cylinder

    template <class T>
    std::array<T, 3> operator()(const std::array<T, P>& y) const
    {
        using std::cos;
        using std::sin;
        constexpr double tau = 2.0 * std::numbers::pi;
        std::array<T, 3> p;
        if constexpr (P == 1) {
            if (kind == ChartKind::Segment) {
                for (int i = 0; i < 3; ++i) p[i] = y[0] * e1[i] + origin[i];
            } else {
                const T c = cos(tau * y[0]) * radius, s = sin(tau * y[0]) * radius;
                for (int i = 0; i < 3; ++i) p[i] = c * e1[i] + s * e2[i] + origin[i];
            }
        } else {
            switch (kind) {
            case ChartKind::Rectangle:
                for (int i = 0; i < 3; ++i) p[i] = y[0] * e1[i] + y[1] * e2[i] + origin[i];
                break;
            case ChartKind::Torus: {
                const T ring = cos(tau * y[1]) * minor + radius;
                const T c = cos(tau * y[0]) * ring, s = sin(tau * y[0]) * ring;
                const T up = sin(tau * y[1]) * minor;
                for (int i = 0; i < 3; ++i) p[i] = c * e1[i] + s * e2[i] + up * axis[i] + origin[i];
                break;
            }
            default: {
                const T c = cos(tau * y[0]) * radius, s = sin(tau * y[0]) * radius;
                const T up = (y[1] - 0.5) * height;
                for (int i = 0; i < 3; ++i) p[i] = c * e1[i] + s * e2[i] + up * axis[i] + origin[i];
                break;
            }
            }
        }
        return p;
    }

    static Chart segment(std::string name, const Vec3& a, const Vec3& b)
    {
        static_assert(P == 1);
        Chart c;
        c.kind = ChartKind::Segment;
        c.name = std::move(name);
        c.bcs = {Boundary::Neumann};
        c.origin = a;
        c.e1 = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
        if (c.e1 == Vec3{}) throw DomainError("segment endpoints coincide");
        return c;
    }

    static Chart circle(std::string name, const Vec3& center, double radius, const Vec3& normal)
    {
        static_assert(P == 1);
        if (!(radius > 0.0)) throw DomainError("circle radius must be positive");
        Chart c;
        c.kind = ChartKind::Circle;
        c.name = std::move(name);
        c.bcs = {Boundary::Periodic};
        c.origin = center;
        c.axis = detail::normalized(normal);
        std::tie(c.e1, c.e2) = detail::frame_of(c.axis);
        c.radius = radius;
        return c;
    }

    static Chart rectangle(std::string name, const Vec3& corner, const Vec3& e1, const Vec3& e2)
    {
        static_assert(P == 2);
        Chart c;
        c.kind = ChartKind::Rectangle;
        c.name = std::move(name);
        c.bcs = {Boundary::Neumann, Boundary::Neumann};
        c.origin = corner;
        c.e1 = e1;
        c.e2 = e2;
        const Vec3 n{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]};
        if (n == Vec3{}) throw DomainError("rectangle edges are parallel");
        return c;
    }

    static Chart torus(std::string name, const Vec3& center, double R, double r, const Vec3& axis)
    {
        static_assert(P == 2);
        if (!(r > 0.0) || !(R > r)) throw DomainError("torus needs R > r > 0");
        Chart c;
        c.kind = ChartKind::Torus;
        c.name = std::move(name);
        c.bcs = {Boundary::Periodic, Boundary::Periodic};
        c.origin = center;
        c.axis = detail::normalized(axis);
        std::tie(c.e1, c.e2) = detail::frame_of(c.axis);
        c.radius = R;
        c.minor = r;
        return c;
    }

    static Chart cylinder(std::string name, const Vec3& center, double radius, const Vec3& axis, double height)
    {
        static_assert(P == 2);
        if (!(radius > 0.0) || !(height > 0.0)) throw DomainError("cylinder needs positive radius and height");
        Chart c;
        c.kind = ChartKind::Cylinder;
        c.name = std::move(name);
        c.bcs = {Boundary::Periodic, Boundary::Neumann};
        c.origin = center;
        c.axis = detail::normalized(axis);
        std::tie(c.e1, c.e2) = detail::frame_of(c.axis);
        c.radius = radius;
        c.height = height;
        return c;
    }
};

/**
 * Three segments and a circle. The segments were picked so that the arclength
 * statistics of the unredistributed curves at t = 1.5 come close to the
 * published ones (sigma_P, M_P - 1 of 1.05/-0.54, 0.82/-0.37, 0.71/-0.29).
 */
inline std::vector<Chart<1>> curve_catalog()
{
    return {
        Chart<1>::segment("curve1", {0.50, 0.42, 0.40}, {0.78, 0.66, 0.42}),
        Chart<1>::segment("curve2", {0.73, 0.34, 0.47}, {0.50, 0.61, 0.64}),
        Chart<1>::segment("curve3", {0.51, 0.45, 0.48}, {0.35, 0.68, 0.21}),
        Chart<1>::circle("curve4", {0.5, 0.5, 0.5}, 0.2, {0, 0, 1}),
    };
}

/// Rectangle on the plane z = y, torus and cylinder.
inline std::vector<Chart<2>> surface_catalog()
{
    return {
        Chart<2>::rectangle("rectangle", {0.3, 0.3, 0.3}, {0.4, 0, 0}, {0, 0.28, 0.28}),
        Chart<2>::torus("torus", {0.5, 0.5, 0.5}, 0.16, 0.08, {0, 0, 1}),
        Chart<2>::cylinder("cylinder", {0.5, 0.5, 0.5}, 0.15, {0, 0, 1}, 0.3),
    };
}

/// Parameter points may sit this far outside [0,1] on Neumann axes (round-off).
inline constexpr double kParamTol = 1e-9;

template <int P, class T>
void check_param(const Chart<P>& chart, const std::array<T, P>& y)
{
    for (int k = 0; k < P; ++k) {
        if (chart.bcs[k] != Boundary::Neumann) continue;
        const double v = value_of(y[k]);
        if (!(v >= -kParamTol && v <= 1.0 + kParamTol)) {
            throw DomainError("parameter " + std::to_string(v) + " outside [0,1] on a Neumann axis");
        }
    }
}

template <int P>
struct ChartPoint {
    Vec3 position;
    /// jacobian[i][k] = dP_i / dy_k
    std::array<std::array<double, P>, 3> jacobian;
};

template <int P>
ChartPoint<P> chart_eval(const Chart<P>& chart, const std::array<double, P>& y)
{
    check_param<P>(chart, y);
    std::array<Jet<P>, P> yj;
    for (int k = 0; k < P; ++k) yj[k] = Jet<P>::seed(y[k], k);
    const auto p = chart(yj);
    ChartPoint<P> out;
    for (int i = 0; i < 3; ++i) {
        out.position[i] = p[i].c[0];
        for (int k = 0; k < P; ++k) out.jacobian[i][k] = p[i].c[std::size_t{1} << k];
    }
    return out;
}

namespace detail {

/// sqrt(det G) of the Gram matrix of the jet's first-order slots.
template <int P>
double area_of(const std::array<Jet<P>, 3>& q)
{
    double g[2][2] = {};
    for (int a = 0; a < P; ++a)
        for (int b = 0; b < P; ++b)
            for (int i = 0; i < 3; ++i) g[a][b] += q[i].c[std::size_t{1} << a] * q[i].c[std::size_t{1} << b];
    const double det = P == 1 ? g[0][0] : g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if (!(det > 0.0)) throw NumericalAbort("degenerate first fundamental form (det " + std::to_string(det) + ")");
    return std::sqrt(det);
}

/**
 * Q(y) = fwd(P_0(pre(y))) for any pair of maps callable on jets; the chain
 * rule through every interpolant is carried by the jet.
 */
template <int P, class Fwd, class Pre, class T>
std::array<T, 3> compose_q(const Chart<P>& chart, const Fwd& fwd, const Pre& pre, const std::array<T, P>& y)
{
    check_param<P>(chart, y);
    std::array<T, P> u = pre(y);
    for (int k = 0; k < P; ++k) {
        if (chart.bcs[k] == Boundary::Neumann) u[k] = with_value(u[k], std::clamp(value_of(u[k]), 0.0, 1.0));
    }
    return fwd(chart(u));
}

template <int P, class Fwd, class Pre>
double area_element(const Chart<P>& chart, const Fwd& fwd, const Pre& pre, const std::array<double, P>& y)
{
    std::array<Jet<P>, P> yj;
    for (int k = 0; k < P; ++k) yj[k] = Jet<P>::seed(y[k], k);
    return area_of<P>(compose_q<P>(chart, fwd, pre, yj));
}

template <int P, class Fwd, class Pre>
std::pair<DensityField<P>, double> normalized_density(const Chart<P>& chart, const Fwd& fwd, const Pre& pre,
                                                      const GridSpec<P>& dual)
{
    DensityField<P> rho{dual, std::vector<double>(dual.node_count())};
    for (std::size_t i = 0; i < dual.node_count(); ++i) {
        rho.values[i] = area_element<P>(chart, fwd, pre, dual.position(i));
    }
    const double rho_a = rho.mass();
    for (double& v : rho.values) v /= rho_a;
    return {std::move(rho), rho_a};
}

} // namespace detail

/**
 * Q_t = Phi_F o P_0 o chi_[t,0]. Without redistribution maps this is
 * P_t = Phi_F o P_0; without ambient maps the flow is the identity.
 */
template <int P>
struct Parametrization {
    Chart<P> chart;
    std::shared_ptr<const SubmapChain<3>> ambient;
    SubmapChain<P> redist{Direction::Backward, 0.0};
    double t = 0.0;

    Parametrization() = default;
    explicit Parametrization(Chart<P> c, std::shared_ptr<const SubmapChain<3>> amb = nullptr,
                             SubmapChain<P> r = SubmapChain<P>(Direction::Backward, 0.0), double time = 0.0)
        : chart(std::move(c)), ambient(std::move(amb)), redist(std::move(r)), t(time)
    {
    }

    template <class T>
    std::array<T, 3> forward(const std::array<T, 3>& x) const
    {
        return ambient ? chain_eval(*ambient, x) : x;
    }

    template <class T>
    std::array<T, P> pre(const std::array<T, P>& y) const
    {
        return chain_eval(redist, y);
    }

    template <class T>
    std::array<T, 3> operator()(const std::array<T, P>& y) const
    {
        return detail::compose_q<P>(
            chart, [&](const auto& x) { return forward(x); }, [&](const auto& u) { return pre(u); }, y);
    }

    /// The advected parametrization P_t (same ambient maps, no redistribution).
    Parametrization original() const
    {
        Parametrization p = *this;
        p.redist = SubmapChain<P>(Direction::Backward, 0.0);
        return p;
    }
};

template <int P>
Vec3 q_eval(const Parametrization<P>& param, const std::array<double, P>& y)
{
    return param(y);
}

template <int P>
double area_element(const Parametrization<P>& param, const std::array<double, P>& y)
{
    return detail::area_element<P>(
        param.chart, [&](const auto& x) { return param.forward(x); }, [&](const auto& u) { return param.pre(u); },
        y);
}

/// Area element over |S_t| at the dual nodes (unit mass), and |S_t|.
template <int P>
std::pair<DensityField<P>, double> normalized_density(const Parametrization<P>& param, const GridSpec<P>& dual)
{
    return detail::normalized_density<P>(
        param.chart, [&](const auto& x) { return param.forward(x); }, [&](const auto& u) { return param.pre(u); },
        dual);
}

/// n points Q(y_i) with y_i uniform on U.
template <int P>
std::vector<Vec3> sample(const Parametrization<P>& param, std::size_t n, std::uint64_t seed)
{
    if (n < 1) throw DomainError("sample: need at least one point");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> out(n);
    for (auto& p : out) {
        std::array<double, P> y;
        for (int k = 0; k < P; ++k) y[k] = u(rng);
        p = param(y);
    }
    return out;
}

struct RedistStats {
    double sigma = 0.0;
    double median = 0.0;
    double mean = 0.0;
    std::size_t cell_count = 0;
    /// Bins of width kHistWidth on [0, kHistMax); the last entry counts overflow.
    std::vector<std::size_t> histogram;

    static constexpr double kHistWidth = 0.1;
    static constexpr int kHistBins = 50;
};

/// Statistics of per-cell areas normalized by the mean cell area.
inline RedistStats stats_of(std::vector<double> rho)
{
    if (rho.empty()) throw DomainError("cell statistics need at least one cell");
    RedistStats s;
    s.cell_count = rho.size();
    double sum = 0.0;
    for (double v : rho) sum += v;
    const double mean = sum / rho.size();
    for (double& v : rho) v /= mean;
    double m = 0.0, ss = 0.0;
    for (double v : rho) m += v;
    s.mean = m / rho.size();
    for (double v : rho) ss += (v - 1.0) * (v - 1.0);
    s.sigma = rho.size() > 1 ? std::sqrt(ss / (rho.size() - 1)) : 0.0;
    s.histogram.assign(RedistStats::kHistBins + 1, 0);
    for (double v : rho) {
        const auto b = static_cast<std::size_t>(std::floor(v / RedistStats::kHistWidth));
        ++s.histogram[std::min<std::size_t>(b, RedistStats::kHistBins)];
    }
    const std::size_t mid = rho.size() / 2;
    std::nth_element(rho.begin(), rho.begin() + mid, rho.end());
    s.median = rho[mid];
    if (rho.size() % 2 == 0) s.median = 0.5 * (s.median + *std::max_element(rho.begin(), rho.begin() + mid));
    return s;
}

/// Cell statistics on the cells of `cells` (a cell-centered grid covering U).
template <int P>
RedistStats cell_stats(const Parametrization<P>& param, const GridSpec<P>& cells)
{
    for (int k = 0; k < P; ++k) {
        if (cells.axis(k).layout != Layout::CellCentered) throw DomainError("cell_stats needs a cell-centered grid");
        if (cells.axis(k).bc != param.chart.bcs[k]) throw DomainError("stat grid boundaries do not match the chart");
    }
    std::vector<double> a(cells.node_count());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = area_element<P>(param, cells.position(i));
    return stats_of(std::move(a));
}

/// Nodal grid on U with `cells` cells per axis.
template <int P>
GridSpec<P> param_grid(int cells, const std::array<Boundary, P>& bcs)
{
    std::array<int, P> n;
    for (int k = 0; k < P; ++k) n[k] = bcs[k] == Boundary::Periodic ? cells : cells + 1;
    return GridSpec<P>::nodal(n, bcs);
}

struct ReparamOptions {
    double nu = 2.0;
    /// Redistribution grid cells per parameter axis.
    int cells = 128;
    /// Restart the redistribution map whenever the ambient pair remaps.
    bool follow_ambient_remaps = false;
    HeatFlowOptions heat{};
};

/**
 * Redistribution of one chart, stepped alongside an ambient map: each step
 * rebuilds rho^n from the current composed parametrization and pre-composes
 * the heat-flow map over local time nu * dt.
 */
template <int P>
class Reparametrizer {
public:
    Reparametrizer(Chart<P> chart, ReparamOptions opt)
        : chart_(std::move(chart)), opt_(std::move(opt)),
          stepper_(param_grid<P>(opt_.cells, chart_.bcs), opt_.nu, opt_.heat)
    {
    }

    const Chart<P>& chart() const { return chart_; }
    const RedistributionStepper<P>& stepper() const { return stepper_; }
    /// Every density produced: rho^n of each outer step and the inner heat flows.
    std::vector<TraceRow> density_log() const
    {
        std::vector<TraceRow> log = outer_log_;
        log.insert(log.end(), stepper_.density_log().begin(), stepper_.density_log().end());
        return log;
    }

    DensityAudit audit() const
    {
        DensityAudit a = stepper_.audit();
        a.add_masses(outer_log_);
        return a;
    }

    template <class Fwd>
    DensityField<P> density(const Fwd& fwd) const
    {
        return detail::normalized_density<P>(chart_, fwd, stepper_, stepper_.dual()).first;
    }

    /// rho^n at time t from `fwd` = Phi_F(., t), then the step to t + dt.
    template <class Fwd>
    void step(const Fwd& fwd, double t, double dt, bool ambient_remapped = false)
    {
        step_with(density(fwd), t, dt, ambient_remapped);
    }

    /// Step from a density rho^n already computed at time t.
    void step_with(const DensityField<P>& rho, double t, double dt, bool ambient_remapped = false)
    {
        outer_log_.push_back({t, l2_energy(rho), rho.min(), rho.max(), rho.mass()});
        if (ambient_remapped && opt_.follow_ambient_remaps) stepper_.archive(t);
        stepper_.step(rho, t, dt);
    }

    Parametrization<P> snapshot(std::shared_ptr<const SubmapChain<3>> ambient, double t) const
    {
        return Parametrization<P>(chart_, std::move(ambient), stepper_.chain(t), t);
    }

private:
    Chart<P> chart_;
    ReparamOptions opt_;
    RedistributionStepper<P> stepper_;
    std::vector<TraceRow> outer_log_;
};

/**
 * Advects curves and surfaces with one shared ambient pair and reparametrizes
 * each of them. `on_output(t, evolver, curves, surfaces)` is called at every
 * requested output time in [0, T] with Reparametrizers positioned at t; steps
 * are shortened to land on output times.
 */
template <class OnOutput>
void advect_and_reparametrize(AmbientEvolver& ambient, double T, double dt, std::vector<Reparametrizer<1>>& curves,
                              std::vector<Reparametrizer<2>>& surfaces, std::vector<double> output_times,
                              OnOutput&& on_output)
{
    if (!(T > 0.0) || !(dt > 0.0)) throw DomainError("advection: T and dt must be positive");
    for (double t : output_times) {
        if (!(t >= 0.0 && t <= T + 1e-12)) throw DomainError("output time outside [0, T]");
    }
    std::sort(output_times.begin(), output_times.end());
    output_times.erase(std::unique(output_times.begin(), output_times.end()), output_times.end());
    constexpr double eps = 1e-9;
    std::size_t next_out = 0;
    auto emit = [&](double t) {
        while (next_out < output_times.size() && output_times[next_out] <= t + eps) {
            on_output(output_times[next_out], ambient, curves, surfaces);
            ++next_out;
        }
    };
    auto fwd = [&](const auto& x) { return ambient.forward(x); };
    const double t0 = ambient.time();
    emit(t0);
    long n = 0;
    while (ambient.time() < T - eps) {
        const double t = ambient.time();
        double stop = std::min(t0 + (n + 1) * dt, T);
        if (next_out < output_times.size()) stop = std::min(stop, output_times[next_out]);
        const double h = stop - t;
        std::vector<DensityField<1>> rc;
        std::vector<DensityField<2>> rs;
        const std::size_t before = ambient.remaps();
        // rho^n needs Phi_F at t, so densities are taken before the ambient step.
        for (auto& c : curves) rc.push_back(c.density(fwd));
        for (auto& s : surfaces) rs.push_back(s.density(fwd));
        ambient.step(h);
        const bool remapped = ambient.remaps() != before;
        for (std::size_t i = 0; i < curves.size(); ++i) curves[i].step_with(rc[i], t, h, remapped);
        for (std::size_t i = 0; i < surfaces.size(); ++i) surfaces[i].step_with(rs[i], t, h, remapped);
        if (ambient.time() >= t0 + (n + 1) * dt - eps) ++n;
        emit(ambient.time());
    }
}

} // namespace cmflow
