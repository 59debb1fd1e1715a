#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cmflow/char_map.hpp"
#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"
#include "cmflow/hermite.hpp"
#include "cmflow/spectral.hpp"

namespace cmflow {

/// Probability density sampled at the nodes of a cell-centered grid.
template <int D>
struct DensityField {
    GridSpec<D> grid;
    std::vector<double> values;

    /// Midpoint-rule integral of the samples.
    double mass() const
    {
        double s = 0.0;
        for (double v : values) s += v;
        return s * grid.cell_volume();
    }
    double min() const { return *std::min_element(values.begin(), values.end()); }
    double max() const { return *std::max_element(values.begin(), values.end()); }

    void normalize()
    {
        const double m = mass();
        if (!(m > 0.0)) throw NumericalAbort("density has nonpositive mass");
        for (double& v : values) v /= m;
    }
};

/// E = 1/2 * integral of (rho - 1)^2 by the midpoint rule.
template <int D>
double l2_energy(const DensityField<D>& rho)
{
    double s = 0.0;
    for (double v : rho.values) s += (v - 1.0) * (v - 1.0);
    return 0.5 * s * rho.grid.cell_volume();
}

/// ||rho - 1||_{L2} by the midpoint rule.
template <int D>
double l2_deviation(const DensityField<D>& rho)
{
    return std::sqrt(2.0 * l2_energy(rho));
}

/// Samples f at the grid nodes.
template <int D, class F>
DensityField<D> sample_density(F&& f, const GridSpec<D>& grid)
{
    DensityField<D> r{grid, std::vector<double>(grid.node_count())};
    for (std::size_t i = 0; i < grid.node_count(); ++i) r.values[i] = f(grid.position(i));
    return r;
}

/**
 * rho0(X(x)) * det grad X(x) at the dual nodes, renormalized to unit mass.
 * X is anything callable on jet coordinates (a MapField or a SubmapChain).
 */
template <int D, class Rho, class M>
DensityField<D> pullback_density(Rho&& rho0, const M& map, const GridSpec<D>& dual)
{
    DensityField<D> r{dual, std::vector<double>(dual.node_count())};
    for (std::size_t i = 0; i < dual.node_count(); ++i) {
        const auto [y, det] = eval_with_det<D>(map, dual.position(i));
        if (!(det > 0.0)) {
            throw NumericalAbort("map is singular: Jacobian determinant " + std::to_string(det) + " at a dual node");
        }
        const double r0 = rho0(y);
        if (!(r0 > 0.0)) throw DomainError("base density is not positive at a pulled-back point");
        r.values[i] = r0 * det;
    }
    r.normalize();
    return r;
}

template <int D>
DensityField<D> implicit_heat(const DensityField<D>& rho, double dt_heat, const HeatSolver<D>& solver)
{
    DensityField<D> out = rho;
    solver.solve(out.values, dt_heat);
    return out;
}

/// (I - dt_heat * Laplacian)^-1 rho with a freshly planned transform.
template <int D>
DensityField<D> implicit_heat(const DensityField<D>& rho, double dt_heat)
{
    const HeatSolver<D> solver(rho.grid);
    return implicit_heat(rho, dt_heat, solver);
}

/// How derivative slots of grid data are filled for cubic interpolants.
enum class PacketRule { CentralDifference, Spectral };

template <int D>
std::vector<double> derivative_packets(const GridSpec<D>& dual, const std::vector<double>& values, PacketRule rule)
{
    return rule == PacketRule::Spectral ? spectral_packets<D>(dual, values)
                                        : central_difference_packets<D>(dual, values);
}

/// u(x) = -grad H_D[log rho](x), with the Hermite interpolant on the dual grid.
template <int D>
class DiffusionVelocity {
public:
    DiffusionVelocity(const DensityField<D>& rho, int order, PacketRule rule = PacketRule::Spectral)
    {
        std::vector<double> logs(rho.values.size());
        for (std::size_t i = 0; i < logs.size(); ++i) {
            if (!(rho.values[i] > 0.0)) throw NumericalAbort("nonpositive density value in diffusion velocity");
            logs[i] = std::log(rho.values[i]);
        }
        if (order == 1) {
            log_rho_ = HermiteField<D>(rho.grid, 1, derivative_packets<D>(rho.grid, logs, rule));
        } else {
            log_rho_ = HermiteField<D>(rho.grid, order, std::move(logs));
        }
    }

    template <class T>
    std::array<T, D> operator()(const std::array<T, D>& x) const
    {
        std::array<T, D> g = log_rho_.gradient(x);
        for (int k = 0; k < D; ++k) g[k] = -g[k];
        return g;
    }

    struct Bounds {
        /// max |u| over the nodes.
        double speed = 0.0;
        /// max over nodes of sum_k |u(x + h_k e_k) - u(x)|_inf / h_k, a
        /// difference estimate of |grad u| that also sees kinks of linear fields.
        double gradient = 0.0;
    };

    /// Speed and gradient estimates from u sampled at the nodes of `nodes`
    /// (normally the primal grid, whose nodes are the dual cells' corners).
    Bounds bounds(const GridSpec<D>& nodes) const
    {
        std::vector<std::array<double, D>> u(nodes.node_count());
        Bounds b;
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] = (*this)(nodes.position(i));
            double s = 0.0;
            for (double c : u[i]) s += c * c;
            b.speed = std::max(b.speed, std::sqrt(s));
        }
        for (std::size_t i = 0; i < u.size(); ++i) {
            const MultiIndex<D> idx = nodes.unflatten(i);
            double sum = 0.0;
            for (int k = 0; k < D; ++k) {
                const Axis& a = nodes.axis(k);
                int j = idx[k] + 1;
                if (j == a.n) {
                    if (a.bc != Boundary::Periodic) continue;
                    j = 0;
                }
                const std::size_t nb = i + (static_cast<long>(j) - idx[k]) * static_cast<long>(nodes.stride(k));
                double d = 0.0;
                for (int c = 0; c < D; ++c) d = std::max(d, std::abs(u[nb][c] - u[i][c]));
                sum += d / a.h;
            }
            b.gradient = std::max(b.gradient, sum);
        }
        return b;
    }

    double max_speed(const GridSpec<D>& nodes) const { return bounds(nodes).speed; }

    const HermiteField<D>& log_density() const { return log_rho_; }

private:
    HermiteField<D> log_rho_;
};

template <int D>
DiffusionVelocity<D> diffusion_velocity(const DensityField<D>& rho_smoothed, int order,
                                        PacketRule rule = PacketRule::Spectral)
{
    return DiffusionVelocity<D>(rho_smoothed, order, rule);
}

/// Annulus-concentrated densities on the unit torus.
struct AnnulusDensity {
    double width = 0.15;
    double radius = 0.25;
    Point<2> center{0.5, 0.5};
    double amplitude = 0.25;

    /// Bump profile exp(-1/(1-(2s/w)^2)) on |s| < w/2.
    double profile(double s) const
    {
        const double q = 2.0 * s / width;
        if (std::abs(q) >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - q * q));
    }

    /// Mean of the profile over the unit square. The annulus lies inside the
    /// square, so this reduces to a radial integral 2 pi * int profile(s)(r+s) ds.
    double profile_mean() const
    {
        const int n = 20000;
        const double a = -0.5 * width, b = 0.5 * width;
        const double step = (b - a) / n;
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = a + (i + 0.5) * step;
            s += profile(x) * (radius + x);
        }
        return 2.0 * std::numbers::pi * s * step;
    }

    /// eta = c (profile - mean) scaled so that min eta = -1.
    double eta(const Point<2>& x) const
    {
        if (mean_ < 0.0) {
            mean_ = profile_mean();
            scale_ = 1.0 / mean_;
        }
        double dx = x[0] - center[0], dy = x[1] - center[1];
        dx -= std::nearbyint(dx);
        dy -= std::nearbyint(dy);
        return scale_ * (profile(std::hypot(dx, dy) - radius) - mean_);
    }

    double operator()(const Point<2>& x) const { return 1.0 + amplitude * eta(x); }

private:
    mutable double mean_ = -1.0;
    mutable double scale_ = 0.0;
};

/**
 * Moving annulus: rho0(x, y, t) = 1 + 0.25 |sin(1.5 pi t)| eta(x + 0.25 sin(0.5 pi t) sin(2 pi y), y).
 * The modulus keeps the density positive (eta reaches about 6 on the ridge).
 */
struct MovingAnnulusDensity {
    AnnulusDensity annulus;
    double amplitude = 0.25;
    double shear = 0.25;

    double operator()(const Point<2>& x, double t) const
    {
        const double a = amplitude * std::abs(std::sin(1.5 * std::numbers::pi * t));
        const double s = shear * std::sin(0.5 * std::numbers::pi * t);
        const Point<2> p{x[0] + s * std::sin(2.0 * std::numbers::pi * x[1]), x[1]};
        return 1.0 + a * annulus.eta(p);
    }
};

} // namespace cmflow
