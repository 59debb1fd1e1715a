#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"
#include "cmflow/hermite.hpp"
#include "cmflow/jet.hpp"

namespace cmflow {

/// Neumann-axis excursions up to this many cells are clamped back to the wall.
inline constexpr double kMaxWallExcursionCells = 1.0;

/**
 * Clamps the real part of y onto [0,1] along Neumann axes. Foot points that
 * leave the domain by more than one cell signal a CFL violation.
 */
template <int D, class T>
void clamp_to_walls(std::array<T, D>& y, const GridSpec<D>& g)
{
    for (int k = 0; k < D; ++k) {
        const Axis& ax = g.axis(k);
        if (ax.bc != Boundary::Neumann) continue;
        const double v = value_of(y[k]);
        if (v >= 0.0 && v <= 1.0) continue;
        const double excursion = v < 0.0 ? -v : v - 1.0;
        if (!(excursion <= kMaxWallExcursionCells * ax.h)) {
            throw NumericalAbort("foot point left the domain by " + std::to_string(excursion) +
                                 " on a Neumann axis (CFL violated)");
        }
        y[k] = with_value(y[k], v < 0.0 ? 0.0 : 1.0);
    }
}

/// Real-valued clamp onto [0,1] along Neumann axes.
template <int D>
void clamp_to_walls_real(Point<D>& y, const std::array<Boundary, D>& bcs)
{
    for (int k = 0; k < D; ++k) {
        if (bcs[k] == Boundary::Neumann) y[k] = std::clamp(y[k], 0.0, 1.0);
    }
}

/**
 * Characteristic map x -> x + d(x) on a nodal grid, with each displacement
 * component stored as a Hermite interpolant. Data are component-major:
 * D blocks of node_count * packet doubles.
 */
template <int D>
class MapField {
public:
    MapField() = default;

    MapField(GridSpec<D> grid, int order, std::vector<double> data)
        : grid_(std::move(grid)), order_(order), data_(std::move(data))
    {
        if (order_ != 0 && order_ != 1) throw DomainError("Hermite order must be 0 or 1");
        for (const Axis& a : grid_.axes()) {
            if (a.layout != Layout::Nodal) throw DomainError("characteristic maps live on nodal grids");
        }
        if (data_.size() != component_stride() * D) {
            throw DomainError("map data length does not match grid and packet size");
        }
    }

    static MapField identity(const GridSpec<D>& grid, int order)
    {
        const std::size_t n = grid.node_count() * HermiteField<D>::packet_size(order) * D;
        return MapField(grid, order, std::vector<double>(n, 0.0));
    }

    const GridSpec<D>& grid() const { return grid_; }
    int order() const { return order_; }
    int packet_size() const { return HermiteField<D>::packet_size(order_); }
    std::size_t component_stride() const { return grid_.node_count() * packet_size(); }
    std::span<const double> data() const { return data_; }

    bool is_identity() const
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
    }

    template <class T>
    std::array<T, D> displacement(const std::array<T, D>& x) const
    {
        return detail::hermite_eval<D, D>(grid_, order_, data_.data(), component_stride(), x, MultiIndex<D>{});
    }

    template <class T>
    std::array<T, D> operator()(const std::array<T, D>& x) const
    {
        std::array<T, D> y = displacement(x);
        for (int k = 0; k < D; ++k) y[k] += x[k];
        return y;
    }

    /// Jacobian matrix J[i][k] = d(map_i)/dx_k.
    std::array<std::array<double, D>, D> jacobian(const Point<D>& x) const
    {
        std::array<Jet<D>, D> xj;
        for (int k = 0; k < D; ++k) xj[k] = Jet<D>::seed(x[k], k);
        const auto y = (*this)(xj);
        std::array<std::array<double, D>, D> J{};
        for (int i = 0; i < D; ++i)
            for (int k = 0; k < D; ++k) J[i][k] = y[i].c[std::size_t{1} << k];
        return J;
    }

    bool operator==(const MapField&) const = default;

private:
    GridSpec<D> grid_;
    int order_ = 0;
    std::vector<double> data_;
};

template <int D>
double determinant(const std::array<std::array<double, D>, D>& J)
{
    if constexpr (D == 1) {
        return J[0][0];
    } else if constexpr (D == 2) {
        return J[0][0] * J[1][1] - J[0][1] * J[1][0];
    } else {
        return J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) - J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
               J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
    }
}

/// Determinant of the first-order part of a jet-valued map image.
template <int D>
double jet_determinant(const std::array<Jet<D>, D>& y)
{
    std::array<std::array<double, D>, D> J{};
    for (int i = 0; i < D; ++i)
        for (int k = 0; k < D; ++k) J[i][k] = y[i].c[std::size_t{1} << k];
    return determinant<D>(J);
}

template <int D>
std::array<Jet<D>, D> seed_gradient_point(const Point<D>& x)
{
    std::array<Jet<D>, D> xj;
    for (int k = 0; k < D; ++k) xj[k] = Jet<D>::seed(x[k], k);
    return xj;
}

/// Evaluates `map` and its Jacobian determinant at x.
template <int D, class M>
std::pair<Point<D>, double> eval_with_det(const M& map, const Point<D>& x)
{
    const auto y = map(seed_gradient_point<D>(x));
    Point<D> p{};
    for (int k = 0; k < D; ++k) p[k] = y[k].value();
    return {p, jet_determinant<D>(y)};
}

template <int D>
double jacobian_det(const MapField<D>& map, const std::type_identity_t<Point<D>>& x)
{
    return eval_with_det<D>(map, x).second;
}

/**
 * Hermite projection of a map given through its displacement functional
 * `disp(x)`, callable with double and Jet<D> coordinates.
 */
template <int D, class F>
MapField<D> project_displacement(const GridSpec<D>& grid, int order, F&& disp)
{
    const int P = HermiteField<D>::packet_size(order);
    const std::size_t stride = grid.node_count() * P;
    std::vector<double> data(stride * D);
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        const Point<D> x = grid.position(i);
        if (order == 0) {
            const std::array<double, D> d = disp(x);
            for (int c = 0; c < D; ++c) data[c * stride + i] = d[c];
        } else {
            const std::array<Jet<D>, D> d = disp(seed_packet_point(grid, x));
            for (int c = 0; c < D; ++c)
                for (int s = 0; s < P; ++s) data[c * stride + i * P + s] = d[c].c[s];
        }
    }
    for (double v : data) {
        if (!std::isfinite(v)) throw NumericalAbort("non-finite map data after projection");
    }
    return MapField<D>(grid, order, std::move(data));
}

/// Displacement of outer o inner at x, where inner is given by its displacement.
template <int D, class T>
std::array<T, D> compose_displacement(const MapField<D>& outer, const std::array<T, D>& x,
                                      const std::array<T, D>& inner_disp)
{
    std::array<T, D> y;
    for (int k = 0; k < D; ++k) y[k] = x[k] + inner_disp[k];
    std::array<T, D> yc = y;
    clamp_to_walls<D>(yc, outer.grid());
    std::array<T, D> d = outer.displacement(yc);
    // Adding inner_disp (not y - x) keeps an identity outer map bit-exact.
    for (int k = 0; k < D; ++k) d[k] += value_of(yc[k]) == value_of(y[k]) ? inner_disp[k] : yc[k] - x[k];
    return d;
}

/// H[outer o inner] on inner's grid and order.
template <int D>
MapField<D> compose_project(const MapField<D>& outer, const MapField<D>& inner)
{
    if (outer.grid().boundaries() != inner.grid().boundaries()) {
        throw DomainError("compose_project: maps live on domains with different boundary types");
    }
    return project_displacement<D>(inner.grid(), inner.order(), [&](const auto& x) {
        return compose_displacement<D>(outer, x, inner.displacement(x));
    });
}

/**
 * Semi-Lagrangian update with frozen velocity u: map <- H[map o F], where F
 * takes `substeps` explicit Euler steps of length dt/substeps from each node.
 * u must accept double and jet coordinates.
 */
template <int D, class U>
MapField<D> advance(const MapField<D>& map, U&& u, double dt, int substeps = 1)
{
    if (!(dt > 0.0)) throw DomainError("advance: dt must be positive");
    if (substeps < 1) throw DomainError("advance: substeps must be >= 1");
    const double h = dt / substeps;
    return project_displacement<D>(map.grid(), map.order(), [&](const auto& x) {
        auto step = u(x);
        for (int k = 0; k < D; ++k) step[k] = step[k] * (-h);
        for (int s = 1; s < substeps; ++s) {
            auto y = x;
            for (int k = 0; k < D; ++k) y[k] = y[k] + step[k];
            clamp_to_walls<D>(y, map.grid());
            const auto v = u(y);
            for (int k = 0; k < D; ++k) step[k] = (y[k] - x[k]) + v[k] * (-h);
        }
        return compose_displacement<D>(map, x, step);
    });
}

enum class Direction : std::uint8_t { Forward = 0, Backward = 1 };

/**
 * Ordered submaps with remap timestamps tau_0 < tau_1 < ... (one more time
 * than maps). Backward chains evaluate X_[tau1,0] o ... o X_[t,tau_{m-1}],
 * i.e. the newest map first; forward chains apply the oldest map first.
 */
template <int D>
struct SubmapChain {
    Direction direction = Direction::Backward;
    std::vector<MapField<D>> maps;
    std::vector<double> times;

    SubmapChain() = default;
    SubmapChain(Direction dir, double t0) : direction(dir), times{t0} {}

    std::size_t size() const { return maps.size(); }
    bool empty() const { return maps.empty(); }

    void append(MapField<D> m, double t_end)
    {
        if (times.empty()) times.push_back(0.0);
        if (t_end < times.back()) throw DomainError("chain timestamps must be nondecreasing");
        maps.push_back(std::move(m));
        times.push_back(t_end);
    }

    template <class T>
    std::array<T, D> operator()(std::array<T, D> x) const
    {
        if (direction == Direction::Backward) {
            for (std::size_t i = maps.size(); i-- > 0;) {
                clamp_to_walls<D>(x, maps[i].grid());
                x = maps[i](x);
            }
        } else {
            for (const auto& m : maps) {
                clamp_to_walls<D>(x, m.grid());
                x = m(x);
            }
        }
        return x;
    }

    bool operator==(const SubmapChain&) const = default;
};

template <int D, class X>
X chain_eval(const SubmapChain<D>& chain, const X& x)
{
    return chain(x);
}

/**
 * Inverse-consistency defect max(|F(B(x)) - x|, |B(F(x)) - x|) over the
 * sample set, with periodic axes measured to the nearest image.
 */
template <int D, class MF, class MB>
double composition_error(const MF& fwd, const MB& bwd, std::span<const Point<D>> samples,
                         const std::array<Boundary, D>& bcs)
{
    if (samples.empty()) throw DomainError("composition_error: empty sample set");
    double err = 0.0;
    for (const Point<D>& x : samples) {
        Point<D> a = bwd(x);
        clamp_to_walls_real<D>(a, bcs);
        a = fwd(a);
        Point<D> b = fwd(x);
        clamp_to_walls_real<D>(b, bcs);
        b = bwd(b);
        for (int k = 0; k < D; ++k) {
            a[k] -= x[k];
            b[k] -= x[k];
        }
        a = wrap_difference<D>(a, bcs);
        b = wrap_difference<D>(b, bcs);
        for (int k = 0; k < D; ++k) err = std::max({err, std::abs(a[k]), std::abs(b[k])});
    }
    return err;
}

/// Low-discrepancy sample set used for composition and remap residuals.
template <int D>
const std::vector<Point<D>>& default_samples()
{
    static const std::vector<Point<D>> pts = halton_points<D>(1024);
    return pts;
}

} // namespace cmflow
