#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cmflow/errors.hpp"

namespace cmflow {

enum class Boundary : std::uint8_t { Periodic = 0, Neumann = 1 };

/// Where the stored nodes sit: on cell corners (the map grid) or cell
/// centers (the staggered density grid).
enum class Layout : std::uint8_t { Nodal = 0, CellCentered = 1 };

template <int D>
using Point = std::array<double, D>;

template <int D>
using MultiIndex = std::array<int, D>;

/// One axis of a uniform grid on the unit interval.
struct Axis {
    int n = 0;          // stored nodes
    double h = 0.0;     // cell width
    double origin = 0.0;
    Boundary bc = Boundary::Periodic;
    Layout layout = Layout::Nodal;

    double node(int i) const { return origin + i * h; }
    int cells() const { return (bc == Boundary::Periodic || layout == Layout::CellCentered) ? n : n - 1; }

    bool operator==(const Axis&) const = default;
};

/// Result of locating a coordinate on an axis: the two neighbouring stored
/// nodes, whether each is a mirror image across a Neumann wall, and the
/// local cell coordinate t in [0,1].
struct AxisCell {
    int i0 = 0;
    int i1 = 0;
    bool flip0 = false;
    bool flip1 = false;
    double t = 0.0;
};

namespace detail {

inline constexpr double kSnap = 1e-9;
inline constexpr double kWallTol = 1e-10;

inline double snap(double s)
{
    const double r = std::nearbyint(s);
    return std::abs(s - r) < kSnap ? r : s;
}

inline int wrap_index(long j, int n)
{
    long r = j % n;
    return static_cast<int>(r < 0 ? r + n : r);
}

} // namespace detail

inline AxisCell locate(const Axis& ax, double x)
{
    AxisCell c;
    if (ax.bc == Boundary::Periodic) {
        const double s = detail::snap((x - ax.origin) / ax.h);
        const double j = std::floor(s);
        c.t = s - j;
        const long jl = static_cast<long>(j);
        c.i0 = detail::wrap_index(jl, ax.n);
        c.i1 = detail::wrap_index(jl + 1, ax.n);
        return c;
    }
    if (!(x >= -detail::kWallTol && x <= 1.0 + detail::kWallTol)) {
        throw DomainError("coordinate " + std::to_string(x) + " outside [0,1] on a Neumann axis");
    }
    const double s = detail::snap((x - ax.origin) / ax.h);
    if (ax.layout == Layout::Nodal) {
        double j = std::floor(s);
        if (j < 0) j = 0;
        if (j > ax.n - 2) j = ax.n - 2;
        c.t = s - j;
        c.i0 = static_cast<int>(j);
        c.i1 = c.i0 + 1;
        return c;
    }
    // Cell-centered Neumann axis: ghost nodes mirror the first/last node.
    double j = std::floor(s);
    if (j < -1) j = -1;
    if (j > ax.n - 1) j = ax.n - 1;
    c.t = s - j;
    const int ji = static_cast<int>(j);
    c.i0 = ji < 0 ? 0 : ji;
    c.flip0 = ji < 0;
    c.i1 = ji + 1 > ax.n - 1 ? ax.n - 1 : ji + 1;
    c.flip1 = ji + 1 > ax.n - 1;
    return c;
}

/// Uniform tensor grid on the unit box/torus in D dimensions.
template <int D>
class GridSpec {
    static_assert(D >= 1 && D <= 3, "grids are 1-3 dimensional");

public:
    GridSpec() = default;

    /// Nodal grid: periodic axes store N nodes with h = 1/N, Neumann axes
    /// store N nodes with h = 1/(N-1).
    static GridSpec nodal(const std::array<int, D>& sizes, const std::array<Boundary, D>& bcs)
    {
        GridSpec g;
        for (int k = 0; k < D; ++k) {
            if (sizes[k] < 4) {
                throw DomainError("grid too small: axis " + std::to_string(k) + " has " +
                                  std::to_string(sizes[k]) + " nodes (need >= 4)");
            }
            Axis& a = g.axes_[k];
            a.n = sizes[k];
            a.bc = bcs[k];
            a.layout = Layout::Nodal;
            a.h = bcs[k] == Boundary::Periodic ? 1.0 / sizes[k] : 1.0 / (sizes[k] - 1);
            a.origin = 0.0;
        }
        g.finish();
        return g;
    }

    static GridSpec nodal(int n, Boundary bc)
    {
        std::array<int, D> s;
        std::array<Boundary, D> b;
        s.fill(n);
        b.fill(bc);
        return nodal(s, b);
    }

    /// Grid of cell centers with `cells[k]` cells per axis regardless of boundary type.
    static GridSpec cell_centers(const std::array<int, D>& cells, const std::array<Boundary, D>& bcs)
    {
        std::array<int, D> sizes{};
        for (int k = 0; k < D; ++k) sizes[k] = bcs[k] == Boundary::Periodic ? cells[k] : cells[k] + 1;
        return nodal(sizes, bcs).dual();
    }

    /// Staggered grid whose nodes sit at this grid's cell centers.
    GridSpec dual() const
    {
        GridSpec g;
        for (int k = 0; k < D; ++k) {
            const Axis& p = axes_[k];
            Axis& a = g.axes_[k];
            a.bc = p.bc;
            a.h = p.h;
            a.layout = Layout::CellCentered;
            a.n = p.cells();
            a.origin = p.origin + 0.5 * p.h;
            if (p.layout == Layout::CellCentered) {
                throw DomainError("dual of a cell-centered grid is not defined");
            }
        }
        g.finish();
        return g;
    }

    const Axis& axis(int k) const { return axes_[k]; }
    const std::array<Axis, D>& axes() const { return axes_; }
    std::size_t node_count() const { return count_; }
    std::size_t stride(int k) const { return strides_[k]; }

    double cell_volume() const
    {
        double v = 1.0;
        for (const Axis& a : axes_) v *= a.h;
        return v;
    }

    double min_spacing() const
    {
        double h = axes_[0].h;
        for (const Axis& a : axes_) h = std::min(h, a.h);
        return h;
    }

    /// Flat index -> per-axis indices (row-major, last axis fastest).
    MultiIndex<D> unflatten(std::size_t flat) const
    {
        MultiIndex<D> idx{};
        for (int k = D - 1; k >= 0; --k) {
            idx[k] = static_cast<int>(flat % axes_[k].n);
            flat /= axes_[k].n;
        }
        return idx;
    }

    std::size_t flatten(const MultiIndex<D>& idx) const
    {
        std::size_t f = 0;
        for (int k = 0; k < D; ++k) f += static_cast<std::size_t>(idx[k]) * strides_[k];
        return f;
    }

    Point<D> position(const MultiIndex<D>& idx) const
    {
        Point<D> p{};
        for (int k = 0; k < D; ++k) p[k] = axes_[k].node(idx[k]);
        return p;
    }

    Point<D> position(std::size_t flat) const { return position(unflatten(flat)); }

    std::array<Boundary, D> boundaries() const
    {
        std::array<Boundary, D> b{};
        for (int k = 0; k < D; ++k) b[k] = axes_[k].bc;
        return b;
    }

    bool operator==(const GridSpec& o) const { return axes_ == o.axes_; }

private:
    void finish()
    {
        count_ = 1;
        for (int k = D - 1; k >= 0; --k) {
            strides_[k] = count_;
            count_ *= static_cast<std::size_t>(axes_[k].n);
        }
    }

    std::array<Axis, D> axes_{};
    std::array<std::size_t, D> strides_{};
    std::size_t count_ = 0;
};

template <int D>
GridSpec<D> dual_of(const GridSpec<D>& g)
{
    return g.dual();
}

/// Wraps a difference vector to the nearest periodic image on periodic axes.
template <int D>
Point<D> wrap_difference(Point<D> d, const std::array<Boundary, D>& bcs)
{
    for (int k = 0; k < D; ++k) {
        if (bcs[k] == Boundary::Periodic) d[k] -= std::nearbyint(d[k]);
    }
    return d;
}

/// Deterministic low-discrepancy points in the open unit box (Halton sequence).
template <int D>
std::vector<Point<D>> halton_points(std::size_t count, std::size_t skip = 1)
{
    static constexpr int primes[3] = {2, 3, 5};
    std::vector<Point<D>> pts(count);
    for (std::size_t i = 0; i < count; ++i) {
        for (int k = 0; k < D; ++k) {
            double f = 1.0, r = 0.0;
            std::size_t n = i + skip;
            while (n > 0) {
                f /= primes[k];
                r += f * static_cast<double>(n % primes[k]);
                n /= primes[k];
            }
            pts[i][k] = r;
        }
    }
    return pts;
}

} // namespace cmflow
