#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"
#include "cmflow/jet.hpp"

namespace cmflow {

namespace detail {

// 1D Hermite basis on the reference cell, derivative order `a` in t.
// out[c * (order+1) + s]: corner c (0 = left node, 1 = right node), slot s
// (0 = value, 1 = reference-scaled derivative).
template <class T>
void hermite_basis_1d(int order, const T& t, int a, T* out);

// Jet argument t0 + n: Taylor-expand each basis function in the nilpotent n,
// which needs the real derivatives only (n^(K+1) = 0).
template <int K>
void hermite_basis_1d(int order, const Jet<K>& t, int a, Jet<K>* out)
{
    const int Q = 2 * (order + 1);
    const double t0 = t.value();
    Jet<K> n = t;
    n.c[0] = 0.0;
    std::array<Jet<K>, K + 1> pw;
    pw[0] = Jet<K>(1.0);
    for (int j = 1; j <= K; ++j) pw[j] = pw[j - 1] * n;
    double d[4][4];
    double fact = 1.0;
    for (int j = 0; j <= K; ++j) {
        if (j > 0) fact *= j;
        hermite_basis_1d(order, t0, a + j, d[j]);
        for (int q = 0; q < Q; ++q) d[j][q] /= fact;
    }
    for (int q = 0; q < Q; ++q) {
        Jet<K> r(d[0][q]);
        for (int j = 1; j <= K; ++j) {
            for (int s = 1; s < Jet<K>::size; ++s) r.c[s] += d[j][q] * pw[j].c[s];
        }
        out[q] = r;
    }
}

template <class T>
void hermite_basis_1d(int order, const T& t, int a, T* out)
{
    if (order == 0) {
        switch (a) {
        case 0:
            out[0] = 1.0 - t;
            out[1] = t;
            break;
        case 1:
            out[0] = T(-1.0);
            out[1] = T(1.0);
            break;
        default:
            out[0] = T(0.0);
            out[1] = T(0.0);
        }
        return;
    }
    switch (a) {
    case 0:
        out[0] = 1.0 + t * t * (2.0 * t - 3.0); // h00
        out[1] = t * (1.0 + t * (t - 2.0));     // h10
        out[2] = t * t * (3.0 - 2.0 * t);       // h01
        out[3] = t * t * (t - 1.0);             // h11
        break;
    case 1:
        out[0] = 6.0 * t * (t - 1.0);
        out[1] = 1.0 + t * (3.0 * t - 4.0);
        out[2] = 6.0 * t * (1.0 - t);
        out[3] = t * (3.0 * t - 2.0);
        break;
    case 2:
        out[0] = 12.0 * t - 6.0;
        out[1] = 6.0 * t - 4.0;
        out[2] = 6.0 - 12.0 * t;
        out[3] = 6.0 * t - 2.0;
        break;
    case 3:
        out[0] = T(12.0);
        out[1] = T(6.0);
        out[2] = T(-12.0);
        out[3] = T(6.0);
        break;
    default:
        for (int q = 0; q < 4; ++q) out[q] = T(0.0);
    }
}

inline constexpr int ipow(int b, int e)
{
    int r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

// Per-axis basis values and node offsets for one evaluation point.
template <int D, class T>
struct CellWeights {
    static constexpr int kMaxQ = 4;
    std::array<std::array<T, kMaxQ>, D> f{};
    std::array<std::array<std::size_t, 2>, D> off{};
};

inline double inverse_power(double h, int a)
{
    switch (a) {
    case 0: return 1.0;
    case 1: return 1.0 / h;
    case 2: return 1.0 / (h * h);
    default: return std::pow(h, -a);
    }
}

template <int Order, int D, class T>
void cell_weights(const GridSpec<D>& g, const std::array<T, D>& x, const MultiIndex<D>& alpha,
                  const std::array<AxisCell, D>& cells, CellWeights<D, T>& cw)
{
    constexpr int Q = 2 * (Order + 1);
    for (int k = 0; k < D; ++k) {
        const Axis& ax = g.axis(k);
        const AxisCell& cell = cells[k];
        T t = nilpotent_of(x[k]) / ax.h + cell.t;
        hermite_basis_1d(Order, t, alpha[k], cw.f[k].data());
        if (alpha[k] != 0) {
            const double scale = inverse_power(ax.h, alpha[k]);
            for (int q = 0; q < Q; ++q) cw.f[k][q] *= scale;
        }
        if constexpr (Order == 1) {
            if (cell.flip0) cw.f[k][1] = -cw.f[k][1];
            if (cell.flip1) cw.f[k][3] = -cw.f[k][3];
        }
        cw.off[k][0] = static_cast<std::size_t>(cell.i0) * g.stride(k);
        cw.off[k][1] = static_cast<std::size_t>(cell.i1) * g.stride(k);
    }
}

// Tensor-product contraction of the per-axis weights against node data,
// reducing the last axis first so only the inner stage multiplies by data.
template <int Order, int D, int C, class T>
std::array<T, C> contract(const CellWeights<D, T>& cw, const double* data, std::size_t comp_stride)
{
    constexpr int P1 = Order + 1;
    constexpr int Q = 2 * P1;
    constexpr int P = Order == 1 ? (1 << D) : 1;
    constexpr int kTerms = ipow(Q, D);

    // Flat data offset of each (q_0, ..., q_{D-1}) term, q_{D-1} fastest.
    std::array<std::size_t, kTerms> idx;
    idx[0] = 0;
    int terms = 1;
    for (int k = 0; k < D; ++k) {
        const int bit = (P >> 1) >> k; // slot bit of axis k; axis 0 is the high bit
        for (int j = terms - 1; j >= 0; --j) {
            const std::size_t ij = idx[j];
            for (int q = Q - 1; q >= 0; --q) idx[j * Q + q] = ij + cw.off[k][q / P1] * P + (q % P1) * bit;
        }
        terms *= Q;
    }

    std::array<T, C> out{};
    for (int c = 0; c < C; ++c) {
        const double* base = data + c * comp_stride;
        std::array<T, kTerms / Q> acc;
        for (int j = 0; j < kTerms / Q; ++j) {
            T r = cw.f[D - 1][0] * base[idx[j * Q]];
            for (int q = 1; q < Q; ++q) r += cw.f[D - 1][q] * base[idx[j * Q + q]];
            acc[j] = r;
        }
        int n = kTerms / Q;
        for (int k = D - 2; k >= 0; --k) {
            n /= Q;
            for (int j = 0; j < n; ++j) {
                T r = cw.f[k][0] * acc[j * Q];
                for (int q = 1; q < Q; ++q) r += cw.f[k][q] * acc[j * Q + q];
                acc[j] = r;
            }
        }
        out[c] = acc[0];
    }
    return out;
}

template <int D, class T>
std::array<AxisCell, D> locate_all(const GridSpec<D>& g, const std::array<T, D>& x)
{
    std::array<AxisCell, D> cells;
    for (int k = 0; k < D; ++k) cells[k] = locate(g.axis(k), value_of(x[k]));
    return cells;
}

template <int Order, int D, int C, class T>
std::array<T, C> hermite_eval_impl(const GridSpec<D>& g, const double* data, std::size_t comp_stride,
                                   const std::array<T, D>& x, const MultiIndex<D>& alpha)
{
    CellWeights<D, T> cw;
    cell_weights<Order, D, T>(g, x, alpha, locate_all<D, T>(g, x), cw);
    return contract<Order, D, C, T>(cw, data, comp_stride);
}

/**
 * Evaluates C interleaved fields sharing one grid: component c's packet for
 * node n starts at data[c * comp_stride + n * P]. Returns the mixed
 * derivative `alpha` in physical units.
 */
template <int D, int C, class T>
std::array<T, C> hermite_eval(const GridSpec<D>& g, int order, const double* data, std::size_t comp_stride,
                              const std::array<T, D>& x, const MultiIndex<D>& alpha)
{
    return order == 1 ? hermite_eval_impl<1, D, C, T>(g, data, comp_stride, x, alpha)
                      : hermite_eval_impl<0, D, C, T>(g, data, comp_stride, x, alpha);
}

template <int Order, int D, class T>
std::array<T, D> hermite_gradient_impl(const GridSpec<D>& g, const double* data, const std::array<T, D>& x)
{
    const auto cells = locate_all<D, T>(g, x);
    CellWeights<D, T> values, slopes;
    cell_weights<Order, D, T>(g, x, MultiIndex<D>{}, cells, values);
    MultiIndex<D> ones;
    ones.fill(1);
    cell_weights<Order, D, T>(g, x, ones, cells, slopes);
    std::array<T, D> out;
    for (int k = 0; k < D; ++k) {
        CellWeights<D, T> cw = values;
        cw.f[k] = slopes.f[k];
        out[k] = contract<Order, D, 1, T>(cw, data, 0)[0];
    }
    return out;
}

/// Gradient of a scalar field: locates the cell once, swaps one axis' basis per component.
template <int D, class T>
std::array<T, D> hermite_gradient(const GridSpec<D>& g, int order, const double* data, const std::array<T, D>& x)
{
    return order == 1 ? hermite_gradient_impl<1, D, T>(g, data, x) : hermite_gradient_impl<0, D, T>(g, data, x);
}

} // namespace detail

/**
 * Scalar field stored as a piecewise tensor-product Hermite interpolant,
 * linear (order 0) or cubic (order 1).
 *
 * Each node carries a packet of 2^D mixed derivatives for order 1 (one
 * value for order 0), lexicographically ordered over alpha in {0,1}^D and
 * scaled by h^|alpha| (reference-cell units). Nodes are stored row-major.
 */
template <int D>
class HermiteField {
public:
    HermiteField() = default;

    HermiteField(GridSpec<D> grid, int order, std::vector<double> data)
        : grid_(std::move(grid)), order_(order), data_(std::move(data))
    {
        if (order_ != 0 && order_ != 1) throw DomainError("Hermite order must be 0 or 1");
        if (data_.size() != grid_.node_count() * static_cast<std::size_t>(packet_size(order_))) {
            throw DomainError("node data length does not match grid and packet size");
        }
    }

    static int packet_size(int order) { return order == 1 ? (1 << D) : 1; }

    const GridSpec<D>& grid() const { return grid_; }
    int order() const { return order_; }
    std::span<const double> data() const { return data_; }

    /// d^alpha of the interpolant at x; alpha entries up to order + 1.
    template <class T>
    T eval(const std::array<T, D>& x, const MultiIndex<D>& alpha = {}) const
    {
        for (int k = 0; k < D; ++k) {
            if (alpha[k] < 0 || alpha[k] > order_ + 1) {
                throw DomainError("derivative order " + std::to_string(alpha[k]) + " exceeds m+1 for order " +
                                  std::to_string(order_));
            }
        }
        return detail::hermite_eval<D, 1>(grid_, order_, data_.data(), 0, x, alpha)[0];
    }

    template <class T>
    std::array<T, D> gradient(const std::array<T, D>& x) const
    {
        return detail::hermite_gradient<D, T>(grid_, order_, data_.data(), x);
    }

private:
    GridSpec<D> grid_;
    int order_ = 0;
    std::vector<double> data_;
};

/// Seeds node coordinates so that jet coefficient S equals slot S of a packet.
template <int D>
std::array<Jet<D>, D> seed_packet_point(const GridSpec<D>& g, const std::type_identity_t<Point<D>>& x)
{
    std::array<Jet<D>, D> xj;
    for (int k = 0; k < D; ++k) xj[k] = Jet<D>::seed(x[k], D - 1 - k, g.axis(k).h);
    return xj;
}

/**
 * Hermite projection of f onto `grid`. f must be callable with both
 * std::array<double, D> and std::array<Jet<D>, D>; for order 1 the
 * derivative packets come out of the jet evaluation.
 */
template <int D, class F>
HermiteField<D> project(F&& f, const GridSpec<D>& grid, int order)
{
    if (order != 0 && order != 1) throw DomainError("Hermite order must be 0 or 1");
    const int P = HermiteField<D>::packet_size(order);
    std::vector<double> data(grid.node_count() * P);
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        const Point<D> x = grid.position(i);
        if (order == 0) {
            data[i] = f(x);
        } else {
            const Jet<D> r = f(seed_packet_point(grid, x));
            for (int s = 0; s < P; ++s) data[i * P + s] = r.c[s];
        }
        for (int s = 0; s < P; ++s) {
            if (!std::isfinite(data[i * P + s])) throw DomainError("non-finite sample in projection");
        }
    }
    return HermiteField<D>(grid, order, std::move(data));
}

} // namespace cmflow
