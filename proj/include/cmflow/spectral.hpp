#pragma once

#include <array>
#include <cmath>
#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"

namespace cmflow {

namespace detail {

struct FftwBuffer {
    double* p = nullptr;
    explicit FftwBuffer(std::size_t n) : p(fftw_alloc_real(n))
    {
        if (!p) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

struct FftwComplexBuffer {
    fftw_complex* p = nullptr;
    explicit FftwComplexBuffer(std::size_t n) : p(fftw_alloc_complex(n))
    {
        if (!p) throw std::bad_alloc();
    }
    ~FftwComplexBuffer() { fftw_free(p); }
    FftwComplexBuffer(const FftwComplexBuffer&) = delete;
    FftwComplexBuffer& operator=(const FftwComplexBuffer&) = delete;
};

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

} // namespace detail

/// Eigenvalues used for the Laplacian: the 3-point stencil or the exact -|k|^2.
enum class HeatSymbol { Stencil, Spectral };

/**
 * Exact solver for (I - dt * L) r = rho on a cell-centered grid, where L is
 * the 3-point-per-axis Laplacian with periodic wrap or mirrored (zero-flux)
 * ghost cells. Diagonalized by a Hartley transform on periodic axes and a
 * type-II/III cosine pair on Neumann axes. With HeatSymbol::Spectral the same
 * transforms apply -|k|^2 instead, i.e. L is the Laplacian of the trigonometric
 * interpolant.
 */
template <int D>
class HeatSolver {
public:
    explicit HeatSolver(const GridSpec<D>& dual, HeatSymbol symbol = HeatSymbol::Stencil)
        : grid_(dual), buf_(dual.node_count())
    {
        std::array<int, D> n{};
        std::array<fftw_r2r_kind, D> fwd{}, bwd{};
        norm_ = 1.0;
        for (int k = 0; k < D; ++k) {
            const Axis& a = dual.axis(k);
            if (a.layout != Layout::CellCentered) throw DomainError("heat solves run on cell-centered grids");
            n[k] = a.n;
            eig_[k].resize(a.n);
            const double ih2 = 1.0 / (a.h * a.h);
            if (a.bc == Boundary::Periodic) {
                fwd[k] = bwd[k] = FFTW_DHT;
                norm_ *= a.n;
                for (int j = 0; j < a.n; ++j) {
                    const double w = 2.0 * std::numbers::pi * std::min(j, a.n - j) / (a.n * a.h);
                    eig_[k][j] = symbol == HeatSymbol::Spectral
                                     ? -w * w
                                     : (2.0 * std::cos(2.0 * std::numbers::pi * j / a.n) - 2.0) * ih2;
                }
            } else {
                fwd[k] = FFTW_REDFT10;
                bwd[k] = FFTW_REDFT01;
                norm_ *= 2.0 * a.n;
                for (int j = 0; j < a.n; ++j) {
                    const double w = std::numbers::pi * j / (a.n * a.h);
                    eig_[k][j] = symbol == HeatSymbol::Spectral ? -w * w
                                                                : (2.0 * std::cos(std::numbers::pi * j / a.n) - 2.0) * ih2;
                }
            }
        }
        forward_.reset(fftw_plan_r2r(D, n.data(), buf_.p, buf_.p, fwd.data(), FFTW_ESTIMATE));
        backward_.reset(fftw_plan_r2r(D, n.data(), buf_.p, buf_.p, bwd.data(), FFTW_ESTIMATE));
        if (!forward_ || !backward_) throw Error("FFTW planning failed");
    }

    const GridSpec<D>& grid() const { return grid_; }

    /// Overwrites `values` (row-major over the grid) with (I - dt L)^-1 values.
    void solve(std::vector<double>& values, double dt) const
    {
        if (values.size() != grid_.node_count()) throw DomainError("heat solve: size mismatch");
        if (!(dt > 0.0)) throw DomainError("heat solve: dt must be positive");
        std::copy(values.begin(), values.end(), buf_.p);
        fftw_execute(forward_.get());
        for (std::size_t i = 0; i < grid_.node_count(); ++i) {
            const MultiIndex<D> idx = grid_.unflatten(i);
            double lam = 0.0;
            for (int k = 0; k < D; ++k) lam += eig_[k][idx[k]];
            buf_.p[i] /= (1.0 - dt * lam) * norm_;
        }
        fftw_execute(backward_.get());
        std::copy(buf_.p, buf_.p + grid_.node_count(), values.begin());
    }

private:
    GridSpec<D> grid_;
    detail::FftwBuffer buf_;
    detail::Plan forward_, backward_;
    std::array<std::vector<double>, D> eig_;
    double norm_ = 1.0;
};

/**
 * Spectral mixed derivatives d^alpha f, alpha in {0,1}^D, of data on a
 * cell-centered grid. Neumann axes are evenly reflected across the walls
 * before transforming, so the interpolating trigonometric series has zero
 * normal derivative there.
 */
template <int D>
class SpectralDerivative {
public:
    explicit SpectralDerivative(const GridSpec<D>& dual) : grid_(dual)
    {
        total_ = 1;
        for (int k = 0; k < D; ++k) {
            const Axis& a = dual.axis(k);
            ext_[k] = a.bc == Boundary::Periodic ? a.n : 2 * a.n;
            total_ *= ext_[k];
        }
        spec_n_ = total_ / ext_[D - 1] * (ext_[D - 1] / 2 + 1);
        real_ = std::make_unique<detail::FftwBuffer>(total_);
        spec_ = std::make_unique<detail::FftwComplexBuffer>(spec_n_);
        work_ = std::make_unique<detail::FftwComplexBuffer>(spec_n_);
        r2c_.reset(fftw_plan_dft_r2c(D, ext_.data(), real_->p, spec_->p, FFTW_ESTIMATE));
        c2r_.reset(fftw_plan_dft_c2r(D, ext_.data(), work_->p, real_->p, FFTW_ESTIMATE));
        if (!r2c_ || !c2r_) throw Error("FFTW planning failed");
    }

    /// Loads data (row-major over the grid) and transforms it.
    void load(const std::vector<double>& values)
    {
        if (values.size() != grid_.node_count()) throw DomainError("spectral derivative: size mismatch");
        for (std::size_t e = 0; e < total_; ++e) {
            std::size_t rem = e;
            std::size_t src = 0;
            for (int k = D - 1; k >= 0; --k) {
                int j = static_cast<int>(rem % ext_[k]);
                rem /= ext_[k];
                const int n = grid_.axis(k).n;
                if (j >= n) j = 2 * n - 1 - j;
                src += static_cast<std::size_t>(j) * grid_.stride(k);
            }
            real_->p[e] = values[src];
        }
        fftw_execute(r2c_.get());
    }

    /// d^alpha of the loaded data at the grid nodes (physical units).
    std::vector<double> derivative(const MultiIndex<D>& alpha)
    {
        const double two_pi = 2.0 * std::numbers::pi;
        const int last = ext_[D - 1] / 2 + 1;
        for (std::size_t s = 0; s < spec_n_; ++s) {
            std::size_t rem = s;
            std::complex<double> factor(1.0, 0.0);
            for (int k = D - 1; k >= 0; --k) {
                const int len = k == D - 1 ? last : ext_[k];
                const int j = static_cast<int>(rem % len);
                rem /= len;
                if (alpha[k] == 0) continue;
                const int n = ext_[k];
                const int freq = j <= n / 2 ? j : j - n;
                if (n % 2 == 0 && j == n / 2) {
                    factor = 0.0;
                    continue;
                }
                const double period = n * grid_.axis(k).h;
                factor *= std::complex<double>(0.0, two_pi * freq / period);
            }
            const std::complex<double> v(spec_->p[s][0], spec_->p[s][1]);
            const std::complex<double> r = v * factor / static_cast<double>(total_);
            work_->p[s][0] = r.real();
            work_->p[s][1] = r.imag();
        }
        fftw_execute(c2r_.get());
        std::vector<double> out(grid_.node_count());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const MultiIndex<D> idx = grid_.unflatten(i);
            std::size_t e = 0;
            for (int k = 0; k < D; ++k) e = e * ext_[k] + idx[k];
            out[i] = real_->p[e];
        }
        return out;
    }

private:
    GridSpec<D> grid_;
    std::array<int, D> ext_{};
    std::size_t total_ = 0;
    std::size_t spec_n_ = 0;
    std::unique_ptr<detail::FftwBuffer> real_;
    std::unique_ptr<detail::FftwComplexBuffer> spec_, work_;
    detail::Plan r2c_, c2r_;
};

/**
 * Cubic Hermite packets for grid data: slot alpha holds h^|alpha| d^alpha f
 * from spectral differentiation. Returned node-major, ready for HermiteField.
 */
template <int D>
std::vector<double> spectral_packets(const GridSpec<D>& dual, const std::vector<double>& values)
{
    constexpr int P = 1 << D;
    SpectralDerivative<D> sd(dual);
    sd.load(values);
    std::vector<double> packets(values.size() * P);
    for (std::size_t i = 0; i < values.size(); ++i) packets[i * P] = values[i];
    for (int slot = 1; slot < P; ++slot) {
        MultiIndex<D> alpha{};
        double scale = 1.0;
        for (int k = 0; k < D; ++k) {
            alpha[k] = (slot >> (D - 1 - k)) & 1;
            if (alpha[k]) scale *= dual.axis(k).h;
        }
        const std::vector<double> d = sd.derivative(alpha);
        for (std::size_t i = 0; i < values.size(); ++i) packets[i * P + slot] = d[i] * scale;
    }
    return packets;
}

} // namespace cmflow

namespace cmflow {

/**
 * Cubic Hermite packets from second-order central differences, with wrap on
 * periodic axes and mirrored ghost cells on Neumann axes. Slot alpha holds
 * h^|alpha| d^alpha f, i.e. half the centered difference per differentiated axis.
 */
template <int D>
std::vector<double> central_difference_packets(const GridSpec<D>& dual, const std::vector<double>& values)
{
    constexpr int P = 1 << D;
    if (values.size() != dual.node_count()) throw DomainError("difference packets: size mismatch");
    std::vector<double> packets(values.size() * P);
    for (std::size_t i = 0; i < values.size(); ++i) packets[i * P] = values[i];
    auto neighbour = [&](std::size_t i, int k, int dir) {
        const Axis& a = dual.axis(k);
        const MultiIndex<D> idx = dual.unflatten(i);
        int j = idx[k] + dir;
        if (a.bc == Boundary::Periodic) {
            j = detail::wrap_index(j, a.n);
        } else {
            j = std::clamp(j, 0, a.n - 1);
        }
        return i + (static_cast<long>(j) - idx[k]) * static_cast<long>(dual.stride(k));
    };
    // Slots are filled in increasing order; slot S with lowest set bit b is
    // the difference along axis D-1-b of slot S without that bit.
    for (int slot = 1; slot < P; ++slot) {
        int bit = 0;
        while (!((slot >> bit) & 1)) ++bit;
        const int k = D - 1 - bit;
        const int from = slot & ~(1 << bit);
        for (std::size_t i = 0; i < values.size(); ++i) {
            packets[i * P + slot] = 0.5 * (packets[neighbour(i, k, +1) * P + from] - packets[neighbour(i, k, -1) * P + from]);
        }
    }
    return packets;
}

} // namespace cmflow
