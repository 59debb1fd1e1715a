#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

namespace cmflow {

/**
 * Truncated multilinear jet with K independent infinitesimals e_0..e_{K-1},
 * each satisfying e_k^2 = 0 (hyper-dual numbers).
 *
 * Coefficient c[S] multiplies prod_{k in S} e_k, where S is a bitmask. Seeding
 * the inputs of any smooth computation with x_k + h_k e_k yields, in c[S],
 * the mixed derivative h^S d^S f. This is how Hermite derivative packets of
 * composed maps are assembled: the chain rule is carried exactly by the
 * arithmetic, with no finite differencing.
 */
template <int K>
struct Jet {
    static_assert(K >= 1 && K <= 3, "jets are used with 1 to 3 infinitesimals");
    static constexpr int size = 1 << K;
    std::array<double, size> c{};

    constexpr Jet() = default;
    constexpr Jet(double v) { c[0] = v; } // NOLINT: implicit promotion is the point

    static constexpr Jet seed(double v, int k, double scale = 1.0)
    {
        Jet j(v);
        j.c[std::size_t{1} << k] = scale;
        return j;
    }

    constexpr double value() const { return c[0]; }

    Jet& operator+=(const Jet& o)
    {
        for (int s = 0; s < size; ++s) c[s] += o.c[s];
        return *this;
    }
    Jet& operator-=(const Jet& o)
    {
        for (int s = 0; s < size; ++s) c[s] -= o.c[s];
        return *this;
    }
    Jet& operator+=(double v)
    {
        c[0] += v;
        return *this;
    }
    Jet& operator-=(double v)
    {
        c[0] -= v;
        return *this;
    }
    Jet& operator*=(double v)
    {
        for (int s = 0; s < size; ++s) c[s] *= v;
        return *this;
    }
    Jet& operator*=(const Jet& o);
};

template <int K>
inline Jet<K> operator*(const Jet<K>& a, const Jet<K>& b)
{
    Jet<K> r;
    const auto& x = a.c;
    const auto& y = b.c;
    // Coefficient S collects a[T] * b[S \ T] over subsets T of S.
    if constexpr (K == 1) {
        r.c = {x[0] * y[0], x[0] * y[1] + x[1] * y[0]};
    } else if constexpr (K == 2) {
        r.c = {x[0] * y[0], x[0] * y[1] + x[1] * y[0], x[0] * y[2] + x[2] * y[0],
               x[0] * y[3] + x[1] * y[2] + x[2] * y[1] + x[3] * y[0]};
    } else {
        r.c = {x[0] * y[0],
               x[0] * y[1] + x[1] * y[0],
               x[0] * y[2] + x[2] * y[0],
               x[0] * y[3] + x[1] * y[2] + x[2] * y[1] + x[3] * y[0],
               x[0] * y[4] + x[4] * y[0],
               x[0] * y[5] + x[1] * y[4] + x[4] * y[1] + x[5] * y[0],
               x[0] * y[6] + x[2] * y[4] + x[4] * y[2] + x[6] * y[0],
               x[0] * y[7] + x[1] * y[6] + x[2] * y[5] + x[3] * y[4] + x[4] * y[3] + x[5] * y[2] + x[6] * y[1] +
                   x[7] * y[0]};
    }
    return r;
}

template <int K>
inline Jet<K>& Jet<K>::operator*=(const Jet<K>& o)
{
    *this = *this * o;
    return *this;
}

template <int K> inline Jet<K> operator+(Jet<K> a, const Jet<K>& b) { return a += b; }
template <int K> inline Jet<K> operator-(Jet<K> a, const Jet<K>& b) { return a -= b; }
template <int K> inline Jet<K> operator+(Jet<K> a, double b) { return a += b; }
template <int K> inline Jet<K> operator+(double a, Jet<K> b) { return b += a; }
template <int K> inline Jet<K> operator-(Jet<K> a, double b) { return a -= b; }
template <int K> inline Jet<K> operator*(Jet<K> a, double b) { return a *= b; }
template <int K> inline Jet<K> operator*(double a, Jet<K> b) { return b *= a; }
template <int K>
inline Jet<K> operator/(Jet<K> a, double b)
{
    for (auto& v : a.c) v /= b;
    return a;
}

template <int K>
inline Jet<K> operator-(Jet<K> a)
{
    for (auto& v : a.c) v = -v;
    return a;
}

template <int K>
inline Jet<K> operator-(double a, const Jet<K>& b)
{
    Jet<K> r = -b;
    r.c[0] += a;
    return r;
}

namespace detail {

// f(a) = sum_k f^(k)(a0) n^k / k!  with n = a - a0 nilpotent of order K+1.
template <int K>
inline Jet<K> apply_taylor(const Jet<K>& a, const std::array<double, K + 1>& derivs)
{
    Jet<K> n = a;
    n.c[0] = 0.0;
    Jet<K> r(derivs[0]);
    Jet<K> p = n;
    double fact = 1.0;
    for (int k = 1; k <= K; ++k) {
        fact *= k;
        r += p * (derivs[k] / fact);
        if (k < K) p = p * n;
    }
    return r;
}

} // namespace detail

template <int K>
inline Jet<K> sin(const Jet<K>& a)
{
    const double s = std::sin(a.c[0]);
    const double co = std::cos(a.c[0]);
    std::array<double, K + 1> d{};
    const double cyc[4] = {s, co, -s, -co};
    for (int k = 0; k <= K; ++k) d[k] = cyc[k % 4];
    return detail::apply_taylor(a, d);
}

template <int K>
inline Jet<K> cos(const Jet<K>& a)
{
    const double s = std::sin(a.c[0]);
    const double co = std::cos(a.c[0]);
    std::array<double, K + 1> d{};
    const double cyc[4] = {co, -s, -co, s};
    for (int k = 0; k <= K; ++k) d[k] = cyc[k % 4];
    return detail::apply_taylor(a, d);
}

template <int K>
inline Jet<K> exp(const Jet<K>& a)
{
    std::array<double, K + 1> d{};
    d.fill(std::exp(a.c[0]));
    return detail::apply_taylor(a, d);
}

template <int K>
inline Jet<K> log(const Jet<K>& a)
{
    const double x = a.c[0];
    std::array<double, K + 1> d{};
    d[0] = std::log(x);
    double p = 1.0 / x;
    for (int k = 1; k <= K; ++k) {
        d[k] = ((k % 2) ? 1.0 : -1.0) * p;
        p *= k / x;
    }
    return detail::apply_taylor(a, d);
}

template <int K>
inline Jet<K> sqrt(const Jet<K>& a)
{
    const double x = a.c[0];
    std::array<double, K + 1> d{};
    d[0] = std::sqrt(x);
    // d^k/dx^k x^{1/2} = (1/2)(1/2-1)...(1/2-k+1) x^{1/2-k}
    double coef = 1.0;
    for (int k = 1; k <= K; ++k) {
        coef *= (0.5 - (k - 1));
        d[k] = coef * std::pow(x, 0.5 - k);
    }
    return detail::apply_taylor(a, d);
}

template <int K>
inline Jet<K> inverse(const Jet<K>& a)
{
    const double x = a.c[0];
    std::array<double, K + 1> d{};
    double p = 1.0 / x;
    for (int k = 0; k <= K; ++k) {
        d[k] = ((k % 2) ? -1.0 : 1.0) * p;
        p *= (k + 1) / x;
    }
    return detail::apply_taylor(a, d);
}

template <int K> inline Jet<K> operator/(const Jet<K>& a, const Jet<K>& b) { return a * inverse(b); }
template <int K> inline Jet<K> operator/(double a, const Jet<K>& b) { return inverse(b) * a; }

template <class T> struct is_jet : std::false_type {};
template <int K> struct is_jet<Jet<K>> : std::true_type {};
template <class T> inline constexpr bool is_jet_v = is_jet<T>::value;

inline double value_of(double v) { return v; }
template <int K> inline double value_of(const Jet<K>& j) { return j.c[0]; }

/// Replaces the real part, keeping the infinitesimal part.
inline double with_value(double, double v) { return v; }
template <int K>
inline Jet<K> with_value(Jet<K> j, double v)
{
    j.c[0] = v;
    return j;
}

/// The infinitesimal part only (zero for plain doubles).
inline double nilpotent_of(double) { return 0.0; }
template <int K>
inline Jet<K> nilpotent_of(Jet<K> j)
{
    j.c[0] = 0.0;
    return j;
}

} // namespace cmflow
