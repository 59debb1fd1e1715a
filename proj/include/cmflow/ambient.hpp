#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "cmflow/char_map.hpp"
#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"
#include "cmflow/jet.hpp"
#include "cmflow/map_io.hpp"

namespace cmflow {

using Vec3 = std::array<double, 3>;
using JetPoint3 = std::array<Jet<3>, 3>;

/// Deformation field on the periodic unit cube with period P in time.
template <class T>
std::array<T, 3> leveque_velocity(const std::array<T, 3>& x, double t, double P)
{
    using std::sin;
    constexpr double pi = std::numbers::pi;
    const double c = std::cos(pi * t / P);
    const T sx = sin(pi * x[0]), sy = sin(pi * x[1]), sz = sin(pi * x[2]);
    const T s2x = sin(2.0 * pi * x[0]), s2y = sin(2.0 * pi * x[1]), s2z = sin(2.0 * pi * x[2]);
    return {(2.0 * c) * (sx * sx) * s2y * s2z, (-c) * s2x * (sy * sy) * s2z, (-c) * s2x * s2y * (sz * sz)};
}

class AmbientVelocity {
public:
    enum class Kind { LeVeque, StaticZero, UserAnalytic };
    /// User fields are evaluated on jets so cubic maps get exact packets;
    /// plain points are promoted to constant jets.
    using Evaluator = std::function<JetPoint3(const JetPoint3&, double)>;

    static AmbientVelocity leveque(double period)
    {
        if (!(period > 0.0)) throw DomainError("LeVeque period must be positive");
        AmbientVelocity v;
        v.kind_ = Kind::LeVeque;
        v.period_ = period;
        return v;
    }

    static AmbientVelocity zero() { return AmbientVelocity{}; }

    static AmbientVelocity user(Evaluator f)
    {
        if (!f) throw DomainError("user velocity needs an evaluator");
        AmbientVelocity v;
        v.kind_ = Kind::UserAnalytic;
        v.user_ = std::move(f);
        return v;
    }

    Kind kind() const { return kind_; }
    double period() const { return period_; }

    template <class T>
    std::array<T, 3> operator()(const std::array<T, 3>& x, double t) const
    {
        switch (kind_) {
        case Kind::LeVeque:
            return leveque_velocity(x, t, period_);
        case Kind::StaticZero:
            return {T{}, T{}, T{}};
        case Kind::UserAnalytic:
            break;
        }
        if constexpr (std::is_same_v<T, Jet<3>>) {
            return user_(x, t);
        } else if constexpr (std::is_same_v<T, double>) {
            const JetPoint3 v = user_({Jet<3>(x[0]), Jet<3>(x[1]), Jet<3>(x[2])}, t);
            return {v[0].c[0], v[1].c[0], v[2].c[0]};
        } else {
            throw DomainError("user velocity supports double and Jet<3> coordinates only");
        }
    }

private:
    Kind kind_ = Kind::StaticZero;
    double period_ = 0.0;
    Evaluator user_;
};

/**
 * Displacement of the RK4 integration of dx/ds = v(x, s) from s = t0 over a
 * signed time span, split into `substeps` classical RK4 steps.
 */
template <class T>
std::array<T, 3> rk4_displacement(const AmbientVelocity& v, const std::array<T, 3>& x, double t0, double span,
                                  int substeps = 1)
{
    const double h = span / substeps;
    std::array<T, 3> d{T{}, T{}, T{}};
    auto at = [&](const std::array<T, 3>& dd, double scale, const std::array<T, 3>& k) {
        std::array<T, 3> y;
        for (int i = 0; i < 3; ++i) y[i] = x[i] + dd[i] + k[i] * scale;
        return y;
    };
    const std::array<T, 3> none{T{}, T{}, T{}};
    for (int s = 0; s < substeps; ++s) {
        const double t = t0 + s * h;
        const auto k1 = v(at(d, 0.0, none), t);
        const auto k2 = v(at(d, 0.5 * h, k1), t + 0.5 * h);
        const auto k3 = v(at(d, 0.5 * h, k2), t + 0.5 * h);
        const auto k4 = v(at(d, h, k3), t + h);
        for (int i = 0; i < 3; ++i) d[i] = d[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
    }
    return d;
}

/**
 * One-step map over [t, t+dt]: forward sends x(t) to x(t+dt), backward
 * integrates from t+dt back to t. Called with double or jet coordinates it
 * returns the displacement.
 */
struct OneStepDisplacement {
    AmbientVelocity velocity;
    double t = 0.0;
    double dt = 0.0;
    Direction direction = Direction::Forward;
    int substeps = 1;

    template <class T>
    std::array<T, 3> operator()(const std::array<T, 3>& x) const
    {
        return direction == Direction::Forward ? rk4_displacement(velocity, x, t, dt, substeps)
                                               : rk4_displacement(velocity, x, t + dt, -dt, substeps);
    }
};

inline OneStepDisplacement one_step_displacement(const AmbientVelocity& v, double t, double dt, Direction dir,
                                                 int substeps = 1)
{
    if (!(dt > 0.0)) throw DomainError("one_step_displacement: dt must be positive");
    if (substeps < 1) throw DomainError("one_step_displacement: substeps must be >= 1");
    return OneStepDisplacement{v, t, dt, dir, substeps};
}

struct AmbientOptions {
    int order = 1;
    double remap_threshold = 1e-3;
    int rk_substeps = 1;
    /// When set, every archived submap pair is written there as CMAP files.
    std::filesystem::path archive_dir;
    /// Keep archived submaps in memory (needed for chain evaluation).
    bool retain = true;
};

struct AmbientCheck {
    double t = 0.0;
    double error = 0.0;
    bool remapped = false;
};

struct AmbientMaps {
    SubmapChain<3> forward{Direction::Forward, 0.0};
    SubmapChain<3> backward{Direction::Backward, 0.0};
    GridSpec<3> grid;
    /// Composition error of the current submap pair after every step.
    std::vector<AmbientCheck> checks;
    std::size_t remaps = 0;
};

/**
 * Steps the forward/backward pair
 *   Phi_[tau,t+dt] = H[S_F o Phi_[tau,t]],  Phi_[t+dt,tau] = H[Phi_[t,tau] o S_B]
 * with RK4 one-step maps S_F, S_B. A step whose composition error exceeds the
 * threshold is rejected: the current pair is archived at t and the step is
 * redone from the identity.
 */
class AmbientEvolver {
public:
    AmbientEvolver(AmbientVelocity v, GridSpec<3> grid, AmbientOptions opt = {})
        : v_(std::move(v)), grid_(std::move(grid)), opt_(std::move(opt))
    {
        for (const Axis& a : grid_.axes()) {
            if (a.bc != Boundary::Periodic) throw DomainError("ambient grid must be periodic");
            if (a.layout != Layout::Nodal) throw DomainError("ambient grid must be nodal");
        }
        if (opt_.order != 0 && opt_.order != 1) throw DomainError("ambient order must be 0 or 1");
        if (!(opt_.remap_threshold > 0.0)) throw DomainError("remap threshold must be positive");
        archived_.grid = grid_;
        fwd_ = MapField<3>::identity(grid_, opt_.order);
        bwd_ = fwd_;
        if (!opt_.archive_dir.empty()) std::filesystem::create_directories(opt_.archive_dir);
    }

    double time() const { return t_; }
    const MapField<3>& current_forward() const { return fwd_; }
    const MapField<3>& current_backward() const { return bwd_; }
    const std::vector<AmbientCheck>& checks() const { return archived_.checks; }
    std::size_t remaps() const { return archived_.remaps; }

    void step(double dt)
    {
        if (!(dt > 0.0)) throw DomainError("ambient step: dt must be positive");
        if (v_.kind() == AmbientVelocity::Kind::StaticZero) {
            t_ += dt;
            archived_.checks.push_back({t_, 0.0, false});
            return;
        }
        auto [f, b] = advance_pair(fwd_, bwd_, dt);
        double err = error_of(f, b);
        bool remapped = false;
        if (err > opt_.remap_threshold && !(fwd_.is_identity() && bwd_.is_identity())) {
            archive();
            const MapField<3> id = MapField<3>::identity(grid_, opt_.order);
            std::tie(f, b) = advance_pair(id, id, dt);
            err = error_of(f, b);
            remapped = true;
        }
        fwd_ = std::move(f);
        bwd_ = std::move(b);
        t_ += dt;
        archived_.checks.push_back({t_, err, remapped});
    }

    /// Phi_F(x, t): archived forward maps, oldest first, then the current one.
    template <class T>
    std::array<T, 3> forward(const std::array<T, 3>& x) const
    {
        return fwd_(archived_.forward(x));
    }

    /// Phi_B(x, t): the current backward map first, then archived ones newest first.
    template <class T>
    std::array<T, 3> backward(const std::array<T, 3>& x) const
    {
        return archived_.backward(bwd_(x));
    }

    /// Archived submaps plus the current pair as closed chains ending at t.
    AmbientMaps maps() const
    {
        AmbientMaps m = archived_;
        if (!fwd_.is_identity() || !bwd_.is_identity() || m.forward.empty()) {
            m.forward.append(fwd_, t_);
            m.backward.append(bwd_, t_);
        }
        return m;
    }

private:
    std::pair<MapField<3>, MapField<3>> advance_pair(const MapField<3>& f, const MapField<3>& b, double dt) const
    {
        const OneStepDisplacement sf = one_step_displacement(v_, t_, dt, Direction::Forward, opt_.rk_substeps);
        const OneStepDisplacement sb = one_step_displacement(v_, t_, dt, Direction::Backward, opt_.rk_substeps);
        MapField<3> nf = project_displacement<3>(grid_, opt_.order, [&](const auto& x) {
            auto d = f.displacement(x);
            auto y = x;
            for (int k = 0; k < 3; ++k) y[k] = y[k] + d[k];
            const auto s = sf(y);
            for (int k = 0; k < 3; ++k) d[k] = d[k] + s[k];
            return d;
        });
        MapField<3> nb = project_displacement<3>(grid_, opt_.order, [&](const auto& x) {
            return compose_displacement<3>(b, x, sb(x));
        });
        return {std::move(nf), std::move(nb)};
    }

    double error_of(const MapField<3>& f, const MapField<3>& b) const
    {
        return composition_error<3>(f, b, default_samples<3>(), grid_.boundaries());
    }

    void archive()
    {
        if (!opt_.archive_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "submap_%03zu", archived_.remaps);
            const std::string stem = (opt_.archive_dir / name).string();
            std::ofstream f(stem + "_forward.cmap", std::ios::binary), b(stem + "_backward.cmap", std::ios::binary);
            if (!f || !b) throw Error("cannot write submap archive " + stem);
            save(fwd_, f);
            save(bwd_, b);
        }
        if (opt_.retain) {
            archived_.forward.append(fwd_, t_);
            archived_.backward.append(bwd_, t_);
        }
        ++archived_.remaps;
    }

    AmbientVelocity v_;
    GridSpec<3> grid_;
    AmbientOptions opt_;
    AmbientMaps archived_;
    MapField<3> fwd_, bwd_;
    double t_ = 0.0;
};

/// Evolves the pair over [0, T] with a fixed step (the last step is shortened to land on T).
inline AmbientMaps evolve_pair(const AmbientVelocity& v, double T, double dt, const GridSpec<3>& grid,
                               AmbientOptions opt = {})
{
    if (!(T > 0.0)) throw DomainError("evolve_pair: T must be positive");
    if (!(dt > 0.0)) throw DomainError("evolve_pair: dt must be positive");
    AmbientEvolver ev(v, grid, std::move(opt));
    const long steps = std::lround(std::ceil(T / dt - 1e-9));
    for (long n = 0; n < steps; ++n) ev.step(std::min(dt, T - ev.time()));
    return ev.maps();
}

} // namespace cmflow
