#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cmflow/ambient.hpp"
#include "cmflow/map_io.hpp"

using namespace cmflow;

namespace {

constexpr double kP = 3.0;

std::vector<Vec3> random_points(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    return pts;
}

double periodic_gap(const Vec3& a, const Vec3& b)
{
    double g = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = a[k] - b[k];
        g = std::max(g, std::abs(d - std::round(d)));
    }
    return g;
}

Vec3 plus(const Vec3& x, const Vec3& d) { return {x[0] + d[0], x[1] + d[1], x[2] + d[2]}; }

// Independent fine-step integrator for trajectories: classical RK4 written out
// on the velocity values only.
Vec3 integrate(const AmbientVelocity& v, Vec3 x, double t0, double t1, int steps)
{
    const double h = (t1 - t0) / steps;
    for (int s = 0; s < steps; ++s) {
        const double t = t0 + s * h;
        const Vec3 k1 = v(x, t);
        const Vec3 k2 = v(plus(x, {0.5 * h * k1[0], 0.5 * h * k1[1], 0.5 * h * k1[2]}), t + 0.5 * h);
        const Vec3 k3 = v(plus(x, {0.5 * h * k2[0], 0.5 * h * k2[1], 0.5 * h * k2[2]}), t + 0.5 * h);
        const Vec3 k4 = v(plus(x, {h * k3[0], h * k3[1], h * k3[2]}), t + h);
        for (int k = 0; k < 3; ++k) x[k] += h / 6.0 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]);
    }
    return x;
}

GridSpec<3> cube(int n) { return GridSpec<3>::nodal(n, Boundary::Periodic); }

} // namespace

TEST(LeVeque, PrintedValueAtQuarterPoint)
{
    const Vec3 v = leveque_velocity(Vec3{0.25, 0.25, 0.25}, 0.0, kP);
    EXPECT_NEAR(v[0], 1.0, 1e-15);
    EXPECT_NEAR(v[1], -0.5, 1e-15);
    EXPECT_NEAR(v[2], -0.5, 1e-15);
}

TEST(LeVeque, VanishesAtHalfPeriod)
{
    for (const Vec3& x : random_points(50, 3)) {
        const Vec3 v = leveque_velocity(x, kP / 2, kP);
        for (double c : v) EXPECT_NEAR(c, 0.0, 1e-15);
    }
}

TEST(LeVeque, DivergenceFreeByCentralDifferences)
{
    const double h = 1e-5;
    for (const Vec3& x : random_points(100, 7)) {
        double div = 0.0;
        for (int k = 0; k < 3; ++k) {
            Vec3 a = x, b = x;
            a[k] += h;
            b[k] -= h;
            div += (leveque_velocity(a, 0.4, kP)[k] - leveque_velocity(b, 0.4, kP)[k]) / (2 * h);
        }
        EXPECT_LE(std::abs(div), 1e-6);
    }
}

TEST(LeVeque, JetDerivativesMatchDifferences)
{
    const Vec3 x{0.31, 0.62, 0.17};
    JetPoint3 xj;
    for (int k = 0; k < 3; ++k) xj[k] = Jet<3>::seed(x[k], k);
    const JetPoint3 v = leveque_velocity(xj, 0.2, kP);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        Vec3 a = x, b = x;
        a[k] += h;
        b[k] -= h;
        const Vec3 va = leveque_velocity(a, 0.2, kP), vb = leveque_velocity(b, 0.2, kP);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(v[i].c[1 << k], (va[i] - vb[i]) / (2 * h), 1e-8);
    }
}

TEST(OneStep, ZeroVelocityIsIdentity)
{
    const auto s = one_step_displacement(AmbientVelocity::zero(), 0.0, 0.1, Direction::Forward);
    const Vec3 d = s(Vec3{0.3, 0.4, 0.5});
    for (double c : d) EXPECT_EQ(c, 0.0);
}

TEST(OneStep, ConstantVelocityShiftsByDtC)
{
    const auto v = AmbientVelocity::user([](const JetPoint3& x, double) {
        return JetPoint3{x[0] * 0.0 + 0.5, x[1] * 0.0 - 0.25, x[2] * 0.0 + 1.0};
    });
    const double dt = 0.125;
    const Vec3 f = one_step_displacement(v, 0.0, dt, Direction::Forward)(Vec3{0.1, 0.2, 0.3});
    const Vec3 b = one_step_displacement(v, 0.0, dt, Direction::Backward)(Vec3{0.1, 0.2, 0.3});
    EXPECT_DOUBLE_EQ(f[0], dt * 0.5);
    EXPECT_DOUBLE_EQ(f[1], -dt * 0.25);
    EXPECT_DOUBLE_EQ(f[2], dt * 1.0);
    EXPECT_DOUBLE_EQ(b[0], -dt * 0.5);
    EXPECT_DOUBLE_EQ(b[1], dt * 0.25);
    EXPECT_DOUBLE_EQ(b[2], -dt * 1.0);
}

TEST(OneStep, RejectsNonpositiveDt)
{
    EXPECT_THROW(one_step_displacement(AmbientVelocity::zero(), 0.0, 0.0, Direction::Forward), DomainError);
}

TEST(OneStep, RoundTripDefect)
{
    const auto v = AmbientVelocity::leveque(kP);
    const double dt = 1.0 / 96, t = 0.7;
    const auto f = one_step_displacement(v, t, dt, Direction::Forward);
    const auto b = one_step_displacement(v, t, dt, Direction::Backward);
    double round_trip = 0.0;
    for (const Vec3& x : random_points(100, 11)) {
        const Vec3 y = plus(x, f(x));
        round_trip = std::max(round_trip, periodic_gap(plus(y, b(y)), x));
    }
    EXPECT_LE(round_trip, 1e-10);
}

// Local error against a dt/16 reference shrinks like dt^5 for both directions.
TEST(OneStep, LocalErrorIsFifthOrder)
{
    const auto v = AmbientVelocity::leveque(kP);
    const double t = 0.7;
    const auto pts = random_points(100, 13);
    auto local = [&](double dt, Direction dir) {
        const auto s = one_step_displacement(v, t, dt, dir);
        double e = 0.0;
        for (const Vec3& x : pts) {
            const Vec3 ref = dir == Direction::Forward ? integrate(v, x, t, t + dt, 16)
                                                       : integrate(v, x, t + dt, t, 16);
            e = std::max(e, periodic_gap(plus(x, s(x)), ref));
        }
        return e;
    };
    for (Direction dir : {Direction::Forward, Direction::Backward}) {
        const double order = std::log2(local(1.0 / 48, dir) / local(1.0 / 96, dir));
        EXPECT_GT(order, 4.5);
        EXPECT_LT(order, 5.5);
    }
}

TEST(EvolvePair, StaticZeroKeepsSingleIdentity)
{
    const AmbientMaps m = evolve_pair(AmbientVelocity::zero(), 0.5, 0.1, cube(8));
    ASSERT_EQ(m.forward.size(), 1u);
    ASSERT_EQ(m.backward.size(), 1u);
    EXPECT_TRUE(m.forward.maps[0].is_identity());
    EXPECT_TRUE(m.backward.maps[0].is_identity());
    EXPECT_EQ(m.remaps, 0u);
    for (const auto& c : m.checks) EXPECT_EQ(c.error, 0.0);
}

TEST(EvolvePair, RejectsBadArguments)
{
    EXPECT_THROW(evolve_pair(AmbientVelocity::zero(), 0.0, 0.1, cube(8)), DomainError);
    const auto neumann = GridSpec<3>::nodal(8, Boundary::Neumann);
    EXPECT_THROW(AmbientEvolver(AmbientVelocity::zero(), neumann), DomainError);
}

class LeVequePair : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        AmbientOptions opt;
        opt.remap_threshold = 2e-4;
        opt.archive_dir = std::filesystem::temp_directory_path() / "cmflow_ambient_archive";
        std::filesystem::remove_all(opt.archive_dir);
        archive = new std::filesystem::path(opt.archive_dir);
        maps = new AmbientMaps(evolve_pair(AmbientVelocity::leveque(kP), 0.5, 1.0 / 32, cube(16), opt));
    }
    static void TearDownTestSuite()
    {
        std::filesystem::remove_all(*archive);
        delete maps;
        delete archive;
    }
    static AmbientMaps* maps;
    static std::filesystem::path* archive;
};
AmbientMaps* LeVequePair::maps = nullptr;
std::filesystem::path* LeVequePair::archive = nullptr;

TEST_F(LeVequePair, ChainsShareTimesAndRemapped)
{
    EXPECT_GE(maps->remaps, 1u);
    EXPECT_EQ(maps->forward.times, maps->backward.times);
    EXPECT_EQ(maps->forward.size(), maps->remaps + 1);
    EXPECT_NEAR(maps->forward.times.back(), 0.5, 1e-12);
}

TEST_F(LeVequePair, CompositionErrorStaysBelowTwiceThreshold)
{
    for (const auto& c : maps->checks) EXPECT_LE(c.error, 2 * 2e-4) << "t = " << c.t;
}

TEST_F(LeVequePair, ChainsAreMutualInverses)
{
    double err = 0.0;
    for (const Vec3& x : random_points(200, 17)) {
        err = std::max(err, periodic_gap(chain_eval(maps->forward, chain_eval(maps->backward, x)), x));
    }
    EXPECT_LE(err, 2e-3);
}

TEST_F(LeVequePair, ForwardChainFollowsTrajectories)
{
    const auto v = AmbientVelocity::leveque(kP);
    double err = 0.0;
    for (const Vec3& x : random_points(200, 19)) {
        err = std::max(err, periodic_gap(chain_eval(maps->forward, x), integrate(v, x, 0.0, 0.5, 200)));
    }
    EXPECT_LE(err, 5e-3);
}

TEST_F(LeVequePair, JacobianDeterminantNearOne)
{
    const double h = 1.0 / 16;
    for (const Vec3& x : random_points(200, 23)) {
        JetPoint3 xj;
        for (int k = 0; k < 3; ++k) xj[k] = Jet<3>::seed(x[k], k);
        const double det = jet_determinant<3>(chain_eval(maps->forward, xj));
        EXPECT_GE(det, 1 - 10 * h);
        EXPECT_LE(det, 1 + 10 * h);
    }
}

TEST_F(LeVequePair, SymmetryPlaneIsInvariant)
{
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double off = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double a = u(rng), b = u(rng);
        const Vec3 y = chain_eval(maps->forward, Vec3{a, b, b});
        const double d = y[2] - y[1];
        off = std::max(off, std::abs(d - std::round(d)));
    }
    EXPECT_LE(off, 10.0 / 16);
}

TEST_F(LeVequePair, ArchivedFilesMatchMemory)
{
    ASSERT_GE(maps->remaps, 1u);
    std::ifstream f(*archive / "submap_000_forward.cmap", std::ios::binary);
    std::ifstream b(*archive / "submap_000_backward.cmap", std::ios::binary);
    ASSERT_TRUE(f && b);
    EXPECT_EQ(load_map<3>(f), maps->forward.maps[0]);
    EXPECT_EQ(load_map<3>(b), maps->backward.maps[0]);
}

TEST(EvolvePair, EvolverMatchesClosedChains)
{
    AmbientEvolver ev(AmbientVelocity::leveque(kP), cube(8), AmbientOptions{});
    for (int n = 0; n < 6; ++n) ev.step(1.0 / 24);
    const AmbientMaps m = ev.maps();
    for (const Vec3& x : random_points(20, 31)) {
        EXPECT_EQ(ev.forward(x), chain_eval(m.forward, x));
        EXPECT_EQ(ev.backward(x), chain_eval(m.backward, x));
    }
}
