#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "cmflow/grid.hpp"
#include "cmflow/hermite.hpp"

using namespace cmflow;

namespace {

constexpr double kPi = std::numbers::pi;

using cmflow::cos;
using cmflow::sin;
using std::cos;
using std::sin;

template <int D>
std::array<Boundary, D> all(Boundary b)
{
    std::array<Boundary, D> a;
    a.fill(b);
    return a;
}

double max_err_2d(const HermiteField<2>& f, int samples, MultiIndex<2> alpha, auto&& exact)
{
    double err = 0.0;
    for (int i = 0; i < samples; ++i)
        for (int j = 0; j < samples; ++j) {
            const Point<2> x{(i + 0.37) / samples, (j + 0.61) / samples};
            err = std::max(err, std::abs(f.eval(x, alpha) - exact(x)));
        }
    return err;
}

} // namespace

TEST(GridSpec, NodalSpacingFollowsBoundaryType)
{
    const auto p = GridSpec<1>::nodal(8, Boundary::Periodic);
    const auto n = GridSpec<1>::nodal(9, Boundary::Neumann);
    EXPECT_DOUBLE_EQ(p.axis(0).h, 1.0 / 8);
    EXPECT_DOUBLE_EQ(n.axis(0).h, 1.0 / 8);
    EXPECT_EQ(p.node_count(), 8u);
    EXPECT_DOUBLE_EQ(p.position(std::size_t{7})[0], 7.0 / 8);
    EXPECT_DOUBLE_EQ(n.position(std::size_t{8})[0], 1.0);
}

TEST(GridSpec, RejectsTinyAxes)
{
    EXPECT_THROW(GridSpec<2>::nodal({3, 8}, all<2>(Boundary::Periodic)), DomainError);
}

TEST(GridSpec, RowMajorLastAxisFastest)
{
    const auto g = GridSpec<3>::nodal({4, 5, 6}, all<3>(Boundary::Periodic));
    EXPECT_EQ(g.stride(2), 1u);
    EXPECT_EQ(g.stride(1), 6u);
    EXPECT_EQ(g.stride(0), 30u);
    const MultiIndex<3> idx{2, 3, 4};
    EXPECT_EQ(g.unflatten(g.flatten(idx)), idx);
}

TEST(DualGrid, PeriodicNodesAreMidpoints)
{
    const auto d = dual_of(GridSpec<1>::nodal(4, Boundary::Periodic));
    ASSERT_EQ(d.node_count(), 4u);
    const double expect[] = {1.0 / 8, 3.0 / 8, 5.0 / 8, 7.0 / 8};
    for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(d.position(std::size_t(i))[0], expect[i]);
}

TEST(DualGrid, NeumannHasOneFewerNode)
{
    const auto d = dual_of(GridSpec<1>::nodal(5, Boundary::Neumann));
    ASSERT_EQ(d.node_count(), 4u);
    const double expect[] = {1.0 / 8, 3.0 / 8, 5.0 / 8, 7.0 / 8};
    for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(d.position(std::size_t(i))[0], expect[i]);
}

TEST(DualGrid, Periodic2DCellCenters)
{
    const auto g = GridSpec<2>::nodal(4, Boundary::Periodic);
    const auto d = g.dual();
    ASSERT_EQ(d.node_count(), 16u);
    for (std::size_t i = 0; i < d.node_count(); ++i) {
        const auto idx = d.unflatten(i);
        const auto p = d.position(i);
        EXPECT_DOUBLE_EQ(p[0], g.position(idx)[0] + 0.125);
        EXPECT_DOUBLE_EQ(p[1], g.position(idx)[1] + 0.125);
    }
}

TEST(Project, ConstantReproduced)
{
    const auto g = GridSpec<2>::nodal(8, Boundary::Neumann);
    const auto f = project([](const auto& x) { return x[0] * 0.0 + 1.0; }, g, 1);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        EXPECT_EQ(f.data()[4 * i], 1.0);
        for (int s = 1; s < 4; ++s) EXPECT_EQ(f.data()[4 * i + s], 0.0);
    }
    for (double x : {0.0, 0.13, 0.5, 0.999, 1.0}) {
        EXPECT_NEAR(f.eval(Point<2>{x, 0.77}), 1.0, 1e-15);
        EXPECT_NEAR(f.eval(Point<2>{x, 0.77}, {1, 0}), 0.0, 1e-12);
    }
}

TEST(Project, LinearReproducedOnNeumannAxis)
{
    const auto g = GridSpec<1>::nodal(6, Boundary::Neumann);
    const auto f = project([](const auto& x) { return x[0]; }, g, 1);
    for (int i = 0; i <= 1000; ++i) {
        const double x = i / 1000.0;
        EXPECT_NEAR(f.eval(Point<1>{x}), x, 1e-15);
    }
}

TEST(Project, PerAxisCubicsReproduced)
{
    const auto g = GridSpec<2>::nodal(5, Boundary::Neumann);
    auto poly = [](const auto& x) { return (x[0] * x[0] * x[0] - x[0] * x[0]) * (x[1] * x[1] + 3.0 * x[1]); };
    const auto f = project(poly, g, 1);
    for (int i = 0; i <= 40; ++i)
        for (int j = 0; j <= 40; ++j) {
            const Point<2> x{i / 40.0, j / 40.0};
            EXPECT_NEAR(f.eval(x), poly(x), 1e-14);
        }
}

TEST(Project, MixedDerivativeOfBilinear)
{
    const auto g = GridSpec<2>::nodal(7, Boundary::Neumann);
    const auto f = project([](const auto& x) { return x[0] * x[1]; }, g, 1);
    for (int i = 0; i <= 20; ++i) {
        const Point<2> x{i / 20.0, std::fmod(i * 0.37, 1.0)};
        EXPECT_NEAR(f.eval(x, {1, 1}), 1.0, 1e-12);
    }
}

TEST(Project, RejectsNonFiniteSample)
{
    const auto g = GridSpec<1>::nodal(8, Boundary::Periodic);
    EXPECT_THROW(project([](const auto& x) { return x[0] * std::numeric_limits<double>::quiet_NaN(); }, g, 0),
                 DomainError);
}

TEST(Eval, RejectsOutOfDomainOnNeumannAxis)
{
    const auto g = GridSpec<1>::nodal(8, Boundary::Neumann);
    const auto f = project([](const auto& x) { return x[0]; }, g, 0);
    EXPECT_THROW(f.eval(Point<1>{1.01}), DomainError);
    EXPECT_THROW(f.eval(Point<1>{-0.2}), DomainError);
}

TEST(Eval, PeriodicAxesWrap)
{
    const auto g = GridSpec<1>::nodal(16, Boundary::Periodic);
    const auto f = project([](const auto& x) { return sin(2.0 * kPi * x[0]); }, g, 1);
    EXPECT_NEAR(f.eval(Point<1>{1.3}), f.eval(Point<1>{0.3}), 1e-14);
    EXPECT_NEAR(f.eval(Point<1>{-0.7}), f.eval(Point<1>{0.3}), 1e-14);
}

TEST(Eval, RejectsDerivativeAboveOrderPlusOne)
{
    const auto g = GridSpec<1>::nodal(8, Boundary::Periodic);
    const auto f0 = project([](const auto& x) { return x[0]; }, g, 0);
    const auto f1 = project([](const auto& x) { return x[0]; }, g, 1);
    EXPECT_NO_THROW(f0.eval(Point<1>{0.3}, {1}));
    EXPECT_THROW(f0.eval(Point<1>{0.3}, {2}), DomainError);
    EXPECT_NO_THROW(f1.eval(Point<1>{0.3}, {2}));
    EXPECT_THROW(f1.eval(Point<1>{0.3}, {3}), DomainError);
}

TEST(Eval, CubicValueErrorShrinksBySixteen)
{
    auto f = [](const auto& x) { return sin(2.0 * kPi * x[0]) * cos(2.0 * kPi * x[1]); };
    auto exact = [](const Point<2>& x) { return std::sin(2.0 * kPi * x[0]) * std::cos(2.0 * kPi * x[1]); };
    const auto a = project(f, GridSpec<2>::nodal(32, Boundary::Periodic), 1);
    const auto b = project(f, GridSpec<2>::nodal(64, Boundary::Periodic), 1);
    const double ratio = max_err_2d(a, 512, {0, 0}, exact) / max_err_2d(b, 512, {0, 0}, exact);
    EXPECT_GT(ratio, 16.0 * 0.75);
    EXPECT_LT(ratio, 16.0 * 1.25);
}

TEST(Eval, FirstDerivativeSuperconvergesAtCellCenters)
{
    auto err_at_centers = [](int n) {
        const auto g = GridSpec<1>::nodal(n, Boundary::Periodic);
        const auto f = project([](const auto& x) { return sin(2.0 * kPi * x[0]); }, g, 1);
        double e = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) / n;
            e = std::max(e, std::abs(f.eval(Point<1>{x}, {1}) - 2.0 * kPi * std::cos(2.0 * kPi * x)));
        }
        return e;
    };
    const double order = std::log2(err_at_centers(32) / err_at_centers(64));
    EXPECT_GE(order, 3.5);
}

TEST(Eval, CellCenteredNeumannMirrorsAcrossWalls)
{
    // cos(pi x) extends evenly across both walls, so a cell-centered field
    // with mirrored ghost nodes reproduces it to interpolation accuracy all
    // the way to the wall, where the normal derivative vanishes.
    auto err = [](int cells) {
        const auto d = GridSpec<1>::cell_centers({cells}, {Boundary::Neumann});
        const auto f = project([](const auto& x) { return cos(kPi * x[0]); }, d, 1);
        double e = 0.0;
        for (int i = 0; i <= 997; ++i) {
            const double x = i / 997.0;
            e = std::max(e, std::abs(f.eval(Point<1>{x}) - std::cos(kPi * x)));
        }
        EXPECT_NEAR(f.eval(Point<1>{0.0}, {1}), 0.0, 1e-12);
        EXPECT_NEAR(f.eval(Point<1>{1.0}, {1}), 0.0, 1e-12);
        return e;
    };
    const double order = std::log2(err(16) / err(32));
    EXPECT_GT(order, 3.5);
}

TEST(Eval, ContinuousAcrossCellFaces)
{
    const auto g = GridSpec<2>::nodal(8, Boundary::Periodic);
    auto f = [](const auto& x) { return sin(2.0 * kPi * x[0] + 0.3) * cos(2.0 * kPi * x[1]); };
    const auto f1 = project(f, g, 1);
    const auto f0 = project(f, g, 0);
    const double eps = 1e-7;
    for (int i = 0; i < 8; ++i) {
        const double face = i / 8.0;
        const Point<2> lo{face - eps, 0.41}, hi{face + eps, 0.41};
        EXPECT_NEAR(f0.eval(lo), f0.eval(hi), 1e-5);
        EXPECT_NEAR(f1.eval(lo), f1.eval(hi), 1e-5);
        EXPECT_NEAR(f1.eval(lo, {1, 0}), f1.eval(hi, {1, 0}), 1e-4);
        EXPECT_NEAR(f1.eval(lo, {0, 1}), f1.eval(hi, {0, 1}), 1e-4);
    }
}

TEST(Halton, PointsAreInsideOpenUnitBox)
{
    const auto pts = halton_points<3>(1024);
    ASSERT_EQ(pts.size(), 1024u);
    for (const auto& p : pts)
        for (double v : p) {
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 1.0);
        }
}
