#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "cmflow/surface.hpp"

using namespace cmflow;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 plus(const Vec3& x, const Vec3& d, double s) { return {x[0] + s * d[0], x[1] + s * d[1], x[2] + s * d[2]}; }

double dist(const Vec3& a, const Vec3& b)
{
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

// Trajectory oracle: fine classical RK4 on the analytic field.
Vec3 trajectory(Vec3 x, double T, int steps)
{
    const double h = T / steps;
    for (int s = 0; s < steps; ++s) {
        const double t = s * h;
        const Vec3 k1 = leveque_velocity(x, t, 3.0);
        const Vec3 k2 = leveque_velocity(plus(x, k1, 0.5 * h), t + 0.5 * h, 3.0);
        const Vec3 k3 = leveque_velocity(plus(x, k2, 0.5 * h), t + 0.5 * h, 3.0);
        const Vec3 k4 = leveque_velocity(plus(x, k3, h), t + h, 3.0);
        for (int k = 0; k < 3; ++k) x[k] += h / 6.0 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]);
    }
    return x;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]}, v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const Vec3 n{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    return 0.5 * std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
}

Vec3 at(const Chart<2>& c, double y0, double y1) { return c(std::array<double, 2>{y0, y1}); }

Chart<2> unit_square()
{
    return Chart<2>::rectangle("unit", {0, 0, 0}, {1, 0, 0}, {0, 1, 0});
}

/// Rectangle advected on a 16^3 ambient pair with redistribution on 32^2, snapshots at 0.75 and 1.5.
struct RectangleRun {
    std::map<double, Parametrization<2>> snap;
    std::vector<TraceRow> log;
    DensityAudit audit;

    RectangleRun()
    {
        AmbientEvolver ev(AmbientVelocity::leveque(3.0), GridSpec<3>::nodal(16, Boundary::Periodic));
        ReparamOptions opt;
        opt.cells = 32;
        std::vector<Reparametrizer<1>> curves;
        std::vector<Reparametrizer<2>> surfaces{Reparametrizer<2>(surface_catalog()[0], opt)};
        advect_and_reparametrize(ev, 1.5, 1.0 / 24, curves, surfaces, {0.75, 1.5},
                                 [&](double t, AmbientEvolver& a, auto&, auto& s) {
                                     auto amb = std::make_shared<const SubmapChain<3>>(a.maps().forward);
                                     snap.emplace(t, s[0].snapshot(amb, t));
                                 });
        log = surfaces[0].density_log();
        audit = surfaces[0].audit();
    }
};

const RectangleRun& rectangle_run()
{
    static const RectangleRun run;
    return run;
}

} // namespace

TEST(Chart, RectangleCornerAndJacobian)
{
    const Chart<2> c = surface_catalog()[0];
    const auto p = chart_eval<2>(c, {0.0, 0.0});
    EXPECT_EQ(p.position, c.origin);
    for (int i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(p.jacobian[i][0], c.e1[i]);
        EXPECT_DOUBLE_EQ(p.jacobian[i][1], c.e2[i]);
    }
}

TEST(Chart, CircleQuarterTurnAndSpeed)
{
    const Chart<1> c = Chart<1>::circle("c", {0.5, 0.5, 0.5}, 0.2, {0, 0, 1});
    const auto p = chart_eval<1>(c, {0.25});
    EXPECT_NEAR(p.position[0], 0.5, 1e-15);
    EXPECT_NEAR(p.position[1], 0.7, 1e-15);
    EXPECT_NEAR(p.position[2], 0.5, 1e-15);
    const double speed = std::hypot(p.jacobian[0][0], p.jacobian[1][0], p.jacobian[2][0]);
    EXPECT_NEAR(speed, 2 * kPi * 0.2, 1e-14);
}

TEST(Chart, TopologyMatchesBoundaries)
{
    const auto curves = curve_catalog();
    for (int i = 0; i < 3; ++i) EXPECT_EQ(curves[i].bcs[0], Boundary::Neumann);
    EXPECT_EQ(curves[3].bcs[0], Boundary::Periodic);
    const auto s = surface_catalog();
    EXPECT_EQ(s[0].bcs, (std::array{Boundary::Neumann, Boundary::Neumann}));
    EXPECT_EQ(s[1].bcs, (std::array{Boundary::Periodic, Boundary::Periodic}));
    EXPECT_EQ(s[2].bcs, (std::array{Boundary::Periodic, Boundary::Neumann}));
}

TEST(Chart, RejectsOutsideNeumannRange)
{
    EXPECT_THROW(chart_eval<2>(surface_catalog()[0], {1.5, 0.5}), DomainError);
    EXPECT_NO_THROW(chart_eval<2>(surface_catalog()[1], {1.5, -0.5}));
    EXPECT_THROW(Chart<2>::torus("t", {0, 0, 0}, 0.1, 0.2, {0, 0, 1}), DomainError);
}

TEST(AreaElement, FlatAndCircleWithIdentityChains)
{
    const Parametrization<2> flat{unit_square()};
    const Parametrization<1> circle{Chart<1>::circle("c", {0.5, 0.5, 0.5}, 0.2, {0, 0, 1})};
    for (double y : {0.0, 0.3, 0.77, 1.0}) {
        EXPECT_NEAR(area_element<2>(flat, {y, 1 - y}), 1.0, 1e-15);
        EXPECT_NEAR(area_element<1>(circle, {y}), 2 * kPi * 0.2, 1e-14);
    }
}

TEST(AreaElement, TorusFirstFundamentalForm)
{
    const Parametrization<2> torus{surface_catalog()[1]};
    const double R = 0.16, r = 0.08;
    for (double v : {0.0, 0.1, 0.45, 0.9}) {
        const double exact = 4 * kPi * kPi * r * (R + r * std::cos(2 * kPi * v));
        EXPECT_NEAR(area_element<2>(torus, {0.37, v}), exact, 1e-14);
    }
}

TEST(AreaElement, DegenerateFormAborts)
{
    // A flow that collapses everything onto a point in z and y.
    auto squash = std::make_shared<SubmapChain<3>>(Direction::Forward, 0.0);
    const auto g = GridSpec<3>::nodal(4, Boundary::Periodic);
    squash->append(project_displacement<3>(g, 0, [](const auto& x) {
        auto d = x;
        d[0] = x[0] * 0.0;
        d[1] = x[1] * -1.0;
        d[2] = x[2] * -1.0;
        return d;
    }), 1.0);
    const Parametrization<2> p{Chart<2>::rectangle("r", {0.1, 0.1, 0.1}, {0, 0.5, 0}, {0, 0, 0.5}), squash};
    EXPECT_THROW(area_element<2>(p, {0.5, 0.5}), NumericalAbort);
}

TEST(NormalizedDensity, EquiarealChartsAreUniform)
{
    const auto dual1 = param_grid<1>(64, {Boundary::Periodic}).dual();
    const auto dual2 = param_grid<2>(32, {Boundary::Neumann, Boundary::Neumann}).dual();
    const auto [rc, ac] = normalized_density<1>(Parametrization<1>{curve_catalog()[3]}, dual1);
    const auto [rr, ar] = normalized_density<2>(Parametrization<2>{surface_catalog()[0]}, dual2);
    for (double v : rc.values) EXPECT_NEAR(v, 1.0, 1e-13);
    for (double v : rr.values) EXPECT_NEAR(v, 1.0, 1e-13);
    EXPECT_NEAR(ac, 2 * kPi * 0.2, 1e-13);
    EXPECT_NEAR(ar, 0.4 * std::sqrt(2 * 0.28 * 0.28), 1e-14);
}

TEST(NormalizedDensity, TorusMatchesAnalyticDensity)
{
    // The discrete mean of cos over a full period vanishes, so the match is exact up to round-off.
    for (int n : {16, 32, 64}) {
        const auto dual = param_grid<2>(n, {Boundary::Periodic, Boundary::Periodic}).dual();
        const auto [rho, area] = normalized_density<2>(Parametrization<2>{surface_catalog()[1]}, dual);
        double err = 0.0;
        for (std::size_t i = 0; i < dual.node_count(); ++i) {
            const double v = dual.position(i)[1];
            err = std::max(err, std::abs(rho.values[i] - (1 + 0.5 * std::cos(2 * kPi * v))));
        }
        EXPECT_LE(err, 1e-12);
        EXPECT_NEAR(area, 4 * kPi * kPi * 0.16 * 0.08, 1e-12);
        EXPECT_NEAR(rho.mass(), 1.0, 1e-13);
    }
}

TEST(Reparametrize, StaticEquiarealChartStaysIdentity)
{
    ReparamOptions opt;
    opt.cells = 16;
    Reparametrizer<2> r(surface_catalog()[0], opt);
    auto id = [](const auto& x) { return x; };
    for (int n = 0; n < 5; ++n) r.step(id, n * 0.05, 0.05);
    EXPECT_TRUE(r.stepper().current().is_identity());
}

TEST(Reparametrize, StaticTorusConvergesToUniform)
{
    ReparamOptions opt;
    opt.cells = 32;
    Reparametrizer<2> r(surface_catalog()[1], opt);
    auto id = [](const auto& x) { return x; };
    std::vector<double> dev;
    for (int n = 0; n < 6; ++n) {
        const auto rho = r.density(id);
        dev.push_back(l2_deviation(rho));
        r.step_with(rho, n / 24.0, 1.0 / 24);
    }
    for (std::size_t i = 1; i < dev.size(); ++i) EXPECT_LT(dev[i], 0.5 * dev[i - 1]);
    // The continuous flow damps the lowest mode by exp(-4 pi^2 nu dt) per step; the linear
    // map stalls at its O(h^2) interpolation floor.
    const double h = 1.0 / 32;
    EXPECT_LT(dev.back(), 2 * h * h * dev.front());
}

TEST(QEval, IdentityChainsGiveChartPosition)
{
    const Parametrization<2> p{surface_catalog()[2]};
    for (double u : {0.1, 0.6}) EXPECT_EQ(q_eval<2>(p, {u, 0.3}), chart_eval<2>(p.chart, {u, 0.3}).position);
}

TEST(QEval, TranslatedParameterOnPeriodicChart)
{
    Parametrization<2> p{surface_catalog()[1]};
    const auto g = param_grid<2>(8, p.chart.bcs);
    const double c0 = 0.125, c1 = -0.25;
    p.redist.append(project_displacement<2>(g, 1, [&](const auto& y) {
        auto d = y;
        d[0] = y[0] * 0.0 + c0;
        d[1] = y[1] * 0.0 + c1;
        return d;
    }), 1.0);
    for (double u : {0.1, 0.55, 0.9}) {
        const Vec3 q = q_eval<2>(p, {u, 0.4});
        const Vec3 e = chart_eval<2>(p.chart, {u + c0, 0.4 + c1}).position;
        EXPECT_LE(dist(q, e), 1e-14);
    }
}

TEST(QEval, PositionInvarianceIsExact)
{
    const Parametrization<2>& q = rectangle_run().snap.at(1.5);
    const Parametrization<2> p = q.original();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const std::array<double, 2> y{u(rng), u(rng)};
        std::array<double, 2> pre = q.pre(y);
        for (double& v : pre) v = std::clamp(v, 0.0, 1.0);
        EXPECT_EQ(q_eval<2>(q, y), q_eval<2>(p, pre));
    }
}

TEST(QEval, PointsLieOnTheAdvectedSurface)
{
    for (double t : {0.75, 1.5}) {
        const Parametrization<2>& q = rectangle_run().snap.at(t);
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double err = 0.0;
        for (int i = 0; i < 200; ++i) {
            const std::array<double, 2> y{u(rng), u(rng)};
            std::array<double, 2> pre = q.pre(y);
            for (double& v : pre) v = std::clamp(v, 0.0, 1.0);
            // The exact surface point with the same material label bounds the distance to S_t.
            const Vec3 exact = trajectory(q.chart(pre), t, 400);
            err = std::max(err, dist(q_eval<2>(q, y), exact));
        }
        EXPECT_LE(err, 5e-3) << "t = " << t;
    }
}

TEST(AreaElement, SurfaceAreaMatchesTriangulation)
{
    const Parametrization<2> p = rectangle_run().snap.at(0.75).original();
    const int n = 256;
    std::vector<Vec3> pts((n + 1) * (n + 1));
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) pts[i * (n + 1) + j] = trajectory(at(p.chart, double(i) / n, double(j) / n), 0.75, 72);
    double tri = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Vec3 &a = pts[i * (n + 1) + j], &b = pts[(i + 1) * (n + 1) + j];
            const Vec3 &c = pts[(i + 1) * (n + 1) + j + 1], &d = pts[i * (n + 1) + j + 1];
            tri += triangle_area(a, b, c) + triangle_area(a, c, d);
        }
    const auto [rho, area] = normalized_density<2>(p, param_grid<2>(128, p.chart.bcs).dual());
    EXPECT_NEAR(area / tri, 1.0, 1e-2);
}

TEST(NormalizedDensity, RectangleWithoutRedistributionIsStronglyNonuniform)
{
    const Parametrization<2> p = rectangle_run().snap.at(1.5).original();
    const auto [rho, area] = normalized_density<2>(p, param_grid<2>(32, p.chart.bcs).dual());
    EXPECT_GT(rho.max() / rho.min(), 10.0);
    // Same ratio from particle-integrated cells: compare areas of two far-apart cells.
    auto cell_area = [&](double y0, double y1) {
        const double h = 1.0 / 32;
        const Vec3 a = trajectory(at(p.chart, y0, y1), 1.5, 200), b = trajectory(at(p.chart, y0 + h, y1), 1.5, 200);
        const Vec3 c = trajectory(at(p.chart, y0 + h, y1 + h), 1.5, 200), d = trajectory(at(p.chart, y0, y1 + h), 1.5, 200);
        return triangle_area(a, b, c) + triangle_area(a, c, d);
    };
    double lo = 1e300, hi = 0.0;
    for (int i = 0; i < 32; i += 4)
        for (int j = 0; j < 32; j += 4) {
            const double a = cell_area(i / 32.0, j / 32.0);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
    EXPECT_GT(hi / lo, 10.0);
}

TEST(Sample, ReproducibleWithSeed)
{
    const Parametrization<2>& q = rectangle_run().snap.at(1.5);
    EXPECT_EQ(sample<2>(q, 1, 42), sample<2>(q, 1, 42));
    EXPECT_NE(sample<2>(q, 1, 42), sample<2>(q, 1, 43));
    EXPECT_THROW(sample<2>(q, 0, 1), DomainError);
}

TEST(Sample, UniformOnEquiarealChart)
{
    // Chi-square test of cell occupancy on the unit square (identity chart).
    const int cells = 10, k = cells * cells;
    const std::size_t n = 100000;
    const auto pts = sample<2>(Parametrization<2>{unit_square()}, n, 7);
    std::vector<double> count(k, 0.0);
    for (const Vec3& p : pts) {
        const int i = std::min(cells - 1, static_cast<int>(p[0] * cells));
        const int j = std::min(cells - 1, static_cast<int>(p[1] * cells));
        count[i * cells + j] += 1.0;
    }
    const double expect = double(n) / k;
    double chi2 = 0.0;
    for (double c : count) chi2 += (c - expect) * (c - expect) / expect;
    // Wilson-Hilferty 99% quantile of chi-square with k - 1 degrees of freedom.
    const double df = k - 1, z99 = 2.3263478740408408;
    const double crit = df * std::pow(1 - 2 / (9 * df) + z99 * std::sqrt(2 / (9 * df)), 3);
    EXPECT_LT(chi2, crit);
}

TEST(Sample, RedistributedRectangleSamplesMoreUniformly)
{
    const Parametrization<2>& q = rectangle_run().snap.at(1.5);
    const std::size_t n = 100000;
    const int cells = 8;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> count(cells * cells, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        const int i = std::min(cells - 1, static_cast<int>(u(rng) * cells));
        const int j = std::min(cells - 1, static_cast<int>(u(rng) * cells));
        count[i * cells + j] += 1.0;
    }
    // Occupancy of each parameter cell relative to the share of surface area it maps to.
    auto cv_of = [&](const Parametrization<2>& p) {
        const int sub = 16;
        std::vector<double> area(count.size(), 0.0);
        double total = 0.0;
        for (int i = 0; i < cells; ++i)
            for (int j = 0; j < cells; ++j) {
                for (int a = 0; a < sub; ++a)
                    for (int b = 0; b < sub; ++b)
                        area[i * cells + j] +=
                            area_element<2>(p, {(i + (a + 0.5) / sub) / cells, (j + (b + 0.5) / sub) / cells});
                total += area[i * cells + j];
            }
        std::vector<double> ratio(count.size());
        for (std::size_t c = 0; c < count.size(); ++c) ratio[c] = count[c] / (n * area[c] / total);
        return stats_of(ratio).sigma;
    };
    const double cv_p = cv_of(q.original()), cv_q = cv_of(q);
    const double poisson = 1.0 / std::sqrt(double(n) / count.size());
    EXPECT_GT(cv_p, 10 * poisson);
    EXPECT_LT(cv_q, 0.25 * cv_p);
}

TEST(CellStats, UniformAndMeanOne)
{
    const Parametrization<2> flat{unit_square()};
    const auto s = cell_stats<2>(flat, GridSpec<2>::cell_centers({32, 32}, {Boundary::Neumann, Boundary::Neumann}));
    EXPECT_EQ(s.sigma, 0.0);
    EXPECT_EQ(s.median, 1.0);
    EXPECT_NEAR(s.mean, 1.0, 1e-12);
    std::size_t sum = 0;
    for (auto c : s.histogram) sum += c;
    EXPECT_EQ(sum, s.cell_count);
    EXPECT_EQ(s.histogram.size(), 51u);
}

TEST(CellStats, TorusSigmaTendsToAnalyticValue)
{
    const Parametrization<2> torus{surface_catalog()[1]};
    const double exact = 0.5 / std::sqrt(2.0);
    double prev_err = 1.0;
    for (int n : {8, 32, 128}) {
        const auto s = cell_stats<2>(torus, GridSpec<2>::cell_centers({n, n}, torus.chart.bcs));
        const double err = std::abs(s.sigma - exact);
        EXPECT_LE(err, prev_err);
        prev_err = err;
        EXPECT_NEAR(s.mean, 1.0, 1e-12);
    }
    EXPECT_LT(prev_err, 2e-3);
}

TEST(CellStats, HistogramAndMedianFromValues)
{
    const RedistStats s = stats_of({0.5, 1.5, 2.5, 3.5, 4.5, 47.5});
    // normalized by the mean 10: 0.05 0.15 0.25 0.35 0.45 4.75
    EXPECT_NEAR(s.median, 0.3, 1e-15);
    for (std::size_t b : {0u, 1u, 2u, 3u, 4u, 47u}) EXPECT_EQ(s.histogram[b], 1u) << b;
    EXPECT_EQ(s.histogram.back(), 0u);
    EXPECT_NEAR(s.mean, 1.0, 1e-15);
    const RedistStats over = stats_of({1, 1, 1, 1, 1, 1, 1, 1, 1, 100});
    EXPECT_EQ(over.histogram.back(), 1u); // 100 / 10.9 > 5
    EXPECT_EQ(over.histogram[0], 9u);
    EXPECT_THROW(stats_of({}), DomainError);
}

TEST(CellStats, AdvectedCircleIsCompressionDominated)
{
    AmbientEvolver ev(AmbientVelocity::leveque(3.0), GridSpec<3>::nodal(16, Boundary::Periodic));
    for (int n = 0; n < 36; ++n) ev.step(1.0 / 24);
    const Parametrization<1> p{curve_catalog()[3], std::make_shared<const SubmapChain<3>>(ev.maps().forward)};
    const auto s = cell_stats<1>(p, GridSpec<1>::cell_centers({1024}, p.chart.bcs));
    EXPECT_GT(s.sigma, 0.3);
    EXPECT_LT(s.median - 1, 0.0);
}

TEST(CellStats, RedistributionShrinksSigma)
{
    const Parametrization<2>& q = rectangle_run().snap.at(1.5);
    const auto grid = GridSpec<2>::cell_centers({32, 32}, q.chart.bcs);
    const auto sq = cell_stats<2>(q, grid), sp = cell_stats<2>(q.original(), grid);
    EXPECT_GT(sp.sigma, 0.5);
    EXPECT_LT(sq.sigma * 10, sp.sigma);
}

TEST(AreaGrowth, RateMatchesTangentialDivergence)
{
    // d/dt log A at fixed parameters versus tr(Pi grad v) from the analytic Jacobian.
    const Chart<2> chart = surface_catalog()[1];
    AmbientEvolver ev(AmbientVelocity::leveque(3.0), GridSpec<3>::nodal(16, Boundary::Periodic));
    const double dt = 1.0 / 48;
    for (int n = 0; n < 12; ++n) ev.step(dt);
    auto area_now = [&](const std::array<double, 2>& y) {
        return detail::area_element<2>(chart, [&](const auto& x) { return ev.forward(x); },
                                       [](const auto& u) { return u; }, y);
    };
    const std::vector<std::array<double, 2>> ys{{0.1, 0.2}, {0.4, 0.7}, {0.8, 0.35}, {0.65, 0.9}};
    std::vector<double> a0;
    for (const auto& y : ys) a0.push_back(area_now(y));
    const double t_mid = ev.time() + 0.5 * dt;
    ev.step(dt);
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double rate = (std::log(area_now(ys[i])) - std::log(a0[i])) / dt;
        // Tangent frame and point at the midpoint time from the exact trajectory.
        std::array<Jet<2>, 2> yj{Jet<2>::seed(ys[i][0], 0), Jet<2>::seed(ys[i][1], 1)};
        const auto pj = chart(yj);
        const double h = 1e-6;
        Vec3 x = trajectory({pj[0].c[0], pj[1].c[0], pj[2].c[0]}, t_mid, 200);
        Vec3 t1, t2;
        for (int a = 0; a < 2; ++a) {
            std::array<double, 2> yp = ys[i], ym = ys[i];
            yp[a] += h;
            ym[a] -= h;
            const Vec3 xp = trajectory(chart(yp), t_mid, 200), xm = trajectory(chart(ym), t_mid, 200);
            Vec3& tv = a == 0 ? t1 : t2;
            for (int k = 0; k < 3; ++k) tv[k] = (xp[k] - xm[k]) / (2 * h);
        }
        // Projection onto span{t1, t2}: Pi = T (T^T T)^-1 T^T.
        const double g11 = t1[0] * t1[0] + t1[1] * t1[1] + t1[2] * t1[2];
        const double g22 = t2[0] * t2[0] + t2[1] * t2[1] + t2[2] * t2[2];
        const double g12 = t1[0] * t2[0] + t1[1] * t2[1] + t1[2] * t2[2];
        const double det = g11 * g22 - g12 * g12;
        JetPoint3 xj;
        for (int k = 0; k < 3; ++k) xj[k] = Jet<3>::seed(x[k], k);
        const JetPoint3 v = leveque_velocity(xj, t_mid, 3.0);
        double tr = 0.0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                const double pi_rc =
                    (t1[r] * (g22 * t1[c] - g12 * t2[c]) + t2[r] * (g11 * t2[c] - g12 * t1[c])) / det;
                tr += pi_rc * v[c].c[std::size_t{1} << r];
            }
        EXPECT_NEAR(rate, tr, 10 * (dt + 1.0 / 16)) << "y = " << ys[i][0] << "," << ys[i][1];
    }
}

TEST(Conservation, EveryDensityHasUnitMassAndStaysBounded)
{
    for (const TraceRow& r : rectangle_run().log) {
        EXPECT_NEAR(r.mass, 1.0, 1e-6);
        EXPECT_GT(r.rho_min, 0.0);
    }
}

TEST(Advect, StepsLandOnOutputTimes)
{
    AmbientEvolver ev(AmbientVelocity::zero(), GridSpec<3>::nodal(8, Boundary::Periodic));
    ReparamOptions opt;
    opt.cells = 8;
    std::vector<Reparametrizer<1>> curves{Reparametrizer<1>(curve_catalog()[0], opt)};
    std::vector<Reparametrizer<2>> surfaces;
    std::vector<std::pair<double, double>> seen;
    advect_and_reparametrize(ev, 1.0, 0.25, curves, surfaces, {0.6, 0.0, 1.0, 0.3},
                             [&](double t, AmbientEvolver& a, auto&, auto&) { seen.emplace_back(t, a.time()); });
    ASSERT_EQ(seen.size(), 4u);
    const double want[] = {0.0, 0.3, 0.6, 1.0};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(seen[i].first, want[i]);
        EXPECT_NEAR(seen[i].second, want[i], 1e-12);
    }
    // Grid times 0.25, 0.5, 0.75 plus the two output stops.
    EXPECT_EQ(ev.checks().size(), 6u);
    EXPECT_THROW(advect_and_reparametrize(ev, 1.0, 0.25, curves, surfaces, {1.5}, [](double, auto&, auto&, auto&) {}),
                 DomainError);
}

TEST(Conservation, AuditCoversOuterAndInnerDensities)
{
    const auto& run = rectangle_run();
    ASSERT_GT(run.audit.flows, 0u);
    EXPECT_LT(run.audit.mass_error, 1e-6);
    EXPECT_LT(run.audit.overshoot, 1e-3);
    EXPECT_EQ(run.audit.densities, run.log.size());
}
