#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"
#include "cmflow/surface.hpp"

namespace cmflow {

/// Shortest round-trip decimal form used by every text artifact.
inline std::string fmt17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    return os;
}

inline void write_ply(std::ostream& os, const std::vector<Vec3>& points)
{
    os << "ply\nformat ascii 1.0\nelement vertex " << points.size()
       << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    for (const Vec3& p : points) os << fmt17(p[0]) << ' ' << fmt17(p[1]) << ' ' << fmt17(p[2]) << '\n';
}

/**
 * Mesh of Q over a structured grid of `cells` intervals per parameter axis.
 * Periodic axes reuse their first vertex row; surfaces get two triangles
 * per quad and curves a polyline.
 */
template <int P, class Q>
void write_obj(std::ostream& os, const Q& q, const std::array<Boundary, P>& bcs, int cells)
{
    if (cells < 1) throw DomainError("mesh needs at least one cell");
    std::array<int, P> nv;
    for (int k = 0; k < P; ++k) nv[k] = bcs[k] == Boundary::Periodic ? cells : cells + 1;
    auto vertex = [&](const std::array<double, P>& y) {
        const Vec3 p = q(y);
        os << "v " << fmt17(p[0]) << ' ' << fmt17(p[1]) << ' ' << fmt17(p[2]) << '\n';
    };
    // 1-based index of parameter node (i, j) with periodic wrap.
    auto index = [&](int i, int j) {
        i %= nv[0];
        if constexpr (P == 2) {
            j %= nv[1];
            return 1 + i * nv[1] + j;
        } else {
            (void)j;
            return 1 + i;
        }
    };
    if constexpr (P == 1) {
        for (int i = 0; i < nv[0]; ++i) vertex({static_cast<double>(i) / cells});
        os << 'l';
        for (int i = 0; i <= cells; ++i) os << ' ' << index(i, 0);
        os << '\n';
    } else {
        for (int i = 0; i < nv[0]; ++i)
            for (int j = 0; j < nv[1]; ++j) vertex({static_cast<double>(i) / cells, static_cast<double>(j) / cells});
        for (int i = 0; i < cells; ++i)
            for (int j = 0; j < cells; ++j) {
                const int a = index(i, j), b = index(i + 1, j), c = index(i + 1, j + 1), d = index(i, j + 1);
                os << "f " << a << ' ' << b << ' ' << c << "\nf " << a << ' ' << c << ' ' << d << '\n';
            }
    }
}

struct StatsRow {
    std::string label;
    RedistStats stats;
};

inline void write_stats_csv(std::ostream& os, const std::vector<StatsRow>& rows)
{
    os << "label,sigma,median,cells\n";
    for (const StatsRow& r : rows) {
        os << r.label << ',' << fmt17(r.stats.sigma) << ',' << fmt17(r.stats.median) << ',' << r.stats.cell_count
           << '\n';
    }
}

/// The overflow bin is written with bin_hi = inf.
inline void write_histogram_csv(std::ostream& os, const RedistStats& s)
{
    os << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < s.histogram.size(); ++b) {
        // b / 10 rather than b * 0.1 so the edges print as 0.3, not 0.30000000000000004.
        const double per_unit = 1.0 / RedistStats::kHistWidth;
        const bool overflow = b + 1 == s.histogram.size();
        os << fmt17(b / per_unit) << ',' << (overflow ? std::string("inf") : fmt17((b + 1) / per_unit)) << ','
           << s.histogram[b] << '\n';
    }
}

} // namespace cmflow
