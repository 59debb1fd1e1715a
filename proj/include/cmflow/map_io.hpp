#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cmflow/char_map.hpp"
#include "cmflow/errors.hpp"
#include "cmflow/grid.hpp"

namespace cmflow {

// Little-endian map archive:
//   "CMAP" | u32 version | u8 kind (0 map, 1 chain) | u8 dim | u8 order |
//   per axis: u32 N, u8 bc | payload
// Map payload: dim x nodes x packet float64, component-major, row-major nodes.
// Chain payload: u32 count, count+1 float64 timestamps, u8 direction, then
// `count` complete map records.

namespace io_detail {

static_assert(std::endian::native == std::endian::little, "map archives assume a little-endian host");

inline constexpr char kMagic[4] = {'C', 'M', 'A', 'P'};
inline constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is)
{
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("truncated map archive");
    return v;
}

struct Header {
    std::uint8_t kind = 0;
    std::uint8_t dim = 0;
    std::uint8_t order = 0;
    std::vector<std::uint32_t> sizes;
    std::vector<std::uint8_t> bcs;
};

template <int D>
void write_header(std::ostream& os, std::uint8_t kind, const GridSpec<D>& g, int order)
{
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint8_t>(os, kind);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(D));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(order));
    for (const Axis& a : g.axes()) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(a.n));
        put<std::uint8_t>(os, static_cast<std::uint8_t>(a.bc));
    }
}

inline Header read_header(std::istream& is)
{
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("truncated map archive");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic: not a map archive");
    const auto version = get<std::uint32_t>(is);
    if (version != kVersion) throw FormatError("unsupported map archive version " + std::to_string(version));
    Header h;
    h.kind = get<std::uint8_t>(is);
    h.dim = get<std::uint8_t>(is);
    h.order = get<std::uint8_t>(is);
    if (h.kind > 1) throw FormatError("record kind code out of range");
    if (h.dim < 1 || h.dim > 3) throw FormatError("dimension code out of range");
    if (h.order > 1) throw FormatError("order code out of range");
    for (int k = 0; k < h.dim; ++k) {
        h.sizes.push_back(get<std::uint32_t>(is));
        h.bcs.push_back(get<std::uint8_t>(is));
        if (h.bcs.back() > 1) throw FormatError("boundary code out of range");
        if (h.sizes.back() < 4 || h.sizes.back() > (1u << 20)) throw FormatError("axis size out of range");
    }
    return h;
}

template <int D>
void write_map_record(std::ostream& os, const MapField<D>& m)
{
    write_header<D>(os, 0, m.grid(), m.order());
    const auto data = m.data();
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
}

template <int D>
MapField<D> read_map_body(std::istream& is, const Header& h)
{
    if (h.dim != D) throw FormatError("archive dimension " + std::to_string(h.dim) + " does not match");
    std::array<int, D> sizes{};
    std::array<Boundary, D> bcs{};
    for (int k = 0; k < D; ++k) {
        sizes[k] = static_cast<int>(h.sizes[k]);
        bcs[k] = static_cast<Boundary>(h.bcs[k]);
    }
    const GridSpec<D> g = GridSpec<D>::nodal(sizes, bcs);
    std::vector<double> data(g.node_count() * HermiteField<D>::packet_size(h.order) * D);
    const auto bytes = static_cast<std::streamsize>(data.size() * sizeof(double));
    if (!is.read(reinterpret_cast<char*>(data.data()), bytes)) throw FormatError("truncated map payload");
    return MapField<D>(g, h.order, std::move(data));
}

} // namespace io_detail

template <int D>
void save(const MapField<D>& m, std::ostream& os)
{
    io_detail::write_map_record<D>(os, m);
    if (!os) throw FormatError("write failed");
}

template <int D>
void save(const SubmapChain<D>& chain, std::ostream& os)
{
    if (chain.times.size() != chain.maps.size() + 1) throw DomainError("chain needs one more timestamp than maps");
    const GridSpec<D> g = chain.maps.empty() ? GridSpec<D>::nodal(4, Boundary::Periodic) : chain.maps[0].grid();
    const int order = chain.maps.empty() ? 0 : chain.maps[0].order();
    io_detail::write_header<D>(os, 1, g, order);
    io_detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(chain.maps.size()));
    for (double t : chain.times) io_detail::put<double>(os, t);
    io_detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(chain.direction));
    for (const auto& m : chain.maps) io_detail::write_map_record<D>(os, m);
    if (!os) throw FormatError("write failed");
}

template <int D>
MapField<D> load_map(std::istream& is)
{
    const io_detail::Header h = io_detail::read_header(is);
    if (h.kind != 0) throw FormatError("archive holds a chain, not a single map");
    return io_detail::read_map_body<D>(is, h);
}

template <int D>
SubmapChain<D> load_chain(std::istream& is)
{
    const io_detail::Header h = io_detail::read_header(is);
    if (h.kind != 1) throw FormatError("archive holds a single map, not a chain");
    if (h.dim != D) throw FormatError("archive dimension does not match");
    const auto count = io_detail::get<std::uint32_t>(is);
    if (count > (1u << 16)) throw FormatError("chain length out of range");
    SubmapChain<D> chain;
    chain.times.resize(count + 1);
    for (auto& t : chain.times) t = io_detail::get<double>(is);
    const auto dir = io_detail::get<std::uint8_t>(is);
    if (dir > 1) throw FormatError("direction code out of range");
    chain.direction = static_cast<Direction>(dir);
    for (std::uint32_t i = 0; i < count; ++i) chain.maps.push_back(load_map<D>(is));
    return chain;
}

} // namespace cmflow
