#include "xflowdg/checkpoint.hpp"

#include <cstring>
#include <limits>

#include "bytes.hpp"
#include "xflowdg/errors.hpp"

namespace xflowdg {

namespace {
constexpr char kMagic[4] = {'X', 'F', 'C', '1'};
}

void save_checkpoint(const std::string& path, const NamedTensors& entries) {
    std::string out;
    out.append(kMagic, 4);
    detail::put_u32(out, std::uint32_t(entries.size()));
    for (const auto& [name, t] : entries) {
        if (name.empty() || name.size() > std::numeric_limits<std::uint16_t>::max())
            throw ArgumentError("checkpoint entry name length " + std::to_string(name.size()) +
                                " out of range");
        detail::put_u16(out, std::uint16_t(name.size()));
        out.append(name);
        detail::put_u32(out, std::uint32_t(t.rank()));
        for (std::size_t d : t.shape()) detail::put_u32(out, std::uint32_t(d));
        for (std::size_t i = 0; i < t.size(); ++i) detail::put_f64(out, t[i]);
    }
    detail::write_file(path, out);
}

NamedTensors load_checkpoint(const std::string& path) {
    detail::ByteReader rd = detail::read_file(path);
    rd.need(4, "magic");
    if (std::memcmp(rd.buf.data(), kMagic, 4) != 0) rd.fail("bad magic, expected \"XFC1\"");
    rd.pos = 4;
    const std::uint32_t count = rd.u32("entry count");

    NamedTensors entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = rd.u16("name length");
        rd.need(name_len, "entry name");
        std::string name = rd.buf.substr(rd.pos, name_len);
        rd.pos += name_len;
        const std::uint32_t rank = rd.u32("rank");
        if (rank > 2) rd.fail("entry \"" + name + "\" has rank " + std::to_string(rank) + " > 2");
        std::vector<std::size_t> shape(rank);
        std::size_t total = 1;
        for (auto& d : shape) {
            d = rd.u32("dimension");
            total *= d;
        }
        std::vector<double> data(total);
        for (auto& v : data) v = rd.f64("payload");
        entries.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
    }
    if (rd.pos != rd.buf.size())
        rd.fail(std::to_string(rd.buf.size() - rd.pos) + " trailing bytes after last entry");
    return entries;
}

const Tensor& find_entry(const NamedTensors& entries, const std::string& name) {
    for (const auto& [n, t] : entries)
        if (n == name) return t;
    throw StateError("checkpoint entry \"" + name + "\" not found");
}

bool has_entry(const NamedTensors& entries, const std::string& name) {
    for (const auto& [n, t] : entries)
        if (n == name) return true;
    return false;
}

}  // namespace xflowdg
