#include "xflowdg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bytes.hpp"
#include "xflowdg/errors.hpp"
#include "xflowdg/rng.hpp"

namespace xflowdg {

void EmbeddingDataset::check_valid() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.vec.size() != dim)
            throw DimensionError("record " + std::to_string(i) + ": vector length " +
                                 std::to_string(r.vec.size()) + " != dataset dim " +
                                 std::to_string(dim));
        if (r.class_id >= num_classes)
            throw ArgumentError("record " + std::to_string(i) + ": class_id " +
                                std::to_string(r.class_id) + " out of range [0, " +
                                std::to_string(num_classes) + ")");
        if (r.domain_id >= num_domains)
            throw ArgumentError("record " + std::to_string(i) + ": domain_id " +
                                std::to_string(r.domain_id) + " out of range [0, " +
                                std::to_string(num_domains) + ")");
        for (float v : r.vec)
            if (!std::isfinite(v))
                throw NumericError("record " + std::to_string(i) + ": non-finite entry");
    }
}

EmbeddingDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.classes == 0 || spec.domains == 0)
        throw ArgumentError("synthetic spec needs at least one class and one domain");
    if (spec.per_cell == 0) throw ArgumentError("synthetic spec needs per_cell >= 1");
    if (spec.dim == 0) throw ArgumentError("synthetic spec needs dim >= 1");
    if (spec.anchor_scale < 0 || spec.bias_scale < 0 || spec.noise_scale < 0)
        throw ArgumentError("synthetic scales must be >= 0");

    Rng rng(spec.seed);
    const std::size_t d = spec.dim;
    // Anchors and biases are drawn first so they are shared by every record.
    std::vector<std::vector<double>> anchors(spec.classes, std::vector<double>(d));
    for (auto& a : anchors)
        for (auto& v : a) v = spec.anchor_scale * rng.normal();
    std::vector<std::vector<double>> biases(spec.domains, std::vector<double>(d));
    for (auto& b : biases)
        for (auto& v : b) v = spec.bias_scale * rng.normal();

    EmbeddingDataset ds;
    ds.dim = spec.dim;
    ds.num_classes = spec.classes;
    ds.num_domains = spec.domains;
    ds.provenance = Provenance::Synthetic;
    ds.records.reserve(std::size_t(spec.classes) * spec.domains * spec.per_cell);
    for (std::uint32_t dom = 0; dom < spec.domains; ++dom)
        for (std::uint32_t cls = 0; cls < spec.classes; ++cls)
            for (std::uint32_t s = 0; s < spec.per_cell; ++s) {
                EmbeddingRecord r;
                r.class_id = cls;
                r.domain_id = dom;
                r.modality = Modality::Image;
                r.vec.resize(d);
                for (std::size_t j = 0; j < d; ++j)
                    r.vec[j] = static_cast<float>(anchors[cls][j] + biases[dom][j] +
                                                  spec.noise_scale * rng.normal());
                ds.records.push_back(std::move(r));
            }
    return ds;
}

namespace {

constexpr char kMagic[4] = {'X', 'F', 'D', '1'};

using detail::ByteReader;
using detail::put_f32;
using detail::put_u32;
using detail::read_file;
using detail::write_file;

}  // namespace

void save_dataset(const EmbeddingDataset& ds, const std::string& path) {
    ds.check_valid();
    std::string out;
    out.reserve(24 + ds.records.size() * (9 + std::size_t(ds.dim) * 4));
    out.append(kMagic, 4);
    put_u32(out, 1);  // version
    put_u32(out, ds.dim);
    put_u32(out, std::uint32_t(ds.records.size()));
    put_u32(out, ds.num_classes);
    put_u32(out, ds.num_domains);
    for (const auto& r : ds.records) {
        put_u32(out, r.class_id);
        put_u32(out, r.domain_id);
        out.push_back(char(r.modality));
        for (float v : r.vec) put_f32(out, v);
    }
    write_file(path, out);
}

EmbeddingDataset load_dataset(const std::string& path) {
    ByteReader rd = read_file(path);
    rd.need(4, "magic");
    if (std::memcmp(rd.buf.data(), kMagic, 4) != 0) rd.fail("bad magic, expected \"XFD1\"");
    rd.pos = 4;
    std::uint32_t version = rd.u32("version");
    if (version != 1) rd.fail("unsupported version " + std::to_string(version));

    EmbeddingDataset ds;
    ds.provenance = Provenance::File;
    ds.dim = rd.u32("dimension");
    std::uint32_t count = rd.u32("record count");
    ds.num_classes = rd.u32("class count");
    ds.num_domains = rd.u32("domain count");
    ds.records.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto& r = ds.records[i];
        r.class_id = rd.u32("class_id");
        r.domain_id = rd.u32("domain_id");
        std::uint8_t m = rd.u8("modality");
        if (m > 1) rd.fail("modality byte " + std::to_string(m) + " not in {0,1}");
        r.modality = Modality(m);
        r.vec.resize(ds.dim);
        for (std::uint32_t j = 0; j < ds.dim; ++j) r.vec[j] = rd.f32("vector entry");
    }
    if (rd.pos != rd.buf.size())
        rd.fail(std::to_string(rd.buf.size() - rd.pos) + " trailing bytes after last record");
    ds.check_valid();
    return ds;
}

void save_dataset_csv(const EmbeddingDataset& ds, const std::string& path) {
    ds.check_valid();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "class,domain,modality";
    for (std::uint32_t j = 0; j < ds.dim; ++j) out << ",v" << j;
    out << "\n";
    char buf[32];
    for (const auto& r : ds.records) {
        out << r.class_id << ',' << r.domain_id << ',' << int(r.modality);
        for (float v : r.vec) {
            std::snprintf(buf, sizeof buf, "%.9g", double(v));  // 9 digits round-trips f32
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

EmbeddingDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file, missing header");
    if (line.rfind("class,domain,modality", 0) != 0)
        throw FormatError(path + ": bad header, expected `class,domain,modality,v0..`");
    std::size_t dim = std::count(line.begin(), line.end(), ',') >= 3
                          ? std::count(line.begin(), line.end(), ',') - 2
                          : 0;

    EmbeddingDataset ds;
    ds.provenance = Provenance::File;
    ds.dim = std::uint32_t(dim);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        auto next = [&](const char* what) {
            if (!std::getline(ss, tok, ','))
                throw FormatError(path + ":" + std::to_string(lineno) + ": missing " + what);
            return tok;
        };
        EmbeddingRecord r;
        r.class_id = std::uint32_t(std::stoul(next("class")));
        r.domain_id = std::uint32_t(std::stoul(next("domain")));
        unsigned long m = std::stoul(next("modality"));
        if (m > 1)
            throw FormatError(path + ":" + std::to_string(lineno) + ": modality " +
                              std::to_string(m) + " not in {0,1}");
        r.modality = Modality(m);
        r.vec.reserve(dim);
        for (std::size_t j = 0; j < dim; ++j) r.vec.push_back(std::stof(next("vector entry")));
        if (std::getline(ss, tok, ','))
            throw FormatError(path + ":" + std::to_string(lineno) + ": extra columns");
        ds.num_classes = std::max(ds.num_classes, r.class_id + 1);
        ds.num_domains = std::max(ds.num_domains, r.domain_id + 1);
        ds.records.push_back(std::move(r));
    }
    ds.check_valid();
    return ds;
}

LodoSplit split_lodo(const EmbeddingDataset& ds, std::uint32_t held_out_domain,
                     std::uint64_t seed) {
    if (held_out_domain >= ds.num_domains)
        throw ArgumentError("held-out domain " + std::to_string(held_out_domain) +
                            " out of range [0, " + std::to_string(ds.num_domains) + ")");

    LodoSplit out;
    for (auto* part : {&out.train, &out.fit, &out.val, &out.target}) {
        part->dim = ds.dim;
        part->num_classes = ds.num_classes;
        part->num_domains = ds.num_domains;
        part->provenance = ds.provenance;
    }
    for (const auto& r : ds.records)
        (r.domain_id == held_out_domain ? out.target : out.train).records.push_back(r);
    if (out.target.records.empty())
        throw ArgumentError("held-out domain " + std::to_string(held_out_domain) +
                            " has no records");

    // Seeded Fisher-Yates over train indices; last tenth becomes validation.
    std::vector<std::size_t> idx(out.train.records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    std::size_t n_val = idx.size() / 10;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto& part = (i + n_val < idx.size()) ? out.fit : out.val;
        part.records.push_back(out.train.records[idx[i]]);
    }
    return out;
}

Tensor to_tensor(const EmbeddingDataset& ds) {
    Tensor t = Tensor::zeros({ds.records.size(), ds.dim});
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        for (std::uint32_t j = 0; j < ds.dim; ++j) t.at(i, j) = ds.records[i].vec[j];
    return t;
}

Tensor rows_to_tensor(const EmbeddingDataset& ds, const std::vector<std::size_t>& idx) {
    Tensor t = Tensor::zeros({idx.size(), ds.dim});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& r = ds.records.at(idx[i]);
        for (std::uint32_t j = 0; j < ds.dim; ++j) t.at(i, j) = r.vec[j];
    }
    return t;
}

std::vector<std::uint32_t> labels_of(const EmbeddingDataset& ds) {
    std::vector<std::uint32_t> out(ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) out[i] = ds.records[i].class_id;
    return out;
}

}  // namespace xflowdg
