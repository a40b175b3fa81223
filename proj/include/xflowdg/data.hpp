#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xflowdg/tensor.hpp"

namespace xflowdg {

enum class Modality : std::uint8_t { Image = 0, Text = 1 };

/// One encoder output: a D-dim embedding tagged with class, domain and modality.
struct EmbeddingRecord {
    std::vector<float> vec;  // stored at f32 so file round-trips are bit-exact
    std::uint32_t class_id = 0;
    std::uint32_t domain_id = 0;
    Modality modality = Modality::Image;

    bool operator==(const EmbeddingRecord&) const = default;
};

enum class Provenance { Synthetic, File };

struct EmbeddingDataset {
    std::uint32_t dim = 0;
    std::uint32_t num_classes = 0;
    std::uint32_t num_domains = 0;
    std::vector<EmbeddingRecord> records;
    Provenance provenance = Provenance::Synthetic;

    std::size_t size() const { return records.size(); }
    /// Throws if ids are out of range, lengths mismatch, or values are non-finite.
    void check_valid() const;
};

/// Parameters of the anchor + domain-bias + noise generative family.
struct SyntheticSpec {
    std::uint32_t dim = 64;
    std::uint32_t classes = 10;
    std::uint32_t domains = 4;
    std::uint32_t per_cell = 50;
    double anchor_scale = 1.0;
    double bias_scale = 0.6;
    double noise_scale = 0.15;
    std::uint64_t seed = 0;
};

/// Draws class anchors and domain biases once from the seed, then emits
/// per_cell records per (class, domain) cell: anchor[c] + bias[d] + noise.
EmbeddingDataset generate_synthetic(const SyntheticSpec& spec);

/// Binary "XFD1" format, little-endian. Round-trip is bit-exact.
void save_dataset(const EmbeddingDataset& ds, const std::string& path);
EmbeddingDataset load_dataset(const std::string& path);

/// CSV debug format: header `class,domain,modality,v0..v{D-1}`, modality 0/1.
void save_dataset_csv(const EmbeddingDataset& ds, const std::string& path);
EmbeddingDataset load_dataset_csv(const std::string& path);

/// Leave-one-domain-out fold. train = everything outside the held-out domain,
/// further shuffled 90/10 into fit/validation with the given seed.
struct LodoSplit {
    EmbeddingDataset train;
    EmbeddingDataset fit;
    EmbeddingDataset val;
    EmbeddingDataset target;
};
LodoSplit split_lodo(const EmbeddingDataset& ds, std::uint32_t held_out_domain,
                     std::uint64_t seed);

/// Stack record vectors into an [N x D] tensor (f32 values widened to f64).
Tensor to_tensor(const EmbeddingDataset& ds);
Tensor rows_to_tensor(const EmbeddingDataset& ds, const std::vector<std::size_t>& idx);
std::vector<std::uint32_t> labels_of(const EmbeddingDataset& ds);

}  // namespace xflowdg
