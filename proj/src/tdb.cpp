#include "xflowdg/tdb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "xflowdg/errors.hpp"

namespace xflowdg {

DescriptorSet DescriptorSet::default_set() {
    return DescriptorSet{{
        "a picture of a [class]",
        "an image of a [class]",
        "a photograph of a [class]",
        "a painting of a [class]",
        "a sketch of a [class]",
        "a cartoon of a [class]",
        "a 3D render of a [class]",
        "a drawing of a [class]",
        "a grayscale image of a [class]",
        "a low-light image of a [class]",
        "a high-resolution image of a [class]",
        "a blurred image of a [class]",
        "an overexposed image of a [class]",
        "a noisy image of a [class]",
        "a close-up image of a [class]",
        "a wide-angle image of a [class]",
        "an indoor image of a [class]",
        "an outdoor image of a [class]",
    }};
}

DescriptorSet DescriptorSet::single_prompt() {
    return DescriptorSet{{"an image of a [class]"}};
}

DescriptorSet DescriptorSet::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    DescriptorSet set;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        set.templates.push_back(line);
    }
    set.check_valid();
    return set;
}

void DescriptorSet::check_valid() const {
    if (templates.empty()) throw ArgumentError("descriptor set is empty");
    std::unordered_set<std::string> seen;
    for (const auto& t : templates) {
        if (!seen.insert(t).second) throw ArgumentError("duplicate template: \"" + t + "\"");
        if (t.find("[class]") == std::string::npos)
            throw ArgumentError("template missing [class] marker: \"" + t + "\"");
    }
}

std::string build_prompt(const std::string& descriptor, const std::string& class_name) {
    if (descriptor.empty()) throw ArgumentError("empty descriptor");
    if (class_name.empty()) throw ArgumentError("empty class name");
    return "a " + descriptor + " of a " + class_name;
}

std::string instantiate_template(const std::string& tpl, const std::string& class_name) {
    if (class_name.empty()) throw ArgumentError("empty class name");
    static constexpr std::string_view kMarker = "[class]";
    std::size_t pos = tpl.find(kMarker);
    if (pos == std::string::npos)
        throw ArgumentError("template missing [class] marker: \"" + tpl + "\"");
    std::string out = tpl;
    while (pos != std::string::npos) {
        out.replace(pos, kMarker.size(), class_name);
        pos = out.find(kMarker, pos + class_name.size());
    }
    return out;
}

namespace {

Tensor hash_vector(std::size_t dim, std::uint64_t seed, double target_norm) {
    Rng rng(seed);
    Tensor v = Tensor::normal({dim}, rng);
    double n = l2_norm(v);
    if (n == 0.0) return Tensor::zeros({dim});
    v *= target_norm / n;
    return v;
}

}  // namespace

SyntheticTextEmbedder::SyntheticTextEmbedder(std::size_t dim, std::uint64_t seed,
                                             std::vector<std::string> class_names,
                                             const DescriptorSet& descriptors,
                                             double anchor_norm)
    : dim_(dim), seed_(seed), anchor_norm_(anchor_norm) {
    descriptors.check_valid();
    if (class_names.empty()) throw ArgumentError("synthetic embedder needs class names");
    if (anchor_norm <= 0) throw ArgumentError("anchor norm must be positive");

    Rng rng(derive_seed(seed, /*stream=*/0x7db0));
    anchors_.reserve(class_names.size());
    std::vector<Tensor> basis;  // orthonormal basis of the anchor span
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        Tensor a = Tensor::normal({dim_}, rng);
        double n = l2_norm(a);
        if (n < 1e-12) throw NumericError("degenerate anchor draw");
        a *= anchor_norm_ / n;
        anchors_.push_back(a);
        Tensor q = a;  // extend the basis for later offset orthogonalization
        for (const auto& b : basis) {
            double proj = dot(q, b);
            for (std::size_t j = 0; j < dim_; ++j) q[j] -= proj * b[j];
        }
        double qn = l2_norm(q);
        if (qn > 1e-10 * anchor_norm_) {
            q *= 1.0 / qn;
            basis.push_back(std::move(q));
        }
    }

    // Descriptor offsets live in the orthogonal complement of the anchor span
    // so per-class text spread never masquerades as class signal.
    const double offset_norm = 0.3 * anchor_norm_;
    offsets_.reserve(descriptors.size());
    for (std::size_t k = 0; k < descriptors.size(); ++k) {
        Tensor o = Tensor::normal({dim_}, rng);
        for (const auto& b : basis) {
            double proj = dot(o, b);
            for (std::size_t j = 0; j < dim_; ++j) o[j] -= proj * b[j];
        }
        double n = l2_norm(o);
        if (n < 1e-10)
            throw ArgumentError("text dim " + std::to_string(dim_) +
                                " too small for descriptor offsets orthogonal to " +
                                std::to_string(class_names.size()) + " class anchors");
        o *= offset_norm / n;
        offsets_.push_back(std::move(o));
    }

    prompt_index_.reserve(class_names.size() * descriptors.size());
    for (std::size_t c = 0; c < class_names.size(); ++c)
        for (std::size_t k = 0; k < descriptors.size(); ++k)
            prompt_index_.emplace_back(instantiate_template(descriptors.templates[k], class_names[c]),
                                       std::make_pair(c, k));
    std::sort(prompt_index_.begin(), prompt_index_.end());
}

Tensor SyntheticTextEmbedder::embed(const std::string& prompt) {
    if (prompt.empty()) throw ArgumentError("empty prompt");
    const double perturb_norm = 0.02 * anchor_norm_;
    Tensor noise = hash_vector(dim_, derive_seed(seed_, fnv1a64(prompt)), perturb_norm);

    auto it = std::lower_bound(prompt_index_.begin(), prompt_index_.end(), prompt,
                               [](const auto& e, const std::string& p) { return e.first < p; });
    if (it != prompt_index_.end() && it->first == prompt) {
        Tensor v = anchors_[it->second.first];
        v += offsets_[it->second.second];
        v += noise;
        return v;
    }
    // Unknown prompt: deterministic hash-only embedding at anchor scale.
    return hash_vector(dim_, derive_seed(seed_, fnv1a64(prompt)), anchor_norm_);
}

std::string SyntheticTextEmbedder::id() const {
    return "synthetic(dim=" + std::to_string(dim_) + ",seed=" + std::to_string(seed_) + ")";
}

FileTextEmbedder::FileTextEmbedder(const std::string& path,
                                   std::vector<std::string> class_names,
                                   const DescriptorSet& descriptors)
    : path_(path) {
    descriptors.check_valid();
    EmbeddingDataset ds = load_dataset(path);
    dim_ = ds.dim;
    for (const auto& r : ds.records) {
        if (r.modality != Modality::Text) continue;
        if (r.class_id >= class_names.size() || r.domain_id >= descriptors.size()) continue;
        std::string prompt =
            instantiate_template(descriptors.templates[r.domain_id], class_names[r.class_id]);
        Tensor v = Tensor::zeros({dim_});
        for (std::size_t j = 0; j < dim_; ++j) v[j] = r.vec[j];
        table_.emplace_back(std::move(prompt), std::move(v));
    }
    std::sort(table_.begin(), table_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (table_.empty())
        throw FormatError(path + ": no text-modality records matching the class/descriptor grid");
}

Tensor FileTextEmbedder::embed(const std::string& prompt) {
    auto it = std::lower_bound(table_.begin(), table_.end(), prompt,
                               [](const auto& e, const std::string& p) { return e.first < p; });
    if (it == table_.end() || it->first != prompt)
        throw ArgumentError("no precomputed embedding for prompt \"" + prompt + "\"");
    return it->second;
}

const Tensor& PromptEmbeddingBank::entry(std::size_t class_idx, std::size_t desc_idx) const {
    if (class_idx >= num_classes())
        throw ArgumentError("bank class index " + std::to_string(class_idx) + " out of range");
    if (desc_idx >= num_descriptors())
        throw ArgumentError("bank descriptor index " + std::to_string(desc_idx) + " out of range");
    return entries[class_idx * num_descriptors() + desc_idx];
}

PromptEmbeddingBank build_bank(const DescriptorSet& descriptors,
                               const std::vector<std::string>& class_names,
                               TextEmbedder& embedder) {
    descriptors.check_valid();
    if (class_names.empty()) throw ArgumentError("bank needs at least one class name");

    PromptEmbeddingBank bank;
    bank.dim = std::uint32_t(embedder.dim());
    bank.class_names = class_names;
    bank.descriptors = descriptors;
    bank.embedder_id = embedder.id();
    bank.entries.reserve(class_names.size() * descriptors.size());
    for (const auto& cls : class_names)
        for (const auto& tpl : descriptors.templates) {
            std::string prompt = instantiate_template(tpl, cls);
            Tensor v;
            try {
                v = embedder.embed(prompt);
            } catch (const std::exception& e) {
                throw StateError("bank build failed for prompt \"" + prompt + "\": " + e.what());
            }
            if (v.rank() != 1 || v.size() != embedder.dim())
                throw StateError("bank build: embedder returned shape " + v.shape_str() +
                                 " for prompt \"" + prompt + "\"");
            if (!v.all_finite())
                throw StateError("bank build: non-finite embedding for prompt \"" + prompt + "\"");
            bank.entries.push_back(std::move(v));
        }
    return bank;
}

std::pair<std::size_t, const Tensor*> sample_prompt_embedding(const PromptEmbeddingBank& bank,
                                                              std::uint32_t class_id, Rng& rng) {
    if (class_id >= bank.num_classes())
        throw ArgumentError("class id " + std::to_string(class_id) + " out of range [0, " +
                            std::to_string(bank.num_classes()) + ")");
    std::size_t idx = rng.uniform_int(bank.num_descriptors());
    return {idx, &bank.entry(class_id, idx)};
}

std::vector<std::string> default_class_names(std::size_t count) {
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back("class-" + std::to_string(i));
    return out;
}

}  // namespace xflowdg
