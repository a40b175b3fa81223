#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "xflowdg/data.hpp"
#include "xflowdg/rng.hpp"
#include "xflowdg/tensor.hpp"

namespace xflowdg {

/// Ordered set of prompt templates. Entries are full template strings with a
/// `[class]` substitution marker, e.g. "a photograph of a [class]"; articles
/// are stored as written, not derived.
struct DescriptorSet {
    std::vector<std::string> templates;

    static DescriptorSet default_set();   // the 18 stock templates
    static DescriptorSet single_prompt(); // {"an image of a [class]"}
    static DescriptorSet from_file(const std::string& path);  // one per line

    std::size_t size() const { return templates.size(); }
    void check_valid() const;  // non-empty, unique entries
};

/// "a " + descriptor + " of a " + class_name. Exact concatenation: no article
/// correction, no case or whitespace normalization.
std::string build_prompt(const std::string& descriptor, const std::string& class_name);

/// Replace the `[class]` marker in a stored template with the class name.
std::string instantiate_template(const std::string& tpl, const std::string& class_name);

/// Deterministic prompt-string -> embedding provider (frozen, never trained).
class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::size_t dim() const = 0;
    virtual Tensor embed(const std::string& prompt) = 0;  // rank-1 [dim]
    virtual std::string id() const = 0;
};

/// Synthetic stand-in for a frozen text encoder: unit class anchors plus
/// descriptor offsets orthogonal to every anchor (norm 0.3 x anchor norm),
/// plus a small perturbation seeded by a hash of the full prompt string.
class SyntheticTextEmbedder : public TextEmbedder {
public:
    SyntheticTextEmbedder(std::size_t dim, std::uint64_t seed,
                          std::vector<std::string> class_names,
                          const DescriptorSet& descriptors, double anchor_norm = 1.0);

    std::size_t dim() const override { return dim_; }
    Tensor embed(const std::string& prompt) override;
    std::string id() const override;

    const Tensor& anchor(std::size_t class_idx) const { return anchors_.at(class_idx); }
    const Tensor& offset(std::size_t desc_idx) const { return offsets_.at(desc_idx); }

private:
    std::size_t dim_;
    std::uint64_t seed_;
    double anchor_norm_;
    std::vector<Tensor> anchors_;  // one per class, norm = anchor_norm
    std::vector<Tensor> offsets_;  // one per descriptor, orthogonal to the anchors
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> prompt_index_;
};

/// Looks prompts up in an XFD1 file of precomputed text-encoder outputs
/// (modality=text, class_id = class index, domain_id = descriptor index).
class FileTextEmbedder : public TextEmbedder {
public:
    FileTextEmbedder(const std::string& path, std::vector<std::string> class_names,
                     const DescriptorSet& descriptors);

    std::size_t dim() const override { return dim_; }
    Tensor embed(const std::string& prompt) override;
    std::string id() const override { return "file(" + path_ + ")"; }

private:
    std::string path_;
    std::size_t dim_;
    std::vector<std::pair<std::string, Tensor>> table_;
};

/// Precomputed class x descriptor table of prompt embeddings.
struct PromptEmbeddingBank {
    std::uint32_t dim = 0;
    std::vector<std::string> class_names;
    DescriptorSet descriptors;
    std::vector<Tensor> entries;  // row-major [class][descriptor]
    std::string embedder_id;

    std::size_t num_classes() const { return class_names.size(); }
    std::size_t num_descriptors() const { return descriptors.size(); }
    const Tensor& entry(std::size_t class_idx, std::size_t desc_idx) const;
};

/// Embeds every (class, descriptor) prompt exactly once. Throws a build error
/// naming the prompt if the embedder fails on it.
PromptEmbeddingBank build_bank(const DescriptorSet& descriptors,
                               const std::vector<std::string>& class_names,
                               TextEmbedder& embedder);

/// Uniform descriptor draw for one class; the banked vector is returned by
/// reference, no embedder call happens here.
std::pair<std::size_t, const Tensor*> sample_prompt_embedding(const PromptEmbeddingBank& bank,
                                                              std::uint32_t class_id, Rng& rng);

/// "class-0", "class-1", ... for datasets that carry no name table.
std::vector<std::string> default_class_names(std::size_t count);

}  // namespace xflowdg
