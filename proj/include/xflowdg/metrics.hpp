#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xflowdg/tensor.hpp"

namespace xflowdg {

/// Per-class centroid and dispersion of one modality's latents.
/// Dispersion is the mean Euclidean distance of the class's samples to their
/// centroid; classes absent from the sample set have count 0.
struct ClassStats {
    std::vector<Tensor> centroids;       // rank-1, empty for absent classes
    std::vector<double> dispersion;
    std::vector<std::size_t> counts;

    std::size_t num_classes() const { return counts.size(); }
    bool has(std::size_t c) const { return c < counts.size() && counts[c] > 0; }
};

ClassStats class_stats(const Tensor& latents, const std::vector<std::uint32_t>& labels,
                       std::size_t num_classes);

/// Absolute modality gap: mean centroid distance over classes present in both.
double amg(const ClassStats& img, const ClassStats& txt);

/// Relative modality gap with the degenerate-class policy:
///   0/0 -> contributes 0 (flagged), x/0 -> excluded (flagged),
///   everything degenerate -> MetricUndefinedError.
/// value_clipped additionally clips per-class ratios at their 95th percentile,
/// mirroring gap plots that drop the extreme tail.
struct RmgResult {
    double value = 0.0;
    double value_clipped = 0.0;
    std::vector<std::uint32_t> zero_contrib_classes;
    std::vector<std::uint32_t> excluded_classes;

    bool flagged() const { return !zero_contrib_classes.empty() || !excluded_classes.empty(); }
    std::string flags() const;  // ";"-separated, "-" when clean
};
RmgResult rmg(const ClassStats& img, const ClassStats& txt);

/// Mean cosine alignment of latents to their class's text centroid.
double ca(const Tensor& latents, const std::vector<std::uint32_t>& labels,
          const ClassStats& txt);

double accuracy(const std::vector<std::uint32_t>& predictions,
                const std::vector<std::uint32_t>& labels);
double lodo_average(const std::vector<double>& per_domain_accuracies);

/// One CSV row of a gap evaluation; schema
/// `iter,variant,d_amg,d_rmg,d_ca,acc_split,acc_value,flags`.
struct GapRow {
    std::string variant;    // raw | flowed | text
    double d_amg = 0, d_rmg = 0, d_ca = 0;
    std::string acc_split;  // val | target | bank
    double acc_value = 0;
    std::string flags = "-";
};
struct GapReport {
    std::uint64_t iter = 0;
    std::vector<GapRow> rows;

    const GapRow& row(const std::string& variant, const std::string& split) const;
};

std::string gap_csv_header();
std::string gap_csv_row(std::uint64_t iter, const GapRow& row);

/// Doubles formatted with 17 significant digits (bit-exact round-trip).
std::string format_double(double v);

}  // namespace xflowdg
