#include "xflowdg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "xflowdg/errors.hpp"

namespace xflowdg {

ClassStats class_stats(const Tensor& latents, const std::vector<std::uint32_t>& labels,
                       std::size_t num_classes) {
    if (latents.rank() != 2)
        throw DimensionError("class_stats expects [N x D] latents, got " + latents.shape_str());
    if (labels.size() != latents.rows())
        throw ArgumentError("class_stats label count " + std::to_string(labels.size()) +
                            " != latent rows " + std::to_string(latents.rows()));

    ClassStats st;
    st.centroids.resize(num_classes);
    st.dispersion.assign(num_classes, 0.0);
    st.counts.assign(num_classes, 0);
    const std::size_t d = latents.cols();

    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes)
            throw ArgumentError("label " + std::to_string(labels[i]) + " out of range [0, " +
                                std::to_string(num_classes) + ")");
        auto& c = st.centroids[labels[i]];
        if (c.size() == 0 || c.rank() != 1) c = Tensor::zeros({d});
        for (std::size_t j = 0; j < d; ++j) c[j] += latents.at(i, j);
        ++st.counts[labels[i]];
    }
    for (std::size_t cls = 0; cls < num_classes; ++cls)
        if (st.counts[cls] > 0) st.centroids[cls] *= 1.0 / double(st.counts[cls]);

    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& c = st.centroids[labels[i]];
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = latents.at(i, j) - c[j];
            acc += diff * diff;
        }
        st.dispersion[labels[i]] += std::sqrt(acc);
    }
    for (std::size_t cls = 0; cls < num_classes; ++cls)
        if (st.counts[cls] > 0) st.dispersion[cls] /= double(st.counts[cls]);
    return st;
}

namespace {

double centroid_distance(const ClassStats& a, const ClassStats& b, std::size_t cls) {
    const Tensor& ca_ = a.centroids[cls];
    const Tensor& cb = b.centroids[cls];
    if (ca_.size() != cb.size())
        throw DimensionError("centroid dim mismatch for class " + std::to_string(cls));
    double acc = 0.0;
    for (std::size_t j = 0; j < ca_.size(); ++j) {
        const double diff = ca_[j] - cb[j];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

std::vector<std::size_t> shared_classes(const ClassStats& a, const ClassStats& b) {
    const std::size_t n = std::min(a.num_classes(), b.num_classes());
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < n; ++c)
        if (a.has(c) && b.has(c)) out.push_back(c);
    if (out.empty()) throw ArgumentError("no class present in both modalities");
    return out;
}

}  // namespace

double amg(const ClassStats& img, const ClassStats& txt) {
    const auto classes = shared_classes(img, txt);
    double acc = 0.0;
    for (std::size_t c : classes) acc += centroid_distance(img, txt, c);
    return acc / double(classes.size());
}

std::string RmgResult::flags() const {
    std::string out;
    for (auto c : zero_contrib_classes)
        out += (out.empty() ? "" : ";") + std::string("rmg_zero:c") + std::to_string(c);
    for (auto c : excluded_classes)
        out += (out.empty() ? "" : ";") + std::string("rmg_excluded:c") + std::to_string(c);
    return out.empty() ? "-" : out;
}

RmgResult rmg(const ClassStats& img, const ClassStats& txt) {
    const auto classes = shared_classes(img, txt);
    RmgResult res;
    std::vector<double> ratios;  // contributions that enter the mean
    std::size_t degenerate = 0;
    for (std::size_t c : classes) {
        const double num = centroid_distance(img, txt, c);
        const double den = img.dispersion[c] + txt.dispersion[c];
        if (den == 0.0) {
            ++degenerate;
            if (num == 0.0)
                res.zero_contrib_classes.push_back(std::uint32_t(c));  // 0/0 counts as 0
            else
                res.excluded_classes.push_back(std::uint32_t(c));  // x/0 drops the class
            continue;
        }
        ratios.push_back(num / den);
    }
    if (degenerate == classes.size())
        throw MetricUndefinedError("relative modality gap undefined: all " +
                                   std::to_string(degenerate) + " classes degenerate");

    const std::size_t counted = ratios.size() + res.zero_contrib_classes.size();
    double total = 0.0;
    for (double r : ratios) total += r;
    res.value = total / double(counted);

    // 95th-percentile clip over the finite ratios (zero contributions included).
    std::vector<double> all = ratios;
    all.insert(all.end(), res.zero_contrib_classes.size(), 0.0);
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t idx = std::min(sorted.size() - 1,
                                     std::size_t(std::ceil(0.95 * double(sorted.size())) - 1));
    const double q95 = sorted[idx];
    double clipped = 0.0;
    for (double r : all) clipped += std::min(r, q95);
    res.value_clipped = clipped / double(counted);
    return res;
}

double ca(const Tensor& latents, const std::vector<std::uint32_t>& labels,
          const ClassStats& txt) {
    if (latents.rank() != 2)
        throw DimensionError("ca expects [N x D] latents, got " + latents.shape_str());
    if (labels.size() != latents.rows()) throw ArgumentError("ca label count mismatch");
    if (labels.empty()) throw ArgumentError("ca needs at least one sample");

    const std::size_t d = latents.cols();
    std::vector<double> class_sum(txt.num_classes(), 0.0);
    std::vector<std::size_t> class_n(txt.num_classes(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::uint32_t cls = labels[i];
        if (!txt.has(cls))
            throw ArgumentError("sample " + std::to_string(i) + ": class " + std::to_string(cls) +
                                " has no text centroid");
        const Tensor& cen = txt.centroids[cls];
        double dot_ = 0.0, nz = 0.0, nc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dot_ += latents.at(i, j) * cen[j];
            nz += latents.at(i, j) * latents.at(i, j);
            nc += cen[j] * cen[j];
        }
        if (nz == 0.0) throw ArgumentError("sample " + std::to_string(i) + " has zero norm");
        if (nc == 0.0)
            throw ArgumentError("text centroid of class " + std::to_string(cls) + " has zero norm");
        class_sum[cls] += dot_ / (std::sqrt(nz) * std::sqrt(nc));
        ++class_n[cls];
    }
    double total = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < class_n.size(); ++c)
        if (class_n[c] > 0) {
            total += class_sum[c] / double(class_n[c]);
            ++classes;
        }
    return total / double(classes);
}

double accuracy(const std::vector<std::uint32_t>& predictions,
                const std::vector<std::uint32_t>& labels) {
    if (predictions.size() != labels.size())
        throw ArgumentError("accuracy size mismatch: " + std::to_string(predictions.size()) +
                            " predictions vs " + std::to_string(labels.size()) + " labels");
    if (predictions.empty()) throw ArgumentError("accuracy of empty prediction set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++hits;
    return double(hits) / double(predictions.size());
}

double lodo_average(const std::vector<double>& per_domain_accuracies) {
    if (per_domain_accuracies.empty()) throw ArgumentError("lodo_average of empty list");
    double acc = 0.0;
    for (double v : per_domain_accuracies) acc += v;
    return acc / double(per_domain_accuracies.size());
}

const GapRow& GapReport::row(const std::string& variant, const std::string& split) const {
    for (const auto& r : rows)
        if (r.variant == variant && r.acc_split == split) return r;
    throw StateError("gap report has no row (" + variant + ", " + split + ")");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string gap_csv_header() { return "iter,variant,d_amg,d_rmg,d_ca,acc_split,acc_value,flags"; }

std::string gap_csv_row(std::uint64_t iter, const GapRow& row) {
    return std::to_string(iter) + "," + row.variant + "," + format_double(row.d_amg) + "," +
           format_double(row.d_rmg) + "," + format_double(row.d_ca) + "," + row.acc_split + "," +
           format_double(row.acc_value) + "," + (row.flags.empty() ? "-" : row.flags);
}

}  // namespace xflowdg
