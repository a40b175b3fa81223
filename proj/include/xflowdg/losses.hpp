#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "xflowdg/autodiff.hpp"
#include "xflowdg/models.hpp"

namespace xflowdg {

/// Weights of the composite objective; defaults follow the reference recipe.
struct LossWeights {
    double img = 0.3;
    double txt = 0.3;
    double fc = 0.3;
    double fm = 0.4;
    double ce = 10.0;

    void check_valid() const;
};

/// InfoNCE over cosine similarities at temperature tau, log-sum-exp stabilized.
/// Positives sit on the diagonal: row j of zk against row j of zl.
Var info_nce(Tape& t, Var zk, Var zl, double tau);

/// Four-pathway contrastive aggregate: i2t + t2i + (t2t + i2i) / 2.
/// inter_only drops the intra-modal terms (reported as exact zeros).
struct FclParts {
    Var total, i2t, t2i, t2t, i2i;
};
FclParts fcl(Tape& t, Var z_img, Var z_txt, double tau, bool inter_only = false);

/// Mean squared reconstruction error over all coordinates plus the closed-form
/// diagonal-Gaussian KL against the standard normal, averaged over the batch.
Var vae_loss(Tape& t, Var x, Var x_hat, Var mu, Var logvar);

/// Velocity regression along the straight interpolation path. One time per
/// pair; per-row squared L2 residual averaged over pairs.
using RowVelocityFn = std::function<Var(Tape&, Var, const std::vector<double>&)>;
Var flow_matching_loss_at(Tape& t, const RowVelocityFn& field, Var z_img, Var z_txt,
                          const std::vector<double>& ts);
Var flow_matching_loss(Tape& t, FlowFieldNet& net, Var z_img, Var z_txt, Rng& rng);

/// Direct-regression baseline: per-row squared L2 between mapper(z_img) and
/// z_txt, averaged over rows.
Var mse_mapping_loss(Tape& t, MseMapper& mapper, Var z_img, Var z_txt);

/// Softmax cross-entropy against integer labels, log-sum-exp stabilized.
Var cross_entropy(Tape& t, Var logits, const std::vector<std::uint32_t>& labels);

/// Scalar loss parts, value level (for reporting and the weighted-total oracle).
struct LossParts {
    double vae_img = 0, vae_txt = 0, fc = 0, fm = 0, ce = 0;
};
double total_loss(const LossParts& parts, const LossWeights& w);

/// Tape-level weighted total over scalar Vars.
Var total_loss(Tape& t, Var vae_img, Var vae_txt, Var fc, Var fm, Var ce,
               const LossWeights& w);

}  // namespace xflowdg
