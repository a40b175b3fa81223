#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "xflowdg/autodiff.hpp"
#include "xflowdg/rng.hpp"
#include "xflowdg/tensor.hpp"

namespace xflowdg {

/// Affine layer y = x W + b with fan-in scaled uniform init (biases zero).
struct Linear {
    Parameter W;  // [in x out]
    Parameter b;  // [out]

    Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
           bool zero_init = false);
    Var apply(Tape& t, Var x);
    void collect(std::vector<Parameter*>& out);
    std::size_t param_count() const { return W.value.size() + b.value.size(); }
};

enum class EncodeMode { Sample, Mean };

/// Gaussian projection head: 2-hidden-layer encoder to (mu, logvar) plus a
/// mirrored decoder back to the input space. logvar is clamped to [-10, 10].
struct VaeHead {
    Linear enc1, enc2, mu_head, logvar_head;
    Linear dec1, dec2, dec_out;
    std::size_t in_dim, latent;

    VaeHead(const std::string& name, std::size_t in_dim, std::size_t hidden,
            std::size_t latent, Rng& rng);

    struct Encoded {
        Var z, mu, logvar;
    };
    /// mode=Sample: z = mu + exp(logvar/2) * eps with eps drawn from rng.
    /// mode=Mean: z = mu; rng may be null.
    Encoded encode(Tape& t, Var x, EncodeMode mode, Rng* rng);
    Var decode(Tape& t, Var z);

    void collect(std::vector<Parameter*>& out);
    std::size_t param_count() const;
};

/// z = mu + exp(logvar/2) * eps, elementwise; the raw reparameterization with
/// no clamping so the vanishing-variance limit is exact.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps);

/// Scalar t plus sinusoids sin(2^k pi t), k = 0..7; 9 features total.
std::vector<double> time_features(double t);
/// One feature row per entry of ts: [N x 9].
Tensor time_feature_rows(const std::vector<double>& ts);

/// Residual MLP velocity field v(z, t). The final projection starts at zero,
/// so the initial field is identically zero and transport is the identity.
struct FlowFieldNet {
    Linear in_proj;
    std::vector<std::pair<Linear, Linear>> blocks;  // h += B2(tanh(B1(h)))
    Linear out_proj;
    /// Zero-init linear term U z added to the output. Interpolant states seen
    /// in training concentrate in a cone that narrows toward the anchors as
    /// t -> 1; an integration path that starts outside it (held-out domains)
    /// receives no guidance from the MLP trunk once it drifts off that set,
    /// and the transport stalls short. A linear field extrapolates globally:
    /// U learns the "contract toward the anchor region" component and keeps
    /// pulling in regions the trunk was never fitted on.
    Linear skip;
    std::size_t latent, hidden;
    bool time_conditioned = true;  // ablation hook: false zeroes time features

    FlowFieldNet(const std::string& name, std::size_t latent, std::size_t hidden,
                 std::size_t depth, Rng& rng);

    /// Analytic output gain 1 / (1.05 - t). When many starts share one target
    /// anchor, the exact velocity grows like 1/(1 - t); an MLP reading t as a
    /// plain feature systematically undershoots that growth and the transport
    /// lands short of the anchors. With the gain, the network only has to
    /// predict a bounded residual, and the late integration steps recover the
    /// full contraction. Bounded (max 20) so t -> 1 stays finite in the loss.
    static double time_gain(double t) { return 1.0 / (1.05 - t); }

    /// Velocity for a batch of latents; ts holds one time per row.
    Var apply(Tape& t, Var z, const std::vector<double>& ts);
    Var apply(Tape& t, Var z, double time);
    /// Value-level forward for evaluation loops (no tape bookkeeping).
    Tensor velocity(const Tensor& z, double time) const;

    void collect(std::vector<Parameter*>& out);
    std::size_t param_count() const;
};

/// One-hidden-layer classifier over latents.
struct ClassifierHead {
    Linear fc1, fc2;
    std::size_t latent, classes;

    ClassifierHead(const std::string& name, std::size_t latent, std::size_t hidden,
                   std::size_t classes, Rng& rng);

    Var apply(Tape& t, Var z);
    Tensor logits(const Tensor& z) const;

    void collect(std::vector<Parameter*>& out);
    std::size_t param_count() const;
};

/// Argmax per row; ties resolve to the lowest index.
std::vector<std::uint32_t> predict(const Tensor& logits);

/// Flow-field architecture minus time conditioning: direct latent-to-latent
/// regressor for the MSE-mapping ablation.
struct MseMapper {
    Linear in_proj;
    std::vector<std::pair<Linear, Linear>> blocks;
    Linear out_proj;
    std::size_t latent, hidden;

    MseMapper(const std::string& name, std::size_t latent, std::size_t hidden,
              std::size_t depth, Rng& rng);

    Var apply(Tape& t, Var z);
    Tensor map(const Tensor& z) const;

    void collect(std::vector<Parameter*>& out);
    std::size_t param_count() const;
};

}  // namespace xflowdg
