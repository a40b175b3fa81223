#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xflowdg/checkpoint.hpp"
#include "xflowdg/data.hpp"
#include "xflowdg/losses.hpp"
#include "xflowdg/metrics.hpp"
#include "xflowdg/models.hpp"
#include "xflowdg/tdb.hpp"

namespace xflowdg {

enum class AblationMode { None, SinglePromptTdb, InterOnlyFcl, MseMapper };

const char* ablation_name(AblationMode m);
AblationMode parse_ablation(const std::string& name);

struct TrainConfig {
    LossWeights weights;                // {0.3, 0.3, 0.3, 0.4, 10}
    double tau = 0.07;
    // Latent stays at or below the input width. Wider latents leave most
    // posterior dims at the prior (sigma ~ 1), so training-time samples live on
    // a noise shell far from the mean latents used at evaluation and the flow
    // field never sees the region it is asked to transport. Reference scale is
    // 256 on 512-wide backbone features; desk scale is 48 on 64-wide inputs.
    std::size_t latent = 48;
    std::size_t steps_train = 12;       // Euler steps through the training unroll
    std::size_t steps_eval = 12;
    std::size_t iters = 2000;           // desk-scale default; reference scale is 10000
    std::size_t batch_per_domain = 16;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    AblationMode ablation = AblationMode::None;
    std::size_t eval_cadence = 200;
    // Architecture (scaled to keep the full acceptance run on one core).
    std::size_t vae_hidden = 48;
    std::size_t flow_hidden = 64;
    std::size_t flow_blocks = 4;
    std::size_t cls_hidden = 64;

    void check_valid() const;
};

/// All trainable heads for one run.
struct Models {
    VaeHead vae_img, vae_txt;
    FlowFieldNet flow;
    ClassifierHead classifier;
    MseMapper mapper;

    Models(const TrainConfig& cfg, std::size_t img_dim, std::size_t txt_dim,
           std::size_t classes, Rng& init_rng);
    std::vector<Parameter*> params();
    std::size_t param_count();
};

/// Adaptive-moment optimizer with bias correction; moments are checkpointed.
struct Adam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t step_count = 0;
    std::vector<Tensor> m, v;  // parallel to the parameter list

    void init(const std::vector<Parameter*>& params);
    void step(const std::vector<Parameter*>& params);
};

/// Everything one optimization run owns; fully serializable so a resumed run
/// reproduces the remaining loss trajectory bitwise.
struct TrainState {
    TrainConfig config;
    std::size_t img_dim = 0, txt_dim = 0, classes = 0;
    Models models;
    Adam opt;
    std::uint64_t iter = 0;
    Rng rng_data, rng_reparam, rng_t, rng_prompt;  // independent named streams

    TrainState(const TrainConfig& cfg, std::size_t img_dim, std::size_t txt_dim,
               std::size_t classes);

    NamedTensors to_entries() const;
    void from_entries(const NamedTensors& entries);
    /// Rebuild a state from a checkpoint's stored architecture metadata.
    static TrainState load(const std::string& path);
    void save(const std::string& path) const;
};

/// One iteration's minibatch: images paired with banked text anchors of the
/// same class under freshly drawn descriptors.
struct Batch {
    Tensor x_img;  // [B x D_img]
    Tensor x_txt;  // [B x D_txt]
    std::vector<std::uint32_t> labels;
};
Batch sample_batch(const EmbeddingDataset& fit, const PromptEmbeddingBank& bank,
                   const TrainConfig& cfg, Rng& rng_data, Rng& rng_prompt);

struct StepRecord {
    std::uint64_t iter = 0;
    double vae_img = 0, vae_txt = 0, fc = 0, i2t = 0, t2i = 0, t2t = 0, i2i = 0, fm = 0,
           ce = 0, total = 0;
};
std::string step_csv_header();
std::string step_csv_row(const StepRecord& r);

/// Forward, backward, one optimizer update. The classifier consumes the
/// transported latent with gradients through the whole Euler unroll.
StepRecord train_step(TrainState& state, const Batch& batch);

struct EvalResult {
    GapReport report;  // rows: (raw, split), (flowed, split), (text, bank)
    double acc_raw = 0, acc_flowed = 0;
    std::vector<std::uint32_t> preds_raw, preds_flowed;
};
/// Deterministic: VAE-mean latents, full-bank text side, no rng consumption.
EvalResult evaluate(Models& models, const TrainConfig& cfg, const EmbeddingDataset& ds,
                    const PromptEmbeddingBank& bank, std::size_t steps_eval,
                    const std::string& split_name, std::uint64_t iter);

struct TrainOutput {
    std::vector<StepRecord> steps;
    std::vector<GapReport> reports;  // one per evaluation point (val + target rows)
    std::uint64_t best_iter = 0;
    double best_val_acc = -1.0;
    NamedTensors best_state;         // snapshot at the best validation accuracy
};
/// Runs the loop with evaluations at the configured cadence (always including
/// iteration 0 and the final iteration). When out_dir is non-empty, writes
/// best.xfc / last.xfc there as training progresses.
TrainOutput train(TrainState& state, const LodoSplit& split, const PromptEmbeddingBank& bank,
                  const std::string& out_dir = "");

/// Table-5-shaped comparison: rows full / no_tdb / no_fcl / no_xfm, one column
/// per held-out domain plus the LODO average. Folds share seeds across rows.
struct AblationTable {
    std::vector<std::string> row_names;
    std::vector<std::vector<double>> accs;  // [row][domain]
    std::vector<double> averages;           // [row]

    std::string to_csv() const;
    std::string to_text() const;
};
AblationTable run_ablation_suite(const TrainConfig& cfg, const EmbeddingDataset& ds,
                                 const DescriptorSet& descriptors, TextEmbedder& embedder,
                                 std::vector<double>* full_fold_accs = nullptr);

/// Target-domain accuracy of one trained fold, evaluated at the best-val
/// snapshot (mapped latents under the MseMapper ablation, flowed otherwise).
double run_lodo_fold(const TrainConfig& cfg, const EmbeddingDataset& ds,
                     const PromptEmbeddingBank& bank, std::uint32_t held_out,
                     TrainOutput* out = nullptr);

/// Fit/val split seed for a fold; single-run tools use the same derivation so
/// a standalone train matches the corresponding LODO fold.
std::uint64_t lodo_split_seed(std::uint64_t seed);

}  // namespace xflowdg
