#include "xflowdg/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "xflowdg/errors.hpp"
#include "xflowdg/transport.hpp"

namespace xflowdg {

namespace {

// Stream tags for derive_seed; stable across versions, serialized in states.
enum StreamTag : std::uint64_t { kInit = 0, kData = 1, kReparam = 2, kTdraw = 3, kPrompt = 4, kSplit = 5 };

Tensor rng_to_tensor(const Rng& rng) {
    auto st = rng.state();
    std::vector<double> words(st.size());
    for (std::size_t i = 0; i < st.size(); ++i) words[i] = std::bit_cast<double>(st[i]);
    return Tensor::from_data({st.size()}, std::move(words));
}

void rng_from_tensor(Rng& rng, const Tensor& t) {
    if (t.size() != 6) throw StateError("rng state entry must have 6 words, got " + t.shape_str());
    std::array<std::uint64_t, 6> st{};
    for (std::size_t i = 0; i < 6; ++i) st[i] = std::bit_cast<std::uint64_t>(t[i]);
    rng.set_state(st);
}

}  // namespace

const char* ablation_name(AblationMode m) {
    switch (m) {
        case AblationMode::None: return "none";
        case AblationMode::SinglePromptTdb: return "single-prompt-tdb";
        case AblationMode::InterOnlyFcl: return "inter-only-fcl";
        case AblationMode::MseMapper: return "mse-mapper";
    }
    throw ArgumentError("unknown ablation mode");
}

AblationMode parse_ablation(const std::string& name) {
    for (auto m : {AblationMode::None, AblationMode::SinglePromptTdb, AblationMode::InterOnlyFcl,
                   AblationMode::MseMapper})
        if (name == ablation_name(m)) return m;
    throw ArgumentError("unknown ablation mode \"" + name +
                        "\" (expected none|single-prompt-tdb|inter-only-fcl|mse-mapper)");
}

void TrainConfig::check_valid() const {
    weights.check_valid();
    if (!(tau > 0.0)) throw ArgumentError("tau must be > 0");
    if (latent == 0 || vae_hidden == 0 || flow_hidden == 0 || cls_hidden == 0 || flow_blocks == 0)
        throw ArgumentError("model sizes must be positive");
    if (steps_train == 0 || steps_eval == 0) throw ArgumentError("Euler steps must be >= 1");
    if (batch_per_domain == 0) throw ArgumentError("batch size must be >= 1");
    if (eval_cadence == 0) throw ArgumentError("eval cadence must be >= 1");
    if (!(lr > 0.0)) throw ArgumentError("learning rate must be > 0");
}

Models::Models(const TrainConfig& cfg, std::size_t img_dim, std::size_t txt_dim,
               std::size_t classes, Rng& init_rng)
    : vae_img("vae_img", img_dim, cfg.vae_hidden, cfg.latent, init_rng),
      vae_txt("vae_txt", txt_dim, cfg.vae_hidden, cfg.latent, init_rng),
      flow("flow", cfg.latent, cfg.flow_hidden, cfg.flow_blocks, init_rng),
      classifier("cls", cfg.latent, cfg.cls_hidden, classes, init_rng),
      mapper("mapper", cfg.latent, cfg.flow_hidden, cfg.flow_blocks, init_rng) {}

std::vector<Parameter*> Models::params() {
    std::vector<Parameter*> out;
    vae_img.collect(out);
    vae_txt.collect(out);
    flow.collect(out);
    classifier.collect(out);
    mapper.collect(out);
    return out;
}

std::size_t Models::param_count() {
    std::size_t n = 0;
    for (Parameter* p : params()) n += p->value.size();
    return n;
}

void Adam::init(const std::vector<Parameter*>& params) {
    step_count = 0;
    m.clear();
    v.clear();
    for (Parameter* p : params) {
        m.push_back(Tensor::zeros(p->value.shape()));
        v.push_back(Tensor::zeros(p->value.shape()));
    }
}

void Adam::step(const std::vector<Parameter*>& params) {
    if (m.size() != params.size())
        throw StateError("optimizer moment count " + std::to_string(m.size()) +
                         " != parameter count " + std::to_string(params.size()));
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, double(step_count));
    const double bc2 = 1.0 - std::pow(beta2, double(step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& val = params[i]->value;
        const Tensor& g = params[i]->grad;
        if (!g.same_shape(val))
            throw StateError("gradient shape mismatch for " + params[i]->name);
        for (std::size_t j = 0; j < val.size(); ++j) {
            m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g[j];
            v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j];
            val[j] -= lr * (m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps);
        }
    }
}

namespace {

Models make_models(const TrainConfig& cfg, std::size_t img_dim, std::size_t txt_dim,
                   std::size_t classes) {
    cfg.check_valid();
    if (img_dim == 0 || txt_dim == 0 || classes == 0)
        throw ArgumentError("model dimensions and class count must be positive");
    Rng init_rng(derive_seed(cfg.seed, kInit));
    return Models(cfg, img_dim, txt_dim, classes, init_rng);
}

}  // namespace

TrainState::TrainState(const TrainConfig& cfg, std::size_t img_dim_, std::size_t txt_dim_,
                       std::size_t classes_)
    : config(cfg),
      img_dim(img_dim_),
      txt_dim(txt_dim_),
      classes(classes_),
      models(make_models(cfg, img_dim_, txt_dim_, classes_)),
      rng_data(derive_seed(cfg.seed, kData)),
      rng_reparam(derive_seed(cfg.seed, kReparam)),
      rng_t(derive_seed(cfg.seed, kTdraw)),
      rng_prompt(derive_seed(cfg.seed, kPrompt)) {
    opt.lr = cfg.lr;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.eps = cfg.adam_eps;
    opt.init(models.params());
}

NamedTensors TrainState::to_entries() const {
    NamedTensors out;
    auto& self = const_cast<TrainState&>(*this);  // params() is non-const plumbing only
    auto params = self.models.params();
    for (const Parameter* p : params) out.emplace_back(p->name, p->value);
    for (std::size_t i = 0; i < params.size(); ++i) {
        out.emplace_back("opt.m." + params[i]->name, opt.m[i]);
        out.emplace_back("opt.v." + params[i]->name, opt.v[i]);
    }
    out.emplace_back("opt.step", Tensor::scalar(double(opt.step_count)));
    out.emplace_back("state.iter", Tensor::scalar(double(iter)));
    out.emplace_back("state.rng.data", rng_to_tensor(rng_data));
    out.emplace_back("state.rng.reparam", rng_to_tensor(rng_reparam));
    out.emplace_back("state.rng.t", rng_to_tensor(rng_t));
    out.emplace_back("state.rng.prompt", rng_to_tensor(rng_prompt));

    auto meta = [&out](const std::string& k, double v) {
        out.emplace_back("meta." + k, Tensor::scalar(v));
    };
    meta("img_dim", double(img_dim));
    meta("txt_dim", double(txt_dim));
    meta("classes", double(classes));
    meta("latent", double(config.latent));
    meta("vae_hidden", double(config.vae_hidden));
    meta("flow_hidden", double(config.flow_hidden));
    meta("flow_blocks", double(config.flow_blocks));
    meta("cls_hidden", double(config.cls_hidden));
    meta("ablation", double(int(config.ablation)));
    meta("tau", config.tau);
    meta("lr", config.lr);
    meta("beta1", config.beta1);
    meta("beta2", config.beta2);
    meta("adam_eps", config.adam_eps);
    meta("w_img", config.weights.img);
    meta("w_txt", config.weights.txt);
    meta("w_fc", config.weights.fc);
    meta("w_fm", config.weights.fm);
    meta("w_ce", config.weights.ce);
    meta("steps_train", double(config.steps_train));
    meta("steps_eval", double(config.steps_eval));
    meta("iters", double(config.iters));
    meta("batch_per_domain", double(config.batch_per_domain));
    meta("eval_cadence", double(config.eval_cadence));
    out.emplace_back("meta.seed", Tensor::from_data({1}, {std::bit_cast<double>(config.seed)}));
    return out;
}

void TrainState::from_entries(const NamedTensors& entries) {
    auto params = models.params();
    for (Parameter* p : params) {
        const Tensor& t = find_entry(entries, p->name);
        if (!t.same_shape(p->value))
            throw StateError("checkpoint shape mismatch for " + p->name + ": stored " +
                             t.shape_str() + ", model " + p->value.shape_str());
        p->value = t;
        p->zero_grad();
    }
    opt.init(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        opt.m[i] = find_entry(entries, "opt.m." + params[i]->name);
        opt.v[i] = find_entry(entries, "opt.v." + params[i]->name);
        if (!opt.m[i].same_shape(params[i]->value) || !opt.v[i].same_shape(params[i]->value))
            throw StateError("optimizer moment shape mismatch for " + params[i]->name);
    }
    opt.step_count = std::uint64_t(find_entry(entries, "opt.step").item());
    iter = std::uint64_t(find_entry(entries, "state.iter").item());
    rng_from_tensor(rng_data, find_entry(entries, "state.rng.data"));
    rng_from_tensor(rng_reparam, find_entry(entries, "state.rng.reparam"));
    rng_from_tensor(rng_t, find_entry(entries, "state.rng.t"));
    rng_from_tensor(rng_prompt, find_entry(entries, "state.rng.prompt"));
}

void TrainState::save(const std::string& path) const { save_checkpoint(path, to_entries()); }

TrainState TrainState::load(const std::string& path) {
    NamedTensors entries = load_checkpoint(path);
    auto meta = [&entries](const std::string& k) { return find_entry(entries, "meta." + k).item(); };
    TrainConfig cfg;
    cfg.latent = std::size_t(meta("latent"));
    cfg.vae_hidden = std::size_t(meta("vae_hidden"));
    cfg.flow_hidden = std::size_t(meta("flow_hidden"));
    cfg.flow_blocks = std::size_t(meta("flow_blocks"));
    cfg.cls_hidden = std::size_t(meta("cls_hidden"));
    cfg.ablation = AblationMode(int(meta("ablation")));
    cfg.tau = meta("tau");
    cfg.lr = meta("lr");
    cfg.beta1 = meta("beta1");
    cfg.beta2 = meta("beta2");
    cfg.adam_eps = meta("adam_eps");
    cfg.weights.img = meta("w_img");
    cfg.weights.txt = meta("w_txt");
    cfg.weights.fc = meta("w_fc");
    cfg.weights.fm = meta("w_fm");
    cfg.weights.ce = meta("w_ce");
    cfg.steps_train = std::size_t(meta("steps_train"));
    cfg.steps_eval = std::size_t(meta("steps_eval"));
    cfg.iters = std::size_t(meta("iters"));
    cfg.batch_per_domain = std::size_t(meta("batch_per_domain"));
    cfg.eval_cadence = std::size_t(meta("eval_cadence"));
    cfg.seed = std::bit_cast<std::uint64_t>(find_entry(entries, "meta.seed")[0]);

    TrainState st(cfg, std::size_t(meta("img_dim")), std::size_t(meta("txt_dim")),
                  std::size_t(meta("classes")));
    st.from_entries(entries);
    return st;
}

Batch sample_batch(const EmbeddingDataset& fit, const PromptEmbeddingBank& bank,
                   const TrainConfig& cfg, Rng& rng_data, Rng& rng_prompt) {
    if (fit.records.empty()) throw ArgumentError("cannot sample from an empty fit split");
    std::vector<std::vector<std::size_t>> by_domain(fit.num_domains);
    for (std::size_t i = 0; i < fit.records.size(); ++i)
        by_domain[fit.records[i].domain_id].push_back(i);

    Batch b;
    std::vector<std::size_t> chosen;
    for (std::uint32_t dom = 0; dom < fit.num_domains; ++dom) {
        if (by_domain[dom].empty()) continue;  // held-out or absent domain
        for (std::size_t s = 0; s < cfg.batch_per_domain; ++s)
            chosen.push_back(by_domain[dom][rng_data.uniform_int(by_domain[dom].size())]);
    }
    b.x_img = rows_to_tensor(fit, chosen);
    b.x_txt = Tensor::zeros({chosen.size(), bank.dim});
    b.labels.reserve(chosen.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        const auto& rec = fit.records[chosen[i]];
        b.labels.push_back(rec.class_id);
        auto [idx, vec] = sample_prompt_embedding(bank, rec.class_id, rng_prompt);
        for (std::size_t j = 0; j < bank.dim; ++j) b.x_txt.at(i, j) = (*vec)[j];
    }
    return b;
}

std::string step_csv_header() {
    return "iter,vae_img,vae_txt,fc,i2t,t2i,t2t,i2i,fm,ce,total";
}

std::string step_csv_row(const StepRecord& r) {
    std::string out = std::to_string(r.iter);
    for (double v : {r.vae_img, r.vae_txt, r.fc, r.i2t, r.t2i, r.t2t, r.i2i, r.fm, r.ce, r.total})
        out += "," + format_double(v);
    return out;
}

StepRecord train_step(TrainState& state, const Batch& batch) {
    const TrainConfig& cfg = state.config;
    Models& mdl = state.models;
    Tape tape;

    Var xi = tape.constant(batch.x_img);
    Var xt = tape.constant(batch.x_txt);

    auto enc_i = mdl.vae_img.encode(tape, xi, EncodeMode::Sample, &state.rng_reparam);
    Var l_vae_i = vae_loss(tape, xi, mdl.vae_img.decode(tape, enc_i.z), enc_i.mu, enc_i.logvar);
    auto enc_t = mdl.vae_txt.encode(tape, xt, EncodeMode::Sample, &state.rng_reparam);
    Var l_vae_t = vae_loss(tape, xt, mdl.vae_txt.decode(tape, enc_t.z), enc_t.mu, enc_t.logvar);

    FclParts fc = fcl(tape, enc_i.z, enc_t.z, cfg.tau,
                      cfg.ablation == AblationMode::InterOnlyFcl);

    // Transport is trained between the two noise-free coordinates: posterior
    // mean to posterior mean. Sampled endpoints hand the field a noised
    // marginal on either side — it would carry the image noise cloud onto the
    // text noise cloud, and the reparameterization radius (sigma * sqrt(dim))
    // rivals the class separation, so near a cluster center the conditional
    // velocity mixes classes and every trajectory inherits a bias toward the
    // anchor-constellation middle. Mean endpoints keep class identity crisp
    // and match what evaluation feeds the field. Off-manifold coverage (the
    // held-out domain) is carried by the classification pathway below, which
    // drives the same field on the sampled cloud through the full unroll.
    Var l_fm = cfg.ablation == AblationMode::MseMapper
                   ? mse_mapping_loss(tape, mdl.mapper, enc_i.mu, enc_t.mu)
                   : flow_matching_loss(tape, mdl.flow, enc_i.mu, enc_t.mu, state.rng_t);

    Var z1 = cfg.ablation == AblationMode::MseMapper
                 ? mdl.mapper.apply(tape, enc_i.z)
                 : euler_transport_rows(tape, mdl.flow, enc_i.z, cfg.steps_train);
    Var l_ce = cross_entropy(tape, mdl.classifier.apply(tape, z1), batch.labels);

    Var total = total_loss(tape, l_vae_i, l_vae_t, fc.total, l_fm, l_ce, cfg.weights);

    auto params = mdl.params();
    for (Parameter* p : params) p->zero_grad();
    tape.backward(total);
    state.opt.step(params);
    ++state.iter;

    StepRecord rec;
    rec.iter = state.iter;
    rec.vae_img = tape.value(l_vae_i).item();
    rec.vae_txt = tape.value(l_vae_t).item();
    rec.fc = tape.value(fc.total).item();
    rec.i2t = tape.value(fc.i2t).item();
    rec.t2i = tape.value(fc.t2i).item();
    rec.t2t = tape.value(fc.t2t).item();
    rec.i2i = tape.value(fc.i2i).item();
    rec.fm = tape.value(l_fm).item();
    rec.ce = tape.value(l_ce).item();
    rec.total = tape.value(total).item();
    return rec;
}

EvalResult evaluate(Models& models, const TrainConfig& cfg, const EmbeddingDataset& ds,
                    const PromptEmbeddingBank& bank, std::size_t steps_eval,
                    const std::string& split_name, std::uint64_t iter) {
    if (ds.records.empty()) throw ArgumentError("evaluate on empty dataset");

    // Image side: mean latents, then transport (or map) them.
    Tensor x = to_tensor(ds);
    std::vector<std::uint32_t> labels = labels_of(ds);
    Tensor z_raw;
    {
        Tape t;
        z_raw = t.value(models.vae_img.encode(t, t.constant(std::move(x)), EncodeMode::Mean,
                                              nullptr).z);
    }
    Tensor z_fl = cfg.ablation == AblationMode::MseMapper
                      ? models.mapper.map(z_raw)
                      : transport_rows(models.flow, z_raw, steps_eval);

    // Text side: the whole bank through the text head (means).
    Tensor bx = Tensor::zeros({bank.entries.size(), bank.dim});
    std::vector<std::uint32_t> blabels(bank.entries.size());
    for (std::size_t c = 0; c < bank.num_classes(); ++c)
        for (std::size_t k = 0; k < bank.num_descriptors(); ++k) {
            const std::size_t row = c * bank.num_descriptors() + k;
            const Tensor& e = bank.entries[row];
            for (std::size_t j = 0; j < bank.dim; ++j) bx.at(row, j) = e[j];
            blabels[row] = std::uint32_t(c);
        }
    Tensor z_txt;
    {
        Tape t;
        z_txt = t.value(models.vae_txt.encode(t, t.constant(std::move(bx)), EncodeMode::Mean,
                                              nullptr).z);
    }

    const std::size_t classes = bank.num_classes();
    ClassStats st_raw = class_stats(z_raw, labels, classes);
    ClassStats st_fl = class_stats(z_fl, labels, classes);
    ClassStats st_txt = class_stats(z_txt, blabels, classes);

    EvalResult res;
    res.preds_raw = predict(models.classifier.logits(z_raw));
    res.preds_flowed = predict(models.classifier.logits(z_fl));
    res.acc_raw = accuracy(res.preds_raw, labels);
    res.acc_flowed = accuracy(res.preds_flowed, labels);
    res.report.iter = iter;

    auto gap_row = [&](const std::string& variant, const ClassStats& st, const Tensor& z,
                       double acc) {
        GapRow row;
        row.variant = variant;
        row.acc_split = split_name;
        row.acc_value = acc;
        row.d_amg = amg(st, st_txt);
        RmgResult r = rmg(st, st_txt);
        row.d_rmg = r.value;
        row.flags = r.flags();
        row.d_ca = ca(z, variant == "text" ? blabels : labels, st_txt);
        return row;
    };
    res.report.rows.push_back(gap_row("raw", st_raw, z_raw, res.acc_raw));
    res.report.rows.push_back(gap_row("flowed", st_fl, z_fl, res.acc_flowed));

    // Text self-row: centroid gap is zero by construction; d_ca reports the
    // bank's own tightness and acc the classifier's fit to the text manifold.
    GapRow trow;
    trow.variant = "text";
    trow.acc_split = "bank";
    trow.acc_value = accuracy(predict(models.classifier.logits(z_txt)), blabels);
    trow.d_amg = amg(st_txt, st_txt);
    try {
        RmgResult r = rmg(st_txt, st_txt);
        trow.d_rmg = r.value;
        trow.flags = r.flags();
    } catch (const MetricUndefinedError&) {
        trow.d_rmg = 0.0;  // single-descriptor banks have no text dispersion
        trow.flags = "rmg_undefined";
    }
    trow.d_ca = ca(z_txt, blabels, st_txt);
    res.report.rows.push_back(trow);
    return res;
}

namespace {

void append_csv(const std::string& path, const std::string& header,
                const std::vector<std::string>& rows, bool fresh) {
    std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
    if (!out) throw IoError("cannot open " + path + " for writing");
    if (fresh) out << header << "\n";
    for (const auto& r : rows) out << r << "\n";
}

}  // namespace

TrainOutput train(TrainState& state, const LodoSplit& split, const PromptEmbeddingBank& bank,
                  const std::string& out_dir) {
    const TrainConfig& cfg = state.config;
    if (split.fit.records.empty()) throw ArgumentError("training needs a non-empty fit split");
    if (bank.dim != state.txt_dim)
        throw DimensionError("bank dim " + std::to_string(bank.dim) + " != text head dim " +
                             std::to_string(state.txt_dim));

    const bool to_disk = !out_dir.empty();
    if (to_disk) std::filesystem::create_directories(out_dir);

    TrainOutput out;
    auto eval_point = [&](std::uint64_t iter) {
        EvalResult val = evaluate(state.models, cfg, split.val, bank, cfg.steps_eval, "val", iter);
        EvalResult tgt =
            evaluate(state.models, cfg, split.target, bank, cfg.steps_eval, "target", iter);
        GapReport rep;
        rep.iter = iter;
        for (const auto& r : val.report.rows)
            if (r.variant != "text") rep.rows.push_back(r);
        for (const auto& r : tgt.report.rows) rep.rows.push_back(r);  // includes the text row
        out.reports.push_back(rep);

        if (val.acc_flowed > out.best_val_acc) {
            out.best_val_acc = val.acc_flowed;
            out.best_iter = iter;
            out.best_state = state.to_entries();
            if (to_disk) save_checkpoint(out_dir + "/best.xfc", out.best_state);
        }
    };

    const bool resumed_mid_run = state.iter > 0;
    if (!resumed_mid_run) eval_point(0);  // a resumed run was evaluated before its save

    std::vector<std::string> pending_rows;
    auto flush = [&]() {
        if (!to_disk) return;
        const bool fresh = !resumed_mid_run;
        append_csv(out_dir + "/losses.csv", step_csv_header(), pending_rows, fresh);
        std::vector<std::string> metric_rows;
        for (const auto& rep : out.reports)
            for (const auto& row : rep.rows) metric_rows.push_back(gap_csv_row(rep.iter, row));
        append_csv(out_dir + "/metrics.csv", gap_csv_header(), metric_rows, fresh);
    };

    while (state.iter < cfg.iters) {
        Batch batch = sample_batch(split.fit, bank, cfg, state.rng_data, state.rng_prompt);
        StepRecord rec;
        try {
            rec = train_step(state, batch);
        } catch (const NumericError& e) {
            flush();  // keep the partial trajectory; best.xfc holds the last finite state
            throw NumericError("train_step failed at iteration " + std::to_string(state.iter + 1) +
                               ": " + e.what());
        }
        out.steps.push_back(rec);
        pending_rows.push_back(step_csv_row(rec));
        if (state.iter % cfg.eval_cadence == 0 || state.iter == cfg.iters) eval_point(state.iter);
    }

    flush();
    if (to_disk) state.save(out_dir + "/last.xfc");
    return out;
}

double run_lodo_fold(const TrainConfig& cfg, const EmbeddingDataset& ds,
                     const PromptEmbeddingBank& bank, std::uint32_t held_out,
                     TrainOutput* out) {
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + held_out;  // fold seed = base seed + domain id
    LodoSplit split = split_lodo(ds, held_out, lodo_split_seed(fold_cfg.seed));

    TrainState state(fold_cfg, ds.dim, bank.dim, bank.num_classes());
    TrainOutput result = train(state, split, bank);
    state.from_entries(result.best_state);  // evaluate the selected model
    EvalResult tgt = evaluate(state.models, fold_cfg, split.target, bank, fold_cfg.steps_eval,
                              "target", result.best_iter);
    if (out) *out = std::move(result);
    return tgt.acc_flowed;
}

std::uint64_t lodo_split_seed(std::uint64_t seed) { return derive_seed(seed, kSplit); }

AblationTable run_ablation_suite(const TrainConfig& cfg, const EmbeddingDataset& ds,
                                 const DescriptorSet& descriptors, TextEmbedder& embedder,
                                 std::vector<double>* full_fold_accs) {
    const std::vector<std::string> class_names = default_class_names(ds.num_classes);
    PromptEmbeddingBank full_bank = build_bank(descriptors, class_names, embedder);
    PromptEmbeddingBank single_bank =
        build_bank(DescriptorSet::single_prompt(), class_names, embedder);

    AblationTable table;
    table.row_names = {"full", "no_tdb", "no_fcl", "no_xfm"};
    const std::vector<AblationMode> modes = {AblationMode::None, AblationMode::SinglePromptTdb,
                                             AblationMode::InterOnlyFcl, AblationMode::MseMapper};
    for (std::size_t r = 0; r < modes.size(); ++r) {
        TrainConfig row_cfg = cfg;
        row_cfg.ablation = modes[r];
        const PromptEmbeddingBank& bank =
            modes[r] == AblationMode::SinglePromptTdb ? single_bank : full_bank;
        std::vector<double> accs;
        for (std::uint32_t dom = 0; dom < ds.num_domains; ++dom)
            accs.push_back(run_lodo_fold(row_cfg, ds, bank, dom));
        table.averages.push_back(lodo_average(accs));
        table.accs.push_back(std::move(accs));
        if (full_fold_accs && modes[r] == AblationMode::None) *full_fold_accs = table.accs[r];
    }
    return table;
}

std::string AblationTable::to_csv() const {
    std::string out = "config";
    for (std::size_t d = 0; d < (accs.empty() ? 0 : accs[0].size()); ++d)
        out += ",d" + std::to_string(d);
    out += ",avg\n";
    for (std::size_t r = 0; r < row_names.size(); ++r) {
        out += row_names[r];
        for (double a : accs[r]) out += "," + format_double(a);
        out += "," + format_double(averages[r]) + "\n";
    }
    return out;
}

std::string AblationTable::to_text() const {
    char buf[32];
    std::string out = "config   ";
    for (std::size_t d = 0; d < (accs.empty() ? 0 : accs[0].size()); ++d) {
        std::snprintf(buf, sizeof buf, "%8s", ("d" + std::to_string(d)).c_str());
        out += buf;
    }
    out += "     avg\n";
    for (std::size_t r = 0; r < row_names.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%-9s", row_names[r].c_str());
        out += buf;
        for (double a : accs[r]) {
            std::snprintf(buf, sizeof buf, "%8.4f", a);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%8.4f", averages[r]);
        out += buf;
        out += "\n";
    }
    return out;
}

}  // namespace xflowdg
