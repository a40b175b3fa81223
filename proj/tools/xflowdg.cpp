// Command-line surface: synth | train | eval | lodo | ablate.
// Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numeric failure.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xflowdg/checkpoint.hpp"
#include "xflowdg/data.hpp"
#include "xflowdg/errors.hpp"
#include "xflowdg/metrics.hpp"
#include "xflowdg/tdb.hpp"
#include "xflowdg/trainer.hpp"

using namespace xflowdg;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

std::string hex_digest(const std::string& path) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%016llx",
                  (unsigned long long)fnv1a64(read_bytes(path)));
    return buf;
}

// ----------------------------------------------------------- shared options

struct TextOpts {
    std::size_t dim = 0;         // 0 -> follow the data dimension
    std::uint64_t seed = 0;      // 0 + !seed_set -> derived from the run seed
    bool seed_set = false;
    std::string descriptors_path;  // empty -> stock descriptor set
    std::string data_path;         // set -> file-backed embedder
};

void add_text_flags(CLI::App* cmd, TextOpts& t) {
    cmd->add_option("--txt-dim", t.dim, "Text embedding width (default: data dimension)");
    auto* s = cmd->add_option("--txt-seed", t.seed,
                              "Text anchor seed (default: derived from --seed)");
    cmd->callback([&t, s]() { t.seed_set = s->count() > 0; });
    cmd->add_option("--descriptors", t.descriptors_path,
                    "Descriptor template file, one per line (default: stock 18)");
    cmd->add_option("--txt-data", t.data_path,
                    "Precomputed text-embedding XFD1 file (replaces the synthetic embedder)");
}

void add_config_flags(CLI::App* cmd, TrainConfig& cfg, std::string& ablate) {
    cmd->add_option("--iters", cfg.iters, "Training iterations");
    cmd->add_option("--batch", cfg.batch_per_domain, "Mini-batch rows per source domain");
    cmd->add_option("--lr", cfg.lr, "Adam learning rate");
    cmd->add_option("--tau", cfg.tau, "Contrastive temperature");
    cmd->add_option("--latent", cfg.latent, "Latent width");
    cmd->add_option("--vae-hidden", cfg.vae_hidden, "Projection-head hidden width");
    cmd->add_option("--flow-hidden", cfg.flow_hidden, "Flow-field hidden width");
    cmd->add_option("--flow-blocks", cfg.flow_blocks, "Flow-field residual blocks");
    cmd->add_option("--cls-hidden", cfg.cls_hidden, "Classifier hidden width");
    cmd->add_option("--steps", cfg.steps_train, "Euler steps for training-time transport");
    cmd->add_option("--steps-eval", cfg.steps_eval, "Euler steps at evaluation (default 12)");
    cmd->add_option("--eval-cadence", cfg.eval_cadence, "Iterations between evaluations");
    cmd->add_option("--w-img", cfg.weights.img, "Weight of the image projection loss");
    cmd->add_option("--w-txt", cfg.weights.txt, "Weight of the text projection loss");
    cmd->add_option("--w-fc", cfg.weights.fc, "Weight of the contrastive loss");
    cmd->add_option("--w-fm", cfg.weights.fm, "Weight of the flow-matching loss");
    cmd->add_option("--w-ce", cfg.weights.ce, "Weight of the classification loss");
    cmd->add_option("--ablate", ablate,
                    "none | single-prompt-tdb | inter-only-fcl | mse-mapper"
                    " (lodo also accepts: all)");
}

std::uint64_t resolve_seed(const CLI::Option* seed_opt, std::uint64_t flag_value) {
    if (seed_opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("XFLOWDG_SEED")) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (used != std::strlen(env)) throw std::invalid_argument(env);
            return v;
        } catch (const std::exception&) {
            throw ArgumentError(std::string("XFLOWDG_SEED is not an integer: ") + env);
        }
    }
    return flag_value;
}

DescriptorSet load_descriptors(const TextOpts& t, AblationMode mode) {
    if (mode == AblationMode::SinglePromptTdb) return DescriptorSet::single_prompt();
    if (!t.descriptors_path.empty()) return DescriptorSet::from_file(t.descriptors_path);
    return DescriptorSet::default_set();
}

std::unique_ptr<TextEmbedder> make_embedder(const TextOpts& t, std::size_t dim,
                                            std::uint64_t run_seed,
                                            const std::vector<std::string>& names,
                                            const DescriptorSet& descriptors) {
    if (!t.data_path.empty())
        return std::make_unique<FileTextEmbedder>(t.data_path, names, descriptors);
    const std::uint64_t seed = t.seed_set ? t.seed : derive_seed(run_seed, 11);
    return std::make_unique<SyntheticTextEmbedder>(dim, seed, names, descriptors);
}

json config_json(const TrainConfig& cfg) {
    return json{{"latent", cfg.latent},
                {"vae_hidden", cfg.vae_hidden},
                {"flow_hidden", cfg.flow_hidden},
                {"flow_blocks", cfg.flow_blocks},
                {"cls_hidden", cfg.cls_hidden},
                {"steps_train", cfg.steps_train},
                {"steps_eval", cfg.steps_eval},
                {"iters", cfg.iters},
                {"batch_per_domain", cfg.batch_per_domain},
                {"eval_cadence", cfg.eval_cadence},
                {"lr", cfg.lr},
                {"tau", cfg.tau},
                {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},
                {"adam_eps", cfg.adam_eps},
                {"seed", cfg.seed},
                {"ablation", ablation_name(cfg.ablation)},
                {"weights",
                 {{"img", cfg.weights.img},
                  {"txt", cfg.weights.txt},
                  {"fc", cfg.weights.fc},
                  {"fm", cfg.weights.fm},
                  {"ce", cfg.weights.ce}}}};
}

void write_manifest(const std::string& dir, const std::string& command, const TrainConfig& cfg,
                    const TextOpts& topts, std::size_t txt_dim, const std::string& data_path,
                    json extra) {
    json inputs;
    inputs["data"] = {{"path", data_path}, {"fnv1a64", hex_digest(data_path)}};
    if (!topts.descriptors_path.empty())
        inputs["descriptors"] = {{"path", topts.descriptors_path},
                                 {"fnv1a64", hex_digest(topts.descriptors_path)}};
    if (!topts.data_path.empty())
        inputs["txt_data"] = {{"path", topts.data_path},
                              {"fnv1a64", hex_digest(topts.data_path)}};

    json m = {{"tool", "xflowdg"},
              {"version", kVersion},
              {"command", command},
              {"seed", cfg.seed},
              {"config", config_json(cfg)},
              {"text",
               {{"dim", txt_dim},
                {"seed", topts.seed_set ? topts.seed : derive_seed(cfg.seed, 11)},
                {"embedder", topts.data_path.empty() ? "synthetic" : topts.data_path},
                {"descriptors", cfg.ablation == AblationMode::SinglePromptTdb
                                    ? "single-prompt"
                                    : (topts.descriptors_path.empty() ? "default"
                                                                      : topts.descriptors_path)}}},
              {"inputs", inputs}};
    m.update(extra);
    write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

EmbeddingDataset domain_slice(const EmbeddingDataset& ds, std::uint32_t domain) {
    if (domain >= ds.num_domains)
        throw ArgumentError("--holdout " + std::to_string(domain) + " out of range (dataset has " +
                            std::to_string(ds.num_domains) + " domains)");
    EmbeddingDataset out = ds;
    std::erase_if(out.records,
                  [&](const EmbeddingRecord& r) { return r.domain_id != domain; });
    if (out.records.empty())
        throw ArgumentError("no records in domain " + std::to_string(domain));
    return out;
}

std::vector<std::size_t> parse_steps_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(tok, &used);
            if (used != tok.size() || v == 0) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ArgumentError("--steps expects positive integers, got \"" + tok + "\"");
        }
    }
    if (out.empty()) throw ArgumentError("--steps list is empty");
    return out;
}

// ------------------------------------------------------------------ commands

struct SynthArgs {
    SyntheticSpec spec;
    std::string out;
    CLI::Option* seed_opt = nullptr;
};

int cmd_synth(SynthArgs& a) {
    a.spec.seed = resolve_seed(a.seed_opt, a.spec.seed);
    EmbeddingDataset ds = generate_synthetic(a.spec);
    save_dataset(ds, a.out);
    std::printf("wrote %zu records (%u classes x %u domains x %u per cell, dim %u) to %s\n",
                ds.size(), ds.num_classes, ds.num_domains, a.spec.per_cell, ds.dim,
                a.out.c_str());
    return 0;
}

struct TrainArgs {
    std::string data, out_dir, resume, ablate = "none";
    std::uint32_t holdout = 0;
    TrainConfig cfg;
    TextOpts topts;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* iters_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* steps_eval_opt = nullptr;
};

int cmd_train(TrainArgs& a) {
    a.cfg.seed = resolve_seed(a.seed_opt, a.cfg.seed);
    a.cfg.ablation = parse_ablation(a.ablate);
    if (a.steps_opt->count() > 0 && a.steps_eval_opt->count() == 0)
        a.cfg.steps_eval = a.cfg.steps_train;

    EmbeddingDataset ds = load_dataset(a.data);
    if (a.holdout >= ds.num_domains)
        throw ArgumentError("--holdout " + std::to_string(a.holdout) +
                            " out of range (dataset has " + std::to_string(ds.num_domains) +
                            " domains)");

    std::optional<TrainState> state;
    if (!a.resume.empty()) {
        state.emplace(TrainState::load(a.resume));
        if (a.iters_opt->count() > 0) state->config.iters = a.cfg.iters;
        a.cfg = state->config;  // the checkpoint is authoritative for the rest
    }

    const std::size_t txt_dim = a.topts.dim ? a.topts.dim : ds.dim;
    DescriptorSet descriptors = load_descriptors(a.topts, a.cfg.ablation);
    auto names = default_class_names(ds.num_classes);
    auto embedder = make_embedder(a.topts, txt_dim, a.cfg.seed, names, descriptors);
    PromptEmbeddingBank bank = build_bank(descriptors, names, *embedder);
    if (!state) state.emplace(a.cfg, ds.dim, bank.dim, bank.num_classes());

    LodoSplit split = split_lodo(ds, a.holdout, lodo_split_seed(a.cfg.seed));

    std::filesystem::create_directories(a.out_dir);
    json extra = {{"holdout", a.holdout},
                  {"resumed_from", a.resume.empty() ? json(nullptr) : json(a.resume)},
                  {"artifacts", {"losses.csv", "metrics.csv", "best.xfc", "last.xfc"}}};
    write_manifest(a.out_dir, "train", a.cfg, a.topts, bank.dim, a.data, extra);

    TrainOutput out = train(*state, split, bank, a.out_dir);

    const GapReport& rep = out.reports.back();
    const GapRow& raw = rep.row("raw", "target");
    const GapRow& fl = rep.row("flowed", "target");
    std::printf("iter %llu target: raw acc %.4f rmg %.3f ca %.3f | %s acc %.4f rmg %.3f ca %.3f\n",
                (unsigned long long)rep.iter, raw.acc_value, raw.d_rmg, raw.d_ca,
                a.cfg.ablation == AblationMode::MseMapper ? "mapped" : "flowed", fl.acc_value,
                fl.d_rmg, fl.d_ca);
    std::printf("best val acc %.4f at iter %llu; artifacts in %s\n", out.best_val_acc,
                (unsigned long long)out.best_iter, a.out_dir.c_str());
    return 0;
}

struct EvalArgs {
    std::string ckpt, data, steps = "12", out_csv;
    std::uint32_t holdout = 0;
    TextOpts topts;
};

int cmd_eval(EvalArgs& a) {
    TrainState state = TrainState::load(a.ckpt);
    EmbeddingDataset ds = load_dataset(a.data);
    if (ds.num_classes != state.classes)
        throw DimensionError("checkpoint expects " + std::to_string(state.classes) +
                             " classes, dataset has " + std::to_string(ds.num_classes));
    EmbeddingDataset target = domain_slice(ds, a.holdout);

    DescriptorSet descriptors = load_descriptors(a.topts, state.config.ablation);
    auto names = default_class_names(state.classes);
    auto embedder =
        make_embedder(a.topts, state.txt_dim, state.config.seed, names, descriptors);
    PromptEmbeddingBank bank = build_bank(descriptors, names, *embedder);
    if (bank.dim != state.txt_dim)
        throw DimensionError("bank dim " + std::to_string(bank.dim) +
                             " != checkpoint text width " + std::to_string(state.txt_dim));

    std::string csv = gap_csv_header();
    csv.replace(0, 4, "steps");  // the leading column carries N for sweeps
    csv += "\n";
    for (std::size_t n : parse_steps_list(a.steps)) {
        EvalResult r =
            evaluate(state.models, state.config, target, bank, n, "target", n);
        for (const GapRow& row : r.report.rows) csv += gap_csv_row(n, row) + "\n";
    }
    std::fputs(csv.c_str(), stdout);
    if (!a.out_csv.empty()) write_text(a.out_csv, csv);
    return 0;
}

struct LodoArgs {
    std::string data, out_dir, ablate = "none";
    TrainConfig cfg;
    TextOpts topts;
    CLI::Option* seed_opt = nullptr;
};

int run_ablate_suite_cmd(LodoArgs& a, const EmbeddingDataset& ds) {
    const std::size_t txt_dim = a.topts.dim ? a.topts.dim : ds.dim;
    DescriptorSet descriptors = load_descriptors(a.topts, AblationMode::None);
    auto names = default_class_names(ds.num_classes);
    auto embedder = make_embedder(a.topts, txt_dim, a.cfg.seed, names, descriptors);

    std::filesystem::create_directories(a.out_dir);
    write_manifest(a.out_dir, "ablate", a.cfg, a.topts, txt_dim, a.data,
                   json{{"artifacts", {"ablation.csv"}}});

    AblationTable table = run_ablation_suite(a.cfg, ds, descriptors, *embedder);
    std::fputs(table.to_text().c_str(), stdout);
    write_text(a.out_dir + "/ablation.csv", table.to_csv());
    return 0;
}

int cmd_lodo(LodoArgs& a, bool force_suite) {
    a.cfg.seed = resolve_seed(a.seed_opt, a.cfg.seed);
    EmbeddingDataset ds = load_dataset(a.data);
    if (force_suite || a.ablate == "all") return run_ablate_suite_cmd(a, ds);

    a.cfg.ablation = parse_ablation(a.ablate);
    const std::size_t txt_dim = a.topts.dim ? a.topts.dim : ds.dim;
    DescriptorSet descriptors = load_descriptors(a.topts, a.cfg.ablation);
    auto names = default_class_names(ds.num_classes);
    auto embedder = make_embedder(a.topts, txt_dim, a.cfg.seed, names, descriptors);
    PromptEmbeddingBank bank = build_bank(descriptors, names, *embedder);

    std::filesystem::create_directories(a.out_dir);
    write_manifest(a.out_dir, "lodo", a.cfg, a.topts, bank.dim, a.data,
                   json{{"artifacts", {"lodo.csv"}}});

    std::vector<double> accs;
    std::string csv = "holdout,acc\n";
    std::printf("holdout   acc\n");
    for (std::uint32_t dom = 0; dom < ds.num_domains; ++dom) {
        const double acc = run_lodo_fold(a.cfg, ds, bank, dom);
        accs.push_back(acc);
        csv += std::to_string(dom) + "," + format_double(acc) + "\n";
        std::printf("%7u   %.4f\n", dom, acc);
    }
    const double avg = lodo_average(accs);
    csv += "average," + format_double(avg) + "\n";
    std::printf("average   %.4f\n", avg);
    write_text(a.out_dir + "/lodo.csv", csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal flow matching for domain generalization in embedding space"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SynthArgs synth;
    auto* sc_synth = app.add_subcommand("synth", "Generate a synthetic embedding dataset (XFD1)");
    sc_synth->set_config("--config", "", "Config file with key = value lines");
    sc_synth->add_option("--dim", synth.spec.dim, "Embedding dimension")->required();
    sc_synth->add_option("--classes", synth.spec.classes, "Class count")->required();
    sc_synth->add_option("--domains", synth.spec.domains, "Domain count")->required();
    sc_synth->add_option("--per-cell", synth.spec.per_cell, "Records per (class, domain) cell")
        ->required();
    sc_synth->add_option("--anchor-scale", synth.spec.anchor_scale, "Class anchor scale");
    sc_synth->add_option("--bias-scale", synth.spec.bias_scale, "Domain bias scale");
    sc_synth->add_option("--noise-scale", synth.spec.noise_scale, "Per-record noise scale");
    synth.seed_opt = sc_synth->add_option("--seed", synth.spec.seed, "Generator seed");
    sc_synth->add_option("-o,--out", synth.out, "Output .xfd path")->required();

    TrainArgs tr;
    auto* sc_train = app.add_subcommand("train", "Train on all domains except --holdout");
    sc_train->set_config("--config", "", "Config file with key = value lines");
    sc_train->add_option("--data", tr.data, "Dataset .xfd path")->required();
    sc_train->add_option("--holdout", tr.holdout, "Domain id excluded from training")->required();
    sc_train->add_option("-o,--out", tr.out_dir, "Run directory")->required();
    sc_train->add_option("--resume", tr.resume, "Checkpoint (.xfc) to continue from");
    tr.seed_opt = sc_train->add_option("--seed", tr.cfg.seed, "Run seed (XFLOWDG_SEED overrides "
                                                              "the default)");
    add_config_flags(sc_train, tr.cfg, tr.ablate);
    tr.iters_opt = sc_train->get_option("--iters");
    tr.steps_opt = sc_train->get_option("--steps");
    tr.steps_eval_opt = sc_train->get_option("--steps-eval");
    add_text_flags(sc_train, tr.topts);

    EvalArgs ev;
    auto* sc_eval = app.add_subcommand("eval", "Evaluate a checkpoint on one held-out domain");
    sc_eval->set_config("--config", "", "Config file with key = value lines");
    sc_eval->add_option("--ckpt", ev.ckpt, "Checkpoint .xfc path")->required();
    sc_eval->add_option("--data", ev.data, "Dataset .xfd path")->required();
    sc_eval->add_option("--holdout", ev.holdout, "Domain id to evaluate on")->required();
    sc_eval->add_option("--steps", ev.steps, "Euler steps: one value or comma list (sweep)");
    sc_eval->add_option("-o,--out", ev.out_csv, "Also write the CSV here");
    add_text_flags(sc_eval, ev.topts);

    LodoArgs lodo;
    auto* sc_lodo = app.add_subcommand("lodo", "Full leave-one-domain-out table");
    sc_lodo->set_config("--config", "", "Config file with key = value lines");
    sc_lodo->add_option("--data", lodo.data, "Dataset .xfd path")->required();
    sc_lodo->add_option("-o,--out", lodo.out_dir, "Run directory")->required();
    lodo.seed_opt = sc_lodo->add_option("--seed", lodo.cfg.seed, "Base seed (fold seed = base + "
                                                                 "domain id)");
    add_config_flags(sc_lodo, lodo.cfg, lodo.ablate);
    add_text_flags(sc_lodo, lodo.topts);

    LodoArgs abl;
    auto* sc_abl = app.add_subcommand("ablate", "4-configuration LODO comparison table");
    sc_abl->set_config("--config", "", "Config file with key = value lines");
    sc_abl->add_option("--data", abl.data, "Dataset .xfd path")->required();
    sc_abl->add_option("-o,--out", abl.out_dir, "Run directory")->required();
    abl.seed_opt = sc_abl->add_option("--seed", abl.cfg.seed, "Base seed");
    std::string abl_unused;
    add_config_flags(sc_abl, abl.cfg, abl_unused);
    add_text_flags(sc_abl, abl.topts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sc_synth->parsed()) return cmd_synth(synth);
        if (sc_train->parsed()) return cmd_train(tr);
        if (sc_eval->parsed()) return cmd_eval(ev);
        if (sc_lodo->parsed()) return cmd_lodo(lodo, false);
        if (sc_abl->parsed()) return cmd_lodo(abl, true);
    } catch (const ArgumentError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const StateError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const MetricUndefinedError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
