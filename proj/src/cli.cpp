#include "rcml/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rcml/config.hpp"
#include "rcml/errors.hpp"
#include "rcml/experiments.hpp"
#include "rcml/hashing.hpp"

namespace rcml {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Small random problems for the verification commands

struct TinyProblem {
    ModelParams params;
    std::vector<Sample> samples;
    PairBatch batch;
};

std::vector<Sample> random_samples(std::size_t count, const EncoderDims& dims, std::size_t patches, Rng& rng) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < count; ++i) {
        Sample s;
        s.id = static_cast<SampleId>(i);
        const std::size_t length = 3 + rng.below(5);
        for (std::size_t t = 0; t < length; ++t) {
            s.text_tokens.push_back(static_cast<TokenId>(2 + rng.below(dims.vocab_size - 2)));
        }
        s.text_tokens.push_back(kEotToken);
        for (std::size_t p = 0; p < patches; ++p) {
            Patch patch(dims.patch_width);
            for (double& x : patch) x = rng.normal();
            s.image_patches.push_back(std::move(patch));
        }
        out.push_back(std::move(s));
    }
    return out;
}

EncoderDims tiny_dims(std::size_t width) {
    EncoderDims d;
    d.vocab_size = 64;
    d.width = width;
    d.max_text_len = 12;
    d.max_image_len = 5;
    d.patch_width = 4;
    d.depth = 1;
    return d;
}

TinyProblem tiny_problem(std::uint64_t seed, std::size_t width, std::size_t batch, double beta, BetaOneMode mode,
                         bool with_edges, double init_std) {
    Rng rng(seed);
    const EncoderDims dims = tiny_dims(width);
    TinyProblem p{ModelParams::init(ModelConfig{dims, init_std, beta, mode}, mix_seed(seed, 7)),
                  random_samples(batch, dims, 4, rng),
                  {}};
    std::vector<RelationEdge> edges;
    if (with_edges) {
        for (std::size_t i = 0; i + 1 < batch; i += 2) {
            const int type = static_cast<int>((i / 2) % 2);
            edges.push_back({static_cast<SampleId>(i), static_cast<SampleId>(i + 1), vocab::relation_tokens(type), type});
        }
    }
    PairingConfig pc;
    pc.batch_size = batch;
    pc.include_inter = with_edges;
    const BatchPlanner planner(p.samples, edges, pc);
    std::vector<SampleId> roster;
    for (const auto& s : p.samples) roster.push_back(s.id);
    p.batch = planner.make_batch(roster, rng);
    return p;
}

// Squares its input but reports a gradient of 3x instead of 2x.
Tensor faulty_square_sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v * v;
    Tape* tape = recording_tape({&x});
    return make_result({1, 1}, {s}, tape, [x](std::span<const double> g) {
        auto gx = x.grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * 3.0 * x.values()[i];
    });
}

// Pairwise image-text InfoNCE written directly over rows, with the global
// embedding taken from the summary token.
double reference_clip_loss(const ModelParams& params, std::span<const Sample> samples, double tau) {
    Tape::Scope none(nullptr);
    const std::size_t d = params.config.dims.width;
    auto global = [&](const TokenMatrix& tokens) {
        const Tensor row = gather_rows(tokens.features, std::vector<std::size_t>{tokens.summary_index});
        const Tensor projected = matmul(matmul_transposed(row, params.attention.w_value), params.attention.w_out);
        const auto z = projected.values();
        double n = 0.0;
        for (double v : z) n += v * v;
        n = std::sqrt(n);
        std::vector<double> out(d);
        for (std::size_t i = 0; i < d; ++i) out[i] = z[i] / n;
        return out;
    };
    std::vector<std::vector<double>> text, image;
    for (const auto& s : samples) {
        text.push_back(global(encode_text(params.text, s.text_tokens)));
        image.push_back(global(encode_image(params.image, s.image_patches)));
    }
    const std::size_t n = samples.size();
    auto direction = [&](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> logits(n);
            double hi = -INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) s += a[i][k] * b[j][k];
                logits[j] = s / tau;
                hi = std::max(hi, logits[j]);
            }
            double z = 0.0;
            for (double l : logits) z += std::exp(l - hi);
            total += hi + std::log(z) - logits[i];
        }
        return total / static_cast<double>(n);
    };
    return 0.5 * (direction(text, image) + direction(image, text));
}

// ---------------------------------------------------------------------------
// Run manifests

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    const RunConfig* config = nullptr;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    std::optional<double> wall_seconds;
};

void write_manifest(const fs::path& path, const Manifest& m) {
    ordered_json j;
    j["command"] = m.command;
    j["argv"] = m.argv;
    if (m.config != nullptr) {
        ordered_json cfg = ordered_json::object();
        for (const auto& key : RunConfig::keys()) cfg[key] = m.config->get(key);
        j["seed"] = m.config->train.seed;
        j["config"] = cfg;
        j["config_hash"] = sha1_hex(m.config->to_text());
    }
    auto hashes = [](const std::vector<fs::path>& files) {
        ordered_json arr = ordered_json::array();
        for (const auto& f : files) {
            arr.push_back({{"path", f.string()}, {"git_blob_sha1", fs::exists(f) ? git_blob_hash_file(f) : ""}});
        }
        return arr;
    };
    j["inputs"] = hashes(m.inputs);
    j["outputs"] = hashes(m.outputs);
    if (m.wall_seconds) j["wall_seconds"] = *m.wall_seconds;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write " + path.string());
    os << text;
}

Dataset load_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw FormatError("data directory not found: " + dir.string());
    return load(DatasetFiles::in(dir));
}

DatasetSplit dataset_split(const Dataset& d) { return split(d.edges, d.test_fraction, d.split_seed); }

void check_dims(const Dataset& d, const TrainConfig& c) {
    std::size_t longest_text = 0, patches = 0;
    for (const auto& s : d.samples) {
        longest_text = std::max(longest_text, s.text_tokens.size());
        patches = std::max(patches, s.image_patches.size());
    }
    if (d.vocab_size != c.dims.vocab_size) throw ConfigError("vocab_size differs from the dataset's");
    if (d.patch_width != c.dims.patch_width) throw ConfigError("patch_width differs from the dataset's");
    if (longest_text > c.dims.max_text_len) throw ConfigError("max_text_len is shorter than the dataset's texts");
    if (patches + 1 > c.dims.max_image_len) throw ConfigError("max_image_len must be at least patches + 1");
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("expected a comma-separated number list, got '" + text + "'");
        }
    }
    return out;
}

std::string csv_number(std::optional<double> v) {
    if (!v) return "";
    std::ostringstream os;
    os << std::setprecision(6) << *v;
    return os.str();
}

std::string metrics_csv_header() {
    std::string h = "tag,seed,beta";
    for (auto m : all_similarity_modes()) h += ",hit5_" + to_string(m);
    return h + ",type_top3,validity,inter_pairs,config_hash\n";
}

std::string metrics_csv_row(const MetricsReport& m, std::uint64_t seed, double beta) {
    std::ostringstream os;
    os << m.tag << ',' << seed << ',' << beta;
    for (auto mode : all_similarity_modes()) os << ',' << csv_number(m.hit(mode));
    os << ',' << csv_number(m.type_top3) << ',' << csv_number(m.validity_accuracy) << ',' << m.inter_pair_count << ','
       << m.config_hash << '\n';
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

GradCheckReport run_gradcheck(const GradcheckOptions& o) {
    TinyProblem p = tiny_problem(o.seed, o.width, o.batch, o.beta, BetaOneMode::soft, true, 0.3);
    const SampleIndex index(p.samples);
    LossConfig loss;
    std::vector<NamedTensor> params = p.params.named();
    const Tensor fault_target = p.params.attention.w_query;
    auto loss_fn = [&]() {
        Tensor l = total_loss(batch_features(p.params, p.batch, index), loss).total;
        if (o.inject_fault) l = add(l, scale(faulty_square_sum(fault_target), 0.1));
        return l;
    };
    return grad_check(loss_fn, params, o.step);
}

ClipCheckResult run_clip_check(std::uint64_t seed, std::size_t batches, double tolerance) {
    ClipCheckResult r;
    r.batches = batches;
    r.min_soft_gap = INFINITY;
    LossConfig loss;
    loss.cross_modal_only = true;
    for (std::size_t b = 0; b < batches; ++b) {
        const std::uint64_t s = mix_seed(seed, b);
        TinyProblem hard = tiny_problem(s, 16, 8, 1.0, BetaOneMode::hard, false, 0.3);
        const double reference = reference_clip_loss(hard.params, hard.samples, loss.tau);
        Tape::Scope none(nullptr);
        const SampleIndex index(hard.samples);
        const double ours = total_loss(batch_features(hard.params, hard.batch, index), loss).total.item();
        r.max_hard_gap = std::max(r.max_hard_gap, std::abs(ours - reference));

        ModelParams soft = hard.params;
        soft.attention.beta_one_mode = BetaOneMode::soft;
        const double soft_loss = total_loss(batch_features(soft, hard.batch, index), loss).total.item();
        r.min_soft_gap = std::min(r.min_soft_gap, std::abs(soft_loss - reference));
    }
    r.passed = r.max_hard_gap <= tolerance;
    return r;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Relation-conditioned multimodal contrastive learning toolkit", "rcml"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rcml 1.0");

    RunConfig config;
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Flat key = value config file")->check(CLI::ExistingFile);
        cmd->add_option("--set", overrides, "Override a config key (key=value), repeatable");
        cmd->add_option("--seed", seed, "Random seed for every stage");
        cmd->add_option("--workers", workers, "Worker threads for encoding (training and evaluation)");
    };

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic relational dataset");
    std::string gen_out = "data";
    common(gen);
    gen->add_option("--out", gen_out, "Output directory");

    // train
    auto* train = app.add_subcommand("train", "Train a model on a dataset directory");
    std::string train_data, train_out = "run";
    std::optional<double> beta;
    std::optional<std::string> beta_mode;
    std::optional<std::size_t> max_epochs;
    bool cross_modal_only = false, no_inter = false, no_intra = false, no_desc = false, freeze = false;
    common(train);
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--out", train_out, "Output directory");
    train->add_option("--beta", beta, "Attention balance coefficient");
    train->add_option("--beta-one-mode", beta_mode, "soft or hard");
    train->add_option("--max-epochs", max_epochs, "Epoch limit");
    train->add_flag("--cross-modal-only", cross_modal_only, "Drop the text-text and image-image terms");
    train->add_flag("--no-inter-edges", no_inter, "Train on self pairs only");
    train->add_flag("--no-intra-loss", no_intra, "Disable the intra-modal terms");
    train->add_flag("--no-edge-description", no_desc, "Replace relation texts with the generic one");
    train->add_flag("--freeze-encoders", freeze, "Train the attention module only");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_ckpt, eval_data, eval_out, eval_task = "all", eval_mode = "all";
    bool eval_generic = false;
    common(ev);
    ev->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    ev->add_option("--data", eval_data, "Dataset directory")->required();
    ev->add_option("--out", eval_out, "Directory for metrics.json and metrics.txt");
    ev->add_option("--task", eval_task, "retrieval, type, validity or all")
        ->check(CLI::IsMember({"retrieval", "type", "validity", "all"}));
    ev->add_option("--mode", eval_mode, "TT, II, TI, IT, AVG, a comma list, or all");
    ev->add_flag("--no-edge-description", eval_generic, "Condition on the generic relation text");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full loss");
    GradcheckOptions gopt;
    double gtol = 1e-4;
    gc->add_option("--width", gopt.width, "Feature width d");
    gc->add_option("--batch", gopt.batch, "Batch size");
    gc->add_option("--beta", gopt.beta, "Attention balance coefficient");
    gc->add_option("--step", gopt.step, "Central-difference step");
    gc->add_option("--seed", gopt.seed, "Random seed");
    gc->add_option("--tolerance", gtol, "Maximum relative error");
    gc->add_flag("--inject-fault", gopt.inject_fault, "Add a primitive with a wrong gradient (self-test)");

    // clip-check
    auto* cc = app.add_subcommand("clip-check", "Check the CLIP special case of the loss");
    std::uint64_t cc_seed = 42;
    std::size_t cc_batches = 20;
    cc->add_option("--seed", cc_seed, "Random seed");
    cc->add_option("--batches", cc_batches, "Number of random batches");

    // ablate
    auto* ab = app.add_subcommand("ablate", "Train and evaluate every ablation setting");
    std::string ab_data, ab_out = "ablation", ab_seeds;
    common(ab);
    ab->add_option("--data", ab_data, "Dataset directory")->required();
    ab->add_option("--out", ab_out, "Output directory");
    ab->add_option("--seeds", ab_seeds, "Comma-separated training seeds (default: the config seed)");

    // beta-sweep
    auto* bs = app.add_subcommand("beta-sweep", "Train and evaluate across beta values");
    std::string bs_data, bs_out = "beta_sweep", bs_betas = "0,0.2,0.4,0.6,0.8,1.0";
    common(bs);
    bs->add_option("--data", bs_data, "Dataset directory")->required();
    bs->add_option("--out", bs_out, "Output directory");
    bs->add_option("--betas", bs_betas, "Comma-separated beta values");

    // dump-embeddings
    auto* de = app.add_subcommand("dump-embeddings", "Write relation-conditioned embeddings as JSONL");
    std::string de_ckpt, de_data, de_out = "embeddings.jsonl";
    common(de);
    de->add_option("--checkpoint", de_ckpt, "Checkpoint file")->required();
    de->add_option("--data", de_data, "Dataset directory")->required();
    de->add_option("--out", de_out, "Output JSONL file");

    std::vector<std::string> args(argv, argv + argc);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        auto resolve = [&]() {
            if (!config_path.empty()) config.apply(ConfigTable::load(config_path));
            ConfigTable flags;
            for (const auto& o : overrides) {
                const auto eq = o.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
                flags.set(o.substr(0, eq), o.substr(eq + 1), "--set");
            }
            if (seed) flags.set("seed", std::to_string(*seed), "--seed");
            if (workers) flags.set("workers", std::to_string(*workers), "--workers");
            config.apply(flags);
        };

        if (gen->parsed()) {
            resolve();
            const auto generated = generate(config.generator);
            const DatasetFiles files = write_dataset(generated, gen_out);
            write_manifest(fs::path(gen_out) / "run_manifest.json",
                           {"gen-data", args, &config, {}, {files.samples, files.edges, files.manifest}, std::nullopt});
            out << "wrote " << generated.dataset.samples.size() << " samples and " << generated.dataset.edges.size()
                << " edges to " << gen_out << '\n';
            return 0;
        }
        if (train->parsed()) {
            resolve();
            TrainConfig& t = config.train;
            if (beta) t.beta = *beta;
            if (beta_mode) t.beta_one_mode = parse_beta_one_mode(*beta_mode);
            if (max_epochs) t.max_epochs = *max_epochs;
            t.cross_modal_only |= cross_modal_only;
            t.ablation.no_inter_edges |= no_inter;
            t.ablation.no_intra_loss |= no_intra;
            t.ablation.no_edge_description |= no_desc;
            t.ablation.freeze_encoders |= freeze;
            const Dataset data = load_dir(train_data);
            check_dims(data, t);
            const DatasetSplit parts = dataset_split(data);
            FitResult result = fit(data, parts.train, t);
            fs::create_directories(train_out);
            const fs::path ckpt = fs::path(train_out) / "checkpoint.bin";
            const fs::path report = fs::path(train_out) / "train_report.json";
            save_checkpoint(ckpt, result.params);
            write_text(report, result.report.to_json() + "\n");
            const DatasetFiles files = DatasetFiles::in(train_data);
            write_manifest(fs::path(train_out) / "run_manifest.json",
                           {"train", args, &config, {files.samples, files.edges, files.manifest}, {ckpt, report},
                            result.report.wall_seconds});
            out << "trained " << result.report.stopping_epoch << " epochs (best " << result.report.best_epoch
                << ", validation Hit@5 AVG " << result.report.best_validation_hit5 << "), checkpoint " << ckpt.string()
                << '\n';
            if (result.report.aborted) {
                err << "training aborted: " << result.report.abort_reason << '\n';
                return static_cast<int>(ExitCode::numeric);
            }
            return 0;
        }
        if (ev->parsed()) {
            resolve();
            if (!fs::exists(eval_ckpt)) throw FormatError("checkpoint not found: " + eval_ckpt);
            const ModelParams params = load_checkpoint(eval_ckpt);
            const Dataset data = load_dir(eval_data);
            EvalOptions opts = config.eval;
            opts.retrieval = eval_task == "all" || eval_task == "retrieval";
            opts.type_prediction = eval_task == "all" || eval_task == "type";
            opts.validity = eval_task == "all" || eval_task == "validity";
            if (eval_mode == "all") {
                opts.modes = all_similarity_modes();
            } else {
                RunConfig tmp;
                tmp.set("modes", eval_mode);
                opts.modes = tmp.eval.modes;
            }
            opts.generic_relation_text = eval_generic;
            MetricsReport report = evaluate(params, data, dataset_split(data).test, opts);
            report.tag = eval_generic ? "no_edge_description" : "eval";
            report.config_hash = git_blob_hash_file(eval_ckpt);
            out << report.to_text();
            if (!eval_out.empty()) {
                fs::create_directories(eval_out);
                const fs::path json = fs::path(eval_out) / "metrics.json";
                const fs::path text = fs::path(eval_out) / "metrics.txt";
                write_text(json, report.to_json() + "\n");
                write_text(text, report.to_text());
                const DatasetFiles files = DatasetFiles::in(eval_data);
                write_manifest(fs::path(eval_out) / "run_manifest.json",
                               {"eval", args, &config, {eval_ckpt, files.samples, files.edges, files.manifest},
                                {json, text}, std::nullopt});
            }
            return 0;
        }
        if (gc->parsed()) {
            const GradCheckReport r = run_gradcheck(gopt);
            out << std::scientific << std::setprecision(3);
            for (const auto& p : r.params) {
                out << std::left << std::setw(34) << p.name << " max rel err " << p.max_rel_error << "  (index "
                    << p.worst_index << ", analytic " << p.analytic << ", numeric " << p.numeric << ")\n";
            }
            const auto& w = r.worst();
            out << "worst: " << w.name << " " << r.max_rel_error << " (tolerance " << gtol << ")\n";
            const bool ok = r.max_rel_error <= gtol;
            out << (ok ? "PASS" : "FAIL") << '\n';
            return ok ? 0 : static_cast<int>(ExitCode::numeric);
        }
        if (cc->parsed()) {
            const ClipCheckResult r = run_clip_check(cc_seed, cc_batches);
            out << std::scientific << std::setprecision(3) << "hard beta=1: max |loss - reference| = " << r.max_hard_gap
                << " over " << r.batches << " batches\n"
                << "soft beta=1: min |loss - reference| = " << r.min_soft_gap
                << (r.min_soft_gap > 1e-12 ? " (not equal, as expected)" : " (unexpectedly equal)") << '\n'
                << (r.passed ? "PASS" : "FAIL") << '\n';
            return r.passed ? 0 : static_cast<int>(ExitCode::numeric);
        }
        if (ab->parsed()) {
            resolve();
            const Dataset data = load_dir(ab_data);
            check_dims(data, config.train);
            const DatasetSplit parts = dataset_split(data);
            std::vector<double> seeds = ab_seeds.empty() ? std::vector<double>{static_cast<double>(config.train.seed)}
                                                         : parse_list(ab_seeds);
            std::string csv = metrics_csv_header();
            ordered_json rows = ordered_json::array();
            for (double s : seeds) {
                TrainConfig t = config.train;
                t.seed = static_cast<std::uint64_t>(s);
                EvalOptions opts = config.eval;
                opts.seed = t.seed;
                for (AblationSetting setting : all_ablation_settings()) {
                    const RunResult r = ablation_run(data, parts, t, setting, opts);
                    csv += metrics_csv_row(r.metrics, t.seed, t.beta);
                    rows.push_back({{"seed", t.seed}, {"metrics", ordered_json::parse(r.metrics.to_json())}});
                    out << to_string(setting) << " seed " << t.seed << " Hit@5 AVG "
                        << r.metrics.hit(SimilarityMode::AVG).value_or(0.0) << '\n';
                }
            }
            fs::create_directories(ab_out);
            write_text(fs::path(ab_out) / "ablation.csv", csv);
            write_text(fs::path(ab_out) / "ablation.json", rows.dump(2) + "\n");
            const DatasetFiles files = DatasetFiles::in(ab_data);
            write_manifest(fs::path(ab_out) / "run_manifest.json",
                           {"ablate", args, &config, {files.samples, files.edges, files.manifest},
                            {fs::path(ab_out) / "ablation.csv", fs::path(ab_out) / "ablation.json"}, std::nullopt});
            return 0;
        }
        if (bs->parsed()) {
            resolve();
            const Dataset data = load_dir(bs_data);
            check_dims(data, config.train);
            const auto betas = parse_list(bs_betas);
            const auto rows = beta_sweep(data, dataset_split(data), config.train, betas, config.eval);
            std::string csv = metrics_csv_header();
            ordered_json js = ordered_json::array();
            for (const auto& row : rows) {
                csv += metrics_csv_row(row.run.metrics, config.train.seed, row.beta);
                js.push_back({{"beta", row.beta},
                              {"beta_one_mode", to_string(row.beta_one_mode)},
                              {"metrics", ordered_json::parse(row.run.metrics.to_json())}});
                out << row.run.metrics.tag << " Hit@5 AVG " << row.run.metrics.hit(SimilarityMode::AVG).value_or(0.0)
                    << '\n';
            }
            fs::create_directories(bs_out);
            write_text(fs::path(bs_out) / "beta_sweep.csv", csv);
            write_text(fs::path(bs_out) / "beta_sweep.json", js.dump(2) + "\n");
            const DatasetFiles files = DatasetFiles::in(bs_data);
            write_manifest(fs::path(bs_out) / "run_manifest.json",
                           {"beta-sweep", args, &config, {files.samples, files.edges, files.manifest},
                            {fs::path(bs_out) / "beta_sweep.csv", fs::path(bs_out) / "beta_sweep.json"}, std::nullopt});
            return 0;
        }
        if (de->parsed()) {
            resolve();
            const ModelParams params = load_checkpoint(de_ckpt);
            const Dataset data = load_dir(de_data);
            std::ofstream os(de_out, std::ios::trunc);
            if (!os) throw FormatError("cannot write " + de_out);
            dump_embeddings(params, data, os, config.eval.workers);
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return static_cast<int>(ExitCode::usage);
}

}  // namespace rcml
