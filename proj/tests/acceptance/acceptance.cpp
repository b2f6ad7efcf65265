// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rcml/cli.hpp"
#include "rcml/dataio.hpp"
#include "rcml/evalsuite.hpp"
#include "rcml/experiments.hpp"
#include "rcml/model.hpp"
#include "rcml/relation_attention.hpp"
#include "rcml/vocab.hpp"

namespace fs = std::filesystem;
using namespace rcml;

namespace {

// Pinned tolerances and thresholds.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kClipTolerance = 1e-12;
constexpr std::size_t kClipBatches = 20;
constexpr std::size_t kAttentionInstances = 1000;
constexpr double kRowSumTolerance = 1e-9;
constexpr double kScaleTolerance = 1e-9;
constexpr std::size_t kRandomQueries = 10000;
constexpr double kRandomHitLow = 0.218, kRandomHitHigh = 0.258;
constexpr double kRandomTypeLow = 0.27, kRandomTypeHigh = 0.33;
constexpr double kRandomBaseline = 0.238;
constexpr double kClipMargin = 0.05;
constexpr double kRandomMargin = 0.15;
constexpr std::size_t kMaxEpochs = 30;
constexpr double kTrainSeconds = 600.0;
constexpr double kTypeThreshold = 0.40;
constexpr double kShuffledLow = 0.45, kShuffledHigh = 0.55;
const std::vector<std::uint64_t> kAblationSeeds{42, 43, 44};
const std::vector<double> kSweepBetas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

struct Line {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Line> lines;
nlohmann::ordered_json results = nlohmann::ordered_json::object();

void report(int id, bool pass, const std::string& detail) {
    lines.push_back({id, pass, detail});
    std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << " | " << detail << std::endl;
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string read_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run_tool(std::vector<std::string> args) {
    args.insert(args.begin(), "rcml");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::cerr << "rcml " << args[1] << " failed (" << code << "): " << err.str();
    return code;
}

double hit_avg(const RunResult& r) { return r.metrics.hit(SimilarityMode::AVG).value_or(0.0); }

void criterion_gradcheck() {
    const auto start = std::chrono::steady_clock::now();
    GradcheckOptions opt;
    opt.width = 8;
    opt.batch = 4;
    opt.beta = 0.6;
    opt.step = 1e-5;
    const GradCheckReport r = run_gradcheck(opt);
    const double secs = seconds_since(start);
    results["gradcheck"] = {{"max_rel_error", r.max_rel_error}, {"worst", r.worst().name}, {"seconds", secs}};
    report(1, r.max_rel_error < kGradTolerance && secs < kGradSeconds,
           "max rel error " + fmt(r.max_rel_error, 3) + " (" + r.worst().name + ") < " + fmt(kGradTolerance) + ", " +
               fmt(secs, 3) + " s < " + fmt(kGradSeconds) + " s");
}

void criterion_clip() {
    const ClipCheckResult r = run_clip_check(42, kClipBatches, kClipTolerance);
    results["clip_reduction"] = {{"batches", r.batches}, {"max_gap", r.max_hard_gap}, {"soft_gap", r.min_soft_gap}};
    report(2, r.passed && r.batches == kClipBatches && r.max_hard_gap <= kClipTolerance,
           "max |loss - CLIP reference| " + fmt(r.max_hard_gap, 3) + " over " + std::to_string(r.batches) +
               " batches (<= " + fmt(kClipTolerance) + ")");
}

void criterion_attention() {
    Rng rng(2718);
    std::size_t bad_rows = 0, bad_beta0 = 0, bad_norm = 0, bad_scale = 0;
    double worst_sum = 0.0, worst_scale = 0.0;
    Tape::Scope none(nullptr);
    for (std::size_t n = 0; n < kAttentionInstances; ++n) {
        const std::size_t d = 2 + rng.below(7), L = 1 + rng.below(10), summary = rng.below(L);
        const std::size_t variant = n % 4;  // 0: beta 0, 1: random beta, 2: beta 1 soft, 3: beta 1 hard
        const double beta = variant == 0 ? 0.0 : variant == 1 ? rng.uniform() : 1.0;
        const BetaOneMode mode = variant == 3 ? BetaOneMode::hard : BetaOneMode::soft;
        AttentionParams p = AttentionParams::init(d, rng, 0.2 + rng.uniform(), beta, mode);
        std::vector<double> x(L * d);
        for (double& v : x) v = rng.normal();
        std::vector<bool> pads(L, false);
        for (std::size_t t = 0; t < L; ++t) pads[t] = t != summary && rng.uniform() < 0.3;
        const TokenMatrix tokens{Tensor({L, d}, x), summary, pads};
        std::vector<double> h(d);
        for (double& v : h) v = rng.normal();
        const PairKind kind = (rng.uniform() < 0.5 || p.hard_pooling()) ? PairKind::intra : PairKind::inter;

        const Tensor q = relation_query(Tensor({1, d}, h), tokens, p);
        const Tensor a = relation_attention(q, summary_mask(kind, L, summary), p);
        double s = 0.0;
        bool ok = true;
        for (std::size_t t = 0; t < L; ++t) {
            const double v = a.values()[t];
            ok = ok && v >= 0.0 && std::isfinite(v) && (!pads[t] || v == 0.0);
            s += v;
        }
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
        if (!ok || std::abs(s - 1.0) > kRowSumTolerance) ++bad_rows;
        if (beta == 0.0) {
            const Tensor ref = softmax(q);
            for (std::size_t t = 0; t < L; ++t) {
                if (a.values()[t] != ref.values()[t]) {
                    ++bad_beta0;
                    break;
                }
            }
        }
        const Tensor z = contextual_features(a, tokens, p);
        double norm = 0.0;
        for (double v : z.values()) norm += v * v;
        if (std::abs(std::sqrt(norm) - 1.0) > kRowSumTolerance) ++bad_norm;
        for (double c : {0.5, 2.0, 100.0}) {
            AttentionParams scaled = p;
            scaled.w_out = scale(p.w_out, c);
            const Tensor z2 = contextual_features(a, tokens, scaled);
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = std::abs(z2.values()[k] - z.values()[k]);
                worst_scale = std::max(worst_scale, diff);
                if (diff >= kScaleTolerance) {
                    ++bad_scale;
                    break;
                }
            }
        }
    }
    results["attention"] = {{"instances", kAttentionInstances}, {"bad_rows", bad_rows}, {"bad_beta0", bad_beta0},
                            {"bad_norm", bad_norm}, {"bad_scale", bad_scale}, {"worst_row_sum_gap", worst_sum},
                            {"worst_scale_diff", worst_scale}};
    report(3, bad_rows + bad_beta0 + bad_norm + bad_scale == 0,
           std::to_string(kAttentionInstances) + " instances: row violations " + std::to_string(bad_rows) +
               ", beta=0 mismatches " + std::to_string(bad_beta0) + ", non-unit z " + std::to_string(bad_norm) +
               ", W_o scaling diffs " + std::to_string(bad_scale) + " (worst row-sum gap " + fmt(worst_sum, 3) +
               ", worst scaling diff " + fmt(worst_scale, 3) + ")");
}

void criterion_random(const Dataset& data) {
    std::vector<RetrievalQuery> queries;
    for (std::uint64_t s = 0; queries.size() < kRandomQueries; ++s) {
        auto more = build_retrieval_queries(data.samples, data.edges, data.edges, kRetrievalNegatives, 1000 + s);
        queries.insert(queries.end(), more.begin(), more.end());
    }
    queries.resize(kRandomQueries);
    Rng rng(31337);
    const double hit = retrieval_eval(queries, [&](const RetrievalQuery& q) {
        std::vector<double> s(q.candidates.size());
        for (double& v : s) v = rng.uniform();
        return s;
    });
    std::vector<TypeQuery> types;
    for (std::size_t i = 0; types.size() < kRandomQueries; ++i) {
        const auto& e = data.edges[i % data.edges.size()];
        types.push_back({e.src, e.dst, e.relation_type});
    }
    const double top3 = type_prediction_eval(types, [&](const TypeQuery&) {
        std::vector<double> s(data.num_relation_types);
        for (double& v : s) v = rng.uniform();
        return s;
    }, data.num_relation_types);
    results["random_scorer"] = {{"hit5", hit}, {"type_top3", top3}, {"num_types", data.num_relation_types}};
    report(4, hit >= kRandomHitLow && hit <= kRandomHitHigh && top3 >= kRandomTypeLow && top3 <= kRandomTypeHigh &&
                  data.num_relation_types == 10,
           "random Hit@5 " + fmt(hit) + " in [" + fmt(kRandomHitLow) + ", " + fmt(kRandomHitHigh) +
               "], random type Top-3 " + fmt(top3) + " in [" + fmt(kRandomTypeLow) + ", " + fmt(kRandomTypeHigh) +
               "] (K = " + std::to_string(data.num_relation_types) + ")");
}

nlohmann::ordered_json run_json(const RunResult& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(r.metrics.to_json());
    j["epochs_run"] = r.fit.report.stopping_epoch;
    j["best_epoch"] = r.fit.report.best_epoch;
    j["wall_seconds"] = r.fit.report.wall_seconds;
    return j;
}

void criterion_determinism(const fs::path& work) {
    bool same = true;
    std::string detail;
    auto once = [&](const fs::path& root) {
        const std::string data = (root / "data").string(), model = (root / "model").string(),
                          metrics = (root / "metrics").string();
        fs::remove_all(root);
        return run_tool({"gen-data", "--out", data, "--seed", "42"}) == 0 &&
               run_tool({"train", "--data", data, "--out", model, "--seed", "42", "--max-epochs", "2"}) == 0 &&
               run_tool({"eval", "--checkpoint", model + "/checkpoint.bin", "--data", data, "--out", metrics}) == 0;
    };
    const fs::path a = work / "rerun_a", b = work / "rerun_b";
    if (!once(a) || !once(b)) {
        report(10, false, "pipeline failed");
        return;
    }
    for (const char* f : {"data/samples.jsonl", "data/edges.jsonl", "data/manifest.json", "model/checkpoint.bin", "model/train_report.json",
                          "metrics/metrics.json"}) {
        const bool eq = read_bytes(a / f) == read_bytes(b / f) && !read_bytes(a / f).empty();
        same = same && eq;
        if (!eq) detail += std::string(" differs: ") + f;
    }
    const ModelParams loaded = load_checkpoint(a / "model" / "checkpoint.bin");
    save_checkpoint(work / "resaved.bin", loaded);
    const bool roundtrip = read_bytes(work / "resaved.bin") == read_bytes(a / "model" / "checkpoint.bin");
    const ModelParams again = load_checkpoint(work / "resaved.bin");
    bool values_equal = true;
    const auto x = loaded.named(), y = again.named();
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t k = 0; k < x[i].tensor.numel(); ++k) {
            values_equal = values_equal && x[i].tensor.values()[k] == y[i].tensor.values()[k];
        }
    }
    results["determinism"] = {{"rerun_identical", same}, {"checkpoint_roundtrip", roundtrip && values_equal}};
    report(10, same && roundtrip && values_equal,
           std::string("rerun bytes ") + (same ? "identical" : "differ") + detail + "; checkpoint round-trip " +
               (roundtrip && values_equal ? "bitwise" : "mismatch"));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rcml acceptance suite"};
    std::string work_dir = "acceptance_work";
    app.add_option("--work-dir", work_dir, "Scratch directory");
    CLI11_PARSE(app, argc, argv);
    const fs::path work(work_dir);
    fs::create_directories(work);
    const auto suite_start = std::chrono::steady_clock::now();

    criterion_gradcheck();
    criterion_clip();
    criterion_attention();

    // Default synthetic corpus, written and reloaded as the tool would.
    const fs::path data_dir = work / "default_data";
    write_dataset(generate(GeneratorConfig{}), data_dir);
    const Dataset data = load(DatasetFiles::in(data_dir));
    const DatasetSplit parts = split(data.edges, data.test_fraction, data.split_seed);
    criterion_random(data);

    const TrainConfig base;
    const EvalOptions options;
    std::map<std::uint64_t, std::map<AblationSetting, RunResult>> ablations;
    auto run_setting = [&](std::uint64_t seed, AblationSetting s) -> const RunResult& {
        auto& slot = ablations[seed];
        auto it = slot.find(s);
        if (it == slot.end()) {
            TrainConfig c = base;
            c.seed = seed;
            EvalOptions o = options;
            o.seed = seed;
            const RunResult r = ablation_run(data, parts, c, s, o);
            std::cout << "  trained " << to_string(s) << " seed " << seed << ": Hit@5 AVG " << fmt(hit_avg(r))
                      << ", type " << fmt(r.metrics.type_top3.value_or(0.0)) << ", " << r.fit.report.stopping_epoch
                      << " epochs, " << fmt(r.fit.report.wall_seconds, 3) << " s" << std::endl;
            it = slot.emplace(s, r).first;
        }
        return it->second;
    };

    // 5: full model against the CLIP reduction and the random baseline.
    const RunResult& full = run_setting(42, AblationSetting::full);
    const RunResult clip = train_and_evaluate(data, parts, clip_baseline(base), options, "clip");
    std::cout << "  trained clip baseline: Hit@5 AVG " << fmt(hit_avg(clip)) << std::endl;
    results["full"] = run_json(full);
    results["clip"] = run_json(clip);
    {
        const double f = hit_avg(full), c = hit_avg(clip);
        const bool pass = f - c >= kClipMargin && f - kRandomBaseline >= kRandomMargin &&
                          full.fit.report.stopping_epoch <= kMaxEpochs && full.fit.report.wall_seconds < kTrainSeconds;
        report(5, pass,
               "full Hit@5 AVG " + fmt(f) + " vs CLIP " + fmt(c) + " (margin " + fmt(f - c) + " >= " + fmt(kClipMargin) +
                   "), vs random " + fmt(kRandomBaseline) + " (margin " + fmt(f - kRandomBaseline) + " >= " +
                   fmt(kRandomMargin) + "), " + std::to_string(full.fit.report.stopping_epoch) + " epochs, " +
                   fmt(full.fit.report.wall_seconds, 3) + " s");
    }

    // 8 and 9 use the same full and CLIP runs.
    {
        const double t = full.metrics.type_top3.value_or(0.0);
        report(8, t >= kTypeThreshold, "type Top-3 " + fmt(t) + " >= " + fmt(kTypeThreshold));
        const double v = full.metrics.validity_accuracy.value_or(0.0), vc = clip.metrics.validity_accuracy.value_or(0.0);
        const double sh = full.metrics.validity_shuffled_accuracy.value_or(0.0);
        report(9, v > vc && sh >= kShuffledLow && sh <= kShuffledHigh,
               "validity probe RCML " + fmt(v) + " > CLIP " + fmt(vc) + ", shuffled-label control " + fmt(sh) + " in [" +
                   fmt(kShuffledLow) + ", " + fmt(kShuffledHigh) + "]");
    }

    // 7: beta sweep at seed 42; beta = 0.6 is the full run.
    {
        std::vector<std::pair<double, double>> sweep;
        nlohmann::ordered_json js = nlohmann::ordered_json::array();
        for (double beta : kSweepBetas) {
            double h = 0.0;
            if (beta == base.beta) {
                h = hit_avg(full);
            } else {
                TrainConfig c = base;
                c.beta = beta;
                c.beta_one_mode = BetaOneMode::soft;
                const RunResult r = train_and_evaluate(data, parts, c, options, "beta");
                h = hit_avg(r);
                std::cout << "  trained beta " << beta << ": Hit@5 AVG " << fmt(h) << std::endl;
            }
            sweep.push_back({beta, h});
            js.push_back({{"beta", beta}, {"hit5_avg", h}});
        }
        results["beta_sweep"] = js;
        const auto best = std::max_element(sweep.begin(), sweep.end(),
                                           [](const auto& x, const auto& y) { return x.second < y.second; });
        const double one = sweep.back().second;
        bool strictly_worst = true;
        for (std::size_t i = 0; i + 1 < sweep.size(); ++i) strictly_worst = strictly_worst && sweep[i].second > one;
        const bool best_ok = best->first == 0.2 || best->first == 0.4 || best->first == 0.6;
        std::string table;
        for (const auto& [b, h] : sweep) table += (table.empty() ? "" : ", ") + fmt(b, 2) + ":" + fmt(h);
        report(7, best_ok && strictly_worst,
               "Hit@5 AVG by beta {" + table + "}; best at " + fmt(best->first, 2) + ", beta=1.0-soft " +
                   (strictly_worst ? "strictly worst" : "not strictly worst"));
    }

    // 6: ablations over three seeds.
    {
        std::map<AblationSetting, double> mean;
        nlohmann::ordered_json js = nlohmann::ordered_json::object();
        for (AblationSetting s : all_ablation_settings()) {
            double sum = 0.0;
            nlohmann::ordered_json per = nlohmann::ordered_json::array();
            for (std::uint64_t seed : kAblationSeeds) {
                const double h = hit_avg(run_setting(seed, s));
                sum += h;
                per.push_back(h);
            }
            mean[s] = sum / static_cast<double>(kAblationSeeds.size());
            js[to_string(s)] = {{"per_seed", per}, {"mean", mean[s]}};
        }
        results["ablations"] = js;
        const double f = mean[AblationSetting::full];
        bool ordered = true;
        std::string table;
        for (const auto& [s, m] : mean) {
            if (s != AblationSetting::full) ordered = ordered && f >= m;
            table += (table.empty() ? "" : ", ") + to_string(s) + " " + fmt(m);
        }
        const double inter_drop = f - mean[AblationSetting::no_inter_edge];
        const double intra_drop = f - mean[AblationSetting::no_intra_loss];
        report(6, ordered && inter_drop > intra_drop,
               "3-seed mean Hit@5 AVG {" + table + "}; no_inter_edge drop " + fmt(inter_drop) +
                   " > no_intra_loss drop " + fmt(intra_drop));
    }

    criterion_determinism(work);

    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
    std::cout << "\nsummary (" << fmt(seconds_since(suite_start), 4) << " s)\n";
    bool all = true;
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& l : lines) {
        std::cout << "criterion " << l.id << ": " << (l.pass ? "PASS" : "FAIL") << '\n';
        all = all && l.pass;
        summary.push_back({{"criterion", l.id}, {"pass", l.pass}, {"detail", l.detail}});
    }
    results["criteria"] = summary;
    std::ofstream(work / "acceptance_results.json") << results.dump(2) << '\n';
    return all ? 0 : 1;
}
