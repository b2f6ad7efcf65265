#include <cmath>
#include <numbers>

#include "doctest.h"
#include "json.hpp"
#include "rcml/config.hpp"
#include "rcml/errors.hpp"
#include "rcml/experiments.hpp"
#include "rcml/model.hpp"
#include "rcml/optimizer.hpp"
#include "rcml/trainer.hpp"
#include "rcml/vocab.hpp"
#include "support.hpp"

using namespace rcml;

namespace {

struct TinyRun {
    GeneratedDataset data;
    DatasetSplit parts;
    TrainConfig config;
};

TinyRun tiny_run(std::size_t epochs = 2) {
    GeneratorConfig g;
    g.num_samples = 120;
    g.patches_per_item = 4;
    g.patch_width = 4;
    g.tokens_per_item = 8;
    g.edge_keep_rate = 0.5;
    TinyRun r{generate(g), {}, {}};
    r.parts = split(r.data.dataset.edges, g.test_fraction, g.seed);
    r.config.dims.width = 8;
    r.config.dims.max_text_len = 9;
    r.config.dims.max_image_len = 5;
    r.config.dims.patch_width = 4;
    r.config.batch_size = 16;
    r.config.max_epochs = epochs;
    r.config.init_std = 0.1;
    return r;
}

std::vector<double> flat_values(const std::vector<NamedTensor>& tensors) {
    std::vector<double> out;
    for (const auto& t : tensors) out.insert(out.end(), t.tensor.values().begin(), t.tensor.values().end());
    return out;
}

}  // namespace

TEST_CASE("AdamW worked examples") {
    Tensor w({1, 2}, {1.0, -2.0}, true);
    const std::vector<NamedTensor> params{{"w", w}};
    AdamWState state = AdamWState::zeros(params);
    // First step: bias-corrected moments equal g and g^2, so the update is lr * sign(g) plus decay.
    optimizer_step(params, std::vector<std::vector<double>>{{0.5, -3.0}}, state, 0.1, 0.0);
    CHECK(std::abs(w.values()[0] - (1.0 - 0.1 * 0.5 / (0.5 + kAdamEpsilon))) < 1e-15);
    CHECK(std::abs(w.values()[1] - (-2.0 + 0.1 * 3.0 / (3.0 + kAdamEpsilon))) < 1e-15);
    CHECK(state.step == 1);

    // Second step with a zero gradient: m = 0.9 m1, v = 0.999 v1.
    const double x0 = w.values()[0];
    optimizer_step(params, std::vector<std::vector<double>>{{0.0, 0.0}}, state, 0.1, 0.0);
    const double m_hat = 0.9 * 0.1 * 0.5 / (1 - 0.81), v_hat = 0.999 * 0.001 * 0.25 / (1 - 0.998001);
    CHECK(std::abs(w.values()[0] - (x0 - 0.1 * m_hat / (std::sqrt(v_hat) + kAdamEpsilon))) < 1e-14);

    SUBCASE("decoupled weight decay") {
        Tensor v({1, 1}, {2.0}, true);
        const std::vector<NamedTensor> p{{"v", v}};
        AdamWState s = AdamWState::zeros(p);
        optimizer_step(p, std::vector<std::vector<double>>{{0.0}}, s, 0.1, 0.5);
        CHECK(std::abs(v.values()[0] - (2.0 - 0.1 * 0.5 * 2.0)) < 1e-15);
    }
    SUBCASE("non-finite gradients are reported by name") {
        try {
            optimizer_step(params, std::vector<std::vector<double>>{{std::nan(""), 0.0}}, state, 0.1, 0.0);
            FAIL("expected a numeric error");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("'w'") != std::string::npos);
        }
        CHECK_THROWS_AS(optimizer_step(params, std::vector<std::vector<double>>{{1.0}}, state, 0.1, 0.0), DimensionError);
    }
}

TEST_CASE("learning-rate schedule and clipping") {
    CHECK(lr_schedule(0, 100, 1e-3) == 1e-3);
    CHECK(std::abs(lr_schedule(50, 100, 1e-3) - 5e-4) < 1e-18);
    CHECK(std::abs(lr_schedule(100, 100, 1e-3)) < 1e-18);
    CHECK(std::abs(lr_schedule(25, 100, 2.0) - (1.0 + std::cos(std::numbers::pi / 4))) < 1e-15);
    for (std::size_t s = 1; s <= 100; ++s) CHECK(lr_schedule(s, 100, 1.0) <= lr_schedule(s - 1, 100, 1.0));
    CHECK_THROWS_AS(lr_schedule(0, 0, 1.0), ConfigError);
    CHECK_THROWS_AS(lr_schedule(101, 100, 1.0), BoundsError);

    std::vector<std::vector<double>> g{{3.0}, {4.0}};
    CHECK(global_norm(g) == 5.0);
    CHECK(clip_global_norm(g, 1.0) == 5.0);
    CHECK(std::abs(g[0][0] - 0.6) < 1e-15);
    CHECK(std::abs(g[1][0] - 0.8) < 1e-15);
    std::vector<std::vector<double>> h{{3.0}, {4.0}};
    clip_global_norm(h, 0.0);
    CHECK(h[1][0] == 4.0);

    Tensor untouched({1, 3}, {1, 2, 3}, true);
    const auto grads = collect_grads(std::vector<NamedTensor>{{"u", untouched}});
    CHECK(grads == std::vector<std::vector<double>>{{0.0, 0.0, 0.0}});
}

TEST_CASE("training configuration") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.hash() == TrainConfig{}.hash());
    c.beta = 0.4;
    CHECK(c.hash() != TrainConfig{}.hash());
    auto expect_error = [](auto mutate) {
        TrainConfig t;
        mutate(t);
        CHECK_THROWS_AS(t.validate(), ConfigError);
    };
    expect_error([](TrainConfig& t) { t.batch_size = 1; });
    expect_error([](TrainConfig& t) { t.learning_rate = 0.0; });
    expect_error([](TrainConfig& t) { t.beta = 1.2; });
    expect_error([](TrainConfig& t) { t.validation_fraction = 0.0; });
    expect_error([](TrainConfig& t) { t.tau = -1.0; });
    CHECK(parse_schedule("cosine") == Schedule::cosine);
    CHECK(to_string(Schedule::constant) == "constant");
    CHECK_THROWS_AS(parse_schedule("linear"), ConfigError);

    const TrainConfig clip = clip_baseline(TrainConfig{});
    CHECK(clip.beta == 1.0);
    CHECK(clip.beta_one_mode == BetaOneMode::hard);
    CHECK(clip.cross_modal_only);
    CHECK(clip.ablation.no_inter_edges);
    const TrainConfig nointra = apply_ablation(TrainConfig{}, AblationSetting::no_intra_loss);
    CHECK(nointra.ablation.no_intra_loss);
    CHECK_FALSE(nointra.ablation.no_inter_edges);
    for (AblationSetting s : all_ablation_settings()) CHECK(parse_ablation_setting(to_string(s)) == s);
}

TEST_CASE("zero epochs return the initial parameters") {
    TinyRun r = tiny_run(0);
    const FitResult fit0 = fit(r.data.dataset, r.parts.train, r.config);
    const ModelParams init = ModelParams::init(r.config.model(), mix_seed(r.config.seed, 1));
    CHECK(flat_values(fit0.params.named()) == flat_values(init.named()));
    CHECK(fit0.report.epochs.empty());
    CHECK(fit0.report.total_steps == 0);
}

TEST_CASE("training is deterministic and lowers the loss") {
    TinyRun r = tiny_run(2);
    const FitResult a = fit(r.data.dataset, r.parts.train, r.config);
    const FitResult b = fit(r.data.dataset, r.parts.train, r.config);
    CHECK(a.report.same_run(b.report));
    CHECK(flat_values(a.params.named()) == flat_values(b.params.named()));
    CHECK(a.report.final_loss < a.report.initial_loss);
    CHECK(a.report.inter_pair_count > 0);
    CHECK(a.report.train_edges + a.report.validation_edges == r.parts.train.size());
    REQUIRE_FALSE(a.report.lr_trace.empty());
    CHECK(a.report.lr_trace.front() == r.config.learning_rate);
    for (std::size_t i = 1; i < a.report.lr_trace.size(); ++i) CHECK(a.report.lr_trace[i] <= a.report.lr_trace[i - 1]);
    const auto j = nlohmann::json::parse(a.report.to_json());
    CHECK(j.at("epochs").size() == a.report.epochs.size());

    SUBCASE("a different seed gives different parameters") {
        TrainConfig other = r.config;
        other.seed = 7;
        CHECK(flat_values(fit(r.data.dataset, r.parts.train, other).params.named()) != flat_values(a.params.named()));
    }
    SUBCASE("worker count does not change the result") {
        TrainConfig threaded = r.config;
        threaded.workers = 3;
        const FitResult t = fit(r.data.dataset, r.parts.train, threaded);
        CHECK(flat_values(t.params.named()) == flat_values(a.params.named()));
    }
}

TEST_CASE("ablation switches") {
    TinyRun r = tiny_run(1);
    const ModelParams init = ModelParams::init(r.config.model(), mix_seed(r.config.seed, 1));

    SUBCASE("frozen encoders keep their bytes") {
        r.config.ablation.freeze_encoders = true;
        const FitResult f = fit(r.data.dataset, r.parts.train, r.config);
        CHECK(flat_values(f.params.encoder_tensors()) == flat_values(init.encoder_tensors()));
        CHECK(flat_values(f.params.attention_tensors()) != flat_values(init.attention_tensors()));
    }
    SUBCASE("no inter edges trains on self pairs only") {
        r.config.ablation.no_inter_edges = true;
        const FitResult f = fit(r.data.dataset, r.parts.train, r.config);
        CHECK(f.report.inter_pair_count == 0);
        CHECK(f.report.total_steps > 0);
    }
    SUBCASE("stripped descriptions use the generic relation") {
        const auto stripped = strip_descriptions(r.parts.train);
        REQUIRE(stripped.size() == r.parts.train.size());
        for (std::size_t i = 0; i < stripped.size(); ++i) {
            CHECK(stripped[i].relation_text == generic_intra_relation());
            CHECK(stripped[i].src == r.parts.train[i].src);
            CHECK(stripped[i].relation_type == r.parts.train[i].relation_type);
        }
    }
}

TEST_CASE("checkpoint round-trip") {
    TinyRun r = tiny_run(1);
    const FitResult f = fit(r.data.dataset, r.parts.train, r.config);
    const auto dir = testing::scratch_dir("checkpoint");
    save_checkpoint(dir / "a.bin", f.params);
    const ModelParams back = load_checkpoint(dir / "a.bin");
    CHECK(flat_values(back.named()) == flat_values(f.params.named()));
    CHECK(back.config.beta == f.params.config.beta);
    CHECK(back.config.dims.width == f.params.config.dims.width);
    save_checkpoint(dir / "b.bin", back);
    CHECK(testing::read_bytes(dir / "a.bin") == testing::read_bytes(dir / "b.bin"));

    testing::write_bytes(dir / "junk.bin", "not a checkpoint");
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin"), FormatError);
    const std::string bytes = testing::read_bytes(dir / "a.bin");
    testing::write_bytes(dir / "short.bin", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(dir / "short.bin"), FormatError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), FormatError);
}

TEST_CASE("config files") {
    const ConfigTable t = ConfigTable::parse("# comment\nbeta = 0.4\nmodes = \"TT,AVG\"  # trailing\n\nseed=7\nbeta = 0.2\n", "x.cfg");
    REQUIRE(t.entries().size() == 3);
    CHECK(t.entries()[0].value == "0.2");
    CHECK(t.entries()[0].origin == "x.cfg:6");
    RunConfig c;
    c.apply(t);
    CHECK(c.train.beta == 0.2);
    CHECK(c.train.seed == 7);
    CHECK(c.generator.seed == 7);
    CHECK(c.eval.seed == 7);
    CHECK(c.eval.modes == std::vector<SimilarityMode>{SimilarityMode::TT, SimilarityMode::AVG});
    CHECK(c.get("beta") == "0.20000000000000001");

    try {
        ConfigTable::parse("beta = 0.5\nbogus = 1\n", "y.cfg");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("y.cfg:2") != std::string::npos);
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }
    CHECK_THROWS_AS(ConfigTable::parse("[train]\n", "z"), ConfigError);
    CHECK_THROWS_AS(ConfigTable::parse("beta 0.5\n", "z"), ConfigError);
    RunConfig bad;
    CHECK_THROWS_AS(bad.set("beta", "high"), ConfigError);
    CHECK_THROWS_AS(bad.set("max_epochs", "-3"), ConfigError);
    CHECK_THROWS_AS(bad.set("cross_modal_only", "maybe"), ConfigError);
    CHECK_THROWS_AS(ConfigTable::load("/nonexistent/rcml.cfg"), ConfigError);

    RunConfig all;
    for (const auto& key : RunConfig::keys()) {
        RunConfig copy;
        CHECK_NOTHROW(copy.set(key, all.get(key)));
        CHECK(copy.get(key) == all.get(key));
    }
    CHECK(all.to_text().find("beta = 0.59999999999999998") != std::string::npos);
}
