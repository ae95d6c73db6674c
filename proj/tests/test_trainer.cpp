#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <vector>

#include "cmimh/dataio.hpp"
#include "cmimh/trainer.hpp"

using namespace cmimh;

namespace {

NetSizes tiny() { return NetSizes{8, 8, 8, 8}; }

TrainConfig tiny_config(std::uint64_t seed = 1) {
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.seed = seed;
    return cfg;
}

std::vector<double> snapshot(ModelBundle& bundle) {
    std::vector<double> out;
    for (auto& [_, p] : bundle.named_params())
        out.insert(out.end(), p->value.data.begin(), p->value.data.end());
    return out;
}

PairedDataset small_data(std::uint64_t seed = 2) {
    return generate_synthetic(
        SyntheticSpec{.n = 64, .classes = 4, .d_i = 10, .d_t = 8, .seed = seed});
}

}  // namespace

TEST_CASE("sgd_step follows the momentum recurrence") {
    auto p = leaf(Tensor::full(1, 2, 1.0));
    p->grad.data = {0.5, -0.25};
    OptimizerState state;
    std::vector<std::pair<std::string, Var>> params{{"p", p}};
    sgd_step(params, state, 0.1, 0.9, 0.01);
    // v1 = g + wd*p = 0.5 + 0.01, p1 = 1 - 0.1*0.51
    CHECK(p->value[0] == doctest::Approx(1.0 - 0.1 * 0.51).epsilon(1e-15));
    CHECK(state.velocity["p"][0] == doctest::Approx(0.51).epsilon(1e-15));
    const double p1 = p->value[1];
    const double v1 = state.velocity["p"][1];
    CHECK(v1 == doctest::Approx(-0.25 + 0.01).epsilon(1e-12));
    p->grad.data = {0.0, 0.1};
    sgd_step(params, state, 0.1, 0.9, 0.01);
    const double v2 = 0.9 * v1 + 0.1 + 0.01 * p1;
    CHECK(state.velocity["p"][1] == doctest::Approx(v2).epsilon(1e-12));
    CHECK(p->value[1] == doctest::Approx(p1 - 0.1 * v2).epsilon(1e-12));
}

TEST_CASE("config validation rejects bad settings") {
    TrainConfig cfg = tiny_config();
    cfg.batch_size = 1;
    CHECK_THROWS(cfg.validate());
    cfg = tiny_config();
    cfg.lr_main = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = tiny_config();
    cfg.lambdas.l2 = -0.1;
    CHECK_THROWS(cfg.validate());
    cfg = tiny_config();
    cfg.critic_steps_per_main = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
    auto ds = small_data();
    auto run = [&] {
        Trainer t(init_bundle(10, 8, 4, 7, tiny()), tiny_config(3));
        LossBreakdown last{};
        for (int e = 0; e < 2; ++e) last = t.train_epoch(ds.x_i, ds.x_t);
        return std::make_pair(snapshot(t.bundle()), last.total);
    };
    auto [pa, la] = run();
    auto [pb, lb] = run();
    CHECK(pa == pb);
    CHECK(la == lb);
}

TEST_CASE("phase updates touch only their own parameter groups") {
    auto ds = small_data(5);
    // Freeze phase B by zeroing its learning rates is not possible (both
    // positive by contract), so compare against a run with extra critic
    // steps: encoder parameters after phase A alone must be untouched.
    Trainer t(init_bundle(10, 8, 4, 9, tiny()), tiny_config(4));
    auto before = snapshot(t.bundle());

    // One critic phase by hand, mirroring train_epoch's phase A.
    Tensor xi(16, 10), xt(16, 8);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 10; ++c) xi.at(r, c) = ds.x_i.at(r, c);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 8; ++c) xt.at(r, c) = ds.x_t.at(r, c);
    Tensor mu_i = encode_value(t.bundle().encoder_i, xi);
    Tensor mu_t = encode_value(t.bundle().encoder_t, xt);
    Rng rng(1);
    CriticPhase ph = critic_phase(t.bundle(), mu_i, mu_t, rng, ObjectiveOptions{});
    backward(ph.loss);
    sgd_step(t.bundle().critic_classifier_params(), t.opt_state(), 0.01, 0.9, 1e-4);

    auto after = snapshot(t.bundle());
    std::size_t offset = 0;
    for (auto& [name, p] : t.bundle().named_params()) {
        const bool is_critic = name.rfind("critic", 0) == 0 || name.rfind("tc_", 0) == 0;
        bool changed = false;
        for (std::size_t i = 0; i < p->value.size(); ++i)
            changed |= before[offset + i] != after[offset + i];
        CAPTURE(name);
        if (is_critic)
            CHECK(changed);
        else
            CHECK_FALSE(changed);
        offset += p->value.size();
    }
}

TEST_CASE("encoder phase leaves critic and classifier parameters frozen") {
    auto ds = small_data(6);
    Trainer t(init_bundle(10, 8, 4, 11, tiny()), tiny_config(5));
    Tensor xi(16, 10), xt(16, 8);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 10; ++c) xi.at(r, c) = ds.x_i.at(r, c);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 8; ++c) xt.at(r, c) = ds.x_t.at(r, c);

    auto before = snapshot(t.bundle());
    Rng rng(2);
    ForwardPass fp = total_objective(t.bundle(), xi, xt, Lambdas{}, rng, ObjectiveOptions{});
    backward(neg(fp.total));
    std::vector<std::pair<std::string, Var>> enc, dec;
    for (auto& p : t.bundle().encoder_decoder_params())
        (p.first.rfind("decoder", 0) == 0 ? dec : enc).push_back(p);
    sgd_step(enc, t.opt_state(), 0.01, 0.9, 1e-4);
    sgd_step(dec, t.opt_state(), 0.001, 0.9, 1e-4);

    auto after = snapshot(t.bundle());
    std::size_t offset = 0;
    for (auto& [name, p] : t.bundle().named_params()) {
        const bool enc_dec = name.rfind("encoder", 0) == 0 || name.rfind("decoder", 0) == 0;
        bool changed = false;
        for (std::size_t i = 0; i < p->value.size(); ++i)
            changed |= before[offset + i] != after[offset + i];
        CAPTURE(name);
        if (enc_dec)
            CHECK(changed);
        else
            CHECK_FALSE(changed);
        offset += p->value.size();
    }
}

TEST_CASE("short final batch is dropped") {
    auto ds = generate_synthetic(
        SyntheticSpec{.n = 40, .classes = 4, .d_i = 10, .d_t = 8, .seed = 8});
    TrainConfig cfg = tiny_config(6);
    cfg.batch_size = 16;  // 40 rows -> 2 full batches, 8 rows dropped
    Trainer t(init_bundle(10, 8, 4, 13, tiny()), cfg);
    CHECK_NOTHROW(t.train_epoch(ds.x_i, ds.x_t));
    TrainConfig big = tiny_config(6);
    big.batch_size = 64;
    Trainer t2(init_bundle(10, 8, 4, 13, tiny()), big);
    CHECK_THROWS(t2.train_epoch(ds.x_i, ds.x_t));
}

TEST_CASE("checkpoint round trip preserves state bit for bit") {
    auto ds = small_data(9);
    Trainer t(init_bundle(10, 8, 4, 17, tiny()), tiny_config(7));
    t.train_epoch(ds.x_i, ds.x_t);
    const auto path =
        (std::filesystem::temp_directory_path() / "cmimh_trainer_ckpt.bin").string();
    t.save(path);
    Trainer loaded = Trainer::load(path);
    CHECK(loaded.epoch() == t.epoch());
    CHECK(snapshot(loaded.bundle()) == snapshot(t.bundle()));
    CHECK(loaded.config().batch_size == t.config().batch_size);
    REQUIRE(loaded.opt_state().velocity.size() == t.opt_state().velocity.size());
    for (auto& [name, v] : t.opt_state().velocity)
        CHECK(loaded.opt_state().velocity.at(name).data == v.data);
    std::filesystem::remove(path);
}

TEST_CASE("resume from checkpoint replays an uninterrupted run exactly") {
    auto ds = small_data(10);
    const auto path =
        (std::filesystem::temp_directory_path() / "cmimh_trainer_resume.bin").string();

    Trainer full(init_bundle(10, 8, 4, 21, tiny()), tiny_config(8));
    for (int e = 0; e < 3; ++e) full.train_epoch(ds.x_i, ds.x_t);

    Trainer first(init_bundle(10, 8, 4, 21, tiny()), tiny_config(8));
    first.train_epoch(ds.x_i, ds.x_t);
    first.save(path);
    Trainer resumed = Trainer::load(path);
    for (int e = 0; e < 2; ++e) resumed.train_epoch(ds.x_i, ds.x_t);
    std::filesystem::remove(path);

    CHECK(resumed.epoch() == full.epoch());
    CHECK(snapshot(resumed.bundle()) == snapshot(full.bundle()));
}

TEST_CASE("decoder updates improve reconstruction on a fixed batch") {
    // With only the reconstruction terms active the objective must climb.
    auto ds = small_data(12);
    TrainConfig cfg = tiny_config(9);
    cfg.lambdas = Lambdas{0.0, 0.0, 0.0, 0.0};
    cfg.epochs = 30;
    Trainer t(init_bundle(10, 8, 4, 23, tiny()), cfg);
    double first_total = 0.0, last_total = 0.0;
    for (int e = 0; e < 30; ++e) {
        auto b = t.train_epoch(ds.x_i, ds.x_t);
        if (e == 0) first_total = b.recon_i + b.recon_t;
        last_total = b.recon_i + b.recon_t;
    }
    CHECK(last_total > first_total);
}

TEST_CASE("load rejects corrupt files") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto bad = (dir / "cmimh_bad_ckpt.bin").string();
    {
        std::ofstream out(bad, std::ios::binary);
        out << "JUNKJUNKJUNK";
    }
    CHECK_THROWS(Trainer::load(bad));
    std::filesystem::remove(bad);
    CHECK_THROWS(Trainer::load((dir / "cmimh_missing_ckpt.bin").string()));
}
