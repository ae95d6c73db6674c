#include "cmimh/trainer.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cmimh {

void TrainConfig::validate() const {
    if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
    if (lr_main <= 0.0 || lr_decoders <= 0.0)
        throw std::invalid_argument("TrainConfig: learning rates must be positive");
    if (lambdas.l1 < 0 || lambdas.l2 < 0 || lambdas.l3 < 0 || lambdas.l4 < 0)
        throw std::invalid_argument("TrainConfig: lambdas must be nonnegative");
    if (critic_steps_per_main == 0)
        throw std::invalid_argument("TrainConfig: critic_steps_per_main must be >= 1");
}

void sgd_step(const std::vector<std::pair<std::string, Var>>& params, OptimizerState& state,
              double lr, double momentum, double weight_decay) {
    for (const auto& [name, p] : params) {
        auto [it, inserted] =
            state.velocity.try_emplace(name, p->value.rows, p->value.cols);
        Tensor& v = it->second;
        if (!p->grad.same_shape(v))
            throw std::invalid_argument("sgd_step: velocity shape mismatch for " + name);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = momentum * v[i] + p->grad[i] + weight_decay * p->value[i];
            p->value[i] -= lr * v[i];
        }
    }
}

namespace {

void zero_params(const std::vector<std::pair<std::string, Var>>& params) {
    for (const auto& [_, p] : params) p->zero_grad();
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows, std::size_t begin,
                   std::size_t count) {
    Tensor out(count, x.cols);
    for (std::size_t r = 0; r < count; ++r)
        std::memcpy(&out.data[r * x.cols], &x.data[rows[begin + r] * x.cols],
                    x.cols * sizeof(double));
    return out;
}

bool starts_with(const std::string& s, const char* pre) { return s.rfind(pre, 0) == 0; }

}  // namespace

Trainer::Trainer(ModelBundle bundle, TrainConfig config)
    : bundle_(std::move(bundle)),
      config_(config),
      rng_shuffle_(Rng(config.seed).substream(11)),
      rng_obj_(Rng(config.seed).substream(12)) {
    config_.validate();
}

LossBreakdown Trainer::train_epoch(const Tensor& x_i_train, const Tensor& x_t_train) {
    if (x_i_train.rows != x_t_train.rows)
        throw std::invalid_argument("train_epoch: modality row counts differ");
    const std::size_t n = x_i_train.rows;
    const std::size_t bs = config_.batch_size;
    if (n < bs) throw std::logic_error("train_epoch: dataset smaller than one batch");

    auto all_params = bundle_.named_params();
    auto critic_params = bundle_.critic_classifier_params();
    std::vector<std::pair<std::string, Var>> encoder_params, decoder_params;
    for (auto& p : bundle_.encoder_decoder_params())
        (starts_with(p.first, "decoder") ? decoder_params : encoder_params).push_back(p);

    auto order = rng_shuffle_.permutation(n);
    const std::size_t n_batches = n / bs;
    LossBreakdown mean{};
    for (std::size_t b = 0; b < n_batches; ++b) {
        Tensor xi = gather_rows(x_i_train, order, b * bs, bs);
        Tensor xt = gather_rows(x_t_train, order, b * bs, bs);

        // Phase A: critic ascends the JS bound, classifiers descend BCE;
        // encoders see only detached codes.
        Tensor mu_i = encode_value(bundle_.encoder_i, xi);
        Tensor mu_t = encode_value(bundle_.encoder_t, xt);
        for (std::size_t s = 0; s < config_.critic_steps_per_main; ++s) {
            CriticPhase ph = critic_phase(bundle_, mu_i, mu_t, rng_obj_, config_.objective);
            backward(ph.loss);
            sgd_step(critic_params, state_, config_.lr_main, config_.momentum,
                     config_.weight_decay);
            zero_params(all_params);
        }

        // Phase B: encoders/decoders on the full objective, T and D frozen.
        ForwardPass fp =
            total_objective(bundle_, xi, xt, config_.lambdas, rng_obj_, config_.objective);
        backward(neg(fp.total));
        sgd_step(encoder_params, state_, config_.lr_main, config_.momentum,
                 config_.weight_decay);
        sgd_step(decoder_params, state_, config_.lr_decoders, config_.momentum,
                 config_.weight_decay);
        zero_params(all_params);

        mean.recon_i += fp.breakdown.recon_i;
        mean.recon_t += fp.breakdown.recon_t;
        mean.js_mi += fp.breakdown.js_mi;
        mean.skl += fp.breakdown.skl;
        mean.tc_i += fp.breakdown.tc_i;
        mean.tc_t += fp.breakdown.tc_t;
        mean.bal += fp.breakdown.bal;
        mean.total += fp.breakdown.total;
    }
    const double inv = 1.0 / static_cast<double>(n_batches);
    mean.recon_i *= inv;
    mean.recon_t *= inv;
    mean.js_mi *= inv;
    mean.skl *= inv;
    mean.tc_i *= inv;
    mean.tc_t *= inv;
    mean.bal *= inv;
    mean.total *= inv;
    ++epoch_;
    return mean;
}

namespace {

constexpr char kCkptMagic[4] = {'C', 'M', 'H', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

void w32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<char*>(b), 4);
}

void w64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<char*>(b), 8);
}

void wf64(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    w64(out, bits);
}

void wstr(std::ostream& out, const std::string& s) {
    w32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void wtensor(std::ostream& out, const Tensor& t) {
    w32(out, static_cast<std::uint32_t>(t.rows));
    w32(out, static_cast<std::uint32_t>(t.cols));
    for (double d : t.data) wf64(out, d);
}

std::uint32_t r32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

std::uint64_t r64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

double rf64(std::istream& in) {
    std::uint64_t bits = r64(in);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

std::string rstr(std::istream& in) {
    std::uint32_t len = r32(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

Tensor rtensor(std::istream& in) {
    std::uint32_t rows = r32(in), cols = r32(in);
    Tensor t(rows, cols);
    for (double& d : t.data) d = rf64(in);
    return t;
}

}  // namespace

void Trainer::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.write(kCkptMagic, 4);
    w32(out, kCkptVersion);
    w32(out, static_cast<std::uint32_t>(bundle_.d_i));
    w32(out, static_cast<std::uint32_t>(bundle_.d_t));
    w32(out, static_cast<std::uint32_t>(bundle_.code_bits));
    w64(out, bundle_.seed);
    w32(out, static_cast<std::uint32_t>(bundle_.sizes.encoder_hidden));
    w32(out, static_cast<std::uint32_t>(bundle_.sizes.critic_hidden));
    w32(out, static_cast<std::uint32_t>(bundle_.sizes.critic_embed));
    w32(out, static_cast<std::uint32_t>(bundle_.sizes.tc_hidden));
    // Config fields needed for identical resume.
    w32(out, static_cast<std::uint32_t>(config_.batch_size));
    wf64(out, config_.momentum);
    wf64(out, config_.weight_decay);
    wf64(out, config_.lr_main);
    wf64(out, config_.lr_decoders);
    wf64(out, config_.lambdas.l1);
    wf64(out, config_.lambdas.l2);
    wf64(out, config_.lambdas.l3);
    wf64(out, config_.lambdas.l4);
    w64(out, config_.epochs);
    w64(out, config_.seed);
    w64(out, config_.critic_steps_per_main);
    w32(out, config_.objective.critic_input == CriticInput::mu ? 0u : 1u);
    w64(out, config_.objective.critic_samples);
    w32(out, config_.objective.negative_mode == NegativeMode::full_matrix ? 0u : 1u);
    w32(out, config_.objective.decoder_input == DecoderInput::sample ? 0u : 1u);
    w64(out, epoch_);

    auto params = bundle_.named_params();
    w32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, p] : params) {
        wstr(out, name);
        wtensor(out, p->value);
    }
    w32(out, static_cast<std::uint32_t>(state_.velocity.size()));
    for (const auto& [name, v] : state_.velocity) {
        wstr(out, name);
        wtensor(out, v);
    }
    wstr(out, rng_shuffle_.serialize());
    wstr(out, rng_obj_.serialize());
}

Trainer Trainer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw std::runtime_error(path + ": not a checkpoint file");
    const std::uint32_t version = r32(in);
    if (version != kCkptVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    const std::size_t d_i = r32(in), d_t = r32(in), bits = r32(in);
    const std::uint64_t seed = r64(in);
    NetSizes sizes;
    sizes.encoder_hidden = r32(in);
    sizes.critic_hidden = r32(in);
    sizes.critic_embed = r32(in);
    sizes.tc_hidden = r32(in);

    TrainConfig cfg;
    cfg.batch_size = r32(in);
    cfg.momentum = rf64(in);
    cfg.weight_decay = rf64(in);
    cfg.lr_main = rf64(in);
    cfg.lr_decoders = rf64(in);
    cfg.lambdas.l1 = rf64(in);
    cfg.lambdas.l2 = rf64(in);
    cfg.lambdas.l3 = rf64(in);
    cfg.lambdas.l4 = rf64(in);
    cfg.epochs = r64(in);
    cfg.seed = r64(in);
    cfg.critic_steps_per_main = r64(in);
    cfg.objective.critic_input = r32(in) == 0 ? CriticInput::mu : CriticInput::samples;
    cfg.objective.critic_samples = r64(in);
    cfg.objective.negative_mode =
        r32(in) == 0 ? NegativeMode::full_matrix : NegativeMode::cyclic_shift;
    cfg.objective.decoder_input = r32(in) == 0 ? DecoderInput::sample : DecoderInput::mu;
    const std::uint64_t epoch = r64(in);

    Trainer t(init_bundle(d_i, d_t, bits, seed, sizes), cfg);
    t.epoch_ = epoch;

    std::map<std::string, Var> by_name;
    for (auto& [name, p] : t.bundle_.named_params()) by_name[name] = p;
    const std::uint32_t n_params = r32(in);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        std::string name = rstr(in);
        Tensor value = rtensor(in);
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error(path + ": unknown parameter " + name);
        if (!it->second->value.same_shape(value))
            throw std::runtime_error(path + ": shape mismatch for " + name);
        it->second->value = std::move(value);
    }
    const std::uint32_t n_vel = r32(in);
    for (std::uint32_t i = 0; i < n_vel; ++i) {
        std::string name = rstr(in);
        t.state_.velocity[name] = rtensor(in);
    }
    t.rng_shuffle_.deserialize(rstr(in));
    t.rng_obj_.deserialize(rstr(in));
    return t;
}

}  // namespace cmimh
