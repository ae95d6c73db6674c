#include "cmimh/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "cmimh/bernoulli.hpp"

namespace cmimh {

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
    if (spec_.in_dim == 0 || spec_.out_dim == 0)
        throw std::invalid_argument("Mlp: zero dimension");
    std::size_t in = spec_.in_dim;
    std::vector<std::size_t> outs;
    for (const auto& [w, _] : spec_.hidden) {
        if (w == 0) throw std::invalid_argument("Mlp: zero hidden width");
        outs.push_back(w);
    }
    outs.push_back(spec_.out_dim);
    for (std::size_t w : outs) {
        // Uniform fan-in init, zero biases.
        const double bound = std::sqrt(6.0 / static_cast<double>(in));
        Tensor W(in, w);
        for (double& v : W.data) v = (2.0 * rng.uniform() - 1.0) * bound;
        layers_.push_back({leaf(std::move(W)), leaf(Tensor(1, w))});
        in = w;
    }
}

Var Mlp::forward(const Var& x) const {
    if (x->value.cols != spec_.in_dim)
        throw std::invalid_argument("Mlp::forward: input dim mismatch");
    Var h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = add_rowvec(matmul(h, layers_[i].weight), layers_[i].bias);
        if (i + 1 < layers_.size()) {
            Act a = spec_.hidden[i].second;
            h = a == Act::relu ? relu(h) : leaky_relu(h);
        }
    }
    switch (spec_.out_activation) {
        case OutAct::sigmoid: return sigmoid(h);
        case OutAct::linear:
        case OutAct::none: return h;
    }
    return h;
}

Tensor Mlp::forward_value(const Tensor& x) const { return forward(constant(x))->value; }

std::vector<std::pair<std::string, Var>> Mlp::named_params(const std::string& prefix) const {
    std::vector<std::pair<std::string, Var>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        out.emplace_back(prefix + ".w" + std::to_string(i), layers_[i].weight);
        out.emplace_back(prefix + ".b" + std::to_string(i), layers_[i].bias);
    }
    return out;
}

namespace {

MlpSpec mlp2(std::size_t in, std::size_t hidden, Act act, std::size_t out, OutAct oact) {
    return MlpSpec{in, {{hidden, act}, {hidden, act}}, out, oact};
}

void append(std::vector<std::pair<std::string, Var>>& dst,
            std::vector<std::pair<std::string, Var>> src) {
    for (auto& p : src) dst.push_back(std::move(p));
}

}  // namespace

ModelBundle init_bundle(std::size_t d_i, std::size_t d_t, std::size_t code_bits,
                        std::uint64_t seed, const NetSizes& sizes) {
    if (d_i == 0 || d_t == 0 || code_bits == 0)
        throw std::invalid_argument("init_bundle: zero dimension");
    ModelBundle b;
    b.d_i = d_i;
    b.d_t = d_t;
    b.code_bits = code_bits;
    b.seed = seed;
    b.sizes = sizes;
    Rng rng(seed);
    const std::size_t L = code_bits;
    b.encoder_i = Mlp(mlp2(d_i, sizes.encoder_hidden, Act::relu, L, OutAct::sigmoid), rng);
    b.encoder_t = Mlp(mlp2(d_t, sizes.encoder_hidden, Act::relu, L, OutAct::sigmoid), rng);
    b.decoder_i = Mlp(mlp2(L, sizes.encoder_hidden, Act::relu, d_i, OutAct::linear), rng);
    b.decoder_t = Mlp(mlp2(L, sizes.encoder_hidden, Act::relu, d_t, OutAct::linear), rng);
    b.critic_phi_i =
        Mlp(mlp2(L, sizes.critic_hidden, Act::leaky_relu, sizes.critic_embed, OutAct::linear), rng);
    b.critic_phi_t =
        Mlp(mlp2(L, sizes.critic_hidden, Act::leaky_relu, sizes.critic_embed, OutAct::linear), rng);
    b.tc_classifier_i = Mlp(mlp2(L, sizes.tc_hidden, Act::leaky_relu, 1, OutAct::linear), rng);
    b.tc_classifier_t = Mlp(mlp2(L, sizes.tc_hidden, Act::leaky_relu, 1, OutAct::linear), rng);
    return b;
}

std::vector<std::pair<std::string, Var>> ModelBundle::named_params() const {
    auto out = encoder_decoder_params();
    append(out, critic_classifier_params());
    return out;
}

std::vector<std::pair<std::string, Var>> ModelBundle::encoder_decoder_params() const {
    std::vector<std::pair<std::string, Var>> out;
    append(out, encoder_i.named_params("encoder_i"));
    append(out, encoder_t.named_params("encoder_t"));
    append(out, decoder_i.named_params("decoder_i"));
    append(out, decoder_t.named_params("decoder_t"));
    return out;
}

std::vector<std::pair<std::string, Var>> ModelBundle::critic_classifier_params() const {
    std::vector<std::pair<std::string, Var>> out;
    append(out, critic_phi_i.named_params("critic_phi_i"));
    append(out, critic_phi_t.named_params("critic_phi_t"));
    append(out, tc_classifier_i.named_params("tc_classifier_i"));
    append(out, tc_classifier_t.named_params("tc_classifier_t"));
    return out;
}

Var encode(const Mlp& encoder, const Var& x) {
    return clamp_st(encoder.forward(x), bernoulli::kMuEps, 1.0 - bernoulli::kMuEps);
}

Tensor encode_value(const Mlp& encoder, const Tensor& x) {
    return encode(encoder, constant(x))->value;
}

Var critic_score(const Mlp& phi_i, const Mlp& phi_t, const Var& a, const Var& b) {
    if (a->value.rows != b->value.rows)
        throw std::invalid_argument("critic_score: batch size mismatch");
    return matmul(phi_i.forward(a), transpose(phi_t.forward(b)));
}

Var tc_logit(const Mlp& classifier, const Var& mu_batch) {
    return classifier.forward(mu_batch);
}

}  // namespace cmimh
