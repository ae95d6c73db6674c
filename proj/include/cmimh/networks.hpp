#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmimh/autodiff.hpp"
#include "cmimh/rng.hpp"

namespace cmimh {

enum class Act { relu, leaky_relu };
enum class OutAct { sigmoid, linear, none };

struct MlpSpec {
    std::size_t in_dim = 0;
    std::vector<std::pair<std::size_t, Act>> hidden;
    std::size_t out_dim = 0;
    OutAct out_activation = OutAct::none;
};

struct DenseLayer {
    Var weight;  // in x out
    Var bias;    // 1 x out
};

class Mlp {
  public:
    Mlp() = default;
    Mlp(MlpSpec spec, Rng& rng);

    // Builds the forward graph for a batch (rows = samples).
    Var forward(const Var& x) const;
    Tensor forward_value(const Tensor& x) const;

    const MlpSpec& spec() const { return spec_; }
    std::vector<std::pair<std::string, Var>> named_params(const std::string& prefix) const;

  private:
    MlpSpec spec_;
    std::vector<DenseLayer> layers_;
};

// Hidden widths for the four network roles; defaults sized for real feature sets.
struct NetSizes {
    std::size_t encoder_hidden = 1024;
    std::size_t critic_hidden = 512;
    std::size_t critic_embed = 512;
    std::size_t tc_hidden = 512;
};

// The four parameterized functions per modality: encoders producing mu,
// Gaussian-mean decoders, the two halves of the separable critic, and the
// per-modality total-correlation classifiers.
struct ModelBundle {
    std::size_t d_i = 0, d_t = 0, code_bits = 0;
    std::uint64_t seed = 0;
    NetSizes sizes;

    Mlp encoder_i, encoder_t;
    Mlp decoder_i, decoder_t;
    Mlp critic_phi_i, critic_phi_t;
    Mlp tc_classifier_i, tc_classifier_t;

    std::vector<std::pair<std::string, Var>> named_params() const;
    std::vector<std::pair<std::string, Var>> encoder_decoder_params() const;
    std::vector<std::pair<std::string, Var>> critic_classifier_params() const;
};

ModelBundle init_bundle(std::size_t d_i, std::size_t d_t, std::size_t code_bits,
                        std::uint64_t seed, const NetSizes& sizes = {});

// mu = clamp(sigmoid(MLP(x))), one row per sample.
Var encode(const Mlp& encoder, const Var& x);
Tensor encode_value(const Mlp& encoder, const Tensor& x);

// S[r][c] = phi_i(a_r) . phi_t(b_c); diagonal = joint pairs.
Var critic_score(const Mlp& phi_i, const Mlp& phi_t, const Var& a, const Var& b);

// B x 1 classifier logits; probability = sigmoid(logit).
Var tc_logit(const Mlp& classifier, const Var& mu_batch);

}  // namespace cmimh
