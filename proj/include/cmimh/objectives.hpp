#pragma once

#include "cmimh/autodiff.hpp"
#include "cmimh/networks.hpp"
#include "cmimh/rng.hpp"

namespace cmimh {

struct Lambdas {
    double l1 = 1.5;   // weight of the cross-modal JS MI bound
    double l2 = 1.0;   // weight of the symmetrized KL penalty
    double l3 = 0.25;  // weight of the total-correlation penalty
    double l4 = 0.01;  // weight of the balance penalty
};

struct LossBreakdown {
    double recon_i = 0, recon_t = 0;
    double js_mi = 0;
    double skl = 0;
    double tc_i = 0, tc_t = 0;
    double bal = 0;
    double total = 0;  // recon_i + recon_t + l1*js - l2*skl - l3*(tc_i+tc_t) - l4*bal
};

enum class CriticInput { mu, samples };
enum class NegativeMode { full_matrix, cyclic_shift };

enum class DecoderInput { sample, mu };

struct ObjectiveOptions {
    CriticInput critic_input = CriticInput::mu;
    std::size_t critic_samples = 1;  // k when critic_input == samples
    NegativeMode negative_mode = NegativeMode::full_matrix;
    // mu feeds decoders the mean path instead of the sampled code; this
    // makes the whole objective smooth, which finite-difference gradient
    // checks need (the straight-through backward is checked separately).
    DecoderInput decoder_input = DecoderInput::sample;
};

// Negative mean rowwise squared error: maximizing it maximizes the
// variational reconstruction bound up to the dropped entropy constant.
Var recon_bound(const Var& x, const Var& x_hat);

// Jensen-Shannon MI lower bound from a B x B critic score matrix.
// Tbar = log 2 - softplus(-T); the marginal term log(2 - exp(Tbar))
// reduces to log 2 - softplus(T), so both terms stay stable for any T.
Var js_mi_bound(const Var& scores, NegativeMode mode = NegativeMode::full_matrix);

// Batch mean of per-pair symmetrized Bernoulli KL.
Var skl_loss(const Var& mu_i, const Var& mu_t);

// Sum over bits of |column mean - 0.5| for both modalities.
Var balance_loss(const Var& mu_i, const Var& mu_t);

struct TcOut {
    Var encoder_term;     // mean classifier logit on real rows (= log D/(1-D))
    Var classifier_loss;  // BCE, real rows = 1, per-dimension-permuted rows = 0
};

// The permuted batch draws an independent row permutation per column.
TcOut tc_loss(const Mlp& classifier, const Var& mu_attached, Rng& rng);

// Encoder term from externally supplied logits (used to inject the
// enumerated Bayes-optimal density ratio in tests).
double tc_encoder_term_from_logits(const std::vector<double>& logits);

Tensor permute_columns(const Tensor& mu, Rng& rng);

// Full forward pass over one batch. Only graph heads needed by the two
// training phases are kept.
struct ForwardPass {
    Var recon_i, recon_t, js, skl, tc_i, tc_t, bal;
    Var total;  // maximization orientation; trainer steps on neg(total)
    LossBreakdown breakdown;
};

ForwardPass total_objective(const ModelBundle& bundle, const Tensor& x_i, const Tensor& x_t,
                            const Lambdas& lambdas, Rng& rng,
                            const ObjectiveOptions& opts = {});

// Critic / classifier phase heads, built from detached mu values.
struct CriticPhase {
    Var js;               // ascend w.r.t. critic parameters
    Var classifier_loss;  // descend w.r.t. classifier parameters (both modalities)
    Var loss;             // -js + classifier_loss
};

CriticPhase critic_phase(const ModelBundle& bundle, const Tensor& mu_i, const Tensor& mu_t,
                         Rng& rng, const ObjectiveOptions& opts = {});

}  // namespace cmimh
