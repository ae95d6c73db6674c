#pragma once

#include <vector>

#include "cmimh/autodiff.hpp"
#include "cmimh/rng.hpp"
#include "cmimh/tensor.hpp"

namespace cmimh {

// Multivariate Bernoulli code distributions: product of per-bit Bernoullis
// with probability vector mu, clamped to [kMuEps, 1 - kMuEps] before any log.
namespace bernoulli {

inline constexpr double kMuEps = 1e-6;

// Per-sample probability vector parameterizing Bern(mu).
struct BernoulliCode {
    std::vector<double> mu;
};

// One logistic-reparameterized draw: h = sign(z), z = logit(mu) + logit(u).
struct CodeSample {
    std::vector<double> h;  // bits in {0,1}; h_l = 1 iff z_l >= 0
    std::vector<double> z;
    std::vector<double> u;
};

double clamp_mu(double mu);
BernoulliCode clamp(const std::vector<double>& mu_raw);

CodeSample reparam_sample(const BernoulliCode& mu, const std::vector<double>& u);
CodeSample reparam_sample(const BernoulliCode& mu, Rng& rng);

double kl_bernoulli(const BernoulliCode& p, const BernoulliCode& q);
double skl_bernoulli(const BernoulliCode& p, const BernoulliCode& q);

// Entropy of Bern(mu) in nats.
double entropy(const BernoulliCode& p);

// Graph-building variants over a whole batch (rows = samples).
// mu inputs must already be clamped.
Var kl_rowwise(const Var& mu_p, const Var& mu_q);  // B x 1 of per-row KLs
Var skl_batch_mean(const Var& mu_p, const Var& mu_q);

// z = logit(mu) + logit(u) with u a fixed noise tensor; h = ste_sign(z).
Var reparam_logits(const Var& mu, const Tensor& u);

}  // namespace bernoulli
}  // namespace cmimh
