#include "cmimh/bernoulli.hpp"

#include <cmath>
#include <stdexcept>

namespace cmimh::bernoulli {

double clamp_mu(double mu) { return std::min(std::max(mu, kMuEps), 1.0 - kMuEps); }

BernoulliCode clamp(const std::vector<double>& mu_raw) {
    BernoulliCode out;
    out.mu.reserve(mu_raw.size());
    for (double m : mu_raw) out.mu.push_back(clamp_mu(m));
    return out;
}

CodeSample reparam_sample(const BernoulliCode& mu, const std::vector<double>& u) {
    if (u.size() != mu.mu.size())
        throw std::invalid_argument("reparam_sample: length mismatch");
    CodeSample s;
    const std::size_t L = mu.mu.size();
    s.h.resize(L);
    s.z.resize(L);
    s.u = u;
    for (std::size_t l = 0; l < L; ++l) {
        if (u[l] <= 0.0 || u[l] >= 1.0)
            throw std::domain_error("reparam_sample: u must lie strictly in (0,1)");
        const double m = mu.mu[l];
        s.z[l] = std::log(m / (1.0 - m)) + std::log(u[l] / (1.0 - u[l]));
        s.h[l] = s.z[l] >= 0.0 ? 1.0 : 0.0;
    }
    return s;
}

CodeSample reparam_sample(const BernoulliCode& mu, Rng& rng) {
    std::vector<double> u(mu.mu.size());
    for (double& v : u) v = rng.uniform_open();
    return reparam_sample(mu, u);
}

double kl_bernoulli(const BernoulliCode& p, const BernoulliCode& q) {
    if (p.mu.size() != q.mu.size())
        throw std::invalid_argument("kl_bernoulli: length mismatch");
    double kl = 0.0;
    for (std::size_t l = 0; l < p.mu.size(); ++l) {
        const double a = p.mu[l], b = q.mu[l];
        kl += a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
    }
    return kl;
}

double skl_bernoulli(const BernoulliCode& p, const BernoulliCode& q) {
    return kl_bernoulli(p, q) + kl_bernoulli(q, p);
}

double entropy(const BernoulliCode& p) {
    double h = 0.0;
    for (double m : p.mu) h -= m * std::log(m) + (1.0 - m) * std::log(1.0 - m);
    return h;
}

Var kl_rowwise(const Var& mu_p, const Var& mu_q) {
    require_shape(mu_p->value, mu_q->value, "kl_rowwise");
    // mu * (log mu_p - log mu_q) + (1-mu) * (log(1-mu_p) - log(1-mu_q))
    Var one_m_p = add_scalar(neg(mu_p), 1.0);
    Var one_m_q = add_scalar(neg(mu_q), 1.0);
    Var term1 = mul(mu_p, sub(log_(mu_p), log_(mu_q)));
    Var term2 = mul(one_m_p, sub(log_(one_m_p), log_(one_m_q)));
    return reduce_sum(add(term1, term2), Axis::cols);
}

Var skl_batch_mean(const Var& mu_p, const Var& mu_q) {
    Var per_row = add(kl_rowwise(mu_p, mu_q), kl_rowwise(mu_q, mu_p));
    return reduce_mean(per_row, Axis::all);
}

Var reparam_logits(const Var& mu, const Tensor& u) {
    require_shape(mu->value, u, "reparam_logits");
    for (double v : u.data)
        if (v <= 0.0 || v >= 1.0)
            throw std::domain_error("reparam_logits: u must lie strictly in (0,1)");
    Tensor noise(u.rows, u.cols);
    for (std::size_t i = 0; i < u.size(); ++i)
        noise[i] = std::log(u[i] / (1.0 - u[i]));
    Var logit_mu = sub(log_(mu), log_(add_scalar(neg(mu), 1.0)));
    return add(logit_mu, constant(std::move(noise)));
}

}  // namespace cmimh::bernoulli
