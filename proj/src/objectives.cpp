#include "cmimh/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "cmimh/bernoulli.hpp"

namespace cmimh {

namespace {
constexpr double kLog2 = 0.6931471805599453;
}

Var recon_bound(const Var& x, const Var& x_hat) {
    require_shape(x->value, x_hat->value, "recon_bound");
    const double batch = static_cast<double>(x->value.rows);
    Var d = sub(x, x_hat);
    return neg(scale(reduce_sum(mul(d, d), Axis::all), 1.0 / batch));
}

Var js_mi_bound(const Var& scores, NegativeMode mode) {
    const Tensor& S = scores->value;
    if (S.rows != S.cols) throw std::invalid_argument("js_mi_bound: scores must be square");
    const std::size_t B = S.rows;
    if (B < 2) throw std::logic_error("js_mi_bound: batch size must be >= 2");

    // Tbar = log2 - softplus(-T); log(2 - exp(Tbar)) = log2 - softplus(T).
    Var tbar = add_scalar(neg(softplus(neg(scores))), kLog2);
    Var marg = add_scalar(neg(softplus(scores)), kLog2);

    Tensor diag_mask(B, B), neg_mask(B, B);
    double n_neg = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
        diag_mask.at(r, r) = 1.0;
        if (mode == NegativeMode::full_matrix) {
            for (std::size_t c = 0; c < B; ++c)
                if (c != r) neg_mask.at(r, c) = 1.0;
        } else {
            neg_mask.at(r, (r + 1) % B) = 1.0;
        }
    }
    n_neg = mode == NegativeMode::full_matrix ? static_cast<double>(B * (B - 1))
                                              : static_cast<double>(B);

    Var joint_term = scale(reduce_sum(mask_mul(tbar, diag_mask), Axis::all),
                           1.0 / static_cast<double>(B));
    Var marg_term = scale(reduce_sum(mask_mul(marg, neg_mask), Axis::all), 1.0 / n_neg);
    return add(joint_term, marg_term);
}

Var skl_loss(const Var& mu_i, const Var& mu_t) {
    require_shape(mu_i->value, mu_t->value, "skl_loss");
    return bernoulli::skl_batch_mean(mu_i, mu_t);
}

Var balance_loss(const Var& mu_i, const Var& mu_t) {
    require_shape(mu_i->value, mu_t->value, "balance_loss");
    Var dev_i = abs_(add_scalar(reduce_mean(mu_i, Axis::rows), -0.5));
    Var dev_t = abs_(add_scalar(reduce_mean(mu_t, Axis::rows), -0.5));
    return add(reduce_sum(dev_i, Axis::all), reduce_sum(dev_t, Axis::all));
}

Tensor permute_columns(const Tensor& mu, Rng& rng) {
    Tensor out(mu.rows, mu.cols);
    for (std::size_t c = 0; c < mu.cols; ++c) {
        auto p = rng.permutation(mu.rows);
        for (std::size_t r = 0; r < mu.rows; ++r) out.at(r, c) = mu.at(p[r], c);
    }
    return out;
}

TcOut tc_loss(const Mlp& classifier, const Var& mu_attached, Rng& rng) {
    const std::size_t B = mu_attached->value.rows;
    if (B < 2) throw std::logic_error("tc_loss: batch size must be >= 2");
    TcOut out;
    out.encoder_term = reduce_mean(tc_logit(classifier, mu_attached), Axis::all);
    Var real = constant(mu_attached->value);
    Var perm = constant(permute_columns(mu_attached->value, rng));
    Var loss_real = reduce_sum(softplus(neg(tc_logit(classifier, real))), Axis::all);
    Var loss_perm = reduce_sum(softplus(tc_logit(classifier, perm)), Axis::all);
    out.classifier_loss = scale(add(loss_real, loss_perm), 1.0 / (2.0 * static_cast<double>(B)));
    return out;
}

double tc_encoder_term_from_logits(const std::vector<double>& logits) {
    double s = 0.0;
    for (double v : logits) s += v;
    return s / static_cast<double>(logits.size());
}

namespace {

// Critic scores per the configured input: clamped mu vectors, or the mean
// over k binary sample pairs.
Var critic_scores_for(const ModelBundle& bundle, const Var& mu_i, const Var& mu_t, Rng& rng,
                      const ObjectiveOptions& opts) {
    if (opts.critic_input == CriticInput::mu)
        return critic_score(bundle.critic_phi_i, bundle.critic_phi_t, mu_i, mu_t);
    if (opts.critic_samples == 0)
        throw std::invalid_argument("critic_samples must be >= 1");
    Var acc;
    for (std::size_t s = 0; s < opts.critic_samples; ++s) {
        Tensor u_i(mu_i->value.rows, mu_i->value.cols);
        Tensor u_t(mu_t->value.rows, mu_t->value.cols);
        for (double& v : u_i.data) v = rng.uniform_open();
        for (double& v : u_t.data) v = rng.uniform_open();
        Var h_i = ste_sign(bernoulli::reparam_logits(mu_i, u_i));
        Var h_t = ste_sign(bernoulli::reparam_logits(mu_t, u_t));
        Var s_mat = critic_score(bundle.critic_phi_i, bundle.critic_phi_t, h_i, h_t);
        acc = acc ? add(acc, s_mat) : s_mat;
    }
    return scale(acc, 1.0 / static_cast<double>(opts.critic_samples));
}

}  // namespace

ForwardPass total_objective(const ModelBundle& bundle, const Tensor& x_i, const Tensor& x_t,
                            const Lambdas& lambdas, Rng& rng, const ObjectiveOptions& opts) {
    if (x_i.rows != x_t.rows)
        throw std::invalid_argument("total_objective: modality batch sizes differ");
    if (x_i.rows < 2) throw std::logic_error("total_objective: batch size must be >= 2");

    Var xi = constant(x_i);
    Var xt = constant(x_t);
    Var mu_i = encode(bundle.encoder_i, xi);
    Var mu_t = encode(bundle.encoder_t, xt);

    // One logistic sample per input per step.
    Tensor u_i(x_i.rows, bundle.code_bits), u_t(x_t.rows, bundle.code_bits);
    for (double& v : u_i.data) v = rng.uniform_open();
    for (double& v : u_t.data) v = rng.uniform_open();
    Var h_i = ste_sign(bernoulli::reparam_logits(mu_i, u_i));
    Var h_t = ste_sign(bernoulli::reparam_logits(mu_t, u_t));

    const bool mean_path = opts.decoder_input == DecoderInput::mu;
    ForwardPass fp;
    fp.recon_i = recon_bound(xi, bundle.decoder_i.forward(mean_path ? mu_i : h_i));
    fp.recon_t = recon_bound(xt, bundle.decoder_t.forward(mean_path ? mu_t : h_t));
    fp.js = js_mi_bound(critic_scores_for(bundle, mu_i, mu_t, rng, opts), opts.negative_mode);
    fp.skl = skl_loss(mu_i, mu_t);
    fp.tc_i = reduce_mean(tc_logit(bundle.tc_classifier_i, mu_i), Axis::all);
    fp.tc_t = reduce_mean(tc_logit(bundle.tc_classifier_t, mu_t), Axis::all);
    fp.bal = balance_loss(mu_i, mu_t);

    Var penalty = add(add(scale(fp.skl, lambdas.l2),
                          scale(add(fp.tc_i, fp.tc_t), lambdas.l3)),
                      scale(fp.bal, lambdas.l4));
    fp.total = sub(add(add(fp.recon_i, fp.recon_t), scale(fp.js, lambdas.l1)), penalty);

    fp.breakdown = LossBreakdown{fp.recon_i->value[0], fp.recon_t->value[0],
                                 fp.js->value[0],      fp.skl->value[0],
                                 fp.tc_i->value[0],    fp.tc_t->value[0],
                                 fp.bal->value[0],     fp.total->value[0]};
    return fp;
}

CriticPhase critic_phase(const ModelBundle& bundle, const Tensor& mu_i, const Tensor& mu_t,
                         Rng& rng, const ObjectiveOptions& opts) {
    if (mu_i.rows != mu_t.rows)
        throw std::invalid_argument("critic_phase: batch sizes differ");
    if (mu_i.rows < 2) throw std::logic_error("critic_phase: batch size must be >= 2");

    Var cmu_i = constant(mu_i);
    Var cmu_t = constant(mu_t);
    CriticPhase ph;
    ph.js = js_mi_bound(critic_scores_for(bundle, cmu_i, cmu_t, rng, opts),
                        opts.negative_mode);
    Var clf_i = tc_loss(bundle.tc_classifier_i, cmu_i, rng).classifier_loss;
    Var clf_t = tc_loss(bundle.tc_classifier_t, cmu_t, rng).classifier_loss;
    ph.classifier_loss = add(clf_i, clf_t);
    ph.loss = add(neg(ph.js), ph.classifier_loss);
    return ph;
}

}  // namespace cmimh
