#include "cmimh/oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cmimh/bernoulli.hpp"

namespace cmimh::oracles {

namespace {

constexpr double kLog2 = 0.6931471805599453;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p) h -= xlogx(v);
    return h;
}

}  // namespace

void DiscreteJoint::validate() const {
    if (nx_i == 0 || nx_t == 0 || bits == 0 || nx_i > 8 || nx_t > 8 || bits > 6)
        throw std::invalid_argument("DiscreteJoint: alphabet/bit caps violated");
    if (joint.size() != nx_i * nx_t || mu_i.size() != nx_i || mu_t.size() != nx_t)
        throw std::invalid_argument("DiscreteJoint: table sizes inconsistent");
    double s = 0.0;
    for (double v : joint) {
        if (v < 0.0) throw std::invalid_argument("DiscreteJoint: negative probability");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteJoint: joint not normalized");
    for (const auto* mus : {&mu_i, &mu_t})
        for (const auto& mu : *mus) {
            if (mu.size() != bits)
                throw std::invalid_argument("DiscreteJoint: mu length mismatch");
            for (double m : mu)
                if (m < bernoulli::kMuEps || m > 1.0 - bernoulli::kMuEps)
                    throw std::invalid_argument("DiscreteJoint: mu not clamped");
        }
}

double stable_softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double bernoulli_prob(const std::vector<double>& mu, std::size_t code) {
    double p = 1.0;
    for (std::size_t b = 0; b < mu.size(); ++b)
        p *= ((code >> b) & 1U) ? mu[b] : 1.0 - mu[b];
    return p;
}

double exact_mi(const std::vector<double>& joint, std::size_t nr, std::size_t nc) {
    if (joint.size() != nr * nc) throw std::invalid_argument("exact_mi: table size mismatch");
    double s = 0.0;
    for (double v : joint) s += v;
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("exact_mi: not normalized");
    std::vector<double> pr(nr, 0.0), pc(nc, 0.0);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) {
            pr[r] += joint[r * nc + c];
            pc[c] += joint[r * nc + c];
        }
    double mi = 0.0;
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) {
            const double p = joint[r * nc + c];
            if (p > 0.0) mi += p * std::log(p / (pr[r] * pc[c]));
        }
    return mi;
}

double exact_kl(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("exact_kl: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
            kl += p[i] * std::log(p[i] / q[i]);
        }
    }
    return kl;
}

double exact_jsd(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("exact_jsd: size mismatch");
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    return 0.5 * exact_kl(p, m) + 0.5 * exact_kl(q, m);
}

double exact_tc(const std::vector<double>& qz, std::size_t bits) {
    const std::size_t states = std::size_t(1) << bits;
    if (qz.size() != states) throw std::invalid_argument("exact_tc: table size mismatch");
    std::vector<double> marg(bits, 0.0);
    for (std::size_t z = 0; z < states; ++z)
        for (std::size_t b = 0; b < bits; ++b)
            if ((z >> b) & 1U) marg[b] += qz[z];
    double tc = 0.0;
    for (std::size_t z = 0; z < states; ++z) {
        if (qz[z] <= 0.0) continue;
        double prod = 1.0;
        for (std::size_t b = 0; b < bits; ++b)
            prod *= ((z >> b) & 1U) ? marg[b] : 1.0 - marg[b];
        tc += qz[z] * std::log(qz[z] / prod);
    }
    return tc;
}

double exact_tc_entropy_identity(const std::vector<double>& qz, std::size_t bits) {
    const std::size_t states = std::size_t(1) << bits;
    std::vector<double> marg(bits, 0.0);
    for (std::size_t z = 0; z < states; ++z)
        for (std::size_t b = 0; b < bits; ++b)
            if ((z >> b) & 1U) marg[b] += qz[z];
    double h_sum = 0.0;
    for (double m : marg) h_sum -= xlogx(m) + xlogx(1.0 - m);
    return h_sum - entropy(qz);
}

std::vector<double> code_joint(const DiscreteJoint& inst) {
    const std::size_t states = std::size_t(1) << inst.bits;
    std::vector<double> out(states * states, 0.0);
    for (std::size_t xi = 0; xi < inst.nx_i; ++xi)
        for (std::size_t xt = 0; xt < inst.nx_t; ++xt) {
            const double pxy = inst.p(xi, xt);
            if (pxy == 0.0) continue;
            for (std::size_t hi = 0; hi < states; ++hi) {
                const double pi = bernoulli_prob(inst.mu_i[xi], hi);
                for (std::size_t ht = 0; ht < states; ++ht)
                    out[hi * states + ht] += pxy * pi * bernoulli_prob(inst.mu_t[xt], ht);
            }
        }
    return out;
}

std::vector<double> product_of_marginals(const std::vector<double>& joint, std::size_t nr,
                                         std::size_t nc) {
    std::vector<double> pr(nr, 0.0), pc(nc, 0.0);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) {
            pr[r] += joint[r * nc + c];
            pc[c] += joint[r * nc + c];
        }
    std::vector<double> out(nr * nc);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) out[r * nc + c] = pr[r] * pc[c];
    return out;
}

double js_bound_expectation(const std::vector<double>& p, const std::vector<double>& q,
                            const std::vector<double>& critic) {
    if (p.size() != q.size() || p.size() != critic.size())
        throw std::invalid_argument("js_bound_expectation: size mismatch");
    double joint_term = 0.0, marg_term = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        joint_term += p[i] * (kLog2 - stable_softplus(-critic[i]));
        marg_term += q[i] * (kLog2 - stable_softplus(critic[i]));
    }
    return joint_term + marg_term;
}

namespace {

// I(x; h | y) through entropies: H(h|y) - H(h|x). Relies on h depending
// on y only through x.
double private_info_entropy_form(const std::vector<double>& p_joint, std::size_t nx,
                                 std::size_t ny, const std::vector<std::vector<double>>& mu,
                                 std::size_t bits, bool x_is_row) {
    const std::size_t states = std::size_t(1) << bits;
    auto p_of = [&](std::size_t x, std::size_t y) {
        return x_is_row ? p_joint[x * ny + y] : p_joint[y * nx + x];
    };
    std::vector<double> px(nx, 0.0), py(ny, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) {
            px[x] += p_of(x, y);
            py[y] += p_of(x, y);
        }
    double h_given_y = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
        if (py[y] <= 0.0) continue;
        std::vector<double> mix(states, 0.0);
        for (std::size_t x = 0; x < nx; ++x) {
            const double w = p_of(x, y) / py[y];
            if (w == 0.0) continue;
            for (std::size_t h = 0; h < states; ++h) mix[h] += w * bernoulli_prob(mu[x], h);
        }
        h_given_y += py[y] * entropy(mix);
    }
    double h_given_x = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
        if (px[x] <= 0.0) continue;
        bernoulli::BernoulliCode code{mu[x]};
        h_given_x += px[x] * bernoulli::entropy(code);
    }
    return h_given_y - h_given_x;
}

// Log-ratio form: E_{p(x,y)} E_{h~P(h|x)} log( P(h|x) / P_mix(h|y) ).
double private_info_log_ratio_form(const std::vector<double>& p_joint, std::size_t nx,
                                   std::size_t ny, const std::vector<std::vector<double>>& mu,
                                   std::size_t bits, bool x_is_row) {
    const std::size_t states = std::size_t(1) << bits;
    auto p_of = [&](std::size_t x, std::size_t y) {
        return x_is_row ? p_joint[x * ny + y] : p_joint[y * nx + x];
    };
    std::vector<double> py(ny, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) py[y] += p_of(x, y);
    double info = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
        if (py[y] <= 0.0) continue;
        std::vector<double> mix(states, 0.0);
        for (std::size_t x = 0; x < nx; ++x) {
            const double w = p_of(x, y) / py[y];
            for (std::size_t h = 0; h < states; ++h) mix[h] += w * bernoulli_prob(mu[x], h);
        }
        for (std::size_t x = 0; x < nx; ++x) {
            const double pxy = p_of(x, y);
            if (pxy == 0.0) continue;
            for (std::size_t h = 0; h < states; ++h) {
                const double ph = bernoulli_prob(mu[x], h);
                if (ph > 0.0) info += pxy * ph * std::log(ph / mix[h]);
            }
        }
    }
    return info;
}

// E over the conditioning variable of KL[mixture encoder || other encoder].
double mixture_kl_term(const std::vector<double>& p_joint, std::size_t nx, std::size_t ny,
                       const std::vector<std::vector<double>>& mu_x,
                       const std::vector<std::vector<double>>& mu_y, std::size_t bits,
                       bool x_is_row) {
    const std::size_t states = std::size_t(1) << bits;
    auto p_of = [&](std::size_t x, std::size_t y) {
        return x_is_row ? p_joint[x * ny + y] : p_joint[y * nx + x];
    };
    std::vector<double> py(ny, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) py[y] += p_of(x, y);
    double kl_sum = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
        if (py[y] <= 0.0) continue;
        std::vector<double> mix(states, 0.0), other(states, 0.0);
        for (std::size_t x = 0; x < nx; ++x) {
            const double w = p_of(x, y) / py[y];
            for (std::size_t h = 0; h < states; ++h) mix[h] += w * bernoulli_prob(mu_x[x], h);
        }
        for (std::size_t h = 0; h < states; ++h) other[h] = bernoulli_prob(mu_y[y], h);
        kl_sum += py[y] * exact_kl(mix, other);
    }
    return kl_sum;
}

}  // namespace

PrivateInfoReport verify_private_info_identity(const DiscreteJoint& inst) {
    inst.validate();
    PrivateInfoReport rep;

    // Image modality: x = x_i (rows), conditioning y = x_t.
    rep.a_i = private_info_log_ratio_form(inst.joint, inst.nx_i, inst.nx_t, inst.mu_i,
                                          inst.bits, true);
    rep.a_i_alt = private_info_entropy_form(inst.joint, inst.nx_i, inst.nx_t, inst.mu_i,
                                            inst.bits, true);
    rep.c_i = mixture_kl_term(inst.joint, inst.nx_i, inst.nx_t, inst.mu_i, inst.mu_t,
                              inst.bits, true);
    rep.b_i = 0.0;
    for (std::size_t xi = 0; xi < inst.nx_i; ++xi)
        for (std::size_t xt = 0; xt < inst.nx_t; ++xt)
            rep.b_i += inst.p(xi, xt) * bernoulli::kl_bernoulli({inst.mu_i[xi]},
                                                                {inst.mu_t[xt]});

    // Text modality: x = x_t (cols), conditioning y = x_i.
    rep.a_t = private_info_log_ratio_form(inst.joint, inst.nx_t, inst.nx_i, inst.mu_t,
                                          inst.bits, false);
    rep.a_t_alt = private_info_entropy_form(inst.joint, inst.nx_t, inst.nx_i, inst.mu_t,
                                            inst.bits, false);
    rep.c_t = mixture_kl_term(inst.joint, inst.nx_t, inst.nx_i, inst.mu_t, inst.mu_i,
                              inst.bits, false);
    rep.b_t = 0.0;
    for (std::size_t xi = 0; xi < inst.nx_i; ++xi)
        for (std::size_t xt = 0; xt < inst.nx_t; ++xt)
            rep.b_t += inst.p(xi, xt) * bernoulli::kl_bernoulli({inst.mu_t[xt]},
                                                                {inst.mu_i[xi]});

    rep.skl = rep.b_i + rep.b_t;

    double err = 0.0;
    err = std::max(err, std::abs(rep.a_i - (rep.b_i - rep.c_i)));
    err = std::max(err, std::abs(rep.a_t - (rep.b_t - rep.c_t)));
    err = std::max(err, std::abs(rep.a_i - rep.a_i_alt));
    err = std::max(err, std::abs(rep.a_t - rep.a_t_alt));
    rep.max_identity_error = err;

    const double slack = 1e-9;
    rep.inequalities_ok = rep.a_i >= -slack && rep.a_t >= -slack &&
                          rep.c_i >= -slack && rep.c_t >= -slack &&
                          rep.a_i <= rep.b_i + slack && rep.a_t <= rep.b_t + slack &&
                          rep.a_i + rep.a_t <= rep.skl + slack;
    return rep;
}

DiscreteJoint random_instance(Rng& rng, std::size_t max_alphabet, std::size_t max_bits) {
    DiscreteJoint inst;
    inst.nx_i = 2 + rng.index(max_alphabet - 1);
    inst.nx_t = 2 + rng.index(max_alphabet - 1);
    inst.bits = 1 + rng.index(max_bits);
    inst.joint.resize(inst.nx_i * inst.nx_t);
    double s = 0.0;
    for (double& v : inst.joint) {
        v = 0.05 + rng.uniform();
        s += v;
    }
    for (double& v : inst.joint) v /= s;
    // Re-normalize exactly so validate()'s 1e-12 budget holds.
    s = 0.0;
    for (double v : inst.joint) s += v;
    inst.joint.back() += 1.0 - s;
    inst.mu_i.resize(inst.nx_i);
    inst.mu_t.resize(inst.nx_t);
    for (auto& mu : inst.mu_i) {
        mu.resize(inst.bits);
        for (double& m : mu) m = 0.05 + 0.9 * rng.uniform();
    }
    for (auto& mu : inst.mu_t) {
        mu.resize(inst.bits);
        for (double& m : mu) m = 0.05 + 0.9 * rng.uniform();
    }
    return inst;
}

}  // namespace cmimh::oracles
