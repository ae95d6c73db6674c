#pragma once

#include <cstddef>
#include <vector>

#include "cmimh/rng.hpp"

namespace cmimh::oracles {

// Finite paired-alphabet instance with product-Bernoulli encoders; all
// quantities below are exact enumerations over the discrete state space.
struct DiscreteJoint {
    std::size_t nx_i = 0, nx_t = 0;  // alphabet sizes, each <= 8
    std::size_t bits = 0;            // code length L <= 6
    std::vector<double> joint;       // nx_i * nx_t, row-major, sums to 1
    std::vector<std::vector<double>> mu_i;  // per x_i, length-L clamped probabilities
    std::vector<std::vector<double>> mu_t;

    double p(std::size_t xi, std::size_t xt) const { return joint[xi * nx_t + xt]; }
    void validate() const;
};

double stable_softplus(double x);

// Probability Bern(mu) assigns to the code whose bit b is (code >> b) & 1.
double bernoulli_prob(const std::vector<double>& mu, std::size_t code);

// Mutual information of a joint table over nr x nc states, in nats.
double exact_mi(const std::vector<double>& joint, std::size_t nr, std::size_t nc);

double exact_kl(const std::vector<double>& p, const std::vector<double>& q);
// Standard half-mixture Jensen-Shannon divergence; in [0, log 2].
double exact_jsd(const std::vector<double>& p, const std::vector<double>& q);

// Total correlation of a distribution over {0,1}^L given as a table of
// 2^L probabilities.
double exact_tc(const std::vector<double>& qz, std::size_t bits);
// Same quantity via sum of per-bit entropies minus joint entropy.
double exact_tc_entropy_identity(const std::vector<double>& qz, std::size_t bits);

// Code-space joint p(h_i, h_t) induced by the instance: a (2^L)^2 table
// with h_i as the row index.
std::vector<double> code_joint(const DiscreteJoint& inst);
std::vector<double> product_of_marginals(const std::vector<double>& joint, std::size_t nr,
                                         std::size_t nc);

// Variational JS bound evaluated in expectation for a critic given as a
// table of raw scores over the same state space as p and q.
double js_bound_expectation(const std::vector<double>& p, const std::vector<double>& q,
                            const std::vector<double>& critic);

struct PrivateInfoReport {
    // Per modality: a = I(x; h | other), b = E KL[enc || other enc],
    // c = E KL[mixture || other enc]; identity a == b - c.
    double a_i = 0, b_i = 0, c_i = 0, a_i_alt = 0;
    double a_t = 0, b_t = 0, c_t = 0, a_t_alt = 0;
    double skl = 0;  // b_i + b_t
    double max_identity_error = 0;
    bool inequalities_ok = false;

    bool ok(double tol) const { return max_identity_error <= tol && inequalities_ok; }
};

PrivateInfoReport verify_private_info_identity(const DiscreteJoint& inst);

DiscreteJoint random_instance(Rng& rng, std::size_t max_alphabet = 8, std::size_t max_bits = 6);

}  // namespace cmimh::oracles
