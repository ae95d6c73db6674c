#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cmimh/bernoulli.hpp"
#include "cmimh/oracles.hpp"
#include "test_util.hpp"

using namespace cmimh;
using namespace cmimh::bernoulli;

TEST_CASE("clamp endpoints") {
    auto c = clamp({0.0, 1.0, 0.5});
    CHECK(c.mu[0] == kMuEps);
    CHECK(c.mu[1] == 1.0 - kMuEps);
    CHECK(c.mu[2] == 0.5);
}

TEST_CASE("reparam_sample formula and boundary rule") {
    // mu = u = 0.5: both log-odds vanish, z = 0, tie goes to bit 1.
    auto s = reparam_sample(clamp({0.5}), std::vector<double>{0.5});
    CHECK(s.z[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(s.h[0] == 1.0);

    auto s2 = reparam_sample(clamp({0.9}), std::vector<double>{0.5});
    CHECK(s2.z[0] == doctest::Approx(std::log(9.0)).epsilon(1e-12));
    CHECK(s2.h[0] == 1.0);

    CHECK_THROWS_AS(reparam_sample(clamp({0.5}), std::vector<double>{0.0}),
                    std::domain_error);
    CHECK_THROWS_AS(reparam_sample(clamp({0.5}), std::vector<double>{1.0}),
                    std::domain_error);
}

TEST_CASE("reparam_sample marginals match mu") {
    const double mu_val = 0.3;
    const int n = 100000;
    Rng rng(123);
    auto code = clamp({mu_val});
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += reparam_sample(code, rng).h[0];
    const double sigma = std::sqrt(mu_val * (1.0 - mu_val) / n);
    CHECK(std::abs(sum / n - mu_val) < 3.0 * sigma + 1e-12);
}

TEST_CASE("reparam_sample bits are pairwise uncorrelated across dimensions") {
    const int n = 100000;
    Rng rng(5);
    auto code = clamp({0.3, 0.7, 0.5});
    std::vector<std::vector<double>> draws(n);
    for (int i = 0; i < n; ++i) draws[i] = reparam_sample(code, rng).h;
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b) {
            double ma = 0, mb = 0, cov = 0, va = 0, vb = 0;
            for (int i = 0; i < n; ++i) {
                ma += draws[i][a];
                mb += draws[i][b];
            }
            ma /= n;
            mb /= n;
            for (int i = 0; i < n; ++i) {
                cov += (draws[i][a] - ma) * (draws[i][b] - mb);
                va += (draws[i][a] - ma) * (draws[i][a] - ma);
                vb += (draws[i][b] - mb) * (draws[i][b] - mb);
            }
            CHECK(std::abs(cov / std::sqrt(va * vb)) < 0.02);
        }
}

TEST_CASE("kl_bernoulli closed form") {
    auto p = clamp({0.8});
    auto q = clamp({0.5});
    const double expected = 0.8 * std::log(1.6) + 0.2 * std::log(0.4);
    CHECK(kl_bernoulli(p, q) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.19274).epsilon(1e-4));

    CHECK(kl_bernoulli(p, p) == 0.0);
    auto half = clamp(std::vector<double>(64, 0.5));
    CHECK(kl_bernoulli(half, half) == 0.0);
    CHECK_THROWS_AS(kl_bernoulli(p, half), std::invalid_argument);
}

TEST_CASE("kl equals exhaustive enumeration over {0,1}^L") {
    Rng rng(77);
    for (std::size_t L = 1; L <= 10; ++L) {
        std::vector<double> mp(L), mq(L);
        for (double& v : mp) v = rng.uniform();
        for (double& v : mq) v = rng.uniform();
        auto p = clamp(mp);
        auto q = clamp(mq);
        double brute = 0.0;
        for (std::size_t code = 0; code < (std::size_t(1) << L); ++code) {
            double pp = 1.0, qq = 1.0;
            for (std::size_t b = 0; b < L; ++b) {
                const bool on = (code >> b) & 1U;
                pp *= on ? p.mu[b] : 1.0 - p.mu[b];
                qq *= on ? q.mu[b] : 1.0 - q.mu[b];
            }
            brute += pp * std::log(pp / qq);
        }
        CHECK(std::abs(kl_bernoulli(p, q) - brute) < 1e-10);
    }
}

TEST_CASE("kl nonnegative, zero iff equal") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> mp(4), mq(4);
        for (double& v : mp) v = rng.uniform();
        for (double& v : mq) v = rng.uniform();
        auto p = clamp(mp);
        auto q = clamp(mq);
        CHECK(kl_bernoulli(p, q) >= 0.0);
        if (kl_bernoulli(p, q) == 0.0)
            for (std::size_t l = 0; l < 4; ++l)
                CHECK(p.mu[l] == doctest::Approx(q.mu[l]).epsilon(1e-12));
    }
}

TEST_CASE("skl symmetry and example") {
    auto p = clamp({0.8});
    auto q = clamp({0.5});
    CHECK(skl_bernoulli(p, q) ==
          doctest::Approx(kl_bernoulli(p, q) + kl_bernoulli(q, p)).epsilon(1e-15));
    // Exact two-term sums: kl(p,q) ~= 0.19274, kl(q,p) ~= 0.22314.
    const double kl_qp = 0.5 * std::log(0.5 / 0.8) + 0.5 * std::log(0.5 / 0.2);
    CHECK(skl_bernoulli(p, q) == doctest::Approx(0.19274 + kl_qp).epsilon(1e-4));
    CHECK(std::abs(skl_bernoulli(p, q) - skl_bernoulli(q, p)) < 1e-15);
    CHECK(skl_bernoulli(p, p) == 0.0);
}

TEST_CASE("graph kl/skl gradients match finite differences") {
    Rng rng(21);
    Tensor mp(3, 4), mq(3, 4);
    for (double& v : mp.data) v = 0.1 + 0.8 * rng.uniform();
    for (double& v : mq.data) v = 0.1 + 0.8 * rng.uniform();
    auto p = leaf(mp);
    auto q = leaf(mq);
    auto eval = [&] { return skl_batch_mean(p, q)->value[0]; };
    backward(skl_batch_mean(p, q));
    CHECK(testutil::max_grad_rel_err(p->grad, testutil::fd_grad(p, eval)) < 1e-6);
    CHECK(testutil::max_grad_rel_err(q->grad, testutil::fd_grad(q, eval)) < 1e-6);
}

TEST_CASE("reparam_logits gradient flows through log-odds") {
    Rng rng(31);
    Tensor mp(2, 3), u(2, 3);
    for (double& v : mp.data) v = 0.2 + 0.6 * rng.uniform();
    for (double& v : u.data) v = 0.05 + 0.9 * rng.uniform();
    auto mu = leaf(mp);
    auto eval = [&] { return reduce_sum(reparam_logits(mu, u))->value[0]; };
    backward(reduce_sum(reparam_logits(mu, u)));
    CHECK(testutil::max_grad_rel_err(mu->grad, testutil::fd_grad(mu, eval)) < 1e-6);
}
