#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cmimh/autodiff.hpp"
#include "test_util.hpp"

using namespace cmimh;
using testutil::fd_grad;
using testutil::max_grad_rel_err;
using testutil::random_away_from_kinks;

TEST_CASE("matmul forward basics") {
    auto eye = constant(Tensor::identity(2));
    auto v = constant(Tensor(2, 1, {3, 4}));
    CHECK(matmul(eye, v)->value.data == std::vector<double>{3, 4});

    auto a = constant(Tensor(1, 2, {1, 2}));
    auto b = constant(Tensor(2, 1, {3, 4}));
    CHECK(matmul(a, b)->value[0] == doctest::Approx(11).epsilon(1e-15));

    CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
}

TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(42);
    auto a = leaf(random_away_from_kinks(rng, 3, 4));
    auto b = leaf(random_away_from_kinks(rng, 4, 2));
    auto eval = [&] { return reduce_sum(matmul(a, b))->value[0]; };
    auto loss = reduce_sum(matmul(a, b));
    backward(loss);
    CHECK(max_grad_rel_err(a->grad, fd_grad(a, eval)) < 1e-6);
    CHECK(max_grad_rel_err(b->grad, fd_grad(b, eval)) < 1e-6);
}

TEST_CASE("elementwise forward values") {
    auto z = constant(Tensor(1, 1, {0.0}));
    CHECK(sigmoid(z)->value[0] == doctest::Approx(0.5).epsilon(1e-15));

    auto m2 = leaf(Tensor(1, 1, {-2.0}));
    auto r = relu(m2);
    CHECK(r->value[0] == 0.0);
    backward(reduce_sum(r));
    CHECK(m2->grad[0] == 0.0);
}

TEST_CASE("pointwise gradients match finite differences") {
    Rng rng(7);
    struct Case {
        const char* name;
        std::function<Var(const Var&)> op;
    };
    std::vector<Case> cases = {
        {"softplus", [](const Var& x) { return softplus(x); }},
        {"sigmoid", [](const Var& x) { return sigmoid(x); }},
        {"exp", [](const Var& x) { return exp_(x); }},
        {"relu", [](const Var& x) { return relu(x); }},
        {"leaky_relu", [](const Var& x) { return leaky_relu(x); }},
        {"abs", [](const Var& x) { return abs_(x); }},
        {"neg", [](const Var& x) { return neg(x); }},
        {"scale", [](const Var& x) { return scale(x, -1.7); }},
        {"mul_self", [](const Var& x) { return mul(x, x); }},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        auto x = leaf(random_away_from_kinks(rng, 4, 3));
        auto eval = [&] { return reduce_sum(c.op(x))->value[0]; };
        backward(reduce_sum(c.op(x)));
        CHECK(max_grad_rel_err(x->grad, fd_grad(x, eval)) < 1e-6);
    }
}

TEST_CASE("log gradient and domain") {
    Rng rng(9);
    Tensor pos(3, 3);
    for (double& v : pos.data) v = 0.1 + rng.uniform();
    auto x = leaf(pos);
    auto eval = [&] { return reduce_sum(log_(x))->value[0]; };
    backward(reduce_sum(log_(x)));
    CHECK(max_grad_rel_err(x->grad, fd_grad(x, eval)) < 1e-6);

    CHECK_THROWS_AS(log_(constant(Tensor(1, 1, {0.0}))), std::domain_error);
    CHECK_THROWS_AS(log_(constant(Tensor(1, 1, {-1.0}))), std::domain_error);
}

TEST_CASE("reductions") {
    auto v = constant(Tensor(1, 3, {1, 2, 3}));
    CHECK(reduce_mean(v)->value[0] == doctest::Approx(2).epsilon(1e-15));
    CHECK(reduce_sum(constant(Tensor(3, 3)))->value[0] == 0.0);
    CHECK_THROWS_AS(reduce_sum(constant(Tensor(0, 0))), std::invalid_argument);

    auto w = leaf(Tensor(1, 4, {1, 2, 3, 4}));
    backward(reduce_mean(w));
    for (double g : w->grad.data) CHECK(g == doctest::Approx(0.25).epsilon(1e-15));

    // Axis reductions and their broadcasts.
    auto m = leaf(Tensor(2, 3, {1, 2, 3, 4, 5, 6}));
    auto colmeans = reduce_mean(m, Axis::rows);
    CHECK(colmeans->value.cols == 3);
    CHECK(colmeans->value[0] == doctest::Approx(2.5).epsilon(1e-15));
    auto eval = [&] { return reduce_sum(mul(reduce_mean(m, Axis::rows),
                                            reduce_mean(m, Axis::rows)))->value[0]; };
    backward(reduce_sum(mul(reduce_mean(m, Axis::rows), reduce_mean(m, Axis::rows))));
    CHECK(max_grad_rel_err(m->grad, fd_grad(m, eval)) < 1e-6);
}

TEST_CASE("ste_sign forward threshold and straight-through backward") {
    auto z = leaf(Tensor(1, 3, {0.0, -3.7, 1.2}));
    auto h = ste_sign(z);
    CHECK(h->value[0] == 1.0);  // z = 0 maps to bit 1
    CHECK(h->value[1] == 0.0);
    CHECK(h->value[2] == 1.0);
    backward(reduce_sum(h));
    for (double g : z->grad.data) CHECK(g == 1.0);

    // Idempotence: re-signing the +-1 shift of a {0,1} output reproduces it.
    auto h2 = ste_sign(add_scalar(scale(h, 2.0), -1.0));
    CHECK(h2->value.data == h->value.data);
}

TEST_CASE("backward of non-scalar loss rejected") {
    auto v = leaf(Tensor(1, 3, {1, 2, 3}));
    CHECK_THROWS_AS(backward(v), std::logic_error);
}

TEST_CASE("shared subexpressions accumulate path contributions") {
    // loss = sum(x*x) + sum(x): grad = 2x + 1.
    auto x = leaf(Tensor(1, 2, {1, 2}));
    backward(add(reduce_sum(mul(x, x)), reduce_sum(x)));
    CHECK(x->grad[0] == doctest::Approx(3).epsilon(1e-14));
    CHECK(x->grad[1] == doctest::Approx(5).epsilon(1e-14));
}

TEST_CASE("gradient accumulation across backward calls") {
    auto w = leaf(Tensor(1, 3, {1, 1, 1}));
    backward(reduce_sum(w));
    for (double g : w->grad.data) CHECK(g == 1.0);
    backward(reduce_sum(w));
    for (double g : w->grad.data) CHECK(g == 2.0);
    w->zero_grad();
    backward(reduce_sum(mul(w, w)));
    CHECK(w->grad[0] == doctest::Approx(2).epsilon(1e-14));
}

TEST_CASE("composite MLP-style graph gradient") {
    Rng rng(3);
    auto w1 = leaf(random_away_from_kinks(rng, 5, 4));
    auto w2 = leaf(random_away_from_kinks(rng, 4, 1));
    auto x = constant(random_away_from_kinks(rng, 6, 5));
    auto build = [&] {
        return reduce_mean(sigmoid(matmul(leaky_relu(matmul(x, w1)), w2)));
    };
    backward(build());
    auto eval = [&] { return build()->value[0]; };
    CHECK(max_grad_rel_err(w1->grad, fd_grad(w1, eval)) < 1e-6);
    CHECK(max_grad_rel_err(w2->grad, fd_grad(w2, eval)) < 1e-6);
}

TEST_CASE("non-finite results are rejected") {
    auto big = constant(Tensor(1, 1, {1e308}));
    CHECK_THROWS_AS(exp_(big), std::runtime_error);
    CHECK_THROWS_AS(mul(big, big), std::runtime_error);
}
