#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "vleed/adam.hpp"
#include "vleed/errors.hpp"
#include "vleed/kernels.hpp"
#include "vleed/mlp.hpp"
#include "vleed/ops.hpp"
#include "vleed/rng.hpp"
#include "vleed/tape.hpp"

using namespace vleed;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t = Tensor::matrix(2, 3, 1.5);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.size() == 6);
    t(1, 2) = -4.0;
    CHECK(t[5] == -4.0);
    CHECK(t.all_finite());
    t[0] = std::nan("");
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("rng determinism and substreams") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(123), d(123);
    for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());

    Rng s1 = Rng(7).stream("eps");
    Rng s2 = Rng(7).stream("eps");
    Rng s3 = Rng(7).stream("shuffle");
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(s1.seed() != s3.seed());
}

TEST_CASE("rng normal moments") {
    Rng rng(99);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng shuffle is a permutation") {
    Rng rng(5);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 8; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("serial and openmp kernels agree bitwise") {
    Rng rng(17);
    for (const auto [m, k, n] :
         {std::array<std::size_t, 3>{5, 7, 3}, std::array<std::size_t, 3>{64, 33, 50},
          std::array<std::size_t, 3>{1, 128, 1}}) {
        const Tensor a = testutil::random_matrix(rng, m, k);
        const Tensor b = testutil::random_matrix(rng, k, n);
        Tensor cs = Tensor::matrix(m, n), cp = Tensor::matrix(m, n);
        kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n);
        kernels::matmul(a.data(), b.data(), cp.data(), m, k, n);
        for (std::size_t i = 0; i < cs.size(); ++i) CHECK(cs[i] == cp[i]);

        const Tensor at = testutil::random_matrix(rng, k, m);
        Tensor ds = Tensor::matrix(m, n), dp = Tensor::matrix(m, n);
        kernels::serial::matmul_tn(at.data(), b.data(), ds.data(), k, m, n);
        kernels::matmul_tn(at.data(), b.data(), dp.data(), k, m, n);
        for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds[i] == dp[i]);

        const Tensor bt = testutil::random_matrix(rng, n, k);
        Tensor es = Tensor::matrix(m, n), ep = Tensor::matrix(m, n);
        kernels::serial::matmul_nt(a.data(), bt.data(), es.data(), m, k, n);
        kernels::matmul_nt(a.data(), bt.data(), ep.data(), m, k, n);
        for (std::size_t i = 0; i < es.size(); ++i) CHECK(es[i] == ep[i]);
    }
}

TEST_CASE("matmul against hand result") {
    Tensor a = Tensor::matrix(2, 3);
    a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
    a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
    Tensor b = Tensor::matrix(3, 2);
    b(0, 0) = 7; b(0, 1) = 8;
    b(1, 0) = 9; b(1, 1) = 10;
    b(2, 0) = 11; b(2, 1) = 12;
    const Tensor c = kernels::matmul(a, b);
    CHECK(c(0, 0) == doctest::Approx(58));
    CHECK(c(0, 1) == doctest::Approx(64));
    CHECK(c(1, 0) == doctest::Approx(139));
    CHECK(c(1, 1) == doctest::Approx(154));
}

TEST_CASE("mlp_forward identity network") {
    MlpSpec spec;
    spec.layer_widths = {2, 2};
    spec.activation = Activation::kIdentity;
    Params params;
    Tensor w = Tensor::matrix(2, 2);
    w(0, 0) = 1.0;
    w(1, 1) = 1.0;
    params.add("net.w0", w);
    params.add("net.b0", Tensor::vector(2, 0.0));

    Tensor x = Tensor::matrix(1, 2);
    x(0, 0) = 3.0;
    x(0, 1) = -1.0;
    const Tensor y = mlp_infer(spec, params, "net", x);
    CHECK(y(0, 0) == 3.0);
    CHECK(y(0, 1) == -1.0);
}

TEST_CASE("leaky relu slope") {
    Tape t;
    Tensor x = Tensor::matrix(1, 1, -2.0);
    const Tape::Ix y = t.leaky_relu(t.constant(x), 0.01);
    CHECK(t.value(y)[0] == doctest::Approx(-0.02));
}

TEST_CASE("mlp_forward 1d affine") {
    MlpSpec spec;
    spec.layer_widths = {1, 1};
    spec.activation = Activation::kIdentity;
    Params params;
    params.add("net.w0", Tensor::matrix(1, 1, 2.0));
    params.add("net.b0", Tensor::vector(1, 1.0));
    const Tensor y = mlp_infer(spec, params, "net", Tensor::matrix(1, 1, 0.5));
    CHECK(y[0] == doctest::Approx(2.0));
}

TEST_CASE("mlp_forward rejects shape mismatch") {
    MlpSpec spec;
    spec.layer_widths = {3, 2};
    Params params;
    Rng rng(1);
    init_mlp_params(spec, "net", params, rng);
    Tape t;
    MlpTapeParams p = bind_mlp(t, params, spec, "net", true);
    Rng r2(2);
    CHECK_THROWS_AS(mlp_forward(t, spec, p, t.constant(Tensor::matrix(1, 4)), false, r2),
                    ContractViolation);
}

TEST_CASE("backward on linear and quadratic") {
    {
        // loss = w * x at x = 3
        Params params;
        params.add("w", Tensor::scalar(2.0));
        Tape t;
        const Tape::Ix w = t.param(params, 0);
        const Tape::Ix loss = t.mul(w, t.constant(Tensor::scalar(3.0)));
        t.backward(loss);
        CHECK(t.grads_for(params)[0][0] == doctest::Approx(3.0));
    }
    {
        // loss = (w - 1)^2 at w = 0 -> gradient -2
        Params params;
        params.add("w", Tensor::scalar(0.0));
        Tape t;
        const Tape::Ix w = t.param(params, 0);
        const Tape::Ix dev = t.add_scalar(w, -1.0);
        t.backward(t.mul(dev, dev));
        CHECK(t.grads_for(params)[0][0] == doctest::Approx(-2.0));
    }
}

TEST_CASE("unreached parameters get zero gradients") {
    Params params;
    params.add("used", Tensor::scalar(2.0));
    params.add("unused", Tensor::scalar(5.0));
    Tape t;
    const Tape::Ix w = t.param(params, 0);
    t.backward(t.mul(w, w));
    const auto grads = t.grads_for(params);
    CHECK(grads[0][0] == doctest::Approx(4.0));
    CHECK(grads[1][0] == 0.0);
}

TEST_CASE("stale tape detection") {
    Params params;
    params.add("w", Tensor::scalar(1.0));
    Tape t;
    const Tape::Ix w = t.param(params, 0);
    const Tape::Ix loss = t.mul(w, w);
    params.values[0][0] = 2.0;
    params.bump();
    CHECK_THROWS_AS(t.backward(loss), StaleTapeError);
}

TEST_CASE("finite differences across a mixed mlp graph") {
    // exercises matmul, bias, prelu, dropout mask path, normalize, softmax
    Rng rng(11);
    MlpSpec spec;
    spec.layer_widths = {4, 5, 3};
    spec.activation = Activation::kPrelu;
    Params params;
    init_mlp_params(spec, "net", params, rng);
    const Tensor x = testutil::random_matrix(rng, 6, 4);
    const std::vector<int> labels{0, 2, 1, 0, 1, 2};

    auto loss_value = [&]() {
        Tape t;
        MlpTapeParams p = bind_mlp(t, params, spec, "net", true);
        Rng r(3);
        const Tape::Ix logits = mlp_forward(t, spec, p, t.constant(x), false, r);
        const Tape::Ix probs = t.softmax(t.row_normalize(logits));
        return t.value(t.scale(t.mean_all(t.log(t.gather_labels(probs, labels))), -1.0)).item();
    };
    auto tape_grads = [&]() {
        Tape t;
        MlpTapeParams p = bind_mlp(t, params, spec, "net", true);
        Rng r(3);
        const Tape::Ix logits = mlp_forward(t, spec, p, t.constant(x), false, r);
        const Tape::Ix probs = t.softmax(t.row_normalize(logits));
        t.backward(t.scale(t.mean_all(t.log(t.gather_labels(probs, labels))), -1.0));
        return t.grads_for(params);
    };
    const auto rep = testutil::fd_check(params, loss_value, tape_grads);
    INFO("worst coordinate ", rep.worst);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("finite differences with dropout mask held fixed") {
    Rng rng(21);
    MlpSpec spec;
    spec.layer_widths = {3, 8, 2};
    spec.activation = Activation::kLeakyRelu;
    spec.dropout_rate = 0.5;
    Params params;
    init_mlp_params(spec, "net", params, rng);
    const Tensor x = testutil::random_matrix(rng, 4, 3);

    // identical dropout rng per evaluation keeps the mask fixed
    auto forward = [&](Tape& t) {
        MlpTapeParams p = bind_mlp(t, params, spec, "net", true);
        Rng r(77);
        const Tape::Ix y = mlp_forward(t, spec, p, t.constant(x), true, r);
        return t.mean_all(t.mul(y, y));
    };
    auto loss_value = [&]() {
        Tape t;
        return t.value(forward(t)).item();
    };
    auto tape_grads = [&]() {
        Tape t;
        t.backward(forward(t));
        return t.grads_for(params);
    };
    const auto rep = testutil::fd_check(params, loss_value, tape_grads);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("adam zero gradient is a fixed point") {
    Params params;
    params.add("w", Tensor::matrix(2, 2, 3.0));
    AdamState opt(params, {0.1, 0.9, 0.999, 1e-8});
    std::vector<Tensor> zero{Tensor::matrix(2, 2, 0.0)};
    opt.step(params, zero);
    for (std::size_t i = 0; i < 4; ++i) CHECK(params.values[0][i] == 3.0);
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adam bias-corrected first step") {
    Params params;
    params.add("w", Tensor::scalar(1.0));
    AdamState opt(params, {0.1, 0.9, 0.999, 1e-8});
    std::vector<Tensor> g{Tensor::scalar(1.0)};
    opt.step(params, g);
    // first-step update is -lr * 1/(1 + eps)
    CHECK(params.values[0][0] == doctest::Approx(1.0 - 0.1).epsilon(1e-7));
}

TEST_CASE("adam constant gradient moves monotonically") {
    Params params;
    params.add("w", Tensor::scalar(0.0));
    AdamState opt(params, {0.05, 0.9, 0.999, 1e-8});
    std::vector<Tensor> g{Tensor::scalar(2.0)};
    opt.step(params, g);
    const double w1 = params.values[0][0];
    opt.step(params, g);
    const double w2 = params.values[0][0];
    CHECK(w1 < 0.0);
    CHECK(w2 < w1);
}

TEST_CASE("adam rejects bad input") {
    Params params;
    params.add("w", Tensor::scalar(0.0));
    AdamState opt(params, {0.1, 0.9, 0.999, 1e-8});
    std::vector<Tensor> bad{Tensor::scalar(std::nan(""))};
    CHECK_THROWS_AS(opt.step(params, bad), NumericError);
    std::vector<Tensor> wrong{Tensor::matrix(2, 2)};
    CHECK_THROWS_AS(opt.step(params, wrong), ContractViolation);
    CHECK_THROWS_AS(AdamState(params, {-1.0, 0.9, 0.999, 1e-8}), ContractViolation);
}

TEST_CASE("reparameterize forced and sampled") {
    Tape t;
    const Tensor mu = Tensor::matrix(1, 3, 2.0);
    const Tensor sigma = Tensor::matrix(1, 3, 0.5);
    Rng rng(1);

    const Tensor zero_eps = Tensor::matrix(1, 3, 0.0);
    const Tape::Ix z = reparameterize(t, t.constant(mu), t.constant(sigma), rng, &zero_eps);
    for (std::size_t i = 0; i < 3; ++i) CHECK(t.value(z)[i] == 2.0);

    // degenerate variance allowed only under the test hook
    const Tensor zero_sigma = Tensor::matrix(1, 3, 0.0);
    const Tensor any_eps = Tensor::matrix(1, 3, 17.0);
    const Tape::Ix z2 =
        reparameterize(t, t.constant(mu), t.constant(zero_sigma), rng, &any_eps);
    for (std::size_t i = 0; i < 3; ++i) CHECK(t.value(z2)[i] == 2.0);

    CHECK_THROWS_AS(reparameterize(t, t.constant(mu), t.constant(zero_sigma), rng),
                    ContractViolation);
}

TEST_CASE("reparameterize monte carlo moments") {
    Rng rng(31);
    Tape t;
    const std::size_t n = 100000;
    const Tape::Ix mu = t.constant(Tensor::matrix(n, 1, 0.0));
    const Tape::Ix sigma = t.constant(Tensor::matrix(n, 1, 1.0));
    const Tape::Ix z = reparameterize(t, mu, sigma, rng);
    double sum = 0.0, sum2 = 0.0;
    const Tensor& v = t.value(z);
    for (std::size_t i = 0; i < n; ++i) {
        sum += v[i];
        sum2 += v[i] * v[i];
    }
    const double mean = sum / static_cast<double>(n);
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(sum2 / static_cast<double>(n) - mean * mean - 1.0) < 0.05);
}

TEST_CASE("reparameterize gradient goes to mu and sigma") {
    Params params;
    params.add("mu", Tensor::matrix(1, 2, 0.3));
    params.add("sigma", Tensor::matrix(1, 2, 0.7));
    Tensor eps = Tensor::matrix(1, 2);
    eps[0] = 1.5;
    eps[1] = -0.5;
    Tape t;
    Rng rng(1);
    const Tape::Ix z =
        reparameterize(t, t.param(params, 0), t.param(params, 1), rng, &eps);
    t.backward(t.sum_all(z));
    const auto grads = t.grads_for(params);
    CHECK(grads[0][0] == doctest::Approx(1.0));
    CHECK(grads[0][1] == doctest::Approx(1.0));
    CHECK(grads[1][0] == doctest::Approx(1.5));
    CHECK(grads[1][1] == doctest::Approx(-0.5));
}

TEST_CASE("softmax closed forms and stability") {
    {
        Tensor logits = Tensor::matrix(1, 2, 0.0);
        const Tensor p = softmax_rows(logits);
        CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    {
        Tensor logits = Tensor::matrix(1, 2);
        logits[0] = 1000.0;
        logits[1] = 0.0;
        const Tensor p = softmax_rows(logits);
        CHECK(p[0] == doctest::Approx(1.0));
        CHECK(p[1] >= 0.0);
        CHECK(p[1] < 1e-300);
        CHECK(std::isfinite(p[0]));
    }
    {
        Tensor logits = Tensor::matrix(1, 2);
        logits[0] = std::log(2.0);
        logits[1] = 0.0;
        const Tensor p = softmax_rows(logits);
        CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax rows sum to one and stay positive") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor logits = testutil::random_matrix(rng, 4, 6, 5.0);
        const Tensor p = softmax_rows(logits);
        for (std::size_t i = 0; i < 4; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 6; ++j) {
                s += p(i, j);
                CHECK(p(i, j) > 0.0);
            }
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("forward determinism bitwise") {
    Rng rng(8);
    MlpSpec spec;
    spec.layer_widths = {6, 16, 4};
    spec.activation = Activation::kPrelu;
    spec.dropout_rate = 0.3;
    Params params;
    init_mlp_params(spec, "net", params, rng);
    const Tensor x = testutil::random_matrix(rng, 5, 6);

    auto run = [&]() {
        Tape t;
        MlpTapeParams p = bind_mlp(t, params, spec, "net", true);
        Rng r(4242);
        const Tape::Ix y = mlp_forward(t, spec, p, t.constant(x), true, r);
        t.backward(t.mean_all(y));
        return std::make_pair(t.value(y), t.grads_for(params));
    };
    const auto [y1, g1] = run();
    const auto [y2, g2] = run();
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
    for (std::size_t p = 0; p < g1.size(); ++p)
        for (std::size_t i = 0; i < g1[p].size(); ++i) CHECK(g1[p][i] == g2[p][i]);
}
