#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "test_util.hpp"
#include "vleed/binio.hpp"
#include "vleed/checkpoint.hpp"
#include "vleed/errors.hpp"
#include "vleed/model.hpp"

using namespace vleed;

namespace {

VleedConfig small_config() {
    VleedConfig c;
    c.input_dim = 8;
    c.residual_dim = 6;
    c.class_dim = 3;
    c.num_classes = 2;
    c.residual_hidden = 10;
    c.class_hidden = 7;
    c.decoder_hidden = 9;
    c.classifier_hidden = 5;
    return c;
}

}  // namespace

TEST_CASE("reconstruction loss extremes and hand case") {
    Tensor x = Tensor::matrix(1, 2);
    x(0, 0) = 1.0;
    CHECK(loss_reconstruction(x, x) == doctest::Approx(0.0).epsilon(1e-9));

    Tensor neg = x;
    neg(0, 0) = -1.0;
    CHECK(loss_reconstruction(x, neg) == doctest::Approx(2.0).epsilon(1e-9));

    Tensor diag = Tensor::matrix(1, 2);
    diag(0, 0) = std::sqrt(2.0) / 2.0;
    diag(0, 1) = std::sqrt(2.0) / 2.0;
    CHECK(loss_reconstruction(x, diag) == doctest::Approx(1.0 - std::sqrt(2.0) / 2.0));

    Tensor not_unit = Tensor::matrix(1, 2, 2.0);
    CHECK_THROWS_AS(loss_reconstruction(x, not_unit), ContractViolation);
}

TEST_CASE("kl residual closed forms") {
    CHECK(loss_kl_residual(Tensor::matrix(1, 4, 0.0), Tensor::matrix(1, 4, 1.0)) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(loss_kl_residual(Tensor::matrix(1, 1, 1.0), Tensor::matrix(1, 1, 1.0)) ==
          doctest::Approx(0.5).epsilon(1e-12));
    const double e = std::exp(1.0);
    CHECK(loss_kl_residual(Tensor::matrix(1, 1, 0.0), Tensor::matrix(1, 1, e)) ==
          doctest::Approx(0.5 * (e * e - 3.0)).epsilon(1e-12));
    CHECK_THROWS_AS(loss_kl_residual(Tensor::matrix(1, 1, 0.0), Tensor::matrix(1, 1, 0.0)),
                    ContractViolation);
}

TEST_CASE("kl class closed forms and translation invariance") {
    Tensor prior = Tensor::vector(1, 1.0);
    CHECK(loss_kl_class(Tensor::matrix(1, 1, 1.0), Tensor::matrix(1, 1, 1.0), prior) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(loss_kl_class(Tensor::matrix(1, 1, 2.0), Tensor::matrix(1, 1, 1.0), prior) ==
          doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(3);
    const Tensor mu = testutil::random_matrix(rng, 1, 5);
    Tensor sigma = testutil::random_matrix(rng, 1, 5);
    for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = std::abs(sigma[i]) + 0.1;
    Tensor pr = Tensor::vector(5);
    for (std::size_t i = 0; i < 5; ++i) pr[i] = rng.normal();
    const double base = loss_kl_class(mu, sigma, pr);
    Tensor mu2 = mu;
    Tensor pr2 = pr;
    for (std::size_t i = 0; i < 5; ++i) {
        mu2[i] += 7.25;
        pr2[i] += 7.25;
    }
    CHECK(loss_kl_class(mu2, sigma, pr2) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("kl non-negativity on grids") {
    for (double mu = -2.0; mu <= 2.0; mu += 0.5)
        for (double s = 0.1; s <= 3.0; s += 0.2) {
            CHECK(loss_kl_residual(Tensor::matrix(1, 1, mu), Tensor::matrix(1, 1, s)) >= -1e-12);
            CHECK(loss_kl_class(Tensor::matrix(1, 1, mu), Tensor::matrix(1, 1, s),
                                Tensor::vector(1, 0.75)) >= -1e-12);
        }
}

TEST_CASE("classifier loss closed forms") {
    Tensor onehot = Tensor::matrix(1, 3);
    onehot(0, 1) = 1.0;
    CHECK(loss_classifier(onehot, {1}) == doctest::Approx(0.0).epsilon(1e-12));

    Tensor uniform = Tensor::matrix(1, 4, 0.25);
    CHECK(loss_classifier(uniform, {2}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Tensor p = Tensor::matrix(1, 2);
    p(0, 0) = 0.9;
    p(0, 1) = 0.1;
    CHECK(loss_classifier(p, {1}) == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
}

TEST_CASE("disentangle loss bounds and closed forms") {
    Tensor uniform = Tensor::matrix(1, 2, 0.5);
    CHECK(loss_disentangle(uniform) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

    Tensor onehot = Tensor::matrix(1, 2);
    onehot(0, 0) = 1.0;  // 0*log0 convention keeps this exactly zero
    CHECK(loss_disentangle(onehot) == doctest::Approx(0.0).epsilon(1e-15));

    Tensor p = Tensor::matrix(1, 2);
    p(0, 0) = 0.75;
    p(0, 1) = 0.25;
    CHECK(loss_disentangle(p) ==
          doctest::Approx(0.75 * std::log(0.75) + 0.25 * std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("disentangle loss bounded on simplex samples") {
    Rng rng(5);
    const std::size_t k = 4;
    for (int trial = 0; trial < 200; ++trial) {
        Tensor p = Tensor::matrix(1, k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p[j] = -std::log(1.0 - rng.uniform01() + 1e-300);
            sum += p[j];
        }
        for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
        const double v = loss_disentangle(p);
        CHECK(v <= 1e-12);
        CHECK(v >= -std::log(static_cast<double>(k)) - 1e-12);
        double neg_entropy = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            if (p[j] > 0.0) neg_entropy += p[j] * std::log(p[j]);
        CHECK(v == doctest::Approx(neg_entropy).epsilon(1e-12));
    }
}

TEST_CASE("combined loss weighting and linearity") {
    VleedConfig c = small_config();
    c.residual_dim = 480;
    c.class_dim = 32;
    c.beta_r = 0.1;
    c.beta_c = 1.0;
    c.lambda_rec = 1.0;
    c.lambda_dis = 10.0;
    const LossBreakdown b = combined_loss(c, 0.1, 48.0, 3.2, -0.5, 0.7);
    CHECK(b.total == doctest::Approx(-4.79).epsilon(1e-12));
    CHECK(b.l_clf == 0.7);  // reported but not in the total

    const LossBreakdown b0 = combined_loss(c, 0.1, 48.0, 3.2, -0.5, 0.7, 0.0);
    CHECK(b0.total == doctest::Approx(0.1 + 0.01 + 0.1).epsilon(1e-12));

    const LossBreakdown bz = combined_loss(c, 0.0, 0.0, 0.0, 0.0, 0.0);
    CHECK(bz.total == 0.0);

    // linear in each weight: doubling one weight moves the total by its term
    VleedConfig c2 = c;
    c2.beta_r = 0.2;
    const LossBreakdown b2 = combined_loss(c2, 0.1, 48.0, 3.2, -0.5, 0.7);
    CHECK(b2.total - b.total == doctest::Approx(0.1 / 480.0 * 48.0).epsilon(1e-9));

    VleedConfig bad = c;
    bad.lambda_rec = -1.0;
    CHECK_THROWS_AS(combined_loss(bad, 0, 0, 0, 0, 0), ContractViolation);
}

TEST_CASE("encoder sigma clamp and determinism") {
    Rng rng(7);
    VleedModel m = init_vleed_model(small_config(), rng);
    const Tensor x = testutil::random_unit_rows(rng, 4, 8);

    auto [mu1, sigma1] = encode_residual(m, x);
    auto [mu2, sigma2] = encode_residual(m, x);
    for (std::size_t i = 0; i < mu1.size(); ++i) {
        CHECK(mu1[i] == mu2[i]);
        CHECK(sigma1[i] == sigma2[i]);
        CHECK(sigma1[i] >= std::exp(-5.0));
        CHECK(sigma1[i] <= std::exp(5.0));
        CHECK(std::isfinite(mu1[i]));
    }
    auto [muc, sigmac] = encode_class(m, x);
    CHECK(muc.cols() == 3);
    CHECK(sigmac.cols() == 3);
    for (std::size_t i = 0; i < sigmac.size(); ++i) CHECK(sigmac[i] > 0.0);
}

TEST_CASE("decode output is unit norm and deterministic") {
    Rng rng(9);
    VleedModel m = init_vleed_model(small_config(), rng);
    const Tensor zr = testutil::random_matrix(rng, 5, 6);
    const Tensor zc = testutil::random_matrix(rng, 5, 3);
    const Tensor xhat = decode(m, zr, zc);
    for (std::size_t i = 0; i < xhat.rows(); ++i)
        CHECK(std::abs(l2_norm(xhat.data() + i * xhat.cols(), xhat.cols()) - 1.0) < 1e-9);
    const Tensor xhat2 = decode(m, zr, zc);
    for (std::size_t i = 0; i < xhat.size(); ++i) CHECK(xhat[i] == xhat2[i]);
}

TEST_CASE("infer_release is normalized, deterministic, equals zero-noise path") {
    Rng rng(10);
    VleedModel m = init_vleed_model(small_config(), rng);
    const Tensor x = testutil::random_unit_rows(rng, 6, 8);
    const Tensor z = infer_release(m, x);
    for (std::size_t i = 0; i < z.rows(); ++i)
        CHECK(std::abs(l2_norm(z.data() + i * z.cols(), z.cols()) - 1.0) < 1e-9);
    const Tensor z2 = infer_release(m, x);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == z2[i]);

    // matches reparameterize with eps forced to zero, then normalized
    Tape t;
    EncoderHeads enc = encode_residual_t(t, m, t.constant(x), false);
    const Tensor zero_eps = Tensor::matrix(6, 6, 0.0);
    Rng r2(0);
    const Tape::Ix zs = reparameterize(t, enc.mu, enc.sigma, r2, &zero_eps);
    Tensor zn = t.value(zs);
    for (std::size_t i = 0; i < zn.rows(); ++i)
        normalize_inplace(zn.data() + i * zn.cols(), zn.cols());
    for (std::size_t i = 0; i < zn.size(); ++i)
        CHECK(zn[i] == doctest::Approx(z[i]).epsilon(1e-12));
}

TEST_CASE("gradient flow contract between classifier and encoder") {
    Rng rng(12);
    VleedModel m = init_vleed_model(small_config(), rng);
    const Tensor x = testutil::random_unit_rows(rng, 5, 8);
    const std::vector<int> labels{0, 1, 0, 1, 1};

    // (a) classifier loss on detached z_r reaches no encoder parameter
    {
        auto [mu, sigma] = encode_residual(m, x);
        Tape t;
        Rng dr(1);
        Tape::Ix probs = classifier_probs_t(t, m, t.constant(mu), true, true, dr);
        t.backward(loss_classifier_t(t, probs, labels));
        for (const Tensor& g : t.grads_for(m.vae))
            for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
        double clf_norm = 0.0;
        for (const Tensor& g : t.grads_for(m.clf))
            for (std::size_t i = 0; i < g.size(); ++i) clf_norm += g[i] * g[i];
        CHECK(clf_norm > 0.0);
    }

    // (b) disentanglement loss through a frozen classifier reaches no
    // classifier parameter but does reach the encoder
    {
        Tape t;
        EncoderHeads enc = encode_residual_t(t, m, t.constant(x), true);
        Rng er(2);
        Tape::Ix zr = reparameterize(t, enc.mu, enc.sigma, er);
        Rng dr(1);
        Tape::Ix probs = classifier_probs_t(t, m, zr, false, false, dr);
        t.backward(loss_disentangle_t(t, probs));
        for (const Tensor& g : t.grads_for(m.clf))
            for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
        double enc_norm = 0.0;
        for (const Tensor& g : t.grads_for(m.vae))
            for (std::size_t i = 0; i < g.size(); ++i) enc_norm += g[i] * g[i];
        CHECK(enc_norm > 0.0);
    }
}

TEST_CASE("finite differences for all five losses through the model") {
    Rng rng(14);
    VleedConfig cfg = small_config();
    VleedModel m = init_vleed_model(cfg, rng);
    const Tensor x = testutil::random_unit_rows(rng, 3, 8);
    const std::vector<int> labels{0, 1, 1};
    const Tensor eps_r = testutil::random_matrix(rng, 3, 6);
    const Tensor eps_c = testutil::random_matrix(rng, 3, 3);
    const std::size_t prior_idx = m.vae.index_of("prior_means");

    enum Which { kRec, kKlR, kKlC, kDis, kClf };
    for (Which which : {kRec, kKlR, kKlC, kDis, kClf}) {
        Params& group = which == kClf ? m.clf : m.vae;
        auto build = [&](Tape& t) -> Tape::Ix {
            Tape::Ix xc = t.constant(x);
            Rng er(0);
            switch (which) {
                case kRec: {
                    EncoderHeads r = encode_residual_t(t, m, xc, true);
                    EncoderHeads c = encode_class_t(t, m, xc, true);
                    Tape::Ix zr = reparameterize(t, r.mu, r.sigma, er, &eps_r);
                    Tape::Ix zc = reparameterize(t, c.mu, c.sigma, er, &eps_c);
                    return loss_reconstruction_t(t, xc, decode_t(t, m, zr, zc, true));
                }
                case kKlR: {
                    EncoderHeads r = encode_residual_t(t, m, xc, true);
                    return loss_kl_residual_t(t, r.mu, r.sigma);
                }
                case kKlC: {
                    EncoderHeads c = encode_class_t(t, m, xc, true);
                    Tape::Ix prior = t.gather_rows(t.param(m.vae, prior_idx), labels);
                    return loss_kl_class_t(t, c.mu, c.sigma, prior);
                }
                case kDis: {
                    EncoderHeads r = encode_residual_t(t, m, xc, true);
                    Tape::Ix zr = reparameterize(t, r.mu, r.sigma, er, &eps_r);
                    Rng dr(0);
                    return loss_disentangle_t(t, classifier_probs_t(t, m, zr, false, false, dr));
                }
                case kClf: {
                    auto [mu, sigma] = encode_residual(m, x);
                    Tensor zr = mu;
                    for (std::size_t i = 0; i < zr.size(); ++i) zr[i] += sigma[i] * eps_r[i];
                    Rng dr(0);
                    return loss_classifier_t(
                        t, classifier_probs_t(t, m, t.constant(zr), true, false, dr), labels);
                }
            }
            return -1;
        };
        auto loss_value = [&]() {
            Tape t;
            return t.value(build(t)).item();
        };
        auto tape_grads = [&]() {
            Tape t;
            t.backward(build(t));
            return t.grads_for(group);
        };
        const auto rep = testutil::fd_check(group, loss_value, tape_grads);
        INFO("loss ", static_cast<int>(which), " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("mutual information estimate cases") {
    Rng rng(20);
    VleedModel m = init_vleed_model(small_config(), rng);
    const Tensor x = testutil::random_unit_rows(rng, 6, 8);

    // all labels one class: H(C) = 0 so the clipped estimate is 0
    Rng r1(1);
    CHECK(mutual_info_estimate(m, x, {0, 0, 0, 0, 0, 0}, r1) == 0.0);

    // balanced labels: estimate stays within [0, log 2]
    Rng r2(1);
    const double mi = mutual_info_estimate(m, x, {0, 1, 0, 1, 0, 1}, r2);
    CHECK(mi >= 0.0);
    CHECK(mi <= std::log(2.0) + 1e-12);
}

TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(23);
    VleedModel m = init_vleed_model(small_config(), rng);
    const std::string path = "test_model_ckpt.bin";
    save_model(path, m);
    VleedModel loaded = load_model(path);

    REQUIRE(loaded.vae.count() == m.vae.count());
    for (std::size_t p = 0; p < m.vae.count(); ++p) {
        CHECK(loaded.vae.names[p] == m.vae.names[p]);
        for (std::size_t i = 0; i < m.vae.values[p].size(); ++i)
            CHECK(loaded.vae.values[p][i] == m.vae.values[p][i]);
    }
    for (std::size_t p = 0; p < m.clf.count(); ++p)
        for (std::size_t i = 0; i < m.clf.values[p].size(); ++i)
            CHECK(loaded.clf.values[p][i] == m.clf.values[p][i]);

    // saved bytes identical after a save/load/save cycle
    const std::string path2 = "test_model_ckpt2.bin";
    save_model(path2, loaded);
    const std::string b1 = binio::read_file(path);
    const std::string b2 = binio::read_file(path2);
    CHECK(b1 == b2);

    // corrupting the magic is rejected
    std::string bad = b1;
    bad[0] = 'X';
    binio::write_file(path2, bad);
    CHECK_THROWS_AS(load_model(path2), FormatError);

    // truncation reports a byte offset
    binio::write_file(path2, b1.substr(0, b1.size() / 2));
    try {
        load_model(path2);
        CHECK(false);
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}
