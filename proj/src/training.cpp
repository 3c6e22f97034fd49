#include "vleed/training.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include "vleed/errors.hpp"

namespace vleed {

void TrainConfig::validate() const {
    if (epochs < 1) throw ContractViolation("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw ContractViolation("TrainConfig: batch_size must be >= 1");
    if (n_clf < 1) throw ContractViolation("TrainConfig: n_clf must be >= 1");
    if (moment_order < 1) throw ContractViolation("TrainConfig: moment_order must be >= 1");
    clf_adam.validate();
    vae_adam.validate();
}

double effective_lambda(long long epoch_index, long long warmup_epochs, double lambda_dis) {
    if (epoch_index < 0 || warmup_epochs < 0 || lambda_dis < 0.0)
        throw ContractViolation("effective_lambda: negative input");
    if (warmup_epochs == 0) return lambda_dis;
    const double frac = static_cast<double>(epoch_index + 1) / static_cast<double>(warmup_epochs);
    return (frac < 1.0 ? frac : 1.0) * lambda_dis;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  bool shuffle, Rng& rng) {
    if (batch_size < 1) throw ContractViolation("minibatches: batch_size must be >= 1");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (shuffle) rng.shuffle(order);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

namespace {

Tensor gather_batch(const Tensor& x, const std::vector<std::size_t>& idx) {
    Tensor b = Tensor::matrix(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) b(i, j) = x(idx[i], j);
    return b;
}

Tensor draw_normal(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::matrix(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

bool all_classes_twice(const std::vector<int>& labels, std::size_t num_classes) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (int c : labels) ++counts[static_cast<std::size_t>(c)];
    for (std::size_t c : counts)
        if (c < 2) return false;
    return true;
}

}  // namespace

std::pair<VleedModel, TrainTrace> train_vleed(const Tensor& x_in, const std::vector<int>& labels,
                                              const VleedConfig& vleed_config,
                                              const TrainConfig& train_config,
                                              TrainMethod method) {
    vleed_config.validate();
    train_config.validate();
    if (x_in.rows() == 0 || labels.size() != x_in.rows())
        throw ConfigError("train_vleed: dataset empty or label count mismatch");
    if (x_in.cols() != vleed_config.input_dim)
        throw ConfigError("train_vleed: input width != config input_dim");
    std::vector<bool> seen(vleed_config.num_classes, false);
    for (int c : labels) {
        if (c < 0 || static_cast<std::size_t>(c) >= vleed_config.num_classes)
            throw ConfigError("train_vleed: label out of range");
        seen[static_cast<std::size_t>(c)] = true;
    }
    std::size_t distinct = 0;
    for (bool s : seen) distinct += s ? 1 : 0;
    if (distinct < 2) throw ConfigError("train_vleed: need at least 2 distinct labels");

    Tensor x = x_in;
    normalize_rows_if_needed(x);

    Rng master(train_config.seed);
    Rng shuffle_rng = master.stream("shuffle");
    Rng eps_rng = master.stream("eps");
    Rng dropout_rng = master.stream("clf-dropout");
    Rng init_rng = master.stream("init");

    VleedModel model = init_vleed_model(vleed_config, init_rng);

    AdamConfig vae_adam_cfg = train_config.vae_adam;
    if (method == TrainMethod::kPfrnet && vae_adam_cfg.lr > 5e-3)
        vae_adam_cfg.lr = 5e-3;  // moment objective is unstable above this
    AdamState vae_opt(model.vae, vae_adam_cfg);
    AdamState clf_opt(model.clf, train_config.clf_adam);

    const std::size_t prior_idx = model.vae.index_of("prior_means");
    TrainTrace trace;

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lambda_eff =
            effective_lambda(static_cast<long long>(epoch),
                             static_cast<long long>(train_config.warmup_epochs),
                             vleed_config.lambda_dis);
        const auto batches =
            minibatches(x.rows(), train_config.batch_size, train_config.shuffle, shuffle_rng);

        LossBreakdown sums;
        double acc_correct = 0.0, acc_total = 0.0;

        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& idx = batches[bi];
            const Tensor xb = gather_batch(x, idx);
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = labels[idx[i]];

            const Tensor eps_r = draw_normal(eps_rng, idx.size(), vleed_config.residual_dim);
            const Tensor eps_c = draw_normal(eps_rng, idx.size(), vleed_config.class_dim);

            if (method == TrainMethod::kVleed) {
                // classifier inner steps on the sampled z_r, encoders detached
                auto [mu_r, sigma_r] = encode_residual(model, xb);
                Tensor z_r_val = mu_r;
                for (std::size_t i = 0; i < z_r_val.size(); ++i)
                    z_r_val[i] += sigma_r[i] * eps_r[i];
                for (std::size_t step = 0; step < train_config.n_clf; ++step) {
                    Tape tc;
                    Tape::Ix probs = classifier_probs_t(tc, model, tc.constant(z_r_val),
                                                        /*trainable=*/true, /*train_mode=*/true,
                                                        dropout_rng);
                    Tape::Ix lclf = loss_classifier_t(tc, probs, yb);
                    if (!std::isfinite(tc.value(lclf).item()))
                        throw NumericError("train_vleed: non-finite classifier loss at epoch " +
                                           std::to_string(epoch) + " batch " + std::to_string(bi));
                    tc.backward(lclf);
                    clf_opt.step(model.clf, tc.grads_for(model.clf));
                    ++trace.clf_steps;
                }
            }

            // VAE step with the classifier frozen
            Tape tv;
            Tape::Ix xc = tv.constant(xb);
            EncoderHeads er = encode_residual_t(tv, model, xc, /*trainable=*/true);
            EncoderHeads ec = encode_class_t(tv, model, xc, /*trainable=*/true);
            Rng unused(0);
            Tape::Ix z_r = reparameterize(tv, er.mu, er.sigma, unused, &eps_r);
            Tape::Ix z_c = reparameterize(tv, ec.mu, ec.sigma, unused, &eps_c);
            Tape::Ix xhat = decode_t(tv, model, z_r, z_c, /*trainable=*/true);
            Tape::Ix l_rec = loss_reconstruction_t(tv, xc, xhat);
            Tape::Ix l_klr = loss_kl_residual_t(tv, er.mu, er.sigma);
            Tape::Ix prior_rows = tv.gather_rows(tv.param(model.vae, prior_idx), yb);
            Tape::Ix l_klc = loss_kl_class_t(tv, ec.mu, ec.sigma, prior_rows);

            double l_dis_val = 0.0, l_clf_val = 0.0;
            Tape::Ix l_dis = -1;
            if (method == TrainMethod::kVleed) {
                Rng no_dropout(0);
                Tape::Ix probs = classifier_probs_t(tv, model, z_r, /*trainable=*/false,
                                                    /*train_mode=*/false, no_dropout);
                l_dis = loss_disentangle_t(tv, probs);
                l_dis_val = tv.value(l_dis).item();
                l_clf_val = tv.value(loss_classifier_t(tv, probs, yb)).item();
                const Tensor& p = tv.value(probs);
                for (std::size_t i = 0; i < p.rows(); ++i) {
                    std::size_t best = 0;
                    for (std::size_t k = 1; k < p.cols(); ++k)
                        if (p(i, k) > p(i, best)) best = k;
                    if (static_cast<int>(best) == yb[i]) acc_correct += 1.0;
                }
                acc_total += static_cast<double>(p.rows());
            } else {
                if (all_classes_twice(yb, vleed_config.num_classes)) {
                    l_dis = tv.moment_loss(z_r, yb, static_cast<int>(vleed_config.num_classes),
                                           static_cast<int>(train_config.moment_order));
                    l_dis_val = tv.value(l_dis).item();
                } else {
                    ++trace.skipped_moment_batches;
                    std::cerr << "[train] warning: batch " << bi << " of epoch " << epoch
                              << " is missing a class; moment term skipped\n";
                }
            }

            Tape::Ix total = tv.add(
                tv.scale(l_rec, vleed_config.lambda_rec),
                tv.add(tv.scale(l_klr,
                                vleed_config.beta_r /
                                    static_cast<double>(vleed_config.residual_dim)),
                       tv.scale(l_klc, vleed_config.beta_c /
                                           static_cast<double>(vleed_config.class_dim))));
            if (l_dis >= 0 && lambda_eff != 0.0)
                total = tv.add(total, tv.scale(l_dis, lambda_eff));

            const LossBreakdown b = combined_loss(
                vleed_config, tv.value(l_rec).item(), tv.value(l_klr).item(),
                tv.value(l_klc).item(), l_dis_val, l_clf_val, lambda_eff);
            if (!std::isfinite(b.total))
                throw NumericError("train_vleed: non-finite loss at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(bi));

            tv.backward(total);
            vae_opt.step(model.vae, tv.grads_for(model.vae));
            ++trace.vae_steps;

            sums.l_rec += b.l_rec;
            sums.l_kl_r += b.l_kl_r;
            sums.l_kl_c += b.l_kl_c;
            sums.l_dis += b.l_dis;
            sums.l_clf += b.l_clf;
            sums.total += b.total;
        }

        EpochRecord rec;
        const double nb = static_cast<double>(batches.size());
        rec.losses = {sums.l_rec / nb, sums.l_kl_r / nb,  sums.l_kl_c / nb,
                      sums.l_dis / nb, sums.l_clf / nb,   sums.total / nb};
        rec.clf_accuracy = acc_total > 0.0 ? acc_correct / acc_total : 0.0;
        rec.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        trace.epochs.push_back(rec);
    }

    return {std::move(model), std::move(trace)};
}

}  // namespace vleed
