#include "vleed/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iostream>

#include "vleed/errors.hpp"
#include "vleed/kernels.hpp"
#include "vleed/model.hpp"
#include "vleed/ops.hpp"
#include "vleed/training.hpp"

namespace vleed {

const char* probe_kind_name(ProbeKind k) {
    switch (k) {
        case ProbeKind::kLR: return "lr";
        case ProbeKind::kMlpS: return "mlp_s";
        case ProbeKind::kMlpD: return "mlp_d";
    }
    return "?";
}

ProbeKind probe_kind_from_name(const std::string& name) {
    if (name == "lr") return ProbeKind::kLR;
    if (name == "mlp_s") return ProbeKind::kMlpS;
    if (name == "mlp_d") return ProbeKind::kMlpD;
    throw ConfigError("unknown probe kind '" + name + "' (expected lr, mlp_s or mlp_d)");
}

MlpSpec probe_spec(ProbeKind kind, std::size_t input_dim, std::size_t num_classes) {
    MlpSpec s;
    switch (kind) {
        case ProbeKind::kLR:
            s.layer_widths = {input_dim, num_classes};
            s.activation = Activation::kIdentity;
            break;
        case ProbeKind::kMlpS:
            s.layer_widths = {input_dim, 512, num_classes};
            s.activation = Activation::kLeakyRelu;
            break;
        case ProbeKind::kMlpD:
            s.layer_widths = {input_dim, 512, 512, 512, 512, num_classes};
            s.activation = Activation::kLeakyRelu;
            s.dropout_rate = 0.2;
            break;
    }
    return s;
}

MlpSpec Probe::spec() const { return probe_spec(kind, input_dim, num_classes); }

Probe train_probe(ProbeKind kind, const Tensor& z_train, const std::vector<int>& labels,
                  const ProbeConfig& config) {
    if (z_train.rows() == 0 || labels.size() != z_train.rows())
        throw ConfigError("train_probe: empty data or label count mismatch");
    int max_label = 0;
    for (int c : labels) {
        if (c < 0) throw ConfigError("train_probe: negative label");
        max_label = std::max(max_label, c);
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(max_label) + 1, 0);
    for (int c : labels) ++counts[static_cast<std::size_t>(c)];
    std::size_t distinct = 0;
    for (std::size_t c : counts) distinct += c > 0 ? 1 : 0;
    if (distinct < 2) throw ConfigError("train_probe: need at least 2 classes");

    Probe probe;
    probe.kind = kind;
    probe.input_dim = z_train.cols();
    probe.num_classes = static_cast<std::size_t>(max_label) + 1;
    const MlpSpec spec = probe.spec();

    Rng master(config.seed);
    Rng init_rng = master.stream("probe-init");
    Rng shuffle_rng = master.stream("probe-shuffle");
    Rng dropout_rng = master.stream("probe-dropout");
    init_mlp_params(spec, "probe", probe.params, init_rng);
    AdamState opt(probe.params, config.adam);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto batches = minibatches(z_train.rows(), config.batch_size, true, shuffle_rng);
        for (const auto& idx : batches) {
            Tensor xb = Tensor::matrix(idx.size(), z_train.cols());
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                yb[i] = labels[idx[i]];
                for (std::size_t j = 0; j < z_train.cols(); ++j) xb(i, j) = z_train(idx[i], j);
            }
            Tape t;
            MlpTapeParams p = bind_mlp(t, probe.params, spec, "probe", /*trainable=*/true);
            Tape::Ix logits =
                mlp_forward(t, spec, p, t.constant(std::move(xb)), /*train_mode=*/true,
                            dropout_rng);
            Tape::Ix loss = loss_classifier_t(t, t.softmax(logits), yb);
            t.backward(loss);
            opt.step(probe.params, t.grads_for(probe.params));
        }
    }
    return probe;
}

double probe_accuracy(const Probe& probe, const Tensor& z_eval, const std::vector<int>& labels) {
    if (labels.size() != z_eval.rows())
        throw ContractViolation("probe_accuracy: label count != rows");
    if (z_eval.cols() != probe.input_dim)
        throw ContractViolation("probe_accuracy: input width mismatch");
    const Tensor logits = mlp_infer(probe.spec(), probe.params, "probe", z_eval);
    double correct = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        std::size_t best = 0;  // strict > keeps the lowest index on ties
        for (std::size_t k = 1; k < logits.cols(); ++k)
            if (logits(i, k) > logits(i, best)) best = k;
        if (static_cast<int>(best) == labels[i]) correct += 1.0;
    }
    return correct / static_cast<double>(logits.rows());
}

double majority_baseline(const std::vector<int>& labels) {
    if (labels.empty()) throw ContractViolation("majority_baseline: empty labels");
    std::map<int, std::size_t> counts;
    for (int c : labels) ++counts[c];
    std::size_t best = 0;
    for (const auto& [c, n] : counts) best = std::max(best, n);
    return static_cast<double>(best) / static_cast<double>(labels.size());
}

ScoreSet verification_scores(const Tensor& embeddings, const PairList& pairs) {
    std::vector<std::size_t> ra, rb;
    ra.reserve(pairs.pairs.size());
    rb.reserve(pairs.pairs.size());
    for (const Pair& p : pairs.pairs) {
        if (p.a >= embeddings.rows() || p.b >= embeddings.rows())
            throw ContractViolation("verification_scores: pair index out of range");
        ra.push_back(p.a);
        rb.push_back(p.b);
    }
    std::vector<double> dots(pairs.pairs.size());
    kernels::pair_dots(embeddings.data(), embeddings.cols(), ra.data(), rb.data(), dots.data(),
                       dots.size());
    ScoreSet out;
    for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
        if (pairs.pairs[i].genuine) {
            out.genuine.push_back(dots[i]);
            out.genuine_group.push_back(pairs.pairs[i].group);
        } else {
            out.impostor.push_back(dots[i]);
            out.impostor_group.push_back(pairs.pairs[i].group);
        }
    }
    return out;
}

namespace {

double frac_at_least(const std::vector<double>& sorted_asc, double t) {
    const auto it = std::lower_bound(sorted_asc.begin(), sorted_asc.end(), t);
    return static_cast<double>(sorted_asc.end() - it) / static_cast<double>(sorted_asc.size());
}

}  // namespace

TmrResult tmr_at_fmr(const ScoreSet& scores, double fmr_target) {
    if (!(fmr_target > 0.0 && fmr_target < 1.0))
        throw ContractViolation("tmr_at_fmr: fmr_target must be in (0,1)");
    if (scores.impostor.empty() || scores.genuine.empty())
        throw ContractViolation("tmr_at_fmr: both score lists must be non-empty");
    std::vector<double> imp = scores.impostor;
    std::sort(imp.begin(), imp.end());
    std::vector<double> gen = scores.genuine;
    std::sort(gen.begin(), gen.end());

    std::vector<double> candidates = imp;
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    // one point just above the maximum, where the impostor FMR reaches 0
    candidates.push_back(std::nextafter(imp.back(), std::numeric_limits<double>::infinity()));

    TmrResult r;
    r.quantized =
        static_cast<double>(imp.size()) < 1.0 / fmr_target;
    for (double t : candidates) {
        if (frac_at_least(imp, t) <= fmr_target) {
            r.threshold = t;
            r.tmr = frac_at_least(gen, t);
            return r;
        }
    }
    // unreachable: the sentinel always satisfies the target
    r.threshold = candidates.back();
    r.tmr = frac_at_least(gen, r.threshold);
    return r;
}

RocCurve roc_points(const ScoreSet& scores) {
    if (scores.impostor.empty() || scores.genuine.empty())
        throw ContractViolation("roc_points: both score lists must be non-empty");
    std::vector<double> imp = scores.impostor;
    std::sort(imp.begin(), imp.end());
    std::vector<double> gen = scores.genuine;
    std::sort(gen.begin(), gen.end());

    std::vector<double> grid;
    grid.reserve(imp.size() + gen.size() + 2);
    grid.insert(grid.end(), imp.begin(), imp.end());
    grid.insert(grid.end(), gen.begin(), gen.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    grid.push_back(grid.back() + 1.0);  // (0,0) endpoint

    RocCurve curve;
    curve.points.reserve(grid.size());
    for (auto it = grid.rbegin(); it != grid.rend(); ++it)
        curve.points.push_back({frac_at_least(imp, *it), frac_at_least(gen, *it), *it});
    // ensure a (1,1) anchor for the trapezoid
    if (curve.points.back().fmr < 1.0 || curve.points.back().tmr < 1.0)
        curve.points.push_back({1.0, 1.0, grid.front() - 1.0});

    double auc = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& p0 = curve.points[i - 1];
        const auto& p1 = curve.points[i];
        auc += (p1.fmr - p0.fmr) * (p1.tmr + p0.tmr) * 0.5;
    }
    curve.auc = auc;
    return curve;
}

EerResult eer_threshold(const ScoreSet& scores) {
    if (scores.impostor.empty() || scores.genuine.empty())
        throw ContractViolation("eer_threshold: both score lists must be non-empty");
    std::vector<double> imp = scores.impostor;
    std::sort(imp.begin(), imp.end());
    std::vector<double> gen = scores.genuine;
    std::sort(gen.begin(), gen.end());

    std::vector<double> grid;
    grid.insert(grid.end(), imp.begin(), imp.end());
    grid.insert(grid.end(), gen.begin(), gen.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    // sentinels so the sign change is always bracketed
    grid.insert(grid.begin(), grid.front() - 1.0);
    grid.push_back(grid.back() + 1.0);

    auto fmr = [&](double t) { return frac_at_least(imp, t); };
    auto fnmr = [&](double t) { return 1.0 - frac_at_least(gen, t); };

    EerResult best;
    double best_gap = std::numeric_limits<double>::infinity();
    auto consider = [&](double t, double f, double n) {
        const double gap = std::abs(f - n);
        if (gap < best_gap) {
            best_gap = gap;
            best.threshold = t;
            best.eer = 0.5 * (f + n);
        }
    };

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double f = fmr(grid[i]);
        const double n = fnmr(grid[i]);
        consider(grid[i], f, n);
        if (i + 1 < grid.size()) {
            // linear interpolation on the segment; check its crossing point
            const double f1 = fmr(grid[i + 1]);
            const double n1 = fnmr(grid[i + 1]);
            const double d0 = f - n;
            const double d1 = f1 - n1;
            if ((d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0)) {
                const double w = d0 / (d0 - d1);
                const double t = grid[i] + w * (grid[i + 1] - grid[i]);
                const double fi = f + w * (f1 - f);
                const double ni = n + w * (n1 - n);
                consider(t, fi, ni);
            }
        }
    }
    return best;
}

std::map<std::string, double> group_fmr(const ScoreSet& scores, double threshold) {
    if (scores.impostor_group.size() != scores.impostor.size())
        throw ContractViolation("group_fmr: group tags not aligned with impostor scores");
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // group -> (>=t, total)
    for (std::size_t i = 0; i < scores.impostor.size(); ++i) {
        const std::string& g = scores.impostor_group[i];
        if (g.empty()) continue;  // cross-group comparison
        auto& c = counts[g];
        if (scores.impostor[i] >= threshold) ++c.first;
        ++c.second;
    }
    std::map<std::string, double> out;
    for (const auto& [g, c] : counts) {
        if (c.second == 0) {
            std::cerr << "[eval] warning: group " << g << " has no impostor scores; omitted\n";
            continue;
        }
        out[g] = static_cast<double>(c.first) / static_cast<double>(c.second);
    }
    return out;
}

double gini_fmr(const std::vector<double>& per_group_fmr) {
    const std::size_t n = per_group_fmr.size();
    if (n < 2) throw ContractViolation("gini_fmr: need at least 2 groups");
    double mean = 0.0;
    for (double f : per_group_fmr) {
        if (f < 0.0) throw ContractViolation("gini_fmr: negative FMR");
        mean += f;
    }
    mean /= static_cast<double>(n);
    if (mean == 0.0) return 0.0;
    double sum = 0.0;
    for (double a : per_group_fmr)
        for (double b : per_group_fmr) sum += std::abs(a - b);
    const double g = static_cast<double>(n) / static_cast<double>(n - 1) * sum /
                     (2.0 * static_cast<double>(n) * static_cast<double>(n) * mean);
    return std::clamp(g, 0.0, 1.0);
}

FairnessReport fairness_at(const ScoreSet& scores, double fmr_target) {
    FairnessReport rep;
    rep.system_fmr_target = fmr_target;
    rep.threshold_used = tmr_at_fmr(scores, fmr_target).threshold;
    rep.per_group_fmr = group_fmr(scores, rep.threshold_used);
    if (rep.per_group_fmr.size() >= 2) {
        std::vector<double> fmrs;
        for (const auto& [g, f] : rep.per_group_fmr) fmrs.push_back(f);
        rep.gini = gini_fmr(fmrs);
    }
    return rep;
}

}  // namespace vleed
