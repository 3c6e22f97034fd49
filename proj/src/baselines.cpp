#include "vleed/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vleed/checkpoint.hpp"
#include "vleed/errors.hpp"
#include "vleed/eval.hpp"
#include "vleed/kernels.hpp"
#include "vleed/ops.hpp"
#include "vleed/rng.hpp"

namespace vleed {

namespace {

std::size_t num_classes_of(const std::vector<int>& labels) {
    int mx = -1;
    for (int c : labels) {
        if (c < 0) throw ContractViolation("labels must be non-negative");
        mx = std::max(mx, c);
    }
    return static_cast<std::size_t>(mx) + 1;
}

void require_two_classes(const std::vector<int>& labels) {
    std::vector<bool> seen(num_classes_of(labels), false);
    for (int c : labels) seen[static_cast<std::size_t>(c)] = true;
    std::size_t distinct = 0;
    for (bool s : seen) distinct += s ? 1 : 0;
    if (distinct < 2) throw ConfigError("need at least 2 classes");
}

// Full-batch GD on the bias-free multinomial softmax objective.
struct LinearSoftmax {
    Tensor w;  // d x K

    static LinearSoftmax train(const Tensor& x, const std::vector<int>& labels, std::size_t k,
                               const InlpConfig& cfg) {
        const std::size_t n = x.rows(), d = x.cols();
        LinearSoftmax clf{Tensor::matrix(d, k)};
        const double invn = 1.0 / static_cast<double>(n);
        for (std::size_t step = 0; step < cfg.clf_max_steps; ++step) {
            Tensor probs = softmax_rows(kernels::matmul(x, clf.w));
            for (std::size_t i = 0; i < n; ++i)
                probs(i, static_cast<std::size_t>(labels[i])) -= 1.0;
            Tensor grad = kernels::matmul_tn(x, probs);  // d x K
            double norm2 = 0.0;
            for (std::size_t j = 0; j < grad.size(); ++j) {
                grad[j] *= invn;
                norm2 += grad[j] * grad[j];
            }
            for (std::size_t j = 0; j < grad.size(); ++j) clf.w[j] -= cfg.clf_lr * grad[j];
            if (std::sqrt(norm2) < cfg.clf_grad_tol) break;
        }
        return clf;
    }

    double accuracy(const Tensor& x, const std::vector<int>& labels) const {
        const Tensor logits = kernels::matmul(x, w);
        double correct = 0.0;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols(); ++j)
                if (logits(i, j) > logits(i, best)) best = j;
            if (static_cast<int>(best) == labels[i]) correct += 1.0;
        }
        return correct / static_cast<double>(logits.rows());
    }
};

Tensor projector_from_basis(const std::vector<std::vector<double>>& basis, std::size_t d) {
    Tensor p = Tensor::matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) p(i, i) = 1.0;
    for (const auto& u : basis)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) p(i, j) -= u[i] * u[j];
    return p;
}

// Gram-Schmidt a new direction against the basis; returns false if spanned.
bool add_direction(std::vector<std::vector<double>>& basis, std::vector<double> v) {
    for (const auto& u : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) dot += u[i] * v[i];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * u[i];
    }
    const double norm = l2_norm(v.data(), v.size());
    if (norm < 1e-10) return false;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
    return true;
}

}  // namespace

ProjectionOp inlp_fit(const Tensor& x, const std::vector<int>& labels, const InlpConfig& config) {
    if (x.rows() == 0 || labels.size() != x.rows())
        throw ConfigError("inlp_fit: empty data or label count mismatch");
    require_two_classes(labels);
    const std::size_t d = x.cols();
    bool degenerate = true;
    for (std::size_t i = 1; i < x.rows() && degenerate; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (x(i, j) != x(0, j)) {
                degenerate = false;
                break;
            }
    if (degenerate) throw ConfigError("inlp_fit: all rows identical");

    const std::size_t k = num_classes_of(labels);
    const double majority = majority_baseline(labels);

    std::vector<std::vector<double>> basis;
    Tensor current = x;
    ProjectionOp op;
    op.matrix = projector_from_basis(basis, d);

    for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
        LinearSoftmax clf = LinearSoftmax::train(current, labels, k, config);
        if (clf.accuracy(current, labels) <= majority + config.stop_margin) break;
        bool grew = false;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> dir(d);
            for (std::size_t j = 0; j < d; ++j) dir[j] = clf.w(j, c);
            grew = add_direction(basis, std::move(dir)) || grew;
        }
        ++op.iterations_used;
        if (!grew) break;  // nothing new to remove
        op.matrix = projector_from_basis(basis, d);
        current = kernels::matmul(x, op.matrix);  // P symmetric: X P == X P^T
    }
    return op;
}

Tensor inlp_apply(const ProjectionOp& p, const Tensor& x) {
    if (x.cols() != p.matrix.rows())
        throw ContractViolation("inlp_apply: dimension mismatch");
    Tensor out = kernels::matmul(x, p.matrix);
    for (std::size_t i = 0; i < out.rows(); ++i)
        normalize_inplace(out.data() + i * out.cols(), out.cols());
    return out;
}

PcaResult pca_fit(const Tensor& x) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n < 2) throw ContractViolation("pca_fit: need at least 2 rows");

    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
    for (double& m : mean) m /= static_cast<double>(n);

    Tensor centered = x;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) -= mean[j];
    Tensor cov = kernels::matmul_tn(centered, centered);
    const double scale = 1.0 / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < cov.size(); ++j) cov[j] *= scale;

    // cyclic Jacobi on the symmetric covariance
    Tensor v = Tensor::matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;
    const std::size_t max_sweeps = 100;
    bool converged = false;
    for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += cov(p, q) * cov(p, q);
        if (std::sqrt(off) < 1e-12 * (1.0 + std::abs(cov(0, 0)))) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = cov(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = cov(p, p), aqq = cov(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < d; ++i) {
                    const double aip = cov(i, p), aiq = cov(i, q);
                    cov(i, p) = c * aip - s * aiq;
                    cov(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double api = cov(p, i), aqi = cov(q, i);
                    cov(p, i) = c * api - s * aqi;
                    cov(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    if (!converged) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += cov(p, q) * cov(p, q);
        if (std::sqrt(off) > 1e-8) throw NumericError("pca_fit: Jacobi did not converge");
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return cov(a, a) > cov(b, b); });

    PcaResult res;
    res.basis = Tensor::matrix(d, d);
    res.eigenvalues = Tensor::vector(d);
    for (std::size_t k = 0; k < d; ++k) {
        res.eigenvalues[k] = cov(order[k], order[k]);
        for (std::size_t i = 0; i < d; ++i) res.basis(i, k) = v(i, order[k]);
    }
    return res;
}

// ---- IVE ----

namespace {

double gini_impurity(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

struct TreeTrainer {
    const Tensor& x;
    const std::vector<int>& labels;
    std::size_t num_classes;
    std::size_t max_depth;
    std::size_t features_per_split;
    Rng rng;
    std::vector<double>& importance;  // accumulated weighted impurity decrease
    double total_weight;

    void grow(std::vector<std::size_t>& rows, std::size_t depth) {
        if (depth >= max_depth || rows.size() < 2) return;
        std::vector<std::size_t> counts(num_classes, 0);
        for (std::size_t r : rows) ++counts[static_cast<std::size_t>(labels[r])];
        const double node_gini = gini_impurity(counts, rows.size());
        if (node_gini <= 0.0) return;

        // feature subsample without replacement
        std::vector<std::size_t> feats(x.cols());
        std::iota(feats.begin(), feats.end(), 0);
        for (std::size_t i = 0; i < features_per_split && i + 1 < feats.size(); ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.uniform_index(feats.size() - i));
            std::swap(feats[i], feats[j]);
        }
        feats.resize(std::min(features_per_split, feats.size()));

        double best_gain = 0.0;
        std::size_t best_feat = 0;
        double best_thresh = 0.0;
        std::vector<std::size_t> sorted = rows;
        for (std::size_t f : feats) {
            std::sort(sorted.begin(), sorted.end(),
                      [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
            std::vector<std::size_t> left(num_classes, 0);
            std::vector<std::size_t> right = counts;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                const std::size_t c = static_cast<std::size_t>(labels[sorted[i]]);
                ++left[c];
                --right[c];
                if (x(sorted[i], f) == x(sorted[i + 1], f)) continue;
                const std::size_t nl = i + 1, nr = sorted.size() - nl;
                const double gain =
                    node_gini -
                    (static_cast<double>(nl) * gini_impurity(left, nl) +
                     static_cast<double>(nr) * gini_impurity(right, nr)) /
                        static_cast<double>(rows.size());
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feat = f;
                    best_thresh = 0.5 * (x(sorted[i], f) + x(sorted[i + 1], f));
                }
            }
        }
        if (best_gain <= 0.0) return;

        importance[best_feat] +=
            best_gain * static_cast<double>(rows.size()) / total_weight;
        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows)
            (x(r, best_feat) <= best_thresh ? left_rows : right_rows).push_back(r);
        grow(left_rows, depth + 1);
        grow(right_rows, depth + 1);
    }
};

DimRanking rank_in_space(const Tensor& z, const std::vector<int>& labels,
                         const ForestConfig& config) {
    const std::size_t n = z.rows(), d = z.cols();
    const std::size_t num_classes = num_classes_of(labels);
    const std::size_t fsub =
        config.feature_subsample > 0
            ? config.feature_subsample
            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));

    std::vector<std::vector<double>> per_tree(config.num_trees, std::vector<double>(d, 0.0));
#pragma omp parallel for schedule(static)
    for (long long ti = 0; ti < static_cast<long long>(config.num_trees); ++ti) {
        Rng tree_rng = Rng(config.seed).stream("ive-tree-" + std::to_string(ti));
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i)
            rows[i] = static_cast<std::size_t>(tree_rng.uniform_index(n));  // bootstrap
        TreeTrainer trainer{z,        labels,
                            num_classes, config.max_depth,
                            fsub,     std::move(tree_rng),
                            per_tree[static_cast<std::size_t>(ti)],
                            static_cast<double>(n)};
        trainer.grow(rows, 0);
    }

    DimRanking r;
    r.space = config.space;
    r.importance.assign(d, 0.0);
    for (const auto& imp : per_tree)
        for (std::size_t j = 0; j < d; ++j) r.importance[j] += imp[j];
    double sum = 0.0;
    for (double v : r.importance) sum += v;
    if (sum > 0.0) {
        for (double& v : r.importance) v /= sum;
    } else {
        std::fill(r.importance.begin(), r.importance.end(), 1.0 / static_cast<double>(d));
    }
    r.ordering.resize(d);
    std::iota(r.ordering.begin(), r.ordering.end(), 0);
    std::sort(r.ordering.begin(), r.ordering.end(), [&](std::size_t a, std::size_t b) {
        if (r.importance[a] != r.importance[b]) return r.importance[a] > r.importance[b];
        return a < b;
    });
    return r;
}

}  // namespace

DimRanking ive_rank(const Tensor& x, const std::vector<int>& labels, const ForestConfig& config) {
    if (x.rows() == 0 || labels.size() != x.rows())
        throw ConfigError("ive_rank: empty data or label count mismatch");
    require_two_classes(labels);
    if (config.space == IveSpace::kRaw) return rank_in_space(x, labels, config);
    PcaResult pca = pca_fit(x);
    DimRanking r = rank_in_space(kernels::matmul(x, pca.basis), labels, config);
    r.pca_basis = std::move(pca.basis);
    return r;
}

DimRanking ive_rank_iterative(const Tensor& x, const std::vector<int>& labels,
                              const ForestConfig& config, std::size_t block, std::size_t rounds) {
    if (block == 0 || rounds == 0) return ive_rank(x, labels, config);
    DimRanking first = ive_rank(x, labels, config);
    const std::size_t d = x.cols();
    Tensor z = first.space == IveSpace::kPca ? kernels::matmul(x, first.pca_basis) : x;

    ForestConfig raw_cfg = config;
    raw_cfg.space = IveSpace::kRaw;  // already transformed
    std::vector<std::size_t> chosen;
    std::vector<bool> eliminated(d, false);
    DimRanking current = rank_in_space(z, labels, raw_cfg);
    for (std::size_t round = 0; round < rounds && chosen.size() < d; ++round) {
        std::size_t taken = 0;
        for (std::size_t c : current.ordering) {
            if (taken == block) break;
            if (eliminated[c]) continue;
            chosen.push_back(c);
            eliminated[c] = true;
            ++taken;
        }
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t c : chosen) z(i, c) = 0.0;
        if (chosen.size() >= d) break;
        current = rank_in_space(z, labels, raw_cfg);
    }
    DimRanking out;
    out.space = first.space;
    out.pca_basis = first.pca_basis;
    out.importance = first.importance;
    out.ordering = chosen;
    for (std::size_t c : current.ordering)
        if (!eliminated[c]) out.ordering.push_back(c);
    return out;
}

Tensor ive_apply(const DimRanking& ranking, std::size_t n_e, const Tensor& x) {
    const std::size_t d = ranking.ordering.size();
    if (x.cols() != d) throw ContractViolation("ive_apply: dimension mismatch");
    if (n_e > d) throw ContractViolation("ive_apply: n_e exceeds dimensionality");
    if (n_e == d) throw NumericError("ive_apply: eliminating every dimension leaves zero vectors");

    Tensor z = ranking.space == IveSpace::kPca ? kernels::matmul(x, ranking.pca_basis) : x;
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t k = 0; k < n_e; ++k) z(i, ranking.ordering[k]) = 0.0;
    Tensor out = ranking.space == IveSpace::kPca ? kernels::matmul_nt(z, ranking.pca_basis) : z;
    for (std::size_t i = 0; i < out.rows(); ++i)
        normalize_inplace(out.data() + i * out.cols(), out.cols());
    return out;
}

double moment_loss(const Tensor& z, const std::vector<int>& labels, int max_moment) {
    Tape t;
    return t.value(moment_loss_t(t, t.constant(z), labels,
                                 static_cast<int>(num_classes_of(labels)), max_moment))
        .item();
}

Tape::Ix moment_loss_t(Tape& t, Tape::Ix z, const std::vector<int>& labels, int num_classes,
                       int max_moment) {
    return t.moment_loss(z, labels, num_classes, max_moment);
}

// ---- serialization ----

void save_projection(const std::string& path, const ProjectionOp& p) {
    Container c;
    c.magic = kProjectionMagic;
    c.meta = nlohmann::ordered_json{{"iterations_used", p.iterations_used}};
    c.tensors.emplace_back("matrix", p.matrix);
    write_container(path, c);
}

ProjectionOp load_projection(const std::string& path) {
    Container c = read_container(path, kProjectionMagic);
    ProjectionOp p;
    p.iterations_used = c.meta.at("iterations_used").get<std::size_t>();
    if (c.tensors.size() != 1 || c.tensors[0].first != "matrix")
        throw FormatError(path + ": expected a single 'matrix' tensor");
    p.matrix = c.tensors[0].second;
    if (p.matrix.rank() != 2 || p.matrix.rows() != p.matrix.cols())
        throw FormatError(path + ": projection matrix must be square");
    return p;
}

void save_ranking(const std::string& path, const DimRanking& r) {
    Container c;
    c.magic = kRankingMagic;
    c.meta = nlohmann::ordered_json{
        {"space", r.space == IveSpace::kPca ? "pca" : "raw"},
        {"ordering", r.ordering},
    };
    Tensor imp = Tensor::vector(r.importance.size());
    for (std::size_t i = 0; i < r.importance.size(); ++i) imp[i] = r.importance[i];
    c.tensors.emplace_back("importance", std::move(imp));
    if (r.space == IveSpace::kPca) c.tensors.emplace_back("pca_basis", r.pca_basis);
    write_container(path, c);
}

DimRanking load_ranking(const std::string& path) {
    Container c = read_container(path, kRankingMagic);
    DimRanking r;
    const std::string space = c.meta.at("space").get<std::string>();
    if (space == "pca")
        r.space = IveSpace::kPca;
    else if (space == "raw")
        r.space = IveSpace::kRaw;
    else
        throw FormatError(path + ": unknown space '" + space + "'");
    r.ordering = c.meta.at("ordering").get<std::vector<std::size_t>>();
    bool have_importance = false;
    for (const auto& [name, t] : c.tensors) {
        if (name == "importance") {
            r.importance.assign(t.raw().begin(), t.raw().end());
            have_importance = true;
        } else if (name == "pca_basis") {
            r.pca_basis = t;
        }
    }
    if (!have_importance) throw FormatError(path + ": missing importance tensor");
    if (r.space == IveSpace::kPca && r.pca_basis.empty())
        throw FormatError(path + ": pca space requires pca_basis tensor");
    if (r.ordering.size() != r.importance.size())
        throw FormatError(path + ": ordering/importance size mismatch");
    return r;
}

}  // namespace vleed
