#include "vleed/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vleed/errors.hpp"
#include "vleed/kernels.hpp"

namespace vleed {

std::size_t Params::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    throw ContractViolation("Params: no parameter named '" + name + "'");
}

Tape::Ix Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Ix>(nodes_.size() - 1);
}

const Tensor& Tape::value(Ix i) const {
    const Node& n = at(i);
    return n.ext ? *n.ext : n.val;
}

Tensor Tape::grad(Ix i) const {
    const Node& n = at(i);
    if (!n.grad.empty()) return n.grad;
    Tensor z(value(i).shape());
    return z;
}

std::vector<Tensor> Tape::grads_for(const Params& group) const {
    std::vector<Tensor> out;
    out.reserve(group.count());
    for (const Tensor& t : group.values) out.emplace_back(t.shape());
    for (const Node& n : nodes_) {
        if (n.op == Op::kLeaf && n.group == &group && !n.grad.empty()) {
            Tensor& dst = out[n.pindex];
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad[j];
        }
    }
    return out;
}

Tape::Ix Tape::constant(Tensor value) {
    Node n;
    n.op = Op::kLeaf;
    n.val = std::move(value);
    n.needs_grad = false;
    return push(std::move(n));
}

Tape::Ix Tape::param(const Params& group, std::size_t index) {
    if (index >= group.count()) throw ContractViolation("Tape::param: index out of range");
    Node n;
    n.op = Op::kLeaf;
    n.ext = &group.values[index];
    n.needs_grad = true;
    n.group = &group;
    n.pindex = index;
    n.ver = group.version;
    return push(std::move(n));
}

std::vector<Tape::Ix> Tape::params(const Params& group) {
    std::vector<Ix> ids;
    ids.reserve(group.count());
    for (std::size_t i = 0; i < group.count(); ++i) ids.push_back(param(group, i));
    return ids;
}

namespace {

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

}  // namespace

Tape::Ix Tape::add(Ix a, Ix b) {
    require_same_shape(value(a), value(b), "add");
    Node n;
    n.op = Op::kAdd;
    n.a = a;
    n.b = b;
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.val = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] += vb[i];
    return push(std::move(n));
}

Tape::Ix Tape::sub(Ix a, Ix b) {
    require_same_shape(value(a), value(b), "sub");
    Node n;
    n.op = Op::kSub;
    n.a = a;
    n.b = b;
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.val = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] -= vb[i];
    return push(std::move(n));
}

Tape::Ix Tape::mul(Ix a, Ix b) {
    require_same_shape(value(a), value(b), "mul");
    Node n;
    n.op = Op::kMul;
    n.a = a;
    n.b = b;
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.val = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] *= vb[i];
    return push(std::move(n));
}

Tape::Ix Tape::add_row(Ix a, Ix bias) {
    const Tensor& va = value(a);
    const Tensor& vb = value(bias);
    if (vb.size() != va.cols())
        throw ContractViolation("add_row: bias length " + std::to_string(vb.size()) +
                                " != cols " + std::to_string(va.cols()));
    Node n;
    n.op = Op::kAddRow;
    n.a = a;
    n.b = bias;
    n.needs_grad = at(a).needs_grad || at(bias).needs_grad;
    n.val = va;
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < va.cols(); ++j) n.val(i, j) += vb[j];
    return push(std::move(n));
}

Tape::Ix Tape::scale(Ix a, double c) {
    Node n;
    n.op = Op::kScale;
    n.a = a;
    n.c0 = c;
    n.needs_grad = at(a).needs_grad;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] *= c;
    return push(std::move(n));
}

Tape::Ix Tape::add_scalar(Ix a, double c) {
    Node n;
    n.op = Op::kAddScalar;
    n.a = a;
    n.c0 = c;
    n.needs_grad = at(a).needs_grad;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] += c;
    return push(std::move(n));
}

Tape::Ix Tape::exp(Ix a) {
    Node n;
    n.op = Op::kExp;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::exp(n.val[i]);
    return push(std::move(n));
}

Tape::Ix Tape::log(Ix a) {
    Node n;
    n.op = Op::kLog;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::log(n.val[i]);
    return push(std::move(n));
}

Tape::Ix Tape::xlogx(Ix a) {
    Node n;
    n.op = Op::kXLogX;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) {
        const double x = n.val[i];
        n.val[i] = x > 0.0 ? x * std::log(x) : 0.0;
    }
    return push(std::move(n));
}

Tape::Ix Tape::clamp(Ix a, double lo, double hi) {
    if (lo > hi) throw ContractViolation("clamp: lo > hi");
    Node n;
    n.op = Op::kClamp;
    n.a = a;
    n.c0 = lo;
    n.c1 = hi;
    n.needs_grad = at(a).needs_grad;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::clamp(n.val[i], lo, hi);
    return push(std::move(n));
}

Tape::Ix Tape::matmul(Ix a, Ix b) {
    Node n;
    n.op = Op::kMatMul;
    n.a = a;
    n.b = b;
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.val = kernels::matmul(value(a), value(b));
    return push(std::move(n));
}

Tape::Ix Tape::concat_cols(Ix a, Ix b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.rows() != vb.rows()) throw ContractViolation("concat_cols: row count mismatch");
    Node n;
    n.op = Op::kConcatCols;
    n.a = a;
    n.b = b;
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.val = Tensor::matrix(va.rows(), va.cols() + vb.cols());
    for (std::size_t i = 0; i < va.rows(); ++i) {
        for (std::size_t j = 0; j < va.cols(); ++j) n.val(i, j) = va(i, j);
        for (std::size_t j = 0; j < vb.cols(); ++j) n.val(i, va.cols() + j) = vb(i, j);
    }
    return push(std::move(n));
}

Tape::Ix Tape::prelu(Ix a, Ix slope) {
    if (value(slope).size() != 1) throw ContractViolation("prelu: slope must be scalar");
    Node n;
    n.op = Op::kPrelu;
    n.a = a;
    n.b = slope;
    n.needs_grad = at(a).needs_grad || at(slope).needs_grad;
    const double s = value(slope)[0];
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i)
        if (n.val[i] < 0.0) n.val[i] *= s;
    return push(std::move(n));
}

Tape::Ix Tape::leaky_relu(Ix a, double slope) {
    Node n;
    n.op = Op::kLeakyRelu;
    n.a = a;
    n.c0 = slope;
    n.needs_grad = at(a).needs_grad;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i)
        if (n.val[i] < 0.0) n.val[i] *= slope;
    return push(std::move(n));
}

Tape::Ix Tape::dropout(Ix a, Tensor keep_mask) {
    require_same_shape(value(a), keep_mask, "dropout");
    Node n;
    n.op = Op::kDropout;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] *= keep_mask[i];
    n.aux = std::move(keep_mask);
    return push(std::move(n));
}

Tape::Ix Tape::row_normalize(Ix a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::kRowNormalize;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    n.val = va;
    n.aux = Tensor::vector(va.rows());  // row norms, reused in backward
    for (std::size_t i = 0; i < va.rows(); ++i) {
        double* row = n.val.data() + i * va.cols();
        const double r = l2_norm(row, va.cols());
        if (r < 1e-12)
            throw NumericError("row_normalize: row " + std::to_string(i) + " has norm < 1e-12");
        n.aux[i] = r;
        for (std::size_t j = 0; j < va.cols(); ++j) row[j] /= r;
    }
    return push(std::move(n));
}

Tape::Ix Tape::softmax(Ix a) {
    const Tensor& va = value(a);
    require_finite(va, "softmax");
    Node n;
    n.op = Op::kSoftmax;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    n.val = va;
    const std::size_t m = va.rows(), k = va.cols();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = n.val.data() + i * k;
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            // floor keeps probabilities strictly positive at extreme logits
            row[j] = std::max(std::exp(row[j] - mx), std::numeric_limits<double>::min());
            sum += row[j];
        }
        for (std::size_t j = 0; j < k; ++j) row[j] /= sum;
    }
    return push(std::move(n));
}

Tape::Ix Tape::gather_labels(Ix probs, std::vector<int> labels) {
    const Tensor& vp = value(probs);
    if (labels.size() != vp.rows()) throw ContractViolation("gather_labels: label count != rows");
    for (int c : labels)
        if (c < 0 || static_cast<std::size_t>(c) >= vp.cols())
            throw ContractViolation("gather_labels: label out of range");
    Node n;
    n.op = Op::kGatherLabels;
    n.a = probs;
    n.needs_grad = at(probs).needs_grad;
    n.val = Tensor::matrix(vp.rows(), 1);
    for (std::size_t i = 0; i < vp.rows(); ++i)
        n.val[i] = vp(i, static_cast<std::size_t>(labels[i]));
    n.labels = std::move(labels);
    return push(std::move(n));
}

Tape::Ix Tape::gather_rows(Ix table, std::vector<int> labels) {
    const Tensor& vt = value(table);
    for (int c : labels)
        if (c < 0 || static_cast<std::size_t>(c) >= vt.rows())
            throw ContractViolation("gather_rows: label out of range");
    Node n;
    n.op = Op::kGatherRows;
    n.a = table;
    n.needs_grad = at(table).needs_grad;
    n.val = Tensor::matrix(labels.size(), vt.cols());
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < vt.cols(); ++j)
            n.val(i, j) = vt(static_cast<std::size_t>(labels[i]), j);
    n.labels = std::move(labels);
    return push(std::move(n));
}

Tape::Ix Tape::moment_loss(Ix z, std::vector<int> labels, int num_classes, int max_moment) {
    const Tensor& vz = value(z);
    if (num_classes < 2) throw ContractViolation("moment_loss: need >= 2 classes");
    if (max_moment < 1) throw ContractViolation("moment_loss: max_moment must be >= 1");
    if (labels.size() != vz.rows()) throw ContractViolation("moment_loss: label count != rows");
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int c : labels) {
        if (c < 0 || c >= num_classes) throw ContractViolation("moment_loss: label out of range");
        ++counts[static_cast<std::size_t>(c)];
    }
    for (std::size_t k = 0; k < counts.size(); ++k)
        if (counts[k] < 2)
            throw ContractViolation("moment_loss: class " + std::to_string(k) +
                                    " has fewer than 2 samples in batch");

    const std::size_t d = vz.cols(), kk = static_cast<std::size_t>(num_classes);
    const std::size_t mm = static_cast<std::size_t>(max_moment);
    // mu[m][k][j]: m-th raw per-coordinate sample moment of class k
    Tensor mu({mm, kk, d}, 0.0);
    for (std::size_t i = 0; i < vz.rows(); ++i) {
        const std::size_t c = static_cast<std::size_t>(labels[i]);
        for (std::size_t j = 0; j < d; ++j) {
            double p = vz(i, j);
            for (std::size_t m = 0; m < mm; ++m) {
                mu[(m * kk + c) * d + j] += p;
                p *= vz(i, j);
            }
        }
    }
    for (std::size_t m = 0; m < mm; ++m)
        for (std::size_t k = 0; k < kk; ++k)
            for (std::size_t j = 0; j < d; ++j)
                mu[(m * kk + k) * d + j] /= static_cast<double>(counts[k]);

    double loss = 0.0;
    for (std::size_t m = 0; m < mm; ++m)
        for (std::size_t k = 0; k < kk; ++k)
            for (std::size_t k2 = k + 1; k2 < kk; ++k2)
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = mu[(m * kk + k) * d + j] - mu[(m * kk + k2) * d + j];
                    loss += diff * diff;
                }

    Node n;
    n.op = Op::kMomentLoss;
    n.a = z;
    n.needs_grad = at(z).needs_grad;
    n.val = Tensor::scalar(loss);
    n.aux = std::move(mu);
    n.labels = std::move(labels);
    n.k0 = num_classes;
    n.k1 = max_moment;
    return push(std::move(n));
}

Tape::Ix Tape::sum_cols(Ix a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::kSumCols;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    n.val = Tensor::matrix(va.rows(), 1);
    for (std::size_t i = 0; i < va.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < va.cols(); ++j) s += va(i, j);
        n.val[i] = s;
    }
    return push(std::move(n));
}

Tape::Ix Tape::sum_all(Ix a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::kSumAll;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    double s = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i];
    n.val = Tensor::scalar(s);
    return push(std::move(n));
}

Tape::Ix Tape::mean_all(Ix a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::kMeanAll;
    n.a = a;
    n.needs_grad = at(a).needs_grad;
    double s = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i];
    n.val = Tensor::scalar(s / static_cast<double>(va.size()));
    return push(std::move(n));
}

void Tape::accum(Ix i, const Tensor& g) {
    Node& n = at(i);
    if (!n.needs_grad) return;
    if (n.grad.empty()) n.grad = zeros_like(value(i));
    for (std::size_t j = 0; j < g.size(); ++j) n.grad[j] += g[j];
}

void Tape::backward(Ix loss, double seed) {
    if (loss < 0 || static_cast<std::size_t>(loss) >= nodes_.size())
        throw ContractViolation("backward: bad node id");
    if (value(loss).size() != 1) throw ContractViolation("backward: loss is not scalar");
    for (const Node& n : nodes_)
        if (n.op == Op::kLeaf && n.group != nullptr && n.group->version != n.ver)
            throw StaleTapeError("backward: parameters mutated after forward recording");
    if (ran_backward_)
        for (Node& n : nodes_) n.grad = Tensor();
    ran_backward_ = true;

    if (!at(loss).needs_grad) return;  // nothing reaches a parameter
    accum(loss, Tensor::scalar(seed));
    for (Ix i = loss; i >= 0; --i) {
        Node& n = at(i);
        if (!n.needs_grad || n.grad.empty()) continue;
        backward_node(i);
    }
}

void Tape::backward_node(Ix i) {
    Node& n = at(i);
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::kLeaf:
            break;
        case Op::kAdd:
            accum(n.a, g);
            accum(n.b, g);
            break;
        case Op::kSub: {
            accum(n.a, g);
            if (at(n.b).needs_grad) {
                Tensor gb = g;
                for (std::size_t j = 0; j < gb.size(); ++j) gb[j] = -gb[j];
                accum(n.b, gb);
            }
            break;
        }
        case Op::kMul: {
            if (at(n.a).needs_grad) {
                Tensor ga = g;
                const Tensor& vb = value(n.b);
                for (std::size_t j = 0; j < ga.size(); ++j) ga[j] *= vb[j];
                accum(n.a, ga);
            }
            if (at(n.b).needs_grad) {
                Tensor gb = g;
                const Tensor& va = value(n.a);
                for (std::size_t j = 0; j < gb.size(); ++j) gb[j] *= va[j];
                accum(n.b, gb);
            }
            break;
        }
        case Op::kAddRow: {
            accum(n.a, g);
            if (at(n.b).needs_grad) {
                const std::size_t m = g.rows(), c = g.cols();
                Tensor gb(value(n.b).shape());
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t j = 0; j < c; ++j) gb[j] += g(r, j);
                accum(n.b, gb);
            }
            break;
        }
        case Op::kScale: {
            Tensor ga = g;
            for (std::size_t j = 0; j < ga.size(); ++j) ga[j] *= n.c0;
            accum(n.a, ga);
            break;
        }
        case Op::kAddScalar:
            accum(n.a, g);
            break;
        case Op::kExp: {
            Tensor ga = g;
            for (std::size_t j = 0; j < ga.size(); ++j) ga[j] *= n.val[j];
            accum(n.a, ga);
            break;
        }
        case Op::kLog: {
            Tensor ga = g;
            const Tensor& x = value(n.a);
            for (std::size_t j = 0; j < ga.size(); ++j) ga[j] /= x[j];
            accum(n.a, ga);
            break;
        }
        case Op::kXLogX: {
            Tensor ga = g;
            const Tensor& x = value(n.a);
            for (std::size_t j = 0; j < ga.size(); ++j)
                ga[j] = x[j] > 0.0 ? ga[j] * (std::log(x[j]) + 1.0) : 0.0;
            accum(n.a, ga);
            break;
        }
        case Op::kClamp: {
            Tensor ga = g;
            const Tensor& x = value(n.a);
            for (std::size_t j = 0; j < ga.size(); ++j)
                if (x[j] < n.c0 || x[j] > n.c1) ga[j] = 0.0;
            accum(n.a, ga);
            break;
        }
        case Op::kMatMul: {
            const Tensor& va = value(n.a);
            const Tensor& vb = value(n.b);
            if (at(n.a).needs_grad) accum(n.a, kernels::matmul_nt(g, vb));
            if (at(n.b).needs_grad) accum(n.b, kernels::matmul_tn(va, g));
            break;
        }
        case Op::kConcatCols: {
            const std::size_t ca = value(n.a).cols(), cb = value(n.b).cols();
            const std::size_t m = g.rows();
            if (at(n.a).needs_grad) {
                Tensor ga = Tensor::matrix(m, ca);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t j = 0; j < ca; ++j) ga(r, j) = g(r, j);
                accum(n.a, ga);
            }
            if (at(n.b).needs_grad) {
                Tensor gb = Tensor::matrix(m, cb);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t j = 0; j < cb; ++j) gb(r, j) = g(r, ca + j);
                accum(n.b, gb);
            }
            break;
        }
        case Op::kPrelu: {
            const Tensor& x = value(n.a);
            const double s = value(n.b)[0];
            if (at(n.a).needs_grad) {
                Tensor ga = g;
                for (std::size_t j = 0; j < ga.size(); ++j)
                    if (x[j] < 0.0) ga[j] *= s;
                accum(n.a, ga);
            }
            if (at(n.b).needs_grad) {
                double gs = 0.0;
                for (std::size_t j = 0; j < x.size(); ++j)
                    if (x[j] < 0.0) gs += g[j] * x[j];
                accum(n.b, Tensor::scalar(gs));
            }
            break;
        }
        case Op::kLeakyRelu: {
            Tensor ga = g;
            const Tensor& x = value(n.a);
            for (std::size_t j = 0; j < ga.size(); ++j)
                if (x[j] < 0.0) ga[j] *= n.c0;
            accum(n.a, ga);
            break;
        }
        case Op::kDropout: {
            Tensor ga = g;
            for (std::size_t j = 0; j < ga.size(); ++j) ga[j] *= n.aux[j];
            accum(n.a, ga);
            break;
        }
        case Op::kRowNormalize: {
            // y = x/r; dx = (g - y * <g,y>) / r per row
            const std::size_t m = n.val.rows(), c = n.val.cols();
            Tensor ga = Tensor::matrix(m, c);
            for (std::size_t r = 0; r < m; ++r) {
                const double* y = n.val.data() + r * c;
                const double* gr = g.data() + r * c;
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += gr[j] * y[j];
                for (std::size_t j = 0; j < c; ++j)
                    ga(r, j) = (gr[j] - y[j] * dot) / n.aux[r];
            }
            accum(n.a, ga);
            break;
        }
        case Op::kSoftmax: {
            // dx_j = p_j (g_j - <g,p>) per row
            const std::size_t m = n.val.rows(), c = n.val.cols();
            Tensor ga = Tensor::matrix(m, c);
            for (std::size_t r = 0; r < m; ++r) {
                const double* p = n.val.data() + r * c;
                const double* gr = g.data() + r * c;
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += gr[j] * p[j];
                for (std::size_t j = 0; j < c; ++j) ga(r, j) = p[j] * (gr[j] - dot);
            }
            accum(n.a, ga);
            break;
        }
        case Op::kGatherLabels: {
            const Tensor& vp = value(n.a);
            Tensor ga(vp.shape());
            for (std::size_t r = 0; r < vp.rows(); ++r)
                ga(r, static_cast<std::size_t>(n.labels[r])) += g[r];
            accum(n.a, ga);
            break;
        }
        case Op::kGatherRows: {
            const Tensor& vt = value(n.a);
            Tensor ga(vt.shape());
            for (std::size_t r = 0; r < n.labels.size(); ++r)
                for (std::size_t j = 0; j < vt.cols(); ++j)
                    ga(static_cast<std::size_t>(n.labels[r]), j) += g(r, j);
            accum(n.a, ga);
            break;
        }
        case Op::kMomentLoss: {
            const Tensor& z = value(n.a);
            const std::size_t kk = static_cast<std::size_t>(n.k0);
            const std::size_t mm = static_cast<std::size_t>(n.k1);
            const std::size_t d = z.cols();
            const double gs = g[0];
            std::vector<double> counts(kk, 0.0);
            for (int c : n.labels) counts[static_cast<std::size_t>(c)] += 1.0;
            // s[m][k][j] = sum_{k' != k} 2 (mu_mkj - mu_mk'j)
            Tensor s({mm, kk, d}, 0.0);
            for (std::size_t m = 0; m < mm; ++m)
                for (std::size_t k = 0; k < kk; ++k)
                    for (std::size_t k2 = 0; k2 < kk; ++k2) {
                        if (k == k2) continue;
                        for (std::size_t j = 0; j < d; ++j)
                            s[(m * kk + k) * d + j] +=
                                2.0 * (n.aux[(m * kk + k) * d + j] - n.aux[(m * kk + k2) * d + j]);
                    }
            Tensor ga(z.shape());
            for (std::size_t i = 0; i < z.rows(); ++i) {
                const std::size_t c = static_cast<std::size_t>(n.labels[i]);
                for (std::size_t j = 0; j < d; ++j) {
                    double p = 1.0;  // z^{m-1}
                    double acc = 0.0;
                    for (std::size_t m = 0; m < mm; ++m) {
                        acc += s[(m * kk + c) * d + j] * static_cast<double>(m + 1) * p;
                        p *= z(i, j);
                    }
                    ga(i, j) = gs * acc / counts[c];
                }
            }
            accum(n.a, ga);
            break;
        }
        case Op::kSumCols: {
            const Tensor& va = value(n.a);
            Tensor ga(va.shape());
            for (std::size_t r = 0; r < va.rows(); ++r)
                for (std::size_t j = 0; j < va.cols(); ++j) ga(r, j) = g[r];
            accum(n.a, ga);
            break;
        }
        case Op::kSumAll: {
            const Tensor& va = value(n.a);
            Tensor ga(va.shape());
            for (std::size_t j = 0; j < ga.size(); ++j) ga[j] = g[0];
            accum(n.a, ga);
            break;
        }
        case Op::kMeanAll: {
            const Tensor& va = value(n.a);
            Tensor ga(va.shape());
            const double w = g[0] / static_cast<double>(va.size());
            for (std::size_t j = 0; j < ga.size(); ++j) ga[j] = w;
            accum(n.a, ga);
            break;
        }
    }
}

}  // namespace vleed
