#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vleed/tensor.hpp"

namespace vleed {

// Named parameter tensors plus a mutation counter. The counter is bumped by
// whoever mutates the values (the optimizer); tapes recorded against an older
// version refuse to run backward.
struct Params {
    std::vector<std::string> names;
    std::vector<Tensor> values;
    std::uint64_t version = 0;

    std::size_t add(std::string name, Tensor t) {
        names.push_back(std::move(name));
        values.push_back(std::move(t));
        return values.size() - 1;
    }

    std::size_t index_of(const std::string& name) const;
    Tensor& at(const std::string& name) { return values[index_of(name)]; }
    const Tensor& at(const std::string& name) const { return values[index_of(name)]; }
    std::size_t count() const { return values.size(); }
    void bump() { ++version; }
};

// Reverse-mode tape over dense tensors. Values are computed eagerly as ops
// are recorded; backward() walks the record once. Parameter leaves reference
// their Params storage (which must outlive the tape).
class Tape {
public:
    using Ix = int;

    // --- leaves ---
    Ix constant(Tensor value);
    Ix param(const Params& group, std::size_t index);
    // All parameters of a group as leaves, in order.
    std::vector<Ix> params(const Params& group);

    // --- elementwise / broadcast ---
    Ix add(Ix a, Ix b);
    Ix sub(Ix a, Ix b);
    Ix mul(Ix a, Ix b);
    Ix add_row(Ix a, Ix bias);  // [m,n] + [n]
    Ix scale(Ix a, double c);
    Ix add_scalar(Ix a, double c);
    Ix exp(Ix a);
    Ix log(Ix a);
    Ix xlogx(Ix a);  // x*log(x), 0 at x<=0
    Ix clamp(Ix a, double lo, double hi);

    // --- linear algebra ---
    Ix matmul(Ix a, Ix b);
    Ix concat_cols(Ix a, Ix b);

    // --- activations / regularization ---
    Ix prelu(Ix a, Ix slope);          // slope: scalar parameter
    Ix leaky_relu(Ix a, double slope); // fixed negative slope
    Ix dropout(Ix a, Tensor keep_mask);

    // --- structured ---
    Ix row_normalize(Ix a);                              // l2 per row
    Ix softmax(Ix a);                                    // rows, max-subtracted
    Ix gather_labels(Ix probs, std::vector<int> labels); // [B,K] -> [B,1]
    Ix gather_rows(Ix table, std::vector<int> labels);   // [K,d] -> [B,d]
    Ix moment_loss(Ix z, std::vector<int> labels, int num_classes, int max_moment);

    // --- reductions ---
    Ix sum_cols(Ix a);  // [m,n] -> [m,1]
    Ix sum_all(Ix a);
    Ix mean_all(Ix a);

    const Tensor& value(Ix i) const;
    // Gradient of the last backward() w.r.t. node i (zeros if unreached).
    Tensor grad(Ix i) const;
    // Gradients aligned with group.values; zeros for parameters the recorded
    // graph never touched.
    std::vector<Tensor> grads_for(const Params& group) const;

    // Seeds d(loss)/d(loss)=seed and accumulates gradients through the
    // record. loss must be scalar. Throws StaleTapeError if any referenced
    // Params was mutated after recording.
    void backward(Ix loss, double seed = 1.0);

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    enum class Op {
        kLeaf,
        kAdd,
        kSub,
        kMul,
        kAddRow,
        kScale,
        kAddScalar,
        kExp,
        kLog,
        kXLogX,
        kClamp,
        kMatMul,
        kConcatCols,
        kPrelu,
        kLeakyRelu,
        kDropout,
        kRowNormalize,
        kSoftmax,
        kGatherLabels,
        kGatherRows,
        kMomentLoss,
        kSumCols,
        kSumAll,
        kMeanAll,
    };

    struct Node {
        Op op;
        Ix a = -1;
        Ix b = -1;
        Tensor val;                    // owned value (unused for param leaves)
        const Tensor* ext = nullptr;   // param leaf storage
        Tensor grad;
        bool needs_grad = false;
        double c0 = 0.0;
        double c1 = 0.0;
        int k0 = 0;
        int k1 = 0;
        Tensor aux;                    // dropout mask
        std::vector<int> labels;
        // leaf bookkeeping for grads_for / staleness
        const Params* group = nullptr;
        std::size_t pindex = 0;
        std::uint64_t ver = 0;
    };

    Ix push(Node n);
    Node& at(Ix i) { return nodes_[static_cast<std::size_t>(i)]; }
    const Node& at(Ix i) const { return nodes_[static_cast<std::size_t>(i)]; }
    void accum(Ix i, const Tensor& g);
    void backward_node(Ix i);

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

}  // namespace vleed
