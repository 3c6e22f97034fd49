#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vleed/rng.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

// Synthetic embeddings on the unit hypersphere: one random unit centroid per
// identity, one global attribute direction per class, isotropic per-sample
// noise. Stands in for real face-embedding corpora at desk scale.
struct SynthConfig {
    std::size_t dim = 512;
    std::size_t num_identities = 100;
    std::size_t samples_per_identity = 10;
    std::size_t num_classes = 2;
    std::vector<double> class_proportions;  // empty means uniform
    double identity_spread = 1.0;           // scale of the centroid component
    double attribute_strength = 1.0;        // alpha: scale of the class direction
    double noise_scale = 0.05;              // per-coordinate noise sigma
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<double> proportions() const;  // resolved, sums to 1
};

struct EmbeddingRecord {
    std::uint64_t sample_id = 0;
    std::uint64_t identity_id = 0;
    int attribute_label = 1;  // 1-based, in {1..num_classes}
    std::vector<double> vector;
};

struct EmbeddingStore {
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::vector<EmbeddingRecord> records;

    std::size_t count() const { return records.size(); }
    // Feature matrix [count, dim] and 0-based labels, in record order.
    Tensor matrix() const;
    std::vector<int> labels0() const;
    void validate() const;
};

EmbeddingStore generate(const SynthConfig& config);

// Identity-disjoint partition; errors if either side would end up with
// fewer than 2 attribute classes.
std::pair<EmbeddingStore, EmbeddingStore> split(const EmbeddingStore& store,
                                                double train_fraction, std::uint64_t seed);

struct Pair {
    std::size_t a = 0;  // record indices into the store
    std::size_t b = 0;
    bool genuine = false;
    // attribute class shared by both identities ("g<label>"), empty when the
    // identities belong to different classes
    std::string group;
};

struct PairList {
    std::vector<Pair> pairs;
    std::size_t num_genuine = 0;
    std::size_t num_impostor = 0;
};

PairList make_pairs(const EmbeddingStore& store, std::size_t num_genuine,
                    std::size_t num_impostor, std::uint64_t seed);

inline constexpr const char* kStoreMagic = "VLEEDE1";
inline constexpr std::uint32_t kStoreVersion = 1;

// Binary store: magic "VLEEDE1", LE header (version u32, d u32, count u64,
// num_classes u32), then per record sample_id u64, identity_id u64, label
// u32, d f32 values. Vectors renormalized on load if norm drifts > 1e-6.
void save_store(const std::string& path, const EmbeddingStore& store);
EmbeddingStore load_store(const std::string& path);

// CSV import; header row: sample_id,identity_id,label,v0,...,v{d-1}
EmbeddingStore import_csv(const std::string& path);

}  // namespace vleed
