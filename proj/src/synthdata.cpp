#include "vleed/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "vleed/binio.hpp"
#include "vleed/errors.hpp"

namespace vleed {

void SynthConfig::validate() const {
    if (dim == 0 || num_identities == 0 || samples_per_identity == 0)
        throw ConfigError("SynthConfig: dim, identities and samples must be positive");
    if (num_classes < 2) throw ConfigError("SynthConfig: num_classes must be >= 2");
    if (attribute_strength < 0.0) throw ConfigError("SynthConfig: attribute_strength < 0");
    if (!(identity_spread > 0.0) || !(noise_scale > 0.0))
        throw ConfigError("SynthConfig: identity_spread and noise_scale must be > 0");
    if (!class_proportions.empty()) {
        if (class_proportions.size() != num_classes)
            throw ConfigError("SynthConfig: class_proportions size != num_classes");
        double s = 0.0;
        for (double p : class_proportions) {
            if (p < 0.0) throw ConfigError("SynthConfig: negative class proportion");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw ConfigError("SynthConfig: class_proportions must sum to 1");
    }
}

std::vector<double> SynthConfig::proportions() const {
    if (!class_proportions.empty()) return class_proportions;
    return std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes));
}

Tensor EmbeddingStore::matrix() const {
    Tensor x = Tensor::matrix(records.size(), dim);
    for (std::size_t i = 0; i < records.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j) x(i, j) = records[i].vector[j];
    return x;
}

std::vector<int> EmbeddingStore::labels0() const {
    std::vector<int> y(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) y[i] = records[i].attribute_label - 1;
    return y;
}

void EmbeddingStore::validate() const {
    for (const EmbeddingRecord& r : records) {
        if (r.vector.size() != dim) throw ContractViolation("EmbeddingStore: bad vector length");
        if (r.attribute_label < 1 || static_cast<std::size_t>(r.attribute_label) > num_classes)
            throw ContractViolation("EmbeddingStore: label out of range");
        if (std::abs(l2_norm(r.vector.data(), dim) - 1.0) > 1e-6)
            throw ContractViolation("EmbeddingStore: vector not unit-norm");
    }
}

namespace {

std::vector<double> random_unit(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    for (int attempt = 0; attempt < 20; ++attempt) {
        for (double& x : v) x = rng.normal();
        const double r = l2_norm(v.data(), d);
        if (r >= 1e-9) {
            for (double& x : v) x /= r;
            return v;
        }
    }
    throw NumericError("random_unit: repeated zero-norm draws");
}

int sample_class(Rng& rng, const std::vector<double>& props) {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t c = 0; c < props.size(); ++c) {
        acc += props[c];
        if (u < acc) return static_cast<int>(c);
    }
    return static_cast<int>(props.size()) - 1;
}

}  // namespace

EmbeddingStore generate(const SynthConfig& config) {
    config.validate();
    Rng master(config.seed);
    Rng dir_rng = master.stream("attr-dirs");
    Rng centroid_rng = master.stream("centroids");
    Rng label_rng = master.stream("labels");
    Rng noise_rng = master.stream("noise");

    const std::vector<double> props = config.proportions();
    std::vector<std::vector<double>> attr_dirs(config.num_classes);
    for (auto& a : attr_dirs) a = random_unit(dir_rng, config.dim);

    EmbeddingStore store;
    store.dim = config.dim;
    store.num_classes = config.num_classes;
    store.records.reserve(config.num_identities * config.samples_per_identity);

    std::uint64_t next_sample = 0;
    for (std::size_t id = 0; id < config.num_identities; ++id) {
        const std::vector<double> centroid = random_unit(centroid_rng, config.dim);
        const int cls = sample_class(label_rng, props);
        const std::vector<double>& a = attr_dirs[static_cast<std::size_t>(cls)];
        for (std::size_t s = 0; s < config.samples_per_identity; ++s) {
            EmbeddingRecord rec;
            rec.sample_id = next_sample++;
            rec.identity_id = id;
            rec.attribute_label = cls + 1;
            rec.vector.resize(config.dim);
            bool ok = false;
            for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
                for (std::size_t j = 0; j < config.dim; ++j)
                    rec.vector[j] = config.identity_spread * centroid[j] +
                                    config.attribute_strength * a[j] +
                                    config.noise_scale * noise_rng.normal();
                const double r = l2_norm(rec.vector.data(), config.dim);
                if (r >= 1e-9) {
                    for (double& x : rec.vector) x /= r;
                    ok = true;
                }
            }
            if (!ok) throw NumericError("generate: sample collapsed to zero norm repeatedly");
            store.records.push_back(std::move(rec));
        }
    }
    return store;
}

std::pair<EmbeddingStore, EmbeddingStore> split(const EmbeddingStore& store,
                                                double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split: train_fraction must be in (0,1)");
    std::vector<std::uint64_t> ids;
    for (const auto& r : store.records)
        if (std::find(ids.begin(), ids.end(), r.identity_id) == ids.end())
            ids.push_back(r.identity_id);
    if (ids.size() < 2) throw ConfigError("split: need at least 2 identities");

    Rng rng = Rng(seed).stream("split");
    rng.shuffle(ids);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(ids.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);

    std::set<std::uint64_t> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    EmbeddingStore train, eval;
    train.dim = eval.dim = store.dim;
    train.num_classes = eval.num_classes = store.num_classes;
    for (const auto& r : store.records)
        (train_ids.count(r.identity_id) ? train : eval).records.push_back(r);

    auto distinct_labels = [](const EmbeddingStore& s) {
        std::set<int> d;
        for (const auto& r : s.records) d.insert(r.attribute_label);
        return d.size();
    };
    if (distinct_labels(train) < 2 || distinct_labels(eval) < 2)
        throw ConfigError("split: a side has fewer than 2 attribute classes");
    return {std::move(train), std::move(eval)};
}

namespace {

struct IdentityIndex {
    std::vector<std::uint64_t> ids;                 // distinct identity ids
    std::vector<std::vector<std::size_t>> members;  // record indices per identity
    std::vector<int> labels;                        // attribute label per identity

    explicit IdentityIndex(const EmbeddingStore& store) {
        for (std::size_t i = 0; i < store.records.size(); ++i) {
            const auto& r = store.records[i];
            std::size_t k = 0;
            for (; k < ids.size(); ++k)
                if (ids[k] == r.identity_id) break;
            if (k == ids.size()) {
                ids.push_back(r.identity_id);
                members.emplace_back();
                labels.push_back(r.attribute_label);
            }
            members[k].push_back(i);
        }
    }
};

}  // namespace

PairList make_pairs(const EmbeddingStore& store, std::size_t num_genuine,
                    std::size_t num_impostor, std::uint64_t seed) {
    IdentityIndex idx(store);
    if (idx.ids.size() < 2) throw ConfigError("make_pairs: need at least 2 identities");
    bool any_multi = false;
    for (const auto& m : idx.members) any_multi = any_multi || m.size() >= 2;
    if (!any_multi && num_genuine > 0)
        throw ConfigError("make_pairs: no identity has 2 or more samples");

    std::size_t max_genuine = 0;
    for (const auto& m : idx.members) max_genuine += m.size() * (m.size() - 1) / 2;
    const std::size_t n = store.records.size();
    const std::size_t max_impostor = n * (n - 1) / 2 - max_genuine;
    if (num_genuine > max_genuine || num_impostor > max_impostor)
        throw ConfigError("make_pairs: requested " + std::to_string(num_genuine) + "/" +
                          std::to_string(num_impostor) + " pairs but only " +
                          std::to_string(max_genuine) + " genuine and " +
                          std::to_string(max_impostor) + " impostor pairs exist");

    Rng rng = Rng(seed).stream("pairs");
    PairList out;
    out.num_genuine = num_genuine;
    out.num_impostor = num_impostor;

    auto group_of = [&](std::size_t a, std::size_t b) -> std::string {
        const int la = store.records[a].attribute_label;
        const int lb = store.records[b].attribute_label;
        return la == lb ? "g" + std::to_string(la) : std::string();
    };

    // genuine: enumerate all within-identity pairs, shuffle, take
    {
        std::vector<std::pair<std::size_t, std::size_t>> all;
        all.reserve(max_genuine);
        for (const auto& m : idx.members)
            for (std::size_t i = 0; i < m.size(); ++i)
                for (std::size_t j = i + 1; j < m.size(); ++j) all.emplace_back(m[i], m[j]);
        rng.shuffle(all);
        for (std::size_t p = 0; p < num_genuine; ++p)
            out.pairs.push_back({all[p].first, all[p].second, true, group_of(all[p].first, all[p].second)});
    }

    // impostor: rejection-sample when sparse, enumerate when dense
    if (num_impostor * 2 > max_impostor) {
        std::vector<std::pair<std::size_t, std::size_t>> all;
        all.reserve(max_impostor);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (store.records[a].identity_id != store.records[b].identity_id)
                    all.emplace_back(a, b);
        rng.shuffle(all);
        for (std::size_t p = 0; p < num_impostor; ++p)
            out.pairs.push_back({all[p].first, all[p].second, false, group_of(all[p].first, all[p].second)});
    } else {
        std::set<std::pair<std::size_t, std::size_t>> seen;
        while (seen.size() < num_impostor) {
            std::size_t a = static_cast<std::size_t>(rng.uniform_index(n));
            std::size_t b = static_cast<std::size_t>(rng.uniform_index(n));
            if (a == b) continue;
            if (store.records[a].identity_id == store.records[b].identity_id) continue;
            if (a > b) std::swap(a, b);
            if (!seen.insert({a, b}).second) continue;
            out.pairs.push_back({a, b, false, group_of(a, b)});
        }
    }
    return out;
}

void save_store(const std::string& path, const EmbeddingStore& store) {
    std::string out;
    out += kStoreMagic;
    binio::put_u32(out, kStoreVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(store.dim));
    binio::put_u64(out, store.count());
    binio::put_u32(out, static_cast<std::uint32_t>(store.num_classes));
    for (const auto& r : store.records) {
        binio::put_u64(out, r.sample_id);
        binio::put_u64(out, r.identity_id);
        binio::put_u32(out, static_cast<std::uint32_t>(r.attribute_label));
        for (std::size_t j = 0; j < store.dim; ++j)
            binio::put_f32(out, static_cast<float>(r.vector[j]));
    }
    binio::write_file(path, out);
}

EmbeddingStore load_store(const std::string& path) {
    binio::ByteReader r(binio::read_file(path), path);
    const std::string magic = r.take(std::string(kStoreMagic).size(), "magic");
    if (magic != kStoreMagic) throw FormatError(path + ": bad magic '" + magic + "'");
    const std::uint32_t version = r.u32("version");
    if (version != kStoreVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    EmbeddingStore store;
    store.dim = r.u32("dim");
    const std::uint64_t count = r.u64("count");
    store.num_classes = r.u32("num_classes");
    store.records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        EmbeddingRecord rec;
        rec.sample_id = r.u64("sample_id");
        rec.identity_id = r.u64("identity_id");
        const std::uint32_t label = r.u32("label");
        if (label < 1 || label > store.num_classes)
            throw FormatError(path + ": record " + std::to_string(i) + " label " +
                              std::to_string(label) + " out of range");
        rec.attribute_label = static_cast<int>(label);
        rec.vector.resize(store.dim);
        for (std::size_t j = 0; j < store.dim; ++j)
            rec.vector[j] = static_cast<double>(r.f32("vector"));
        const double norm = l2_norm(rec.vector.data(), store.dim);
        if (std::abs(norm - 1.0) > 1e-6) {
            if (norm < 1e-12)
                throw FormatError(path + ": record " + std::to_string(i) + " has zero vector");
            for (double& v : rec.vector) v /= norm;
        }
        store.records.push_back(std::move(rec));
    }
    r.expect_done();
    return store;
}

EmbeddingStore import_csv(const std::string& path) {
    const std::string bytes = binio::read_file(path);
    std::istringstream in(bytes);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty CSV");

    auto split_fields = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char ch : s) {
            if (ch == ',') {
                out.push_back(cur);
                cur.clear();
            } else if (ch != '\r') {
                cur.push_back(ch);
            }
        }
        out.push_back(cur);
        return out;
    };

    const auto header = split_fields(line);
    if (header.size() < 4 || header[0] != "sample_id" || header[1] != "identity_id" ||
        header[2] != "label")
        throw FormatError(path + ": CSV header must start sample_id,identity_id,label,v0,...");
    const std::size_t dim = header.size() - 3;
    for (std::size_t j = 0; j < dim; ++j)
        if (header[3 + j] != "v" + std::to_string(j))
            throw FormatError(path + ": CSV header column " + std::to_string(3 + j) +
                              " should be v" + std::to_string(j));

    EmbeddingStore store;
    store.dim = dim;
    int max_label = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != header.size())
            throw FormatError(path + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(f.size()) + " fields, expected " +
                              std::to_string(header.size()));
        EmbeddingRecord rec;
        try {
            rec.sample_id = std::stoull(f[0]);
            rec.identity_id = std::stoull(f[1]);
            rec.attribute_label = std::stoi(f[2]);
            rec.vector.resize(dim);
            for (std::size_t j = 0; j < dim; ++j) rec.vector[j] = std::stod(f[3 + j]);
        } catch (const std::exception&) {
            throw FormatError(path + ": line " + std::to_string(line_no) + " has a bad field");
        }
        if (rec.attribute_label < 1)
            throw FormatError(path + ": line " + std::to_string(line_no) + " label must be >= 1");
        max_label = std::max(max_label, rec.attribute_label);
        const double norm = l2_norm(rec.vector.data(), dim);
        if (std::abs(norm - 1.0) > 1e-6) {
            if (norm < 1e-12)
                throw FormatError(path + ": line " + std::to_string(line_no) + " has zero vector");
            for (double& v : rec.vector) v /= norm;
        }
        store.records.push_back(std::move(rec));
    }
    store.num_classes = static_cast<std::size_t>(std::max(max_label, 2));
    return store;
}

}  // namespace vleed
