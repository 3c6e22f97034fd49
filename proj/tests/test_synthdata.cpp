#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "test_util.hpp"
#include "vleed/binio.hpp"
#include "vleed/errors.hpp"
#include "vleed/eval.hpp"
#include "vleed/synthdata.hpp"

using namespace vleed;

namespace {

SynthConfig base_config(std::uint64_t seed) {
    SynthConfig c;
    c.dim = 16;
    c.num_identities = 30;
    c.samples_per_identity = 5;
    c.num_classes = 2;
    c.attribute_strength = 1.0;
    c.noise_scale = 0.1;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("generated vectors are unit norm with valid labels") {
    EmbeddingStore store = generate(base_config(1));
    CHECK(store.count() == 150);
    store.validate();
    for (const auto& r : store.records) {
        CHECK(std::abs(l2_norm(r.vector.data(), store.dim) - 1.0) < 1e-6);
        CHECK(r.attribute_label >= 1);
        CHECK(r.attribute_label <= 2);
    }
    // one label per identity
    std::map<std::uint64_t, int> by_id;
    for (const auto& r : store.records) {
        auto it = by_id.find(r.identity_id);
        if (it == by_id.end())
            by_id[r.identity_id] = r.attribute_label;
        else
            CHECK(it->second == r.attribute_label);
    }
}

TEST_CASE("generation is deterministic per seed") {
    EmbeddingStore a = generate(base_config(7));
    EmbeddingStore b = generate(base_config(7));
    EmbeddingStore c = generate(base_config(8));
    REQUIRE(a.count() == b.count());
    bool all_equal_ab = true, all_equal_ac = true;
    for (std::size_t i = 0; i < a.count(); ++i)
        for (std::size_t j = 0; j < a.dim; ++j) {
            all_equal_ab = all_equal_ab && a.records[i].vector[j] == b.records[i].vector[j];
            all_equal_ac = all_equal_ac && a.records[i].vector[j] == c.records[i].vector[j];
        }
    CHECK(all_equal_ab);
    CHECK_FALSE(all_equal_ac);
}

TEST_CASE("label frequencies converge to class proportions") {
    SynthConfig c = base_config(3);
    c.num_identities = 10000;
    c.samples_per_identity = 1;
    c.class_proportions = {0.605, 0.395};
    EmbeddingStore store = generate(c);
    std::size_t ones = 0;
    for (const auto& r : store.records) ones += r.attribute_label == 1 ? 1 : 0;
    const double frac = static_cast<double>(ones) / static_cast<double>(store.count());
    const double se = std::sqrt(0.605 * 0.395 / static_cast<double>(store.count()));
    CHECK(std::abs(frac - 0.605) <= 3.0 * se);
}

TEST_CASE("no planted signal means chance-level linear leakage") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SynthConfig c = base_config(200 + seed);
        c.attribute_strength = 0.0;
        c.num_identities = 60;
        EmbeddingStore store = generate(c);
        auto [train, eval] = split(store, 0.7, seed);
        ProbeConfig pc;
        pc.seed = seed;
        pc.epochs = 15;
        const Probe probe = train_probe(ProbeKind::kLR, train.matrix(), train.labels0(), pc);
        const double acc = probe_accuracy(probe, eval.matrix(), eval.labels0());
        const double maj = majority_baseline(eval.labels0());
        CHECK(acc <= maj + 0.05 + 1e-12);
    }
}

TEST_CASE("strong planted signal is linearly recoverable and verifiable") {
    SynthConfig c = base_config(11);
    c.dim = 32;
    c.num_identities = 60;
    c.samples_per_identity = 8;
    c.attribute_strength = 5.0;   // >= 5 * identity_spread and 5 * noise_scale
    c.noise_scale = 0.05;
    EmbeddingStore store = generate(c);
    auto [train, eval] = split(store, 0.7, 1);

    ProbeConfig pc;
    pc.seed = 5;
    pc.epochs = 100;
    const Probe probe = train_probe(ProbeKind::kLR, train.matrix(), train.labels0(), pc);
    CHECK(probe_accuracy(probe, eval.matrix(), eval.labels0()) >= 0.95);

    PairList pairs = make_pairs(eval, 100, 400, 3);
    const ScoreSet scores = verification_scores(eval.matrix(), pairs);
    CHECK(roc_points(scores).auc >= 0.95);
}

TEST_CASE("split is identity-disjoint and deterministic") {
    SynthConfig c = base_config(13);
    c.num_identities = 10;
    EmbeddingStore store = generate(c);
    // pick a split seed whose 2-identity eval side still has both classes
    std::uint64_t split_seed = 0;
    for (std::uint64_t s = 1; s < 64; ++s) {
        try {
            split(store, 0.8, s);
            split_seed = s;
            break;
        } catch (const ConfigError&) {
        }
    }
    REQUIRE(split_seed != 0);
    auto [train, eval] = split(store, 0.8, split_seed);

    std::set<std::uint64_t> train_ids, eval_ids, train_samples, eval_samples;
    for (const auto& r : train.records) {
        train_ids.insert(r.identity_id);
        train_samples.insert(r.sample_id);
    }
    for (const auto& r : eval.records) {
        eval_ids.insert(r.identity_id);
        eval_samples.insert(r.sample_id);
    }
    CHECK(train_ids.size() == 8);
    CHECK(eval_ids.size() == 2);
    for (std::uint64_t id : eval_ids) CHECK_FALSE(train_ids.count(id));
    for (std::uint64_t s : eval_samples) CHECK_FALSE(train_samples.count(s));

    auto [train2, eval2] = split(store, 0.8, split_seed);
    REQUIRE(train2.count() == train.count());
    for (std::size_t i = 0; i < train.count(); ++i)
        CHECK(train2.records[i].sample_id == train.records[i].sample_id);

    CHECK_THROWS_AS(split(store, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split(store, 1.0, 1), ConfigError);
}

TEST_CASE("split rejects a side without two classes") {
    // two identities, one per class: a 0.5 split leaves one class per side
    SynthConfig c = base_config(17);
    c.num_identities = 2;
    c.samples_per_identity = 4;
    c.class_proportions = {0.5, 0.5};
    // force distinct labels by regenerating until both classes appear
    EmbeddingStore store = generate(c);
    std::set<int> labels;
    std::uint64_t seed = 18;
    while (labels.size() < 2) {
        c.seed = seed++;
        store = generate(c);
        labels.clear();
        for (const auto& r : store.records) labels.insert(r.attribute_label);
    }
    CHECK_THROWS_AS(split(store, 0.5, 1), ConfigError);
}

TEST_CASE("make_pairs respects counts, disjointness and tags") {
    SynthConfig c = base_config(19);
    c.num_identities = 12;
    c.samples_per_identity = 4;
    EmbeddingStore store = generate(c);
    PairList pairs = make_pairs(store, 20, 30, 9);
    CHECK(pairs.num_genuine == 20);
    CHECK(pairs.num_impostor == 30);

    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::size_t genuine = 0, impostor = 0;
    for (const Pair& p : pairs.pairs) {
        const auto key = std::minmax(p.a, p.b);
        CHECK(seen.insert({key.first, key.second}).second);  // no duplicates
        const auto& ra = store.records[p.a];
        const auto& rb = store.records[p.b];
        if (p.genuine) {
            ++genuine;
            CHECK(ra.identity_id == rb.identity_id);
        } else {
            ++impostor;
            CHECK(ra.identity_id != rb.identity_id);
        }
        if (ra.attribute_label == rb.attribute_label)
            CHECK(p.group == "g" + std::to_string(ra.attribute_label));
        else
            CHECK(p.group.empty());
    }
    CHECK(genuine == 20);
    CHECK(impostor == 30);

    // zero genuine allowed
    PairList none = make_pairs(store, 0, 5, 9);
    for (const Pair& p : none.pairs) CHECK_FALSE(p.genuine);

    // determinism
    PairList again = make_pairs(store, 20, 30, 9);
    REQUIRE(again.pairs.size() == pairs.pairs.size());
    for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
        CHECK(again.pairs[i].a == pairs.pairs[i].a);
        CHECK(again.pairs[i].b == pairs.pairs[i].b);
    }
}

TEST_CASE("make_pairs combinatorial limits") {
    SynthConfig c = base_config(23);
    c.num_identities = 2;
    c.samples_per_identity = 2;
    EmbeddingStore store = generate(c);
    // 2 identities x 2 samples: 2 genuine pairs, 4 impostor pairs
    PairList ok = make_pairs(store, 2, 4, 1);
    CHECK(ok.pairs.size() == 6);
    CHECK_THROWS_AS(make_pairs(store, 3, 4, 1), ConfigError);
    CHECK_THROWS_AS(make_pairs(store, 2, 5, 1), ConfigError);
}

TEST_CASE("store round trip is bit exact including empty") {
    EmbeddingStore store = generate(base_config(29));
    save_store("test_store.bin", store);
    EmbeddingStore loaded = load_store("test_store.bin");
    REQUIRE(loaded.count() == store.count());
    CHECK(loaded.dim == store.dim);
    CHECK(loaded.num_classes == store.num_classes);
    for (std::size_t i = 0; i < store.count(); ++i) {
        CHECK(loaded.records[i].sample_id == store.records[i].sample_id);
        CHECK(loaded.records[i].identity_id == store.records[i].identity_id);
        CHECK(loaded.records[i].attribute_label == store.records[i].attribute_label);
        for (std::size_t j = 0; j < store.dim; ++j)
            CHECK(std::abs(loaded.records[i].vector[j] - store.records[i].vector[j]) < 1e-6);
    }
    // file-level round trip: save(load(file)) is byte-identical
    save_store("test_store2.bin", loaded);
    CHECK(binio::read_file("test_store.bin") == binio::read_file("test_store2.bin"));

    // empty store
    EmbeddingStore empty;
    empty.dim = 8;
    empty.num_classes = 2;
    save_store("test_store_empty.bin", empty);
    EmbeddingStore empty2 = load_store("test_store_empty.bin");
    CHECK(empty2.count() == 0);
    CHECK(empty2.dim == 8);

    // corrupted magic
    std::string bytes = binio::read_file("test_store.bin");
    bytes[0] = 'Z';
    binio::write_file("test_store2.bin", bytes);
    CHECK_THROWS_AS(load_store("test_store2.bin"), FormatError);

    // truncation carries a byte offset
    const std::string good = binio::read_file("test_store.bin");
    binio::write_file("test_store2.bin", good.substr(0, good.size() - 3));
    try {
        load_store("test_store2.bin");
        CHECK(false);
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }

    std::filesystem::remove("test_store.bin");
    std::filesystem::remove("test_store2.bin");
    std::filesystem::remove("test_store_empty.bin");
}

TEST_CASE("csv import parses the documented header layout") {
    const std::string path = "test_import.csv";
    binio::write_file(path,
                      "sample_id,identity_id,label,v0,v1,v2\n"
                      "0,100,1,1.0,0.0,0.0\n"
                      "1,100,1,0.0,2.0,0.0\n"  // renormalized on load
                      "2,101,2,0.0,0.0,1.0\n");
    EmbeddingStore store = import_csv(path);
    CHECK(store.dim == 3);
    CHECK(store.count() == 3);
    CHECK(store.records[1].vector[1] == doctest::Approx(1.0));  // was 2.0, normalized
    store.validate();

    binio::write_file(path, "wrong,header\n1,2\n");
    CHECK_THROWS_AS(import_csv(path), FormatError);
    binio::write_file(path, "sample_id,identity_id,label,v0\n1,2,1\n");
    CHECK_THROWS_AS(import_csv(path), FormatError);
    std::filesystem::remove(path);
}
