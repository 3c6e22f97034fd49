#include "vleed/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>

#include "vleed/binio.hpp"
#include "vleed/checkpoint.hpp"
#include "vleed/errors.hpp"

namespace vleed::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

[[noreturn]] void parse_fail(const std::string& origin, const std::string& text,
                             std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    throw ConfigError(origin + ": malformed JSON at line " + std::to_string(line) + ", column " +
                      std::to_string(col));
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

void parse_synth(const json& j, SynthConfig& out, std::uint64_t top_seed) {
    check_keys(j,
               {"dim", "num_identities", "samples_per_identity", "num_classes",
                "class_proportions", "identity_spread", "attribute_strength", "noise_scale",
                "seed"},
               "synth");
    out.dim = get_or<std::size_t>(j, "dim", out.dim);
    out.num_identities = get_or<std::size_t>(j, "num_identities", out.num_identities);
    out.samples_per_identity =
        get_or<std::size_t>(j, "samples_per_identity", out.samples_per_identity);
    out.num_classes = get_or<std::size_t>(j, "num_classes", out.num_classes);
    out.class_proportions =
        get_or<std::vector<double>>(j, "class_proportions", out.class_proportions);
    out.identity_spread = get_or<double>(j, "identity_spread", out.identity_spread);
    out.attribute_strength = get_or<double>(j, "attribute_strength", out.attribute_strength);
    out.noise_scale = get_or<double>(j, "noise_scale", out.noise_scale);
    out.seed = get_or<std::uint64_t>(j, "seed", top_seed);
}

void parse_model(const json& j, VleedConfig& out) {
    check_keys(j,
               {"input_dim", "residual_dim", "class_dim", "num_classes", "lambda_rec", "beta_r",
                "beta_c", "lambda_dis", "residual_hidden", "class_hidden", "decoder_hidden",
                "classifier_hidden", "classifier_dropout", "logvar_min", "logvar_max"},
               "model");
    out.input_dim = get_or<std::size_t>(j, "input_dim", out.input_dim);
    out.residual_dim = get_or<std::size_t>(j, "residual_dim", out.residual_dim);
    out.class_dim = get_or<std::size_t>(j, "class_dim", out.class_dim);
    out.num_classes = get_or<std::size_t>(j, "num_classes", out.num_classes);
    out.lambda_rec = get_or<double>(j, "lambda_rec", out.lambda_rec);
    out.beta_r = get_or<double>(j, "beta_r", out.beta_r);
    out.beta_c = get_or<double>(j, "beta_c", out.beta_c);
    out.lambda_dis = get_or<double>(j, "lambda_dis", out.lambda_dis);
    out.residual_hidden = get_or<std::size_t>(j, "residual_hidden", out.residual_hidden);
    out.class_hidden = get_or<std::size_t>(j, "class_hidden", out.class_hidden);
    out.decoder_hidden = get_or<std::size_t>(j, "decoder_hidden", out.decoder_hidden);
    out.classifier_hidden = get_or<std::size_t>(j, "classifier_hidden", out.classifier_hidden);
    out.classifier_dropout = get_or<double>(j, "classifier_dropout", out.classifier_dropout);
    out.logvar_min = get_or<double>(j, "logvar_min", out.logvar_min);
    out.logvar_max = get_or<double>(j, "logvar_max", out.logvar_max);
}

void parse_train(const json& j, TrainConfig& out, std::uint64_t top_seed) {
    check_keys(j,
               {"epochs", "batch_size", "n_clf", "warmup_epochs", "clf_lr", "vae_lr", "beta1",
                "beta2", "adam_epsilon", "seed", "shuffle", "moment_order"},
               "train");
    out.epochs = get_or<std::size_t>(j, "epochs", out.epochs);
    out.batch_size = get_or<std::size_t>(j, "batch_size", out.batch_size);
    out.n_clf = get_or<std::size_t>(j, "n_clf", out.n_clf);
    out.warmup_epochs = get_or<std::size_t>(j, "warmup_epochs", out.warmup_epochs);
    out.clf_adam.lr = get_or<double>(j, "clf_lr", out.clf_adam.lr);
    out.vae_adam.lr = get_or<double>(j, "vae_lr", out.vae_adam.lr);
    const double b1 = get_or<double>(j, "beta1", out.vae_adam.beta1);
    const double b2 = get_or<double>(j, "beta2", out.vae_adam.beta2);
    const double eps = get_or<double>(j, "adam_epsilon", out.vae_adam.epsilon);
    out.clf_adam.beta1 = out.vae_adam.beta1 = b1;
    out.clf_adam.beta2 = out.vae_adam.beta2 = b2;
    out.clf_adam.epsilon = out.vae_adam.epsilon = eps;
    out.seed = get_or<std::uint64_t>(j, "seed", top_seed);
    out.shuffle = get_or<bool>(j, "shuffle", out.shuffle);
    out.moment_order = get_or<std::size_t>(j, "moment_order", out.moment_order);
}

void parse_eval(const json& j, EvalConfig& out) {
    check_keys(j,
               {"fmr_targets", "probes", "probe_epochs", "probe_batch_size", "probe_lr",
                "train_fraction", "num_genuine", "num_impostor"},
               "eval");
    out.fmr_targets = get_or<std::vector<double>>(j, "fmr_targets", out.fmr_targets);
    if (j.contains("probes")) {
        out.probes.clear();
        for (const auto& name : j.at("probes"))
            out.probes.push_back(probe_kind_from_name(name.get<std::string>()));
    }
    out.probe_epochs = get_or<std::size_t>(j, "probe_epochs", out.probe_epochs);
    out.probe_batch_size = get_or<std::size_t>(j, "probe_batch_size", out.probe_batch_size);
    out.probe_lr = get_or<double>(j, "probe_lr", out.probe_lr);
    out.train_fraction = get_or<double>(j, "train_fraction", out.train_fraction);
    out.num_genuine = get_or<std::size_t>(j, "num_genuine", out.num_genuine);
    out.num_impostor = get_or<std::size_t>(j, "num_impostor", out.num_impostor);
}

void parse_inlp(const json& j, InlpConfig& out) {
    check_keys(j, {"max_iters", "stop_margin", "clf_lr", "clf_max_steps", "clf_grad_tol"},
               "baselines.inlp");
    out.max_iters = get_or<std::size_t>(j, "max_iters", out.max_iters);
    out.stop_margin = get_or<double>(j, "stop_margin", out.stop_margin);
    out.clf_lr = get_or<double>(j, "clf_lr", out.clf_lr);
    out.clf_max_steps = get_or<std::size_t>(j, "clf_max_steps", out.clf_max_steps);
    out.clf_grad_tol = get_or<double>(j, "clf_grad_tol", out.clf_grad_tol);
}

void parse_ive(const json& j, IveCliConfig& out, std::uint64_t top_seed) {
    check_keys(j, {"num_trees", "max_depth", "feature_subsample", "seed", "space", "n_e"},
               "baselines.ive");
    out.forest.num_trees = get_or<std::size_t>(j, "num_trees", out.forest.num_trees);
    out.forest.max_depth = get_or<std::size_t>(j, "max_depth", out.forest.max_depth);
    out.forest.feature_subsample =
        get_or<std::size_t>(j, "feature_subsample", out.forest.feature_subsample);
    out.forest.seed = get_or<std::uint64_t>(j, "seed", top_seed);
    const std::string space = get_or<std::string>(j, "space", "raw");
    if (space == "raw")
        out.forest.space = IveSpace::kRaw;
    else if (space == "pca")
        out.forest.space = IveSpace::kPca;
    else
        throw ConfigError("baselines.ive.space must be 'raw' or 'pca'");
    out.n_e = get_or<std::size_t>(j, "n_e", out.n_e);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        parse_fail(origin, json_text, e.byte);
    }
    check_keys(doc, {"seed", "synth", "model", "train", "eval", "baselines", "sweep"}, origin);

    RunConfig cfg;
    cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
    cfg.synth.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.ive.forest.seed = cfg.seed;
    if (doc.contains("synth")) parse_synth(doc.at("synth"), cfg.synth, cfg.seed);
    if (doc.contains("model")) parse_model(doc.at("model"), cfg.model);
    if (doc.contains("train")) parse_train(doc.at("train"), cfg.train, cfg.seed);
    if (doc.contains("eval")) parse_eval(doc.at("eval"), cfg.eval);
    if (doc.contains("baselines")) {
        const json& b = doc.at("baselines");
        check_keys(b, {"inlp", "ive"}, "baselines");
        if (b.contains("inlp")) parse_inlp(b.at("inlp"), cfg.inlp);
        if (b.contains("ive")) parse_ive(b.at("ive"), cfg.ive, cfg.seed);
    }
    if (doc.contains("sweep")) {
        const json& s = doc.at("sweep");
        check_keys(s, {"lambdas"}, "sweep");
        cfg.sweep_lambdas = get_or<std::vector<double>>(s, "lambdas", cfg.sweep_lambdas);
    }

    cfg.model.validate();
    cfg.train.validate();
    if (cfg.eval.fmr_targets.empty()) throw ConfigError("eval.fmr_targets must be non-empty");
    for (double t : cfg.eval.fmr_targets)
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("eval.fmr_targets entries must be in (0,1)");
    if (!(cfg.eval.train_fraction > 0.0 && cfg.eval.train_fraction < 1.0))
        throw ConfigError("eval.train_fraction must be in (0,1)");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg = parse_run_config(binio::read_file(path), path);
    if (const char* env = std::getenv("VLEED_SEED")) {
        std::uint64_t s = 0;
        const std::string v(env);
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
        if (ec != std::errc() || p != v.data() + v.size())
            throw ConfigError("VLEED_SEED must be an unsigned integer, got '" + v + "'");
        cfg.seed = s;
        cfg.synth.seed = s;
        cfg.train.seed = s;
        cfg.ive.forest.seed = s;
    }
    return cfg;
}

json run_config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["synth"] = {{"dim", c.synth.dim},
                  {"num_identities", c.synth.num_identities},
                  {"samples_per_identity", c.synth.samples_per_identity},
                  {"num_classes", c.synth.num_classes},
                  {"class_proportions", c.synth.class_proportions},
                  {"identity_spread", c.synth.identity_spread},
                  {"attribute_strength", c.synth.attribute_strength},
                  {"noise_scale", c.synth.noise_scale},
                  {"seed", c.synth.seed}};
    j["model"] = config_to_json(c.model);
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"n_clf", c.train.n_clf},
                  {"warmup_epochs", c.train.warmup_epochs},
                  {"clf_lr", c.train.clf_adam.lr},
                  {"vae_lr", c.train.vae_adam.lr},
                  {"beta1", c.train.vae_adam.beta1},
                  {"beta2", c.train.vae_adam.beta2},
                  {"adam_epsilon", c.train.vae_adam.epsilon},
                  {"seed", c.train.seed},
                  {"shuffle", c.train.shuffle},
                  {"moment_order", c.train.moment_order}};
    json probes = json::array();
    for (ProbeKind k : c.eval.probes) probes.push_back(probe_kind_name(k));
    j["eval"] = {{"fmr_targets", c.eval.fmr_targets},
                 {"probes", probes},
                 {"probe_epochs", c.eval.probe_epochs},
                 {"probe_batch_size", c.eval.probe_batch_size},
                 {"probe_lr", c.eval.probe_lr},
                 {"train_fraction", c.eval.train_fraction},
                 {"num_genuine", c.eval.num_genuine},
                 {"num_impostor", c.eval.num_impostor}};
    j["baselines"] = {{"inlp",
                       {{"max_iters", c.inlp.max_iters},
                        {"stop_margin", c.inlp.stop_margin},
                        {"clf_lr", c.inlp.clf_lr},
                        {"clf_max_steps", c.inlp.clf_max_steps},
                        {"clf_grad_tol", c.inlp.clf_grad_tol}}},
                      {"ive",
                       {{"num_trees", c.ive.forest.num_trees},
                        {"max_depth", c.ive.forest.max_depth},
                        {"feature_subsample", c.ive.forest.feature_subsample},
                        {"seed", c.ive.forest.seed},
                        {"space", c.ive.forest.space == IveSpace::kPca ? "pca" : "raw"},
                        {"n_e", c.ive.n_e}}}};
    j["sweep"] = {{"lambdas", c.sweep_lambdas}};
    return j;
}

std::string config_hash(const RunConfig& config) {
    const std::string canon = run_config_to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char ch : canon) {
        h ^= static_cast<std::uint8_t>(ch);
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---- command helpers ----

namespace {

void write_text(const std::string& path, const std::string& text) {
    binio::write_file(path, text);
}

json trace_to_json(const TrainTrace& trace) {
    json epochs = json::array();
    for (const EpochRecord& e : trace.epochs) {
        epochs.push_back({{"l_rec", e.losses.l_rec},
                          {"l_kl_r", e.losses.l_kl_r},
                          {"l_kl_c", e.losses.l_kl_c},
                          {"l_dis", e.losses.l_dis},
                          {"l_clf", e.losses.l_clf},
                          {"total", e.losses.total},
                          {"clf_accuracy", e.clf_accuracy},
                          {"wall_clock_sec", e.wall_clock_sec}});
    }
    return json{{"epochs", epochs},
                {"clf_steps", trace.clf_steps},
                {"vae_steps", trace.vae_steps},
                {"skipped_moment_batches", trace.skipped_moment_batches}};
}

enum class TransformKind { kIdentity, kModel, kProjection, kRanking };

struct Transform {
    TransformKind kind = TransformKind::kIdentity;
    VleedModel model;
    ProjectionOp projection;
    DimRanking ranking;
    std::size_t n_e = 0;

    Tensor apply(const Tensor& x) const {
        switch (kind) {
            case TransformKind::kIdentity: return x;
            case TransformKind::kModel: return infer_release(model, x);
            case TransformKind::kProjection: return inlp_apply(projection, x);
            case TransformKind::kRanking: return ive_apply(ranking, n_e, x);
        }
        return x;
    }

    const char* name() const {
        switch (kind) {
            case TransformKind::kIdentity: return "identity";
            case TransformKind::kModel: return "vleed";
            case TransformKind::kProjection: return "inlp";
            case TransformKind::kRanking: return "ive";
        }
        return "?";
    }
};

Transform load_transform(const std::string& artifact, const RunConfig& config) {
    Transform t;
    if (artifact == "baseline" || artifact == "identity") {
        t.kind = TransformKind::kIdentity;
        return t;
    }
    std::ifstream f(artifact, std::ios::binary);
    if (!f) throw IoError("cannot open artifact: " + artifact);
    char head[7] = {};
    f.read(head, 7);
    const std::string h(head, static_cast<std::size_t>(f.gcount()));
    if (h.rfind("VLEEDP1", 0) == 0) {
        t.kind = TransformKind::kProjection;
        t.projection = load_projection(artifact);
    } else if (h.rfind("VLEEDR1", 0) == 0) {
        t.kind = TransformKind::kRanking;
        t.ranking = load_ranking(artifact);
        t.n_e = config.ive.n_e;
        if (t.n_e == 0)
            throw ConfigError("evaluating a ranking artifact requires baselines.ive.n_e > 0");
    } else if (h.rfind(kModelMagic, 0) == 0) {
        t.kind = TransformKind::kModel;
        t.model = load_model(artifact);
    } else {
        throw FormatError(artifact + ": not a known artifact (bad magic)");
    }
    return t;
}

std::string scores_csv(const ScoreSet& scores) {
    std::string out = "pair_type,group,score\n";
    auto row = [&out](const char* type, const std::string& group, double score) {
        out += type;
        out += ',';
        out += group;
        out += ',';
        out += format_double(score);
        out += '\n';
    };
    for (std::size_t i = 0; i < scores.genuine.size(); ++i)
        row("genuine", i < scores.genuine_group.size() ? scores.genuine_group[i] : "",
            scores.genuine[i]);
    for (std::size_t i = 0; i < scores.impostor.size(); ++i)
        row("impostor", i < scores.impostor_group.size() ? scores.impostor_group[i] : "",
            scores.impostor[i]);
    return out;
}

struct EvalOutcome {
    json report;
    std::string csv;
};

EvalOutcome evaluate_transform(const RunConfig& config, const Transform& transform,
                               const EmbeddingStore& store) {
    auto [train_store, eval_store] = split(store, config.eval.train_fraction, config.seed);

    const Tensor z_train = transform.apply(train_store.matrix());
    const Tensor z_eval = transform.apply(eval_store.matrix());
    const std::vector<int> y_train = train_store.labels0();
    const std::vector<int> y_eval = eval_store.labels0();

    // verification on the eval split
    PairList pairs =
        make_pairs(eval_store, config.eval.num_genuine, config.eval.num_impostor, config.seed);
    ScoreSet scores = verification_scores(z_eval, pairs);
    RocCurve roc = roc_points(scores);
    EerResult eer = eer_threshold(scores);

    json tmr = json::array();
    json fairness = json::array();
    for (double target : config.eval.fmr_targets) {
        TmrResult r = tmr_at_fmr(scores, target);
        tmr.push_back({{"fmr_target", target},
                       {"tmr", r.tmr},
                       {"threshold", r.threshold},
                       {"quantized", r.quantized}});
        FairnessReport fr = fairness_at(scores, target);
        json groups = json::object();
        for (const auto& [g, f] : fr.per_group_fmr) groups[g] = f;
        fairness.push_back({{"fmr_target", target},
                            {"threshold", fr.threshold_used},
                            {"per_group_fmr", groups},
                            {"gini", fr.gini}});
    }

    // leakage probes, trained on the released train split
    json probes = json::object();
    for (ProbeKind kind : config.eval.probes) {
        ProbeConfig pc;
        pc.epochs = config.eval.probe_epochs;
        pc.batch_size = config.eval.probe_batch_size;
        pc.adam.lr = config.eval.probe_lr;
        pc.seed = Rng(config.seed).stream(std::string("probe-") + probe_kind_name(kind)).seed();
        Probe probe = train_probe(kind, z_train, y_train, pc);
        probes[probe_kind_name(kind)] = {
            {"train_accuracy", probe_accuracy(probe, z_train, y_train)},
            {"eval_accuracy", probe_accuracy(probe, z_eval, y_eval)}};
    }

    EvalOutcome out;
    out.report = json{{"transform", transform.name()},
                      {"seed", config.seed},
                      {"config_hash", config_hash(config)},
                      {"verification",
                       {{"tmr", tmr},
                        {"auc", roc.auc},
                        {"eer", eer.eer},
                        {"eer_threshold", eer.threshold}}},
                      {"leakage",
                       {{"majority_train", majority_baseline(y_train)},
                        {"majority_eval", majority_baseline(y_eval)},
                        {"probes", probes}}},
                      {"fairness", fairness}};
    out.csv = scores_csv(scores);
    return out;
}

}  // namespace

void cmd_synth(const RunConfig& config, const std::string& out_path) {
    EmbeddingStore store = generate(config.synth);
    if (const fs::path dir = fs::path(out_path).parent_path(); !dir.empty())
        fs::create_directories(dir);
    save_store(out_path, store);
    json manifest{{"seed", config.synth.seed},
                  {"config_hash", config_hash(config)},
                  {"hash_algorithm", "fnv1a64"},
                  {"records", store.count()},
                  {"dim", store.dim},
                  {"num_classes", store.num_classes}};
    write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");
}

void cmd_train(const RunConfig& config, const std::string& method, const std::string& store_path,
               const std::string& out_dir) {
    EmbeddingStore store = load_store(store_path);
    auto [train_store, eval_store] = split(store, config.eval.train_fraction, config.seed);
    fs::create_directories(out_dir);

    const Tensor x = train_store.matrix();
    const std::vector<int> y = train_store.labels0();

    if (method == "vleed" || method == "pfrnet") {
        VleedConfig mc = config.model;
        if (mc.input_dim != store.dim)
            throw ConfigError("model.input_dim " + std::to_string(mc.input_dim) +
                              " != store dim " + std::to_string(store.dim));
        if (mc.num_classes != store.num_classes)
            throw ConfigError("model.num_classes != store num_classes");
        const TrainMethod tm =
            method == "vleed" ? TrainMethod::kVleed : TrainMethod::kPfrnet;
        auto [model, trace] = train_vleed(x, y, mc, config.train, tm);
        save_model((fs::path(out_dir) / "model.bin").string(), model);
        write_text((fs::path(out_dir) / "trace.json").string(), trace_to_json(trace).dump(2) + "\n");
    } else if (method == "inlp") {
        ProjectionOp p = inlp_fit(x, y, config.inlp);
        save_projection((fs::path(out_dir) / "projection.bin").string(), p);
    } else if (method == "ive") {
        DimRanking r = ive_rank(x, y, config.ive.forest);
        save_ranking((fs::path(out_dir) / "ranking.bin").string(), r);
    } else {
        throw ConfigError("unknown method '" + method +
                          "' (expected vleed, pfrnet, inlp or ive)");
    }
}

void cmd_eval(const RunConfig& config, const std::string& artifact, const std::string& store_path,
              const std::string& out_dir) {
    EmbeddingStore store = load_store(store_path);
    Transform transform = load_transform(artifact, config);
    fs::create_directories(out_dir);
    EvalOutcome out = evaluate_transform(config, transform, store);
    validate_against_schema(out.report, metrics_report_schema(), "metrics report");
    write_text((fs::path(out_dir) / "report.json").string(), out.report.dump(2) + "\n");
    write_text((fs::path(out_dir) / "scores.csv").string(), out.csv);
}

void cmd_sweep(const RunConfig& config, std::vector<double> lambdas, const std::string& method,
               const std::string& store_path, const std::string& out_dir) {
    if (lambdas.empty()) throw ConfigError("sweep: lambda list must be non-empty");
    for (double l : lambdas)
        if (l < 0.0) throw ConfigError("sweep: lambdas must be >= 0");
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
    if (method != "vleed" && method != "pfrnet")
        throw ConfigError("sweep: method must be vleed or pfrnet");

    EmbeddingStore store = load_store(store_path);
    fs::create_directories(out_dir);

    json rows = json::array();
    std::string csv;
    {
        csv = "lambda";
        for (double t : config.eval.fmr_targets) csv += ",tmr_at_" + format_double(t);
        csv += ",auc,eer,eer_threshold";
        for (ProbeKind k : config.eval.probes)
            csv += std::string(",acc_") + probe_kind_name(k);
        csv += ",majority_eval";
        for (double t : config.eval.fmr_targets) csv += ",gini_at_" + format_double(t);
        csv += ",leakage_reduction\n";
    }

    for (double lambda : lambdas) {
        try {
            RunConfig member = config;
            member.model.lambda_dis = lambda;
            const std::string sub =
                (fs::path(out_dir) / ("lambda_" + format_double(lambda))).string();
            cmd_train(member, method, store_path, sub);
            Transform transform =
                load_transform((fs::path(sub) / "model.bin").string(), member);
            EvalOutcome out = evaluate_transform(member, transform, store);
            write_text((fs::path(sub) / "report.json").string(), out.report.dump(2) + "\n");
            write_text((fs::path(sub) / "scores.csv").string(), out.csv);

            json row;
            row["lambda"] = lambda;
            row["verification"] = out.report.at("verification");
            row["leakage"] = out.report.at("leakage");
            row["fairness"] = out.report.at("fairness");
            double acc_sum = 0.0;
            std::size_t acc_n = 0;
            csv += format_double(lambda);
            for (const auto& p : out.report.at("verification").at("tmr"))
                csv += "," + format_double(p.at("tmr").get<double>());
            csv += "," + format_double(out.report.at("verification").at("auc").get<double>());
            csv += "," + format_double(out.report.at("verification").at("eer").get<double>());
            csv += "," +
                   format_double(out.report.at("verification").at("eer_threshold").get<double>());
            for (ProbeKind k : config.eval.probes) {
                const double acc = out.report.at("leakage")
                                       .at("probes")
                                       .at(probe_kind_name(k))
                                       .at("eval_accuracy")
                                       .get<double>();
                acc_sum += acc;
                ++acc_n;
                csv += "," + format_double(acc);
            }
            csv += "," +
                   format_double(out.report.at("leakage").at("majority_eval").get<double>());
            for (const auto& f : out.report.at("fairness"))
                csv += "," + format_double(f.at("gini").get<double>());
            const double leakage_reduction =
                acc_n > 0 ? 1.0 - acc_sum / static_cast<double>(acc_n) : 0.0;
            row["leakage_reduction"] = leakage_reduction;
            csv += "," + format_double(leakage_reduction) + "\n";
            rows.push_back(std::move(row));
        } catch (const std::exception& e) {
            throw std::runtime_error("sweep member lambda=" + format_double(lambda) +
                                     " failed: " + e.what());
        }
    }

    json combined{{"method", method},
                  {"seed", config.seed},
                  {"config_hash", config_hash(config)},
                  {"rows", rows}};
    write_text((fs::path(out_dir) / "sweep.json").string(), combined.dump(2) + "\n");
    write_text((fs::path(out_dir) / "sweep.csv").string(), csv);
}

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ContractViolation& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitIo;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        // sweep members wrap their cause; keep the numeric/config hints
        const std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        if (msg.find("numeric") != std::string::npos ||
            msg.find("non-finite") != std::string::npos)
            return kExitNumeric;
        return kExitConfig;
    }
}

// ---- schema ----

void validate_against_schema(const json& doc, const json& schema, const std::string& where) {
    if (schema.contains("enum")) {
        for (const auto& v : schema.at("enum"))
            if (v == doc) return;
        throw FormatError(where + ": value not in enum");
    }
    if (schema.contains("type")) {
        const std::string type = schema.at("type").get<std::string>();
        const bool ok = (type == "object" && doc.is_object()) ||
                        (type == "array" && doc.is_array()) ||
                        (type == "string" && doc.is_string()) ||
                        (type == "number" && doc.is_number()) ||
                        (type == "integer" && doc.is_number_integer()) ||
                        (type == "boolean" && doc.is_boolean());
        if (!ok) throw FormatError(where + ": expected type " + type);
    }
    if (doc.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema.at("required"))
                if (!doc.contains(key.get<std::string>()))
                    throw FormatError(where + ": missing required key '" +
                                      key.get<std::string>() + "'");
        const json props =
            schema.contains("properties") ? schema.at("properties") : json::object();
        for (const auto& [key, value] : doc.items()) {
            if (props.contains(key)) {
                validate_against_schema(value, props.at(key), where + "." + key);
            } else if (schema.contains("additionalProperties")) {
                const json& ap = schema.at("additionalProperties");
                if (ap.is_boolean() && !ap.get<bool>())
                    throw FormatError(where + ": unexpected key '" + key + "'");
                if (ap.is_object()) validate_against_schema(value, ap, where + "." + key);
            }
        }
    }
    if (doc.is_array() && schema.contains("items"))
        for (std::size_t i = 0; i < doc.size(); ++i)
            validate_against_schema(doc[i], schema.at("items"),
                                    where + "[" + std::to_string(i) + "]");
}

json metrics_report_schema() {
    static const char* kSchema = R"JSON({
  "type": "object",
  "required": ["transform", "seed", "config_hash", "verification", "leakage", "fairness"],
  "additionalProperties": false,
  "properties": {
    "transform": {"type": "string", "enum": ["identity", "vleed", "inlp", "ive"]},
    "seed": {"type": "integer"},
    "config_hash": {"type": "string"},
    "verification": {
      "type": "object",
      "required": ["tmr", "auc", "eer", "eer_threshold"],
      "additionalProperties": false,
      "properties": {
        "tmr": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["fmr_target", "tmr", "threshold", "quantized"],
            "additionalProperties": false,
            "properties": {
              "fmr_target": {"type": "number"},
              "tmr": {"type": "number"},
              "threshold": {"type": "number"},
              "quantized": {"type": "boolean"}
            }
          }
        },
        "auc": {"type": "number"},
        "eer": {"type": "number"},
        "eer_threshold": {"type": "number"}
      }
    },
    "leakage": {
      "type": "object",
      "required": ["majority_train", "majority_eval", "probes"],
      "additionalProperties": false,
      "properties": {
        "majority_train": {"type": "number"},
        "majority_eval": {"type": "number"},
        "probes": {
          "type": "object",
          "additionalProperties": {
            "type": "object",
            "required": ["train_accuracy", "eval_accuracy"],
            "additionalProperties": false,
            "properties": {
              "train_accuracy": {"type": "number"},
              "eval_accuracy": {"type": "number"}
            }
          }
        }
      }
    },
    "fairness": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["fmr_target", "threshold", "per_group_fmr", "gini"],
        "additionalProperties": false,
        "properties": {
          "fmr_target": {"type": "number"},
          "threshold": {"type": "number"},
          "per_group_fmr": {"type": "object", "additionalProperties": {"type": "number"}},
          "gini": {"type": "number"}
        }
      }
    }
  }
})JSON";
    return json::parse(kSchema);
}

}  // namespace vleed::cli
