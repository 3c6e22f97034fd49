#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vleed/baselines.hpp"
#include "vleed/eval.hpp"
#include "vleed/model.hpp"
#include "vleed/synthdata.hpp"
#include "vleed/training.hpp"

namespace vleed::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

struct EvalConfig {
    std::vector<double> fmr_targets{1e-3, 1e-1};
    std::vector<ProbeKind> probes{ProbeKind::kLR, ProbeKind::kMlpS, ProbeKind::kMlpD};
    std::size_t probe_epochs = 30;
    std::size_t probe_batch_size = 256;
    double probe_lr = 1e-3;
    double train_fraction = 0.8;
    std::size_t num_genuine = 2000;
    std::size_t num_impostor = 20000;
};

struct IveCliConfig {
    ForestConfig forest;
    std::size_t n_e = 0;  // dimensions to zero at apply time
};

// One JSON document configures everything; unknown keys are rejected and
// every omitted key falls back to the documented default.
struct RunConfig {
    std::uint64_t seed = 0;
    SynthConfig synth;
    VleedConfig model;
    TrainConfig train;
    EvalConfig eval;
    InlpConfig inlp;
    IveCliConfig ive;
    std::vector<double> sweep_lambdas{0.0, 0.1, 1.0, 10.0, 100.0, 1000.0};
};

RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::string& path);  // applies VLEED_SEED override

// FNV-1a over the canonical (parsed, re-serialized) config document.
std::string config_hash(const RunConfig& config);

nlohmann::ordered_json run_config_to_json(const RunConfig& config);

// ---- subcommands (throw on error; main translates to exit codes) ----

void cmd_synth(const RunConfig& config, const std::string& out_path);
void cmd_train(const RunConfig& config, const std::string& method,
               const std::string& store_path, const std::string& out_dir);
void cmd_eval(const RunConfig& config, const std::string& artifact,
              const std::string& store_path, const std::string& out_dir);
void cmd_sweep(const RunConfig& config, std::vector<double> lambdas, const std::string& method,
               const std::string& store_path, const std::string& out_dir);

// Exception -> exit-code mapping used by main() and by tests.
int run_guarded(const std::function<void()>& body);

// Minimal JSON-schema (subset) validation: type/required/properties/items/
// additionalProperties/enum. Throws FormatError on violation.
void validate_against_schema(const nlohmann::ordered_json& doc,
                             const nlohmann::ordered_json& schema, const std::string& where);

// The metrics-report schema shipped with the project (embedded copy of
// schemas/metrics_report.schema.json).
nlohmann::ordered_json metrics_report_schema();

}  // namespace vleed::cli
