#pragma once

// Command implementations behind the autoenv executable. Each returns the
// process exit code: 0 success, 1 trial failure, 2 configuration error.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "autoenv/study.hpp"

namespace autoenv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "AUTOENV_OUTPUT_ROOT";

struct CommandOptions {
    std::optional<std::string> benchmark;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> config;
    bool dry_run = false;
    bool quiet = false;

    // analyze / verify / plot
    std::vector<std::filesystem::path> studies;
    std::vector<std::string> criteria;
    std::string criterion = "utopia";
    std::size_t k = 5;
    double fraction = 0.2;
    std::size_t verify_steps = 100000;
    std::size_t eval_every = 0;  // 0: verify_steps / 20
    std::vector<std::string> variants = {"default", "paper-size"};
    std::optional<double> baseline_weight;
    std::vector<double> weights = {0.1, 0.3, 0.5, 0.7, 0.9};
};

/// Defaults, then --config JSON, then flags.
[[nodiscard]] hpo::StudyConfig resolve_config(const CommandOptions& o);
/// --out, else $AUTOENV_OUTPUT_ROOT/<benchmark>, else ./studies/<benchmark>.
[[nodiscard]] std::filesystem::path resolve_study_dir(const CommandOptions& o, const hpo::StudyConfig& c);

/// Runs a command body, mapping exceptions to exit codes with a message on err.
int guarded(const std::function<int()>& body, std::ostream& err);

int cmd_study(const CommandOptions& o, std::ostream& out);
int cmd_baseline(const CommandOptions& o, std::ostream& out);
int cmd_analyze(const CommandOptions& o, std::ostream& out);
int cmd_verify(const CommandOptions& o, std::ostream& out);
int cmd_plot(const CommandOptions& o, std::ostream& out);

/// Weight of the baseline sweep record with the best utopia score among sweep records.
[[nodiscard]] std::optional<double> best_utopia_baseline_weight(const std::vector<hpo::TrialRecord>& sweep);

/// 0.5 for economic dispatch, 0.1 for voltage control, else 0.5.
[[nodiscard]] double default_baseline_weight(opf::BenchmarkKind kind);

}  // namespace autoenv::cli
