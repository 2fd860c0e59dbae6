#pragma once

#include <string>
#include <vector>

namespace selm {

// Stable exit codes shared by the CLI and the tests:
//   0 success, 2 config error, 3 data error, 4 divergence,
//   5 gradient mismatch, 1 anything else.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitGradient = 5;

struct TrainArgs {
    std::string config_path; // empty -> schema defaults
    std::string data_path;
    std::string out_dir;
};

struct EvaluateArgs {
    std::string checkpoint_path;
    std::string data_path;
    std::string out_dir;
    std::vector<int> horizons;
    bool plot = false;
};

struct AblateArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir;
    std::vector<int> horizons; // empty -> native horizon only
};

struct GradcheckArgs {
    std::string config_path; // optional; dims are clamped to the tiny caps anyway
};

struct ExportArgs {
    std::string checkpoint_path;
    std::string data_path;
    std::string out_dir;
};

int cmd_train(const TrainArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_ablate(const AblateArgs& args);
int cmd_gradcheck(const GradcheckArgs& args);
int cmd_export_embeddings(const ExportArgs& args);

} // namespace selm
