#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace convlr {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

struct CommonOptions {
    std::filesystem::path config;  // empty: built-in defaults
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
};

struct TrainOptions {
    std::filesystem::path dataset;
    bool mask_lstm = false;
    bool no_discriminator = false;
    bool no_initializer = false;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> spokes;
};

struct ReconstructOptions {
    std::filesystem::path dataset;
    std::string method = "convlr";  // convlr | grasp | regrid | truth
    std::filesystem::path checkpoint;
    std::vector<std::size_t> spokes;  // empty: config / checkpoint default
    std::vector<std::size_t> frames;  // empty: evaluation.frame_counts
    std::string split;                // empty: evaluation.split
};

struct EvaluateOptions {
    std::filesystem::path dataset;
    std::vector<std::filesystem::path> recon_dirs;
};

struct GradcheckOptions {
    bool sabotage = false;
    double tolerance = 1e-4;
};

int cmd_simulate(const CommonOptions& common, std::ostream& out, std::ostream& err);
int cmd_train(const CommonOptions& common, const TrainOptions& opts, std::ostream& out, std::ostream& err);
int cmd_reconstruct(const CommonOptions& common, const ReconstructOptions& opts, std::ostream& out,
                    std::ostream& err);
int cmd_evaluate(const CommonOptions& common, const EvaluateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out, std::ostream& err);

/// Reconstruction image path inside a reconstruct output directory.
std::filesystem::path recon_frame_path(const std::filesystem::path& recon_dir, std::size_t spokes,
                                       std::size_t frames, const std::string& id, std::size_t t);

}  // namespace convlr
