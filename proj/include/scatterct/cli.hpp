#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sct {

/// Command runners behind the scatterct binary. They throw ConfigError /
/// DataMismatch / SolverDivergence; main() maps those to exit codes 2 / 3 / 4.
int cmd_simulate(const std::filesystem::path& config_path, const std::filesystem::path& out_dir);
int cmd_reconstruct(const std::filesystem::path& data_dir, const std::string& mode,
                    const std::filesystem::path& out_dir);
int cmd_evaluate(const std::vector<std::filesystem::path>& recon_dirs,
                 const std::filesystem::path& truth_dir, const std::filesystem::path& out_dir);

}  // namespace sct
