#include <CLI11.hpp>
#include <exception>
#include <iostream>

#include "scatterct/cli.hpp"
#include "scatterct/io.hpp"
#include "scatterct/recon.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Energy-resolved attenuation + Compton-scatter simulation and joint "
               "density/photoelectric reconstruction"};
  app.require_subcommand(1);

  std::string config_path, data_dir, mode = "both", truth_dir, out_dir;
  std::vector<std::string> recon_dirs;

  CLI::App* sim = app.add_subcommand("simulate", "Simulate sinograms for a scene config");
  sim->add_option("--config", config_path, "Scene config JSON")->required();
  sim->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* rec = app.add_subcommand("reconstruct", "Reconstruct density and photoelectric maps");
  rec->add_option("--data", data_dir, "Directory produced by simulate")->required();
  rec->add_option("--mode", mode, "Data fusion mode: atten | scatter | both")->required();
  rec->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* ev = app.add_subcommand("evaluate", "Score reconstructions against ground truth");
  ev->add_option("--recon", recon_dirs, "Reconstruction directory (repeatable)")->required();
  ev->add_option("--truth", truth_dir, "Directory produced by simulate")->required();
  ev->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }

  try {
    if (sim->parsed()) return sct::cmd_simulate(config_path, out_dir);
    if (rec->parsed()) return sct::cmd_reconstruct(data_dir, mode, out_dir);
    if (ev->parsed()) {
      std::vector<std::filesystem::path> dirs(recon_dirs.begin(), recon_dirs.end());
      return sct::cmd_evaluate(dirs, truth_dir, out_dir);
    }
  } catch (const sct::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sct::DataMismatch& e) {
    std::cerr << "data mismatch: " << e.what() << "\n";
    return 3;
  } catch (const sct::SolverDivergence& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
