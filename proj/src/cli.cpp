#include "scatterct/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "scatterct/eval.hpp"
#include "scatterct/io.hpp"
#include "scatterct/recon.hpp"

namespace sct {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kRhoWindowLo = 0.0, kRhoWindowHi = 2.4;  // display range, g/cm^3
constexpr double kPWindowLo = 0.0, kPWindowHi = 0.6;      // display range, cm^-1

int parse_threads_env() {
  // SCATTERCT_THREADS caps internal parallelism; execution is sequential, so
  // any positive cap is honored.
  const char* env = std::getenv("SCATTERCT_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  if (v < 1) throw ConfigError("SCATTERCT_THREADS must be a positive integer");
  return v;
}

Phantom phantom_from_config(const PhantomConfig& pc, const Grid2D& grid) {
  if (!pc.name.empty()) return make_phantom(pc.name, grid);
  return make_phantom(grid, pc.disks);
}

std::string mode_name(DataMode m) {
  switch (m) {
    case DataMode::kAttenOnly:
      return "atten";
    case DataMode::kScatterOnly:
      return "scatter";
    case DataMode::kBoth:
      return "both";
  }
  return "?";
}

DataMode mode_from_name(const std::string& name) {
  if (name == "atten") return DataMode::kAttenOnly;
  if (name == "scatter") return DataMode::kScatterOnly;
  if (name == "both") return DataMode::kBoth;
  throw ConfigError("unknown mode '" + name + "' (use atten, scatter or both)");
}

/// Scale results persisted under <out>/checkpoint so an interrupted
/// reconstruction resumes from the last completed scale.
class FileCheckpoint final : public ScaleCheckpoint {
 public:
  FileCheckpoint(fs::path dir, uint64_t data_hash) : dir_(std::move(dir)), hash_(data_hash) {
    fs::create_directories(dir_);
  }

  std::optional<ScaleResult> load(int scale_n) override {
    const fs::path meta = dir_ / ("scale_" + std::to_string(scale_n) + ".json");
    const fs::path raster = dir_ / ("scale_" + std::to_string(scale_n) + "_rho.csv");
    if (!fs::exists(meta) || !fs::exists(raster)) return std::nullopt;
    const json j = read_json_file(meta);
    if (j.value("data_hash", uint64_t{0}) != hash_) return std::nullopt;  // stale
    ScaleResult r;
    r.scale_n = j["scale_n"].get<int>();
    r.lambda = j["lambda"].get<double>();
    r.discrepancy = j["discrepancy"].get<double>();
    r.trace.epi_iterations = j["epi_iterations"].get<int>();
    r.trace.fpi_counts = j["fpi_counts"].get<std::vector<int>>();
    r.rho = read_raster_csv(raster);
    resumed_.push_back(scale_n);
    return r;
  }

  void save(const ScaleResult& r) override {
    json j;
    j["data_hash"] = hash_;
    j["scale_n"] = r.scale_n;
    j["lambda"] = r.lambda;
    j["discrepancy"] = r.discrepancy;
    j["epi_iterations"] = r.trace.epi_iterations;
    j["fpi_counts"] = r.trace.fpi_counts;
    write_raster_csv(dir_ / ("scale_" + std::to_string(r.scale_n) + "_rho.csv"), r.rho,
                     r.scale_n);
    write_json_file(dir_ / ("scale_" + std::to_string(r.scale_n) + ".json"), j);
  }

  const std::vector<int>& resumed_scales() const { return resumed_; }

 private:
  fs::path dir_;
  uint64_t hash_;
  std::vector<int> resumed_;
};

}  // namespace

int cmd_simulate(const fs::path& config_path, const fs::path& out_dir) {
  parse_threads_env();
  const SceneConfig cfg = load_scene_config(config_path);
  fs::create_directories(out_dir);

  const Phantom phantom = phantom_from_config(cfg.phantom, cfg.geometry.grid);
  const MaterialMap truth = phantom.map();

  const AttenuationSystem atten = build_attenuation_system(cfg.geometry, cfg.recon.kappa);
  auto model = std::make_shared<ScatterModel>(cfg.geometry, cfg.spectrum, cfg.recon.kappa);
  const ScatterSystem scatter = assemble_scatter(model, truth);

  SinogramSet data;
  data.g_A = forward_attenuation(atten, truth);
  data.g_C = forward_scatter(scatter, truth.rho);
  data.n_sources = static_cast<int>(cfg.geometry.sources.size());
  data.n_detectors = static_cast<int>(cfg.geometry.detectors.size());
  data.n_atten_bins = cfg.geometry.atten_bins.count;
  data.n_scatter_bins = cfg.geometry.scatter_bins.count;
  data.grid_n = cfg.geometry.grid.n;
  data.seed = cfg.noise.seed;

  if (cfg.noise.snr_db.has_value()) {
    // independent noise streams for the two datasets
    NoiseResult na = add_noise(data.g_A, *cfg.noise.snr_db, cfg.noise.seed);
    NoiseResult nc = add_noise(data.g_C, *cfg.noise.snr_db, cfg.noise.seed + 1);
    data.g_A = std::move(na.noisy);
    data.g_C = std::move(nc.noisy);
    data.sigma_A = na.sigma;
    data.sigma_C = nc.sigma;
  }

  const uint64_t ghash = geometry_hash(cfg.geometry);
  const uint64_t chash = fnv1a64(cfg.resolved.dump());
  write_sinogram(out_dir / "sinogram.bin", data, ghash, chash);

  const int n = cfg.geometry.grid.n;
  write_raster_csv(out_dir / "rho_true.csv", truth.rho, n);
  write_raster_csv(out_dir / "p_true.csv", truth.p, n);
  write_raster_pgm(out_dir / "rho_true.pgm", truth.rho, n, kRhoWindowLo, kRhoWindowHi);
  write_raster_pgm(out_dir / "p_true.pgm", truth.p, n, kPWindowLo, kPWindowHi);

  json manifest;
  manifest["command"] = "simulate";
  manifest["config"] = cfg.resolved;
  manifest["config_hash"] = chash;
  manifest["geometry_hash"] = ghash;
  manifest["sigma_A"] = data.sigma_A;
  manifest["sigma_C"] = data.sigma_C;
  manifest["seed"] = cfg.noise.seed;
  manifest["outputs"] = {{"sinogram", "sinogram.bin"},
                         {"rho_true", "rho_true.csv"},
                         {"p_true", "p_true.csv"}};
  write_json_file(out_dir / "manifest.json", manifest);

  std::cout << "simulate: wrote " << data.g_A.size() << " attenuation and " << data.g_C.size()
            << " scatter observations to " << out_dir.string() << "\n";
  return 0;
}

int cmd_reconstruct(const fs::path& data_dir, const std::string& mode, const fs::path& out_dir) {
  parse_threads_env();
  const json data_manifest = [&] {
    const fs::path p = data_dir / "manifest.json";
    if (!fs::exists(p)) throw DataMismatch("missing manifest " + p.string());
    return read_json_file(p);
  }();
  SceneConfig cfg = parse_scene_config(data_manifest["config"].dump(), "manifest config");
  cfg.recon.mode = mode_from_name(mode);

  const SinogramFile sino = read_sinogram(data_dir / "sinogram.bin");
  const uint64_t ghash = geometry_hash(cfg.geometry);
  if (sino.geometry_hash != ghash)
    throw DataMismatch("geometry hash mismatch between sinogram and config");
  if (sino.config_hash != data_manifest["config_hash"].get<uint64_t>())
    throw DataMismatch("config hash mismatch between sinogram and manifest");

  fs::create_directories(out_dir);

  ReconProblem prob;
  prob.geom = &cfg.geometry;
  prob.spectrum = &cfg.spectrum;
  prob.g_A = sino.data.g_A;
  prob.g_C = sino.data.g_C;
  prob.sigma_A = sino.data.sigma_A;
  prob.sigma_C = sino.data.sigma_C;
  prob.cfg = cfg.recon;

  // ground truth travels with simulated data; use it for trace RMSE
  std::optional<MaterialMap> truth;
  const Phantom phantom = phantom_from_config(cfg.phantom, cfg.geometry.grid);
  if (fs::exists(data_dir / "rho_true.csv")) truth = phantom.map();

  FileCheckpoint ckpt(out_dir / "checkpoint", sino.config_hash);
  const CyclicResult result = cyclic_descent(prob, truth ? &*truth : nullptr, &ckpt);

  const int n = cfg.geometry.grid.n;
  write_raster_csv(out_dir / "rho_hat.csv", result.rho, n);
  write_raster_csv(out_dir / "p_hat.csv", result.p, n);
  write_raster_pgm(out_dir / "rho_hat.pgm", result.rho, n, kRhoWindowLo, kRhoWindowHi);
  write_raster_pgm(out_dir / "p_hat.pgm", result.p, n, kPWindowLo, kPWindowHi);

  json trace;
  trace["mode"] = mode_name(cfg.recon.mode);
  trace["lambda_rho"] = result.trace.lambda_rho;
  trace["lambda_p"] = result.trace.lambda_p;
  trace["converged_n"] = result.trace.converged_n;
  trace["fpi_counts"] = result.trace.fpi_counts;
  trace["resumed_scales"] = ckpt.resumed_scales();
  trace["multiscale"] = json::array();
  for (const ScaleResult& sr : result.trace.multiscale.scales) {
    json js;
    js["scale"] = sr.scale_n;
    js["lambda"] = sr.lambda;
    js["discrepancy"] = sr.discrepancy;
    js["epi_iterations"] = sr.trace.epi_iterations;
    js["fpi_counts"] = sr.trace.fpi_counts;
    if (truth) {
      const Phantom ph_s =
          phantom_from_config(cfg.phantom, Grid2D(sr.scale_n, cfg.geometry.grid.extent_cm,
                                                  cfg.geometry.grid.origin));
      js["rmse_rho"] = rmse(sr.rho, ph_s.map().rho);
    }
    write_raster_csv(out_dir / ("rho_scale_" + std::to_string(sr.scale_n) + ".csv"), sr.rho,
                     sr.scale_n);
    write_raster_pgm(out_dir / ("rho_scale_" + std::to_string(sr.scale_n) + ".pgm"), sr.rho,
                     sr.scale_n, kRhoWindowLo, kRhoWindowHi);
    trace["multiscale"].push_back(js);
  }
  trace["iterates"] = json::array();
  for (const CyclicIterate& it : result.trace.iterates) {
    json ji;
    ji["n"] = it.n;
    ji["rho_change"] = it.rho_change;
    if (it.rmse_rho >= 0.0) ji["rmse_rho"] = it.rmse_rho;
    if (it.rmse_p >= 0.0) ji["rmse_p"] = it.rmse_p;
    write_raster_csv(out_dir / ("rho_n" + std::to_string(it.n) + ".csv"), it.rho, n);
    write_raster_csv(out_dir / ("p_n" + std::to_string(it.n) + ".csv"), it.p, n);
    trace["iterates"].push_back(ji);
  }
  write_json_file(out_dir / "trace.json", trace);

  json manifest;
  manifest["command"] = "reconstruct";
  manifest["mode"] = mode_name(cfg.recon.mode);
  manifest["data_config_hash"] = sino.config_hash;
  manifest["geometry_hash"] = ghash;
  manifest["grid_n"] = n;
  manifest["lambda_rho"] = result.trace.lambda_rho;
  manifest["lambda_p"] = result.trace.lambda_p;
  manifest["converged_n"] = result.trace.converged_n;
  write_json_file(out_dir / "manifest.json", manifest);

  std::cout << "reconstruct[" << mode << "]: lambda_rho=" << result.trace.lambda_rho
            << " lambda_p=" << result.trace.lambda_p
            << " converged_n=" << result.trace.converged_n << "\n";
  return 0;
}

int cmd_evaluate(const std::vector<fs::path>& recon_dirs, const fs::path& truth_dir,
                 const fs::path& out_dir) {
  parse_threads_env();
  if (recon_dirs.empty()) throw ConfigError("evaluate: need at least one --recon directory");
  const json truth_manifest = read_json_file(truth_dir / "manifest.json");
  const SceneConfig cfg =
      parse_scene_config(truth_manifest["config"].dump(), "truth manifest config");
  const uint64_t truth_chash = truth_manifest["config_hash"].get<uint64_t>();
  const uint64_t truth_ghash = truth_manifest["geometry_hash"].get<uint64_t>();

  int n_truth = 0;
  const std::vector<double> rho_true = read_raster_csv(truth_dir / "rho_true.csv", &n_truth);
  const std::vector<double> p_true = read_raster_csv(truth_dir / "p_true.csv");
  const Phantom phantom = phantom_from_config(cfg.phantom, cfg.geometry.grid);

  fs::create_directories(out_dir);
  json metrics;
  metrics["modes"] = json::array();

  for (const fs::path& rdir : recon_dirs) {
    const json rmanifest = read_json_file(rdir / "manifest.json");
    if (rmanifest["data_config_hash"].get<uint64_t>() != truth_chash ||
        rmanifest["geometry_hash"].get<uint64_t>() != truth_ghash)
      throw DataMismatch("provenance mismatch: " + rdir.string() +
                         " was not reconstructed from " + truth_dir.string());
    int n_est = 0;
    const std::vector<double> rho_hat = read_raster_csv(rdir / "rho_hat.csv", &n_est);
    const std::vector<double> p_hat = read_raster_csv(rdir / "p_hat.csv");
    if (n_est != n_truth) throw DataMismatch("grid mismatch between recon and truth rasters");

    const std::string mode = rmanifest["mode"].get<std::string>();
    json jm;
    jm["mode"] = mode;
    jm["rmse_rho"] = rmse(rho_hat, rho_true);
    jm["rmse_p"] = rmse(p_hat, p_true);

    // per-iterate and per-scale errors from the saved trace rasters
    const json trace = read_json_file(rdir / "trace.json");
    jm["per_scale"] = json::array();
    for (const auto& js : trace["multiscale"]) {
      const int sn = js["scale"].get<int>();
      const Phantom ph_s = phantom_from_config(
          cfg.phantom, Grid2D(sn, cfg.geometry.grid.extent_cm, cfg.geometry.grid.origin));
      const std::vector<double> r =
          read_raster_csv(rdir / ("rho_scale_" + std::to_string(sn) + ".csv"));
      jm["per_scale"].push_back({{"scale", sn}, {"rmse_rho", rmse(r, ph_s.map().rho)}});
    }
    jm["per_iterate"] = json::array();
    for (const auto& ji : trace["iterates"]) {
      const int it_n = ji["n"].get<int>();
      const std::vector<double> r = read_raster_csv(rdir / ("rho_n" + std::to_string(it_n) + ".csv"));
      const std::vector<double> pv = read_raster_csv(rdir / ("p_n" + std::to_string(it_n) + ".csv"));
      jm["per_iterate"].push_back(
          {{"n", it_n}, {"rmse_rho", rmse(r, rho_true)}, {"rmse_p", rmse(pv, p_true)}});
    }

    const EllipseReport report = material_ellipses(rho_hat, p_hat, phantom);
    write_text_file(out_dir / ("ellipses_" + mode + ".csv"), ellipse_report_csv(report));
    write_text_file(out_dir / ("ellipses_" + mode + ".svg"), ellipse_report_svg(report));
    write_raster_pgm(out_dir / ("rho_hat_" + mode + ".pgm"), rho_hat, n_est, kRhoWindowLo,
                     kRhoWindowHi);
    write_raster_pgm(out_dir / ("p_hat_" + mode + ".pgm"), p_hat, n_est, kPWindowLo, kPWindowHi);

    metrics["modes"].push_back(jm);
  }

  write_raster_pgm(out_dir / "rho_true.pgm", rho_true, n_truth, kRhoWindowLo, kRhoWindowHi);
  write_raster_pgm(out_dir / "p_true.pgm", p_true, n_truth, kPWindowLo, kPWindowHi);

  if (recon_dirs.size() == 3) {
    json table = json::array();
    for (const auto& jm : metrics["modes"])
      table.push_back(
          {{"mode", jm["mode"]}, {"rmse_rho", jm["rmse_rho"]}, {"rmse_p", jm["rmse_p"]}});
    metrics["comparison"] = table;
  }
  write_json_file(out_dir / "metrics.json", metrics);

  std::cout << "evaluate: wrote metrics for " << recon_dirs.size() << " reconstruction(s) to "
            << out_dir.string() << "\n";
  return 0;
}

}  // namespace sct
