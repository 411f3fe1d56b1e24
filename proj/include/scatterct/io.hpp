#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scatterct/eval.hpp"
#include "scatterct/forward.hpp"
#include "scatterct/geometry.hpp"
#include "scatterct/recon.hpp"

namespace sct {

/// Config / CLI usage problems (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Provenance or shape mismatch between artifacts (exit code 3).
class DataMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhantomConfig {
  std::string name;                 ///< builtin name, or empty when disks given
  std::vector<DiskSpec> disks;
};

struct NoiseConfig {
  std::optional<double> snr_db;
  uint64_t seed = 0;
};

/// Fully validated scene description (schema version 1). Unknown keys are
/// rejected with their JSON path.
struct SceneConfig {
  ScanGeometry geometry;
  PhantomConfig phantom;
  Spectrum spectrum;
  NoiseConfig noise;
  ReconConfig recon;
  nlohmann::json resolved;  ///< canonical echo of the parsed config
};

SceneConfig load_scene_config(const std::filesystem::path& path);
SceneConfig parse_scene_config(const std::string& text, const std::string& origin = "config");

/// FNV-1a 64-bit over a canonical string rendering.
uint64_t fnv1a64(const std::string& data);
uint64_t geometry_hash(const ScanGeometry& geom);

/// Sinogram container: magic + JSON header + little-endian f64 payloads.
void write_sinogram(const std::filesystem::path& path, const SinogramSet& data,
                    uint64_t geom_hash, uint64_t config_hash);
struct SinogramFile {
  SinogramSet data;
  uint64_t geometry_hash = 0;
  uint64_t config_hash = 0;
  nlohmann::json header;
};
SinogramFile read_sinogram(const std::filesystem::path& path);

/// Raster IO: CSV of raw doubles (n rows) and 16-bit PGM windowed to
/// [win_lo, win_hi].
void write_raster_csv(const std::filesystem::path& path, std::span<const double> img, int n);
std::vector<double> read_raster_csv(const std::filesystem::path& path, int* n_out = nullptr);
void write_raster_pgm(const std::filesystem::path& path, std::span<const double> img, int n,
                      double win_lo, double win_hi);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace sct
