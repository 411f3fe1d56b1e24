#include "scatterct/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace sct {

using nlohmann::json;

uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' at " + path);
}

double require_number(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError("missing '" + key + "' at " + path);
  if (!obj[key].is_number()) throw ConfigError("'" + key + "' must be a number at " + path);
  return obj[key].get<double>();
}

Vec2 parse_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError("expected [x, y] at " + path);
  return {j[0].get<double>(), j[1].get<double>()};
}

EnergyBinning parse_binning(const json& j, const std::string& path, double def_width) {
  check_keys(j, {"e_lo_keV", "e_hi_keV", "width_keV"}, path);
  const double lo = j.contains("e_lo_keV") ? require_number(j, "e_lo_keV", path) : 20.0;
  const double hi = j.contains("e_hi_keV") ? require_number(j, "e_hi_keV", path) : 120.0;
  const double w = j.contains("width_keV") ? require_number(j, "width_keV", path) : def_width;
  try {
    return EnergyBinning::from_range(lo, hi, w);
  } catch (const std::exception& e) {
    throw ConfigError(std::string(e.what()) + " at " + path);
  }
}

ScanGeometry parse_geometry(const json& g) {
  check_keys(g, {"grid", "sources", "detectors", "atten_bins", "scatter_bins"}, "/geometry");
  if (!g.contains("grid")) throw ConfigError("missing '/geometry/grid'");
  const json& jg = g["grid"];
  check_keys(jg, {"n", "extent_cm", "origin"}, "/geometry/grid");
  const int n = static_cast<int>(require_number(jg, "n", "/geometry/grid"));
  const double extent = require_number(jg, "extent_cm", "/geometry/grid");
  Vec2 origin{0.0, 0.0};
  if (jg.contains("origin")) origin = parse_point(jg["origin"], "/geometry/grid/origin");
  if (n < 1 || !(extent > 0.0)) throw ConfigError("bad grid at /geometry/grid");

  ScanGeometry geom;
  geom.grid = Grid2D(n, extent, origin);

  if (!g.contains("sources") || (g["sources"].is_string() && g["sources"] == "default")) {
    const double e = extent;
    geom.sources = {Source{{origin.x, origin.y + e / 2.0}},
                    Source{{origin.x + e / 2.0, origin.y}}, Source{{origin.x, origin.y}}};
  } else {
    const json& js = g["sources"];
    if (!js.is_array() || js.empty()) throw ConfigError("'/geometry/sources' must be an array");
    for (size_t i = 0; i < js.size(); ++i)
      geom.sources.push_back(
          Source{parse_point(js[i], "/geometry/sources/" + std::to_string(i))});
  }

  if (!g.contains("detectors")) throw ConfigError("missing '/geometry/detectors'");
  const json& jd = g["detectors"];
  if (jd.is_object()) {
    check_keys(jd, {"layout", "count", "width_cm", "height_cm"}, "/geometry/detectors");
    const std::string layout = jd.contains("layout") ? jd["layout"].get<std::string>() : "";
    if (layout != "top_right")
      throw ConfigError("unsupported detector layout at /geometry/detectors (use 'top_right')");
    const int count = static_cast<int>(require_number(jd, "count", "/geometry/detectors"));
    const double w =
        jd.contains("width_cm") ? require_number(jd, "width_cm", "/geometry/detectors") : 0.1;
    const double h =
        jd.contains("height_cm") ? require_number(jd, "height_cm", "/geometry/detectors") : 0.1;
    const ScanGeometry tmp = default_scan_geometry(n, extent, count, w, h);
    geom.detectors = tmp.detectors;
    // shift for a non-zero origin
    for (Detector& det : geom.detectors) {
      det.center.x += origin.x;
      det.center.y += origin.y;
    }
  } else if (jd.is_array()) {
    for (size_t i = 0; i < jd.size(); ++i) {
      const std::string path = "/geometry/detectors/" + std::to_string(i);
      check_keys(jd[i], {"center", "width_cm", "height_cm", "normal"}, path);
      Detector det;
      det.center = parse_point(jd[i].at("center"), path + "/center");
      det.width_cm = require_number(jd[i], "width_cm", path);
      det.height_cm = require_number(jd[i], "height_cm", path);
      det.normal = parse_point(jd[i].at("normal"), path + "/normal");
      const double nn = norm(det.normal);
      if (!(nn > 0.0)) throw ConfigError("zero detector normal at " + path);
      det.normal.x /= nn;
      det.normal.y /= nn;
      geom.detectors.push_back(det);
    }
  } else {
    throw ConfigError("'/geometry/detectors' must be an object or array");
  }
  if (geom.detectors.size() < 2) throw ConfigError("need at least two detectors");

  geom.atten_bins = g.contains("atten_bins")
                        ? parse_binning(g["atten_bins"], "/geometry/atten_bins", 1.0)
                        : EnergyBinning::from_range(20.0, 120.0, 1.0);
  geom.scatter_bins = g.contains("scatter_bins")
                          ? parse_binning(g["scatter_bins"], "/geometry/scatter_bins", 5.0)
                          : EnergyBinning::from_range(20.0, 120.0, 5.0);
  return geom;
}

PhantomConfig parse_phantom(const json& j) {
  check_keys(j, {"name", "disks"}, "/phantom");
  PhantomConfig out;
  if (j.contains("name")) {
    out.name = j["name"].get<std::string>();
    if (j.contains("disks")) throw ConfigError("'/phantom' takes either name or disks, not both");
    return out;
  }
  if (!j.contains("disks")) throw ConfigError("'/phantom' needs 'name' or 'disks'");
  const json& jd = j["disks"];
  if (!jd.is_array()) throw ConfigError("'/phantom/disks' must be an array");
  for (size_t i = 0; i < jd.size(); ++i) {
    const std::string path = "/phantom/disks/" + std::to_string(i);
    check_keys(jd[i], {"center_cm", "radius_cm", "material"}, path);
    DiskSpec d;
    d.center_cm = parse_point(jd[i].at("center_cm"), path + "/center_cm");
    d.radius_cm = require_number(jd[i], "radius_cm", path);
    const json& jm = jd[i].at("material");
    if (jm.is_string()) {
      const Material* m = find_material(jm.get<std::string>());
      if (!m) throw ConfigError("unknown material at " + path + "/material");
      d.material = *m;
    } else {
      check_keys(jm, {"name", "density_g_cm3", "photoelectric_cm_1"}, path + "/material");
      d.material.name = jm.contains("name") ? jm["name"].get<std::string>() : "custom";
      d.material.density_g_cm3 = require_number(jm, "density_g_cm3", path + "/material");
      d.material.photoelectric_cm_1 = require_number(jm, "photoelectric_cm_1", path + "/material");
    }
    out.disks.push_back(d);
  }
  return out;
}

Spectrum parse_spectrum(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"kind", "e_max_keV", "total_photons", "csv"}, "/spectrum");
  if (j.contains("csv")) {
    std::filesystem::path p = j["csv"].get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return Spectrum::from_csv(p.string());
  }
  const std::string kind = j.contains("kind") ? j["kind"].get<std::string>() : "kramers";
  if (kind != "kramers") throw ConfigError("unsupported spectrum kind at /spectrum");
  const double emax = j.contains("e_max_keV") ? require_number(j, "e_max_keV", "/spectrum") : 140.0;
  const double total =
      j.contains("total_photons") ? require_number(j, "total_photons", "/spectrum") : 1.0e6;
  return Spectrum::kramers(emax, total);
}

NoiseConfig parse_noise(const json& j) {
  check_keys(j, {"snr_db", "seed"}, "/noise");
  NoiseConfig out;
  if (j.contains("snr_db")) out.snr_db = require_number(j, "snr_db", "/noise");
  if (j.contains("seed")) out.seed = j["seed"].get<uint64_t>();
  return out;
}

ReconConfig parse_recon(const json& j) {
  check_keys(j,
             {"mode", "scales", "lambda_rho", "lambda_p", "eps_fpi", "eps_epi", "l_max",
              "max_fpi", "eps_cyclic", "n_max", "rho_init", "lambda_count", "lambda_lo",
              "lambda_hi", "lsqr_tol", "lsqr_max_iter", "lm", "nlm", "kappa"},
             "/recon");
  ReconConfig cfg;
  if (j.contains("mode")) {
    const std::string m = j["mode"].get<std::string>();
    if (m == "atten")
      cfg.mode = DataMode::kAttenOnly;
    else if (m == "scatter")
      cfg.mode = DataMode::kScatterOnly;
    else if (m == "both")
      cfg.mode = DataMode::kBoth;
    else
      throw ConfigError("'/recon/mode' must be atten, scatter or both");
  }
  if (j.contains("scales")) {
    cfg.scales.clear();
    for (const auto& s : j["scales"]) cfg.scales.push_back(s.get<int>());
    if (cfg.scales.empty()) throw ConfigError("'/recon/scales' is empty");
  }
  const auto num = [&](const char* key, double& slot) {
    if (j.contains(key)) slot = require_number(j, key, "/recon");
  };
  num("lambda_rho", cfg.lambda_rho);
  num("lambda_p", cfg.lambda_p);
  num("eps_fpi", cfg.eps_fpi);
  num("eps_epi", cfg.eps_epi);
  num("eps_cyclic", cfg.eps_cyclic);
  num("rho_init", cfg.rho_init);
  num("lambda_lo", cfg.lambda_lo);
  num("lambda_hi", cfg.lambda_hi);
  num("lsqr_tol", cfg.lsqr_tol);
  num("kappa", cfg.kappa);
  if (j.contains("l_max")) cfg.l_max = j["l_max"].get<int>();
  if (j.contains("max_fpi")) cfg.max_fpi = j["max_fpi"].get<int>();
  if (j.contains("n_max")) cfg.n_max = j["n_max"].get<int>();
  if (j.contains("lambda_count")) cfg.lambda_count = j["lambda_count"].get<int>();
  if (j.contains("lsqr_max_iter")) cfg.lsqr_max_iter = j["lsqr_max_iter"].get<int>();
  if (j.contains("lm")) {
    const json& jl = j["lm"];
    check_keys(jl,
               {"damping_init_scale", "damping_up", "damping_down", "max_iter", "step_tol",
                "max_rejects"},
               "/recon/lm");
    if (jl.contains("damping_init_scale"))
      cfg.lm.damping_init_scale = jl["damping_init_scale"].get<double>();
    if (jl.contains("damping_up")) cfg.lm.damping_up = jl["damping_up"].get<double>();
    if (jl.contains("damping_down")) cfg.lm.damping_down = jl["damping_down"].get<double>();
    if (jl.contains("max_iter")) cfg.lm.max_iter = jl["max_iter"].get<int>();
    if (jl.contains("step_tol")) cfg.lm.step_tol = jl["step_tol"].get<double>();
    if (jl.contains("max_rejects")) cfg.lm.max_rejects = jl["max_rejects"].get<int>();
  }
  if (j.contains("nlm")) {
    const json& jn = j["nlm"];
    check_keys(jn, {"patch", "search", "bandwidth_frac"}, "/recon/nlm");
    if (jn.contains("patch")) cfg.nlm.patch = jn["patch"].get<int>();
    if (jn.contains("search")) cfg.nlm.search = jn["search"].get<int>();
    if (jn.contains("bandwidth_frac")) cfg.nlm.bandwidth_frac = jn["bandwidth_frac"].get<double>();
  }
  return cfg;
}

int byte_to_line(const std::string& text, size_t byte) {
  int line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace

SceneConfig parse_scene_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ":" + std::to_string(byte_to_line(text, e.byte)) +
                      ": JSON parse error: " + e.what());
  }
  try {
    check_keys(j, {"spec_version", "geometry", "phantom", "spectrum", "noise", "recon"}, "/");
    if (!j.contains("spec_version") || j["spec_version"] != 1)
      throw ConfigError("missing or unsupported 'spec_version' (expected 1)");
    if (!j.contains("geometry")) throw ConfigError("missing '/geometry'");
    if (!j.contains("phantom")) throw ConfigError("missing '/phantom'");

    SceneConfig out;
    out.geometry = parse_geometry(j["geometry"]);
    out.phantom = parse_phantom(j["phantom"]);
    out.spectrum = j.contains("spectrum")
                       ? parse_spectrum(j["spectrum"], std::filesystem::path(origin).parent_path())
                       : Spectrum::kramers();
    if (j.contains("noise")) out.noise = parse_noise(j["noise"]);
    if (j.contains("recon")) out.recon = parse_recon(j["recon"]);
    out.resolved = j;
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_config(ss.str(), path.string());
}

uint64_t geometry_hash(const ScanGeometry& geom) {
  std::ostringstream s;
  s << geom.grid.n << '|' << fmt(geom.grid.extent_cm) << '|' << fmt(geom.grid.origin.x) << ','
    << fmt(geom.grid.origin.y);
  for (const Source& src : geom.sources)
    s << "|S" << fmt(src.position.x) << ',' << fmt(src.position.y);
  for (const Detector& d : geom.detectors)
    s << "|D" << fmt(d.center.x) << ',' << fmt(d.center.y) << ',' << fmt(d.width_cm) << ','
      << fmt(d.height_cm) << ',' << fmt(d.normal.x) << ',' << fmt(d.normal.y);
  s << "|A" << fmt(geom.atten_bins.e_lo_keV) << ',' << fmt(geom.atten_bins.width_keV) << ','
    << geom.atten_bins.count;
  s << "|C" << fmt(geom.scatter_bins.e_lo_keV) << ',' << fmt(geom.scatter_bins.width_keV) << ','
    << geom.scatter_bins.count;
  return fnv1a64(s.str());
}

namespace {
constexpr char kSinogramMagic[8] = {'S', 'C', 'T', 'S', 'I', 'N', '0', '1'};

void write_u64(std::ofstream& out, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::ifstream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64_payload(std::ofstream& out, std::span<const double> v) {
  static_assert(sizeof(double) == 8);
  for (double x : v) {
    uint64_t bits;
    std::memcpy(&bits, &x, 8);
    write_u64(out, bits);
  }
}

std::vector<double> read_f64_payload(std::ifstream& in, size_t count) {
  std::vector<double> v(count);
  for (size_t i = 0; i < count; ++i) {
    const uint64_t bits = read_u64(in);
    std::memcpy(&v[i], &bits, 8);
  }
  return v;
}
}  // namespace

void write_sinogram(const std::filesystem::path& path, const SinogramSet& data,
                    uint64_t geom_hash, uint64_t config_hash) {
  json header;
  header["format_version"] = 1;
  header["geometry_hash"] = geom_hash;
  header["config_hash"] = config_hash;
  header["seed"] = data.seed;
  header["sigma_A"] = data.sigma_A;
  header["sigma_C"] = data.sigma_C;
  header["counts"] = {{"n_sources", data.n_sources},
                      {"n_detectors", data.n_detectors},
                      {"n_atten_bins", data.n_atten_bins},
                      {"n_scatter_bins", data.n_scatter_bins},
                      {"grid_n", data.grid_n}};
  header["lengths"] = {{"g_A", data.g_A.size()}, {"g_C", data.g_C.size()}};
  header["index_maps"] = {
      {"g_A", "row = raypath*n_atten_bins + bin; raypath = source*n_detectors + detector"},
      {"g_C",
       "row = (raypath*(n_detectors-1) + sec_slot)*n_scatter_bins + bin; sec_slot indexes "
       "ascending detector ids excluding the raypath's primary detector"}};
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kSinogramMagic, 8);
  write_u64(out, htext.size());
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  write_f64_payload(out, data.g_A);
  write_f64_payload(out, data.g_C);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SinogramFile read_sinogram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataMismatch("cannot open sinogram " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kSinogramMagic, 8) != 0)
    throw DataMismatch("bad sinogram magic in " + path.string());
  const uint64_t hlen = read_u64(in);
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataMismatch("truncated sinogram header in " + path.string());

  SinogramFile file;
  file.header = json::parse(htext);
  file.geometry_hash = file.header["geometry_hash"].get<uint64_t>();
  file.config_hash = file.header["config_hash"].get<uint64_t>();
  SinogramSet& d = file.data;
  d.seed = file.header["seed"].get<uint64_t>();
  d.sigma_A = file.header["sigma_A"].get<double>();
  d.sigma_C = file.header["sigma_C"].get<double>();
  d.n_sources = file.header["counts"]["n_sources"].get<int>();
  d.n_detectors = file.header["counts"]["n_detectors"].get<int>();
  d.n_atten_bins = file.header["counts"]["n_atten_bins"].get<int>();
  d.n_scatter_bins = file.header["counts"]["n_scatter_bins"].get<int>();
  d.grid_n = file.header["counts"]["grid_n"].get<int>();
  const size_t la = file.header["lengths"]["g_A"].get<size_t>();
  const size_t lc = file.header["lengths"]["g_C"].get<size_t>();
  d.g_A = read_f64_payload(in, la);
  d.g_C = read_f64_payload(in, lc);
  if (!in) throw DataMismatch("truncated sinogram payload in " + path.string());
  return file;
}

void write_raster_csv(const std::filesystem::path& path, std::span<const double> img, int n) {
  if (static_cast<int>(img.size()) != n * n)
    throw std::invalid_argument("write_raster_csv: size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (c) out << ',';
      out << fmt(img[static_cast<size_t>(r) * n + c]);
    }
    out << '\n';
  }
}

std::vector<double> read_raster_csv(const std::filesystem::path& path, int* n_out) {
  std::ifstream in(path);
  if (!in) throw DataMismatch("cannot open raster " + path.string());
  std::vector<double> vals;
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  }
  const int n = rows;
  if (static_cast<int>(vals.size()) != n * n)
    throw DataMismatch("raster is not square in " + path.string());
  if (n_out) *n_out = n;
  return vals;
}

void write_raster_pgm(const std::filesystem::path& path, std::span<const double> img, int n,
                      double win_lo, double win_hi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << n << ' ' << n << "\n65535\n";
  // raster rows run top-down; grid rows run bottom-up
  for (int r = n - 1; r >= 0; --r) {
    for (int c = 0; c < n; ++c) {
      double v = img[static_cast<size_t>(r) * n + c];
      v = std::clamp((v - win_lo) / (win_hi - win_lo), 0.0, 1.0);
      const auto q = static_cast<uint16_t>(std::lround(v * 65535.0));
      const unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8),
                                      static_cast<unsigned char>(q & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  return nlohmann::json::parse(read_text_file(path));
}

}  // namespace sct
