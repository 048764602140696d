#include "semray/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace semray {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

void parse(const std::string& key, const std::string& v, double& out) {
  if (v == "inf" || v == "+inf") {
    out = std::numeric_limits<double>::infinity();
    return;
  }
  std::size_t used = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v);
  }
  if (used != v.size()) bad_value(key, v);
}

void parse(const std::string& key, const std::string& v, int& out) {
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
}

void parse(const std::string& key, const std::string& v, std::uint64_t& out) {
  if (v == "inf" || v == "+inf") {
    out = kUnlimited;
    return;
  }
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
}

void parse(const std::string& key, const std::string& v, bool& out) {
  if (v == "true" || v == "1") {
    out = true;
  } else if (v == "false" || v == "0") {
    out = false;
  } else {
    bad_value(key, v);
  }
}

void parse(const std::string&, const std::string& v, std::string& out) { out = v; }

std::string format(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}
std::string format(int v) { return std::to_string(v); }
std::string format(std::uint64_t v) { return v == kUnlimited ? "inf" : std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + msg);
  };
  require(vox_size > 0.0, "vox_size must be > 0");
  require(fronti_neighborhood_r >= 1, "fronti_neighborhood_r must be >= 1");
  require(fronti_min_unobserved >= 0 && fronti_min_occupied >= 0 && fronti_min_empty >= 0,
          "frontier thresholds must be >= 0");
  require(fronti_subsampling >= 1, "fronti_subsampling must be >= 1");
  require(fronti_subsampling_min_fronti >= 1, "fronti_subsampling_min_fronti must be >= 1");
  require(ray_erosion >= 0, "ray_erosion must be >= 0");
  require(angle_bin_size > 0.0 && angle_bin_size <= 180.0, "angle_bin_size must lie in (0, 180]");
  require(max_empty_cnt <= 0 && max_empty_cnt >= -128, "max_empty_cnt must lie in [-128, 0]");
  require(max_occ_cnt >= 0 && max_occ_cnt <= 127, "max_occ_cnt must lie in [0, 127]");
  require(occ_observ_weight >= 1, "occ_observ_weight must be >= 1");
  require(occ_thickness > 0.0, "occ_thickness must be > 0");
  require(occ_pruning_tolerance >= 0, "occ_pruning_tolerance must be >= 0");
  require(vox_accum_period >= 1 && ray_accum_period >= 1 && sem_pruning_period >= 1 && occ_pruning_period >= 1,
          "all periods must be >= 1");
  require(ray_accum_phase >= 0, "ray_accum_phase must be >= 0");
  require(stored_feat_dim >= 1, "stored_feat_dim must be >= 1");
  for (double t : {prompt_denoising_thresh, prediction_thresh, searchvol_thresh}) {
    require(t >= 0.0 && t <= 1.0, "thresholds must lie in [0, 1]");
  }
  require(depth_range >= 0.0, "depth_range must be >= 0");
  require(representation == "rayfronts" || representation == "sem_poses" || representation == "sem_voxels" ||
              representation == "spherical_fronts" || representation == "unidirectional_fronts",
          "unknown representation");
  require(eval_period >= 0, "eval_period must be >= 0");
  require(threads >= 1, "threads must be >= 1");
  require(cone_half_angle >= 0.0 && cone_half_angle < 90.0, "cone_half_angle must lie in [0, 90)");
  require(logit_scale > 0.0, "logit_scale must be > 0");
  require(knn_k >= 1, "knn_k must be >= 1");
  require(frame_skip >= 1, "frame_skip must be >= 1");
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
#define SEMRAY_SET_FIELD(type, name, def) \
  if (key == #name) {                     \
    parse(key, v, name);                  \
    return;                               \
  }
  SEMRAY_CONFIG_FIELDS(SEMRAY_SET_FIELD)
#undef SEMRAY_SET_FIELD
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string PipelineConfig::get(const std::string& key) const {
#define SEMRAY_GET_FIELD(type, name, def) \
  if (key == #name) return format(name);
  SEMRAY_CONFIG_FIELDS(SEMRAY_GET_FIELD)
#undef SEMRAY_GET_FIELD
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> names = {
#define SEMRAY_NAME_FIELD(type, name, def) #name,
      SEMRAY_CONFIG_FIELDS(SEMRAY_NAME_FIELD)
#undef SEMRAY_NAME_FIELD
  };
  return names;
}

void load_config(std::istream& in, PipelineConfig& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  load_config(in, base);
  return base;
}

void save_config(std::ostream& out, const PipelineConfig& cfg) {
  for (const auto& k : PipelineConfig::keys()) out << k << " = " << cfg.get(k) << '\n';
}

void save_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  save_config(out, cfg);
}

}  // namespace semray
