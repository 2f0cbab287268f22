#include "mfstune/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mfstune/errors.hpp"

namespace mfstune {

using nlohmann::json;

ExperimentConfig ExperimentConfig::desk() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::paper() {
  ExperimentConfig c;
  c.preset = "paper";
  c.n_colloc = 300;
  c.k_test = 1000;
  c.j_max = 800;
  c.n_avg = 30;
  c.n_min = 5;
  c.j_init = 150;
  c.repetitions = 30;
  return c;
}

ExperimentConfig ExperimentConfig::from_preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

DipoleRegion ExperimentConfig::region() const {
  if (region_index == 0) {
    if (!region_inline) throw ConfigError("region index 0 requires an inline region definition");
    DipoleRegion r = *region_inline;
    return r;
  }
  return catalog_region(region_index, head, depth_margin);
}

MfsOptions ExperimentConfig::mfs_options() const {
  MfsOptions o;
  o.counts = counts;
  o.n_colloc = n_colloc;
  o.balance_rows = balance_rows;
  o.svd_tol = svd_tol;
  o.rank_tol = rank_tol;
  o.geom_margin = geom_margin;
  return o;
}

TunerConfig ExperimentConfig::tuner_config() const {
  TunerConfig t;
  t.j_max = j_max;
  t.n_avg = n_avg;
  t.n_min = preemptive ? n_min : n_avg;
  t.j_init = j_init;
  t.bounds = bounds;
  t.region = region();
  t.head = head;
  t.dipole_magnitude = dipole_magnitude;
  t.strategy = strategy;
  t.seed = seed;
  t.initial_design = initial_design;
  t.pooled_includes_current = pooled_includes_current;
  t.max_consecutive_failures = max_consecutive_failures;
  t.gp.restarts = gp_restarts;
  t.suggest.pool_size = suggest_pool;
  return t;
}

void ExperimentConfig::validate() const {
  try {
    head.validate();
    bounds.validate();
    if (n_colloc < 2) throw ConfigError("n_colloc must be >= 2");
    if (k_test < 1) throw ConfigError("k_test must be >= 1");
    for (auto c : counts.to_array()) {
      if (c == 0) throw ConfigError("center counts must be positive");
    }
    if (!(svd_tol > 0.0 && svd_tol < 1.0)) throw ConfigError("svd_tol must lie in (0, 1)");
    if (!(rank_tol >= 0.0 && rank_tol < 1.0)) throw ConfigError("rank_tol must lie in [0, 1)");
    if (!(geom_margin >= 0.0)) throw ConfigError("geom_margin must be >= 0");
    if (preemptive && !(n_min < n_avg)) {
      throw ConfigError("a preemptive run needs n_min < n_avg");
    }
    tuner_config().validate();
    if (!(oracle_tol > 0.0)) throw ConfigError("oracle tol must be positive");
    if (oracle_max_degree < 1) throw ConfigError("oracle max_degree must be >= 1");
    if (!(metric.q_cap > 0.0)) throw ConfigError("q_cap must be positive");
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (gp_restarts < 1) throw ConfigError("gp restarts must be >= 1");
    if (suggest_pool < 1) throw ConfigError("suggestion pool must be non-empty");
    if (!(synthetic.peak_width > 0.0) || !(synthetic.noise_sd >= 0.0)) {
      throw ConfigError("synthetic objective needs peak_width > 0 and noise_sd >= 0");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

namespace {

// Reads keys of one JSON object, rejecting any key not consumed.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

json region_to_json(const DipoleRegion& r) {
  return {{"name", r.name},
          {"kind", to_string(r.kind)},
          {"center", vec3_json(r.center)},
          {"radius", r.radius},
          {"ecc_min", r.ecc_min},
          {"ecc_max", r.ecc_max},
          {"polar_min", r.polar_min},
          {"polar_max", r.polar_max},
          {"azimuth_min", r.azimuth_min},
          {"azimuth_max", r.azimuth_max},
          {"depth_margin", r.depth_margin}};
}

DipoleRegion region_from_json(const json& j) {
  DipoleRegion r;
  Reader rd(j, "region.inline");
  std::string kind = to_string(r.kind);
  std::array<double, 3> center{0.0, 0.0, 0.0};
  rd.get("name", r.name);
  rd.get("kind", kind);
  rd.get("center", center);
  rd.get("radius", r.radius);
  rd.get("ecc_min", r.ecc_min);
  rd.get("ecc_max", r.ecc_max);
  rd.get("polar_min", r.polar_min);
  rd.get("polar_max", r.polar_max);
  rd.get("azimuth_min", r.azimuth_min);
  rd.get("azimuth_max", r.azimuth_max);
  rd.get("depth_margin", r.depth_margin);
  rd.finish();
  try {
    r.kind = region_kind_from_string(kind);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  r.center = Vec3(center[0], center[1], center[2]);
  return r;
}

json to_json(const ExperimentConfig& c) {
  json region = {{"index", c.region_index}, {"depth_margin", c.depth_margin}};
  if (c.region_inline) region["inline"] = region_to_json(*c.region_inline);
  return {
      {"preset", c.preset},
      {"head",
       {{"r_scalp", c.head.r_scalp},
        {"r_skull", c.head.r_skull},
        {"r_brain", c.head.r_brain},
        {"sigma_scalp", c.head.sigma_scalp},
        {"sigma_skull", c.head.sigma_skull},
        {"sigma_brain", c.head.sigma_brain}}},
      {"mfs",
       {{"n_colloc", c.n_colloc},
        {"counts", c.counts.to_array()},
        {"balance_rows", c.balance_rows},
        {"svd_tol", c.svd_tol},
        {"rank_tol", c.rank_tol},
        {"geom_margin", c.geom_margin}}},
      {"k_test", c.k_test},
      {"bounds", {{"lower", c.bounds.lower}, {"upper", c.bounds.upper}}},
      {"tuner",
       {{"j_max", c.j_max},
        {"n_avg", c.n_avg},
        {"n_min", c.n_min},
        {"j_init", c.j_init},
        {"strategy", to_string(c.strategy)},
        {"preemptive", c.preemptive},
        {"initial_design", c.initial_design},
        {"pooled_includes_current", c.pooled_includes_current},
        {"max_consecutive_failures", c.max_consecutive_failures},
        {"gp_restarts", c.gp_restarts},
        {"suggest_pool", c.suggest_pool}}},
      {"region", region},
      {"dipole_magnitude", c.dipole_magnitude},
      {"oracle", {{"tol", c.oracle_tol}, {"max_degree", c.oracle_max_degree}}},
      {"metric",
       {{"log_base", c.metric.log_base == LogBase::ten ? "10" : "e"},
        {"common_average_reference", c.metric.common_average_reference},
        {"q_cap", c.metric.q_cap}}},
      {"objective",
       {{"kind", c.objective == ObjectiveKind::mfs ? "mfs" : "synthetic"},
        {"peak_center", c.synthetic.peak_center},
        {"peak_width", c.synthetic.peak_width},
        {"peak_height", c.synthetic.peak_height},
        {"baseline", c.synthetic.baseline},
        {"noise_sd", c.synthetic.noise_sd}}},
      {"repetitions", c.repetitions},
      {"seed", c.seed},
      {"output", c.output},
  };
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string preset = "desk";
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw ConfigError("preset must be a string");
    preset = j.at("preset").get<std::string>();
  }
  ExperimentConfig c = ExperimentConfig::from_preset(preset);
  {
    Reader top(j, "config");
    top.get("preset", c.preset);
    if (const json* h = top.child("head")) {
      Reader r(*h, "head");
      r.get("r_scalp", c.head.r_scalp);
      r.get("r_skull", c.head.r_skull);
      r.get("r_brain", c.head.r_brain);
      r.get("sigma_scalp", c.head.sigma_scalp);
      r.get("sigma_skull", c.head.sigma_skull);
      r.get("sigma_brain", c.head.sigma_brain);
      r.finish();
    }
    if (const json* m = top.child("mfs")) {
      Reader r(*m, "mfs");
      auto counts = c.counts.to_array();
      r.get("n_colloc", c.n_colloc);
      r.get("counts", counts);
      r.get("balance_rows", c.balance_rows);
      r.get("svd_tol", c.svd_tol);
      r.get("rank_tol", c.rank_tol);
      r.get("geom_margin", c.geom_margin);
      r.finish();
      c.counts = CenterCounts::from_array(counts);
    }
    top.get("k_test", c.k_test);
    if (const json* b = top.child("bounds")) {
      Reader r(*b, "bounds");
      r.get("lower", c.bounds.lower);
      r.get("upper", c.bounds.upper);
      r.finish();
    }
    if (const json* t = top.child("tuner")) {
      Reader r(*t, "tuner");
      std::string strategy = to_string(c.strategy);
      r.get("j_max", c.j_max);
      r.get("n_avg", c.n_avg);
      r.get("n_min", c.n_min);
      r.get("j_init", c.j_init);
      r.get("strategy", strategy);
      r.get("preemptive", c.preemptive);
      r.get("initial_design", c.initial_design);
      r.get("pooled_includes_current", c.pooled_includes_current);
      r.get("max_consecutive_failures", c.max_consecutive_failures);
      r.get("gp_restarts", c.gp_restarts);
      r.get("suggest_pool", c.suggest_pool);
      r.finish();
      try {
        c.strategy = strategy_from_string(strategy);
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
    if (const json* reg = top.child("region")) {
      Reader r(*reg, "region");
      r.get("index", c.region_index);
      r.get("depth_margin", c.depth_margin);
      if (const json* inl = r.child("inline")) c.region_inline = region_from_json(*inl);
      r.finish();
    }
    top.get("dipole_magnitude", c.dipole_magnitude);
    if (const json* o = top.child("oracle")) {
      Reader r(*o, "oracle");
      r.get("tol", c.oracle_tol);
      r.get("max_degree", c.oracle_max_degree);
      r.finish();
    }
    if (const json* m = top.child("metric")) {
      Reader r(*m, "metric");
      std::string base = c.metric.log_base == LogBase::ten ? "10" : "e";
      r.get("log_base", base);
      r.get("common_average_reference", c.metric.common_average_reference);
      r.get("q_cap", c.metric.q_cap);
      r.finish();
      if (base == "e") {
        c.metric.log_base = LogBase::natural;
      } else if (base == "10") {
        c.metric.log_base = LogBase::ten;
      } else {
        throw ConfigError("metric.log_base must be \"e\" or \"10\"");
      }
    }
    if (const json* o = top.child("objective")) {
      Reader r(*o, "objective");
      std::string kind = c.objective == ObjectiveKind::mfs ? "mfs" : "synthetic";
      r.get("kind", kind);
      r.get("peak_center", c.synthetic.peak_center);
      r.get("peak_width", c.synthetic.peak_width);
      r.get("peak_height", c.synthetic.peak_height);
      r.get("baseline", c.synthetic.baseline);
      r.get("noise_sd", c.synthetic.noise_sd);
      r.finish();
      if (kind == "mfs") {
        c.objective = ObjectiveKind::mfs;
      } else if (kind == "synthetic") {
        c.objective = ObjectiveKind::synthetic;
      } else {
        throw ConfigError("objective.kind must be mfs or synthetic");
      }
    }
    top.get("repetitions", c.repetitions);
    top.get("seed", c.seed);
    top.get("output", c.output);
    top.finish();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace mfstune
