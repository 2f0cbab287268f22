#include "mfstune/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "mfstune/errors.hpp"
#include "mfstune/persistence.hpp"

namespace mfstune {

using nlohmann::json;
namespace fs = std::filesystem;

PointSet test_points(const ExperimentConfig& config) {
  if (config.k_test == 1) return PointSet{{Vec3(0.0, 0.0, config.head.r_scalp)}, config.head.r_scalp};
  return spiral_points(config.k_test, config.head.r_scalp);
}

MfsObjective::MfsObjective(const ExperimentConfig& config)
    : model_(config.head, config.mfs_options(), test_points(config), config.oracle_tol,
             config.oracle_max_degree, config.metric) {}

bool MfsObjective::prepare(const ThetaVector& theta) {
  try {
    return model_.prepare(theta);
  } catch (const GeometryDegenerate&) {
    return false;
  }
}

double MfsObjective::evaluate(const ThetaVector& theta, const Dipole& dipole) {
  if (!prepare(theta)) throw NumericalError("evaluate called for a failed theta");
  return model_.evaluate(dipole).quality.q;
}

double dipole_noise(const Dipole& dipole) {
  const double norm = dipole.moment.norm();
  if (norm == 0.0) return 0.0;
  const Vec3 m = dipole.moment / norm;
  // cos(polar) ~ U(-1, 1) and azimuth ~ U(-pi, pi], independent.
  const double u1 = std::clamp(0.5 * (m.z() + 1.0), 1e-300, 1.0);
  const double azimuth = std::atan2(m.y(), m.x());
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(azimuth);
}

double SyntheticObjective::value(const ThetaVector& theta) const {
  const Eigen::VectorXd u = bounds_.normalize(theta);
  double r2 = 0.0;
  for (std::size_t k = 0; k < kThetaDim; ++k) {
    const double d = u[static_cast<Eigen::Index>(k)] - spec_.peak_center[k];
    r2 += d * d;
  }
  return spec_.baseline + spec_.peak_height * std::exp(-0.5 * r2 / (spec_.peak_width * spec_.peak_width));
}

ThetaVector SyntheticObjective::argmax() const {
  Eigen::VectorXd u(static_cast<Eigen::Index>(kThetaDim));
  for (std::size_t k = 0; k < kThetaDim; ++k) u[static_cast<Eigen::Index>(k)] = spec_.peak_center[k];
  return bounds_.denormalize(u);
}

double SyntheticObjective::evaluate(const ThetaVector& theta, const Dipole& dipole) {
  return value(theta) + spec_.noise_sd * dipole_noise(dipole);
}

std::unique_ptr<Objective> make_objective(const ExperimentConfig& config) {
  if (config.objective == ObjectiveKind::synthetic) {
    return std::make_unique<SyntheticObjective>(config.synthetic, config.bounds);
  }
  return std::make_unique<MfsObjective>(config);
}

json ledger_header(const ExperimentConfig& config) {
  return {{"seed", config.seed},
          {"strategy", to_string(config.strategy)},
          {"preemptive", config.preemptive},
          {"config", to_json(config)}};
}

TuneOutcome run_tune(const ExperimentConfig& config, const fs::path& ledger_path, bool resume,
                     Objective* objective) {
  config.validate();
  std::unique_ptr<Objective> owned;
  if (!objective) {
    owned = make_objective(config);
    objective = owned.get();
  }
  const TunerConfig tuner = config.tuner_config();
  TuneOutcome out;

  std::optional<LedgerWriter> writer;
  Ledger replayed;
  if (resume && fs::exists(ledger_path)) {
    LedgerFile file = read_ledger(ledger_path);
    json expected = ledger_header(config);
    json found = file.header;
    found.erase("kind");
    found.erase("format");
    if (found != expected) {
      throw ResumeIntegrityError("ledger header does not match the current configuration");
    }
    out.resumed = true;
    out.replayed_entries = file.ledger.size();
    if (file.result) {
      out.result = summarize(std::move(file.ledger));
      return out;
    }
    replayed = std::move(file.ledger);
    writer.emplace(LedgerWriter::append_to(ledger_path));
  } else {
    writer.emplace(LedgerWriter::create(ledger_path, ledger_header(config)));
  }

  const EntryObserver observer = [&](std::size_t index, const LedgerEntry& entry, int j_begin,
                                     int j_end) {
    writer->write_entry(index, entry, j_begin, j_end, config.seed);
  };
  out.result = run(tuner, *objective, observer, out.resumed ? &replayed : nullptr);
  writer->write_result(out.result);
  return out;
}

std::string ledger_filename(Strategy strategy, bool preemptive, int repetition,
                            std::uint64_t seed) {
  std::ostringstream name;
  name << to_string(strategy) << "-" << (preemptive ? "preemptive" : "standard") << "-r"
       << std::setw(3) << std::setfill('0') << repetition << "-s" << seed << ".ndjson";
  return name.str();
}

int thread_count_from_env() {
  if (const char* env = std::getenv("MFSTUNE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<ReportRow> run_compare(const ExperimentConfig& config, const fs::path& out_dir,
                                   int threads, bool resume) {
  config.validate();
  fs::create_directories(out_dir);
  struct Job {
    ExperimentConfig config;
    fs::path path;
  };
  std::vector<Job> jobs;
  for (Strategy s : {Strategy::sko, Strategy::random}) {
    for (bool preemptive : {false, true}) {
      for (int r = 0; r < config.repetitions; ++r) {
        ExperimentConfig c = config;
        c.strategy = s;
        c.preemptive = preemptive;
        c.seed = config.seed + static_cast<std::uint64_t>(r);
        jobs.push_back({c, out_dir / ledger_filename(s, preemptive, r, c.seed)});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        run_tune(jobs[i].config, jobs[i].path, resume);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const int n_threads = std::clamp(threads, 1, static_cast<int>(jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<ReportRow> rows = build_report(out_dir);
  write_report(rows, out_dir);
  return rows;
}

std::vector<ReportRow> build_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("report directory '" + dir.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ndjson") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  struct Pair {
    std::optional<RunSummary> standard;
    std::optional<RunSummary> preemptive;
  };
  struct Group {
    std::string region;
    std::map<std::uint64_t, Pair> by_seed;
  };
  std::map<std::pair<int, int>, Group> groups;  // (index, strategy)
  for (const auto& path : files) {
    LedgerFile file = read_ledger(path);
    if (!file.result) throw InvalidArgument("ledger '" + path.string() + "' is incomplete");
    const ExperimentConfig c = config_from_json(file.header.at("config"));
    Group& g = groups[{c.region_index, static_cast<int>(c.strategy)}];
    g.region = c.region().name;
    Pair& p = g.by_seed[c.seed];
    RunSummary s{file.result->at("best_mean").get<double>(),
                 file.result->at("distinct").get<std::size_t>()};
    (c.preemptive ? p.preemptive : p.standard) = s;
  }

  std::vector<ReportRow> rows;
  for (const auto& [key, group] : groups) {
    std::vector<RunSummary> standard, preemptive;
    for (const auto& [seed, pair] : group.by_seed) {
      if (!pair.standard || !pair.preemptive) {
        throw InvalidArgument("seed " + std::to_string(seed) +
                              " is missing its standard or preemptive run");
      }
      standard.push_back(*pair.standard);
      preemptive.push_back(*pair.preemptive);
    }
    ReportRow row;
    row.index = key.first;
    row.strategy = static_cast<Strategy>(key.second);
    row.region = group.region;
    row.repetitions = standard.size();
    row.comparison = compare_strategies(standard, preemptive);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string significance(const ComparisonReport& c) {
  if (c.insufficient_n) return "insufficient-n";
  return c.significant ? "yes" : "no";
}

}  // namespace

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "index,strategy,median_q,bonus,p_value,significant\n";
  for (const auto& r : rows) {
    const auto& c = r.comparison;
    out << r.index << "," << to_string(r.strategy) << "-standard," << std::setprecision(17)
        << c.median_standard << ",,,\n";
    out << r.index << "," << to_string(r.strategy) << "-preemptive," << c.median_preemptive << ","
        << c.bonus << "," << c.p_value << "," << significance(c) << "\n";
  }
  return out.str();
}

std::string report_text(const std::vector<ReportRow>& rows) {
  std::map<int, std::map<Strategy, const ReportRow*>> by_index;
  for (const auto& r : rows) by_index[r.index][r.strategy] = &r;
  std::ostringstream out;
  out << std::left << std::setw(6) << "Index"
      << "| " << std::setw(34) << "Sequential Kriging Optimization"
      << "| Random Search\n";
  out << std::setw(6) << ""
      << "| " << std::setw(10) << "Standard" << std::setw(12) << "Preemptive" << std::setw(12)
      << "Bonus"
      << "| " << std::setw(10) << "Standard" << std::setw(12) << "Preemptive" << "Bonus\n";
  for (const auto& [index, arms] : by_index) {
    out << std::setw(6) << index;
    for (Strategy s : {Strategy::sko, Strategy::random}) {
      out << "| ";
      auto it = arms.find(s);
      if (it == arms.end()) {
        out << std::setw(34) << "-";
        continue;
      }
      const auto& c = it->second->comparison;
      const std::string mark = c.significant ? "*" : (c.insufficient_n ? "?" : "");
      out << std::setw(10) << fmt(c.median_standard) << std::setw(12)
          << fmt(c.median_preemptive) + mark << std::setw(12) << fmt(c.bonus, 1);
    }
    out << "\n";
  }
  out << "* p < 0.05 (Mann-Whitney U, two-sided); ? too few repetitions for significance\n";
  return out.str();
}

json report_json(const std::vector<ReportRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    const auto& c = r.comparison;
    arr.push_back({{"index", r.index},
                   {"region", r.region},
                   {"strategy", to_string(r.strategy)},
                   {"repetitions", r.repetitions},
                   {"median_q_standard", c.median_standard},
                   {"median_q_preemptive", c.median_preemptive},
                   {"bonus", c.bonus},
                   {"u_statistic", c.u_statistic},
                   {"p_value", c.p_value},
                   {"significant", c.significant},
                   {"insufficient_n", c.insufficient_n}});
  }
  return {{"rows", arr}};
}

void write_report(const std::vector<ReportRow>& rows, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream(dir / "report.csv") << report_csv(rows);
  std::ofstream(dir / "report.txt") << report_text(rows);
  std::ofstream(dir / "report.json") << report_json(rows).dump(2) << "\n";
}

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  const double scale = std::max(max_abs(a), max_abs(b));
  return scale > 0.0 ? d / scale : d;
}

Dipole random_dipole(RngStream& rng, double max_radius) {
  Vec3 p;
  do {
    p = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  } while (p.norm() > 1.0);
  Vec3 q(rng.normal(), rng.normal(), rng.normal());
  return {p * max_radius, q.normalized()};
}

}  // namespace

std::vector<CheckResult> oracle_checks(const ExperimentConfig& config, double stability_tol) {
  const HeadModel& head = config.head;
  const PointSet scalp = spiral_points(200, head.r_scalp);
  const double tol = config.oracle_tol;
  const int max_deg = config.oracle_max_degree;
  RngStream rng(config.seed, 0x0c0ffee);
  std::vector<CheckResult> out;

  {
    HeadModel uniform = head;
    uniform.sigma_scalp = uniform.sigma_skull = head.sigma_brain;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Dipole d = random_dipole(rng, 0.8 * head.r_brain);
      const auto layered = layered_potential(uniform, d, scalp, tol, max_deg).field;
      const auto closed = homogeneous_reference(head.sigma_brain, head.r_scalp, d, scalp);
      worst = std::max(worst, max_rel_diff(layered.values, closed.values));
    }
    out.push_back({"homogeneous-reduction", worst <= 1e-8, worst, 1e-8});
  }
  {
    const Dipole a = random_dipole(rng, 0.7 * head.r_brain);
    Dipole b = a;
    b.moment = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    Dipole mix = a;
    mix.moment = 2.0 * a.moment - 0.5 * b.moment;
    const auto fa = layered_potential(head, a, scalp, tol, max_deg).field.values;
    const auto fb = layered_potential(head, b, scalp, tol, max_deg).field.values;
    const auto fm = layered_potential(head, mix, scalp, tol, max_deg).field.values;
    std::vector<double> combo(fa.size());
    for (std::size_t i = 0; i < fa.size(); ++i) combo[i] = 2.0 * fa[i] - 0.5 * fb[i];
    const double err = max_rel_diff(fm, combo);
    const double thr = std::max(tol, 1e-12);
    out.push_back({"linearity", err <= thr, err, thr});
  }
  {
    const Dipole d{Vec3(0.0, 0.0, 0.6 * head.r_brain), Vec3::UnitZ()};
    double worst = 0.0;
    for (double polar : {0.3, 0.9, 1.5, 2.2, 2.9}) {
      PointSet ring;
      ring.radius = head.r_scalp;
      for (int k = 0; k < 12; ++k) {
        const double az = 2.0 * std::numbers::pi * k / 12.0;
        ring.points.emplace_back(head.r_scalp * Vec3(std::sin(polar) * std::cos(az),
                                                     std::sin(polar) * std::sin(az),
                                                     std::cos(polar)));
      }
      const auto v = layered_potential(head, d, ring, tol, max_deg).field.values;
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      const double scale = std::max(std::abs(*lo), std::abs(*hi));
      worst = std::max(worst, scale > 0.0 ? (*hi - *lo) / scale : 0.0);
    }
    const double thr = std::max(tol, 1e-12);
    out.push_back({"axisymmetry", worst <= thr, worst, thr});
  }
  {
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      const Dipole d = random_dipole(rng, 0.8 * head.r_brain);
      const SeriesField adaptive = layered_potential(head, d, scalp, tol, max_deg);
      const auto doubled = layered_potential_to_degree(head, d, scalp, 2 * adaptive.degrees);
      worst = std::max(worst, max_rel_diff(adaptive.field.values, doubled.values));
    }
    out.push_back({"truncation-stability", worst < stability_tol, worst, stability_tol});
  }
  return out;
}

}  // namespace mfstune
