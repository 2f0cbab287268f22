#include "mfstune/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfstune/errors.hpp"

namespace mfstune {

std::string to_string(Strategy s) { return s == Strategy::sko ? "sko" : "random"; }

Strategy strategy_from_string(const std::string& s) {
  if (s == "sko") return Strategy::sko;
  if (s == "random") return Strategy::random;
  throw InvalidArgument("unknown strategy '" + s + "' (expected sko or random)");
}

int TunerConfig::effective_initial_design() const {
  if (initial_design > 0) return initial_design;
  return std::max(2, j_init / n_avg);
}

void TunerConfig::validate() const {
  if (!(1 <= n_min && n_min <= n_avg && n_avg <= j_init && j_init <= j_max)) {
    std::ostringstream msg;
    msg << "tuner budgets must satisfy 1 <= n_min <= n_avg <= j_init <= j_max (got n_min="
        << n_min << ", n_avg=" << n_avg << ", j_init=" << j_init << ", j_max=" << j_max << ")";
    throw InvalidArgument(msg.str());
  }
  if (max_consecutive_failures < 1) {
    throw InvalidArgument("max_consecutive_failures must be positive");
  }
  if (!(dipole_magnitude >= 0.0)) throw InvalidArgument("dipole magnitude must be >= 0");
  bounds.validate();
  region.validate(head);
}

double LedgerEntry::mean() const {
  if (q_values.empty()) throw InvalidArgument("entry has no Q values");
  double s = 0.0;
  for (double v : q_values) s += v;
  return s / static_cast<double>(q_values.size());
}

void Ledger::append(LedgerEntry entry) {
  if (!entry.failed) {
    if (entry.q_values.empty()) throw InvalidArgument("non-failed entry without Q values");
    for (double v : entry.q_values) pooled_sum_ += v;
    pooled_count_ += entry.q_values.size();
    j_used_ += static_cast<int>(entry.q_values.size());
  } else if (!entry.q_values.empty()) {
    throw InvalidArgument("failed entry must not carry Q values");
  }
  entries_.push_back(std::move(entry));
}

std::size_t Ledger::distinct_evaluated() const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                [](const auto& e) { return !e.failed; }));
}

double pooled_mean(const Ledger& ledger) {
  if (ledger.pooled_count() == 0) throw InvalidArgument("pooled mean of an empty ledger");
  return ledger.pooled_sum() / static_cast<double>(ledger.pooled_count());
}

BestTheta best_theta(const Ledger& ledger) {
  std::optional<BestTheta> best;
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    const LedgerEntry& e = ledger.entries()[i];
    if (e.failed) continue;
    const double m = e.mean();
    if (!best || m > best->mean) best = BestTheta{e.theta, m, i};
  }
  if (!best) throw InsufficientData("ledger has no non-failed entry");
  return *best;
}

TuningResult summarize(Ledger ledger) {
  TuningResult result;
  const BestTheta best = best_theta(ledger);
  result.best_theta = best.theta;
  result.best_mean = best.mean;
  for (const auto& e : ledger.entries()) {
    if (e.failed) continue;
    Observation o(e.theta, e.q_values);
    result.means.push_back(o.mean());
    result.variances.push_back(o.variance());
  }
  result.distinct = result.means.size();
  result.ledger = std::move(ledger);
  return result;
}

std::uint64_t suggestion_stream(std::size_t entry_index) { return 4 * entry_index; }
std::uint64_t dipole_stream(std::size_t entry_index) { return 4 * entry_index + 1; }
std::uint64_t surrogate_stream(std::size_t entry_index) { return 4 * entry_index + 2; }

namespace {

ThetaVector uniform_theta(const ThetaBounds& bounds, RngStream& rng) {
  std::array<double, kThetaDim> t{};
  for (std::size_t k = 0; k < kThetaDim; ++k) t[k] = rng.uniform(bounds.lower[k], bounds.upper[k]);
  return ThetaVector::from_array(t);
}

constexpr double kMaxExclusionRadius = 0.5;

ThetaVector next_suggestion(const TunerConfig& config, const Ledger& ledger, std::size_t index) {
  RngStream rng(config.seed, suggestion_stream(index));
  if (config.strategy == Strategy::random) return uniform_theta(config.bounds, rng);

  std::vector<Observation> observations;
  std::vector<ThetaVector> failed;
  for (const auto& e : ledger.entries()) {
    if (e.failed) {
      failed.push_back(e.theta);
    } else {
      observations.emplace_back(e.theta, e.q_values);
    }
  }
  if (static_cast<int>(observations.size()) < config.effective_initial_design()) {
    return uniform_theta(config.bounds, rng);
  }
  RngStream fit_rng(config.seed, surrogate_stream(index));
  std::optional<GPSurrogate> model;
  try {
    model.emplace(fit(observations, config.bounds, fit_rng, config.gp));
  } catch (const InsufficientData&) {
    return uniform_theta(config.bounds, rng);
  }
  double best = observations.front().mean();
  for (const auto& o : observations) best = std::max(best, o.mean());
  // The surrogate never sees failures, so EI can keep pointing into a failing
  // region. Widen the exclusion geometrically with each consecutive failure.
  int trailing = 0;
  for (auto it = ledger.entries().rbegin(); it != ledger.entries().rend() && it->failed; ++it) ++trailing;
  SuggestOptions options = config.suggest;
  options.exclusion_radius =
      std::min(kMaxExclusionRadius, options.exclusion_radius * std::pow(4.0, trailing));
  return suggest(*model, best, failed, rng, options);
}

}  // namespace

TuningResult run(const TunerConfig& config, Objective& objective, const EntryObserver& observer,
                 const Ledger* resume_from) {
  config.validate();
  Ledger ledger = resume_from ? *resume_from : Ledger{};
  if (ledger.j_used() > config.j_max) {
    throw InvalidArgument("resumed ledger already exceeds the evaluation budget");
  }
  int consecutive_failures = 0;

  while (ledger.j_used() < config.j_max) {
    const std::size_t index = ledger.size();
    const int j_begin = ledger.j_used();
    LedgerEntry entry;
    entry.theta = next_suggestion(config, ledger, index);

    if (!objective.prepare(entry.theta)) {
      entry.failed = true;
      ledger.append(entry);
      if (observer) observer(index, entry, j_begin, j_begin);
      if (++consecutive_failures >= config.max_consecutive_failures) {
        throw NumericalError("too many consecutive rank failures (" +
                             std::to_string(consecutive_failures) + ")");
      }
      continue;
    }
    consecutive_failures = 0;

    RngStream dipoles(config.seed, dipole_stream(index));
    int j = j_begin;
    double running_sum = 0.0;
    for (int count = 1; count <= config.n_avg; ++count) {
      if (j >= config.j_max) {
        entry.truncated = true;
        break;
      }
      const Dipole p = sample_dipole(config.region, config.head, dipoles, config.dipole_magnitude);
      const double q = objective.evaluate(entry.theta, p);
      entry.q_values.push_back(q);
      running_sum += q;
      ++j;
      if (count >= config.n_min && count < config.n_avg && j > config.j_init) {
        const double current = running_sum / count;
        double pooled_sum = ledger.pooled_sum();
        std::size_t pooled_count = ledger.pooled_count();
        if (config.pooled_includes_current) {
          pooled_sum += running_sum;
          pooled_count += static_cast<std::size_t>(count);
        }
        if (current < pooled_sum / static_cast<double>(pooled_count)) {
          entry.preempted = true;
          break;
        }
      }
    }
    ledger.append(entry);
    if (observer) observer(index, entry, j_begin, j);
  }
  return summarize(std::move(ledger));
}

}  // namespace mfstune
