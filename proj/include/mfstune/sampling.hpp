#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mfstune/geometry.hpp"
#include "mfstune/oracle.hpp"

namespace mfstune {

/// Reproducible random stream identified by (seed, stream id).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

enum class RegionKind { ball, shell_sector, whole_brain };

/// A region of the brain from which dipole positions are drawn.
///
/// `ball` uses center/radius. `shell_sector` uses the eccentricity band
/// [ecc_min, ecc_max] (fractions of r_brain) and polar/azimuth windows in
/// radians. `whole_brain` is the admissible ball. Every kind is intersected
/// with the admissible set |x| < r_brain - depth_margin.
struct DipoleRegion {
  std::string name;
  RegionKind kind = RegionKind::whole_brain;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double ecc_min = 0.0;
  double ecc_max = 1.0;
  double polar_min = 0.0;
  double polar_max = std::numbers::pi;
  double azimuth_min = 0.0;
  double azimuth_max = 2.0 * std::numbers::pi;
  double depth_margin = 0.005;

  /// Membership in region and admissible brain.
  bool contains(const Vec3& x, const HeadModel& head) const;
  /// Throws InvalidArgument for malformed parameters.
  void validate(const HeadModel& head) const;
};

std::string to_string(RegionKind kind);
RegionKind region_kind_from_string(const std::string& s);

inline constexpr std::size_t kMaxRejectionAttempts = 100000;

/// Uniform position over the region by rejection from its bounding box, with
/// isotropic orientation and the given moment magnitude. Throws
/// RegionInfeasible if no point is accepted within kMaxRejectionAttempts.
Dipole sample_dipole(const DipoleRegion& region, const HeadModel& head, RngStream& rng,
                     double magnitude = 1.0);

/// Six regions of increasing eccentricity and shrinking volume, indexed 1..6.
std::vector<DipoleRegion> region_catalog(const HeadModel& head = HeadModel::standard(),
                                         double depth_margin = 0.005);

/// Catalog lookup by 1-based index.
DipoleRegion catalog_region(int index, const HeadModel& head = HeadModel::standard(),
                            double depth_margin = 0.005);

}  // namespace mfstune
