#pragma once

#include <vector>

#include "mfstune/geometry.hpp"

namespace mfstune {

/// Current dipole: position in metres, moment in A*m.
struct Dipole {
  Vec3 position = Vec3::Zero();
  Vec3 moment = Vec3::UnitZ();
};

/// Potentials (V) aligned with an evaluation PointSet.
struct ScalpField {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

inline constexpr double kDefaultOracleTol = 1e-10;
inline constexpr int kDefaultMaxDegree = 400;

struct SeriesField {
  ScalpField field;
  int degrees = 0;  // highest harmonic degree summed
};

/// Scalp-surface gain of harmonic degree n for the three-shell model,
/// relative to the free-space primary field of the same degree. All
/// conductivities equal gives (2n + 1) / n.
double layered_degree_gain(const HeadModel& head, int n);

/// Scalp potential of a dipole inside the concentric three-shell model with an
/// insulating exterior. The harmonic series is truncated once the tail bound,
/// relative to the dipole term, falls below `tol`. Throws DomainError if the
/// dipole is not inside the brain, ConvergenceError if `max_degree` terms do
/// not suffice, InvalidArgument if an evaluation point is off the scalp.
SeriesField layered_potential(const HeadModel& head, const Dipole& dipole, const PointSet& eval,
                              double tol = kDefaultOracleTol, int max_degree = kDefaultMaxDegree);

/// Same series summed to a fixed degree.
ScalpField layered_potential_to_degree(const HeadModel& head, const Dipole& dipole,
                                       const PointSet& eval, int degrees);

/// Closed-form surface potential of a dipole in a homogeneous insulated
/// sphere of conductivity `sigma` and radius `radius`.
ScalpField homogeneous_reference(double sigma, double radius, const Dipole& dipole,
                                 const PointSet& eval);

}  // namespace mfstune
