#include "mfstune/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mfstune/errors.hpp"

namespace mfstune {

void HeadModel::validate() const {
  if (!(r_scalp > r_skull && r_skull > r_brain && r_brain > 0.0)) {
    throw InvalidArgument("head model radii must satisfy r_scalp > r_skull > r_brain > 0");
  }
  if (!(sigma_scalp > 0.0 && sigma_skull > 0.0 && sigma_brain > 0.0)) {
    throw InvalidArgument("head model conductivities must be positive");
  }
}

void ThetaBounds::validate() const {
  for (std::size_t k = 0; k < kThetaDim; ++k) {
    if (!(lower[k] < upper[k])) {
      throw InvalidArgument("theta bounds must satisfy lower < upper in every component");
    }
    if (kInflating[k] ? !(lower[k] > 1.0) : !(lower[k] > 0.0 && upper[k] < 1.0)) {
      throw InvalidArgument(
          "inflation bounds must lie above 1 and deflation bounds inside (0, 1)");
    }
  }
}

bool ThetaBounds::contains(const ThetaVector& theta) const {
  const auto t = theta.to_array();
  for (std::size_t k = 0; k < kThetaDim; ++k) {
    if (!(t[k] >= lower[k] && t[k] <= upper[k])) return false;
  }
  return true;
}

Eigen::VectorXd ThetaBounds::normalize(const ThetaVector& theta) const {
  const auto t = theta.to_array();
  Eigen::VectorXd u(kThetaDim);
  for (std::size_t k = 0; k < kThetaDim; ++k) {
    u[static_cast<Eigen::Index>(k)] = (t[k] - lower[k]) / (upper[k] - lower[k]);
  }
  return u;
}

ThetaVector ThetaBounds::denormalize(const Eigen::Ref<const Eigen::VectorXd>& unit) const {
  if (unit.size() != static_cast<Eigen::Index>(kThetaDim)) {
    throw InvalidArgument("denormalize expects a 5-vector");
  }
  std::array<double, kThetaDim> t{};
  for (std::size_t k = 0; k < kThetaDim; ++k) {
    t[k] = lower[k] + unit[static_cast<Eigen::Index>(k)] * (upper[k] - lower[k]);
  }
  return ThetaVector::from_array(t);
}

namespace {

// Spiral construction without the n >= 2 guard; n == 1 yields the k = 1
// (south pole) point.
PointSet spiral_unchecked(std::size_t n, double radius) {
  PointSet set;
  set.radius = radius;
  set.points.reserve(n);
  if (n == 1) {
    set.points.emplace_back(0.0, 0.0, -radius);
    return set;
  }
  const double nd = static_cast<double>(n);
  double phi = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double h = -1.0 + 2.0 * static_cast<double>(k - 1) / (nd - 1.0);
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - h * h));
    if (k == 1 || k == n) {
      phi = 0.0;
    } else {
      phi = std::fmod(phi + 3.6 / std::sqrt(nd * (1.0 - h * h)), 2.0 * std::numbers::pi);
    }
    Vec3 dir(sin_theta * std::cos(phi), sin_theta * std::sin(phi), h);
    // Renormalize so the norm is exact to rounding.
    set.points.emplace_back(radius * dir / dir.norm());
  }
  return set;
}

}  // namespace

PointSet spiral_points(std::size_t n, double radius) {
  if (n < 2) throw InvalidArgument("spiral_points requires n >= 2");
  if (!(radius > 0.0)) throw InvalidArgument("spiral_points requires radius > 0");
  return spiral_unchecked(n, radius);
}

FictitiousRadii fictitious_radii(const ThetaVector& theta, const HeadModel& head, double margin) {
  head.validate();
  FictitiousRadii r;
  r.scalp_outer = theta.t1i * head.r_scalp;
  r.scalp_inner = theta.t1d * head.r_skull;
  r.skull_outer = theta.t2i * head.r_skull;
  r.skull_inner = theta.t2d * head.r_brain;
  r.brain_outer = theta.t3i * head.r_brain;

  // Each fictitious sphere must lie strictly outside the closure of the layer
  // whose solution it carries.
  struct Side {
    const char* name;
    double radius;
    double reference;
    bool outside;
  };
  const Side sides[] = {
      {"scalp inflated", r.scalp_outer, head.r_scalp, true},
      {"scalp deflated", r.scalp_inner, head.r_skull, false},
      {"skull inflated", r.skull_outer, head.r_skull, true},
      {"skull deflated", r.skull_inner, head.r_brain, false},
      {"brain inflated", r.brain_outer, head.r_brain, true},
  };
  const double physical[] = {head.r_scalp, head.r_skull, head.r_brain};
  for (const auto& s : sides) {
    const bool ok_side = s.outside ? s.radius > s.reference : (s.radius > 0.0 && s.radius < s.reference);
    bool ok_margin = true;
    for (double p : physical) ok_margin = ok_margin && std::abs(s.radius - p) >= margin;
    if (!ok_side || !ok_margin) {
      std::ostringstream msg;
      msg << s.name << " fictitious radius " << s.radius
          << " m is inside its layer or within " << margin << " m of a physical interface";
      throw GeometryDegenerate(msg.str());
    }
  }
  return r;
}

CenterSets build_center_sets(const ThetaVector& theta, const HeadModel& head,
                             const CenterCounts& counts, double margin) {
  for (auto c : counts.to_array()) {
    if (c == 0) throw InvalidArgument("center counts must be positive");
  }
  const FictitiousRadii r = fictitious_radii(theta, head, margin);
  return {spiral_unchecked(counts.scalp_outer, r.scalp_outer),
          spiral_unchecked(counts.scalp_inner, r.scalp_inner),
          spiral_unchecked(counts.skull_outer, r.skull_outer),
          spiral_unchecked(counts.skull_inner, r.skull_inner),
          spiral_unchecked(counts.brain_outer, r.brain_outer)};
}

}  // namespace mfstune
