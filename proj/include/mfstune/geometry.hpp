#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace mfstune {

using Vec3 = Eigen::Vector3d;

/// Three concentric spheres: scalp (outer), skull, brain (inner).
/// Radii in metres, conductivities in S/m.
struct HeadModel {
  double r_scalp = 0.1;
  double r_skull = 0.092;
  double r_brain = 0.087;
  double sigma_scalp = 0.33;
  double sigma_skull = 0.0125;
  double sigma_brain = 0.33;

  /// Throws InvalidArgument unless r_scalp > r_skull > r_brain > 0 and every
  /// conductivity is positive.
  void validate() const;

  static HeadModel standard() { return HeadModel{}; }
};

inline constexpr std::size_t kThetaDim = 5;

/// Scale factors of the five fictitious boundaries. Inflation factors (`*_i`)
/// scale a layer's outer surface outward; deflation factors (`*_d`) scale a
/// layer's inner surface inward. The brain has no deflated boundary.
struct ThetaVector {
  double t1i = 1.5;  // scalp, inflated from r_scalp
  double t1d = 0.7;  // scalp, deflated from r_skull
  double t2i = 1.3;  // skull, inflated from r_skull
  double t2d = 0.6;  // skull, deflated from r_brain
  double t3i = 1.4;  // brain, inflated from r_brain

  std::array<double, kThetaDim> to_array() const { return {t1i, t1d, t2i, t2d, t3i}; }
  static ThetaVector from_array(const std::array<double, kThetaDim>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
  bool operator==(const ThetaVector&) const = default;
};

/// Which theta components inflate (true) versus deflate (false).
inline constexpr std::array<bool, kThetaDim> kInflating = {true, false, true, false, true};

/// Axis-aligned search box over theta, with the affine map to the unit cube
/// used by the surrogate.
struct ThetaBounds {
  std::array<double, kThetaDim> lower{1.05, 0.2, 1.05, 0.2, 1.05};
  std::array<double, kThetaDim> upper{2.5, 0.95, 2.5, 0.95, 2.5};

  void validate() const;
  bool contains(const ThetaVector& theta) const;
  Eigen::VectorXd normalize(const ThetaVector& theta) const;
  ThetaVector denormalize(const Eigen::Ref<const Eigen::VectorXd>& unit) const;
};

/// Points on a sphere centred at the origin.
struct PointSet {
  std::vector<Vec3> points;
  double radius = 0.0;

  std::size_t size() const { return points.size(); }
};

inline constexpr double kDefaultGeomMargin = 1e-4;

/// Generalized spiral (Saff-Kuijlaars) point set with n >= 2 points. The first
/// and last points are the south and north poles.
PointSet spiral_points(std::size_t n, double radius);

/// Radii of the fictitious spheres, ordered as ThetaVector.
struct FictitiousRadii {
  double scalp_outer = 0.0;
  double scalp_inner = 0.0;
  double skull_outer = 0.0;
  double skull_inner = 0.0;
  double brain_outer = 0.0;

  std::array<double, kThetaDim> to_array() const {
    return {scalp_outer, scalp_inner, skull_outer, skull_inner, brain_outer};
  }
};

/// Scales each physical surface by its factor. Throws GeometryDegenerate if a
/// fictitious sphere is not strictly outside the closure of its layer, or lies
/// within `margin` of any physical radius.
FictitiousRadii fictitious_radii(const ThetaVector& theta, const HeadModel& head,
                                 double margin = kDefaultGeomMargin);

/// Number of kernel centres per fictitious sphere, ordered as ThetaVector.
struct CenterCounts {
  std::size_t scalp_outer = 180;
  std::size_t scalp_inner = 90;
  std::size_t skull_outer = 90;
  std::size_t skull_inner = 90;
  std::size_t brain_outer = 90;

  std::array<std::size_t, kThetaDim> to_array() const {
    return {scalp_outer, scalp_inner, skull_outer, skull_inner, brain_outer};
  }
  static CenterCounts from_array(const std::array<std::size_t, kThetaDim>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
  std::size_t total() const {
    return scalp_outer + scalp_inner + skull_outer + skull_inner + brain_outer;
  }
  bool operator==(const CenterCounts&) const = default;
};

struct CenterSets {
  PointSet scalp_outer;
  PointSet scalp_inner;
  PointSet skull_outer;
  PointSet skull_inner;
  PointSet brain_outer;

  std::size_t total() const {
    return scalp_outer.size() + scalp_inner.size() + skull_outer.size() + skull_inner.size() +
           brain_outer.size();
  }
};

/// Spiral centre sets on each fictitious sphere. A count of one places the
/// single centre at the south pole.
CenterSets build_center_sets(const ThetaVector& theta, const HeadModel& head,
                             const CenterCounts& counts, double margin = kDefaultGeomMargin);

}  // namespace mfstune
