#include "mfstune/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfstune/errors.hpp"

namespace mfstune {

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6d667374u};
  engine_.seed(seq);
}

double RngStream::uniform() { return std::generate_canonical<double, 53>(engine_); }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() { return normal_(engine_); }

std::string to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::ball:
      return "ball";
    case RegionKind::shell_sector:
      return "shell-sector";
    case RegionKind::whole_brain:
      return "whole-brain";
  }
  return "unknown";
}

RegionKind region_kind_from_string(const std::string& s) {
  if (s == "ball") return RegionKind::ball;
  if (s == "shell-sector") return RegionKind::shell_sector;
  if (s == "whole-brain") return RegionKind::whole_brain;
  throw InvalidArgument("unknown region kind '" + s + "'");
}

namespace {

double admissible_radius(const DipoleRegion& region, const HeadModel& head) {
  return head.r_brain - region.depth_margin;
}

}  // namespace

bool DipoleRegion::contains(const Vec3& x, const HeadModel& head) const {
  const double r = x.norm();
  if (!(r < admissible_radius(*this, head))) return false;
  switch (kind) {
    case RegionKind::ball:
      return (x - center).norm() <= radius;
    case RegionKind::whole_brain:
      return true;
    case RegionKind::shell_sector: {
      const double ecc = r / head.r_brain;
      if (ecc < ecc_min || ecc > ecc_max) return false;
      const double polar = r > 0.0 ? std::acos(std::clamp(x.z() / r, -1.0, 1.0)) : 0.0;
      if (polar < polar_min || polar > polar_max) return false;
      double az = std::atan2(x.y(), x.x());
      if (az < 0.0) az += 2.0 * std::numbers::pi;
      return az >= azimuth_min && az <= azimuth_max;
    }
  }
  return false;
}

void DipoleRegion::validate(const HeadModel& head) const {
  head.validate();
  if (!(depth_margin >= 0.0 && depth_margin < head.r_brain)) {
    throw InvalidArgument("depth margin must lie in [0, r_brain)");
  }
  switch (kind) {
    case RegionKind::ball:
      if (!(radius >= 0.0)) throw InvalidArgument("ball radius must be non-negative");
      if (!(std::max(0.0, center.norm() - radius) < admissible_radius(*this, head))) {
        throw InvalidArgument("ball region does not meet the admissible brain");
      }
      break;
    case RegionKind::shell_sector:
      if (!(ecc_min >= 0.0 && ecc_min <= ecc_max)) {
        throw InvalidArgument("shell-sector requires 0 <= ecc_min <= ecc_max");
      }
      if (!(ecc_min * head.r_brain < admissible_radius(*this, head))) {
        throw InvalidArgument("shell-sector lies outside the admissible brain");
      }
      if (!(polar_min >= 0.0 && polar_min <= polar_max && polar_max <= std::numbers::pi)) {
        throw InvalidArgument("shell-sector polar window must lie in [0, pi]");
      }
      if (!(azimuth_min >= 0.0 && azimuth_min <= azimuth_max &&
            azimuth_max <= 2.0 * std::numbers::pi)) {
        throw InvalidArgument("shell-sector azimuth window must lie in [0, 2 pi]");
      }
      break;
    case RegionKind::whole_brain:
      break;
  }
}

Dipole sample_dipole(const DipoleRegion& region, const HeadModel& head, RngStream& rng,
                     double magnitude) {
  region.validate(head);
  Vec3 lo, hi;
  const double r_adm = admissible_radius(region, head);
  switch (region.kind) {
    case RegionKind::ball:
      lo = region.center.array() - region.radius;
      hi = region.center.array() + region.radius;
      lo = lo.cwiseMax(Vec3::Constant(-r_adm));
      hi = hi.cwiseMin(Vec3::Constant(r_adm));
      break;
    case RegionKind::shell_sector: {
      const double r = std::min(region.ecc_max * head.r_brain, r_adm);
      lo = Vec3::Constant(-r);
      hi = Vec3::Constant(r);
      break;
    }
    case RegionKind::whole_brain:
      lo = Vec3::Constant(-r_adm);
      hi = Vec3::Constant(r_adm);
      break;
  }

  Dipole d;
  bool accepted = false;
  for (std::size_t attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
    Vec3 x;
    for (int k = 0; k < 3; ++k) x[k] = rng.uniform(lo[k], hi[k]);
    if (region.contains(x, head)) {
      d.position = x;
      accepted = true;
      break;
    }
  }
  if (!accepted) {
    throw RegionInfeasible("region '" + region.name + "' accepted no point in " +
                           std::to_string(kMaxRejectionAttempts) + " attempts");
  }
  Vec3 dir;
  double norm = 0.0;
  do {
    dir = Vec3(rng.normal(), rng.normal(), rng.normal());
    norm = dir.norm();
  } while (norm == 0.0);
  d.moment = magnitude * dir / norm;
  return d;
}

std::vector<DipoleRegion> region_catalog(const HeadModel& head, double depth_margin) {
  constexpr double pi = std::numbers::pi;
  const double rb = head.r_brain;
  std::vector<DipoleRegion> out;

  DipoleRegion deep;
  deep.name = "deep-central";
  deep.kind = RegionKind::ball;
  deep.radius = 0.3 * rb;
  out.push_back(deep);

  DipoleRegion upper;
  upper.name = "upper-deep";
  upper.kind = RegionKind::ball;
  upper.center = Vec3(0.0, 0.0, 0.3 * rb);
  upper.radius = 0.2 * rb;
  out.push_back(upper);

  DipoleRegion mid;
  mid.name = "mid-shell";
  mid.kind = RegionKind::shell_sector;
  mid.ecc_min = 0.3;
  mid.ecc_max = 0.6;
  out.push_back(mid);

  DipoleRegion cap;
  cap.name = "superior-cap";
  cap.kind = RegionKind::shell_sector;
  cap.ecc_min = 0.5;
  cap.ecc_max = 0.7;
  cap.polar_max = pi / 3.0;
  out.push_back(cap);

  DipoleRegion lateral;
  lateral.name = "lateral-band";
  lateral.kind = RegionKind::shell_sector;
  lateral.ecc_min = 0.6;
  lateral.ecc_max = 0.8;
  lateral.polar_min = pi / 3.0;
  lateral.polar_max = 2.0 * pi / 3.0;
  lateral.azimuth_max = pi / 2.0;
  out.push_back(lateral);

  DipoleRegion shallow;
  shallow.name = "shallow-sector";
  shallow.kind = RegionKind::shell_sector;
  shallow.ecc_min = 0.8;
  shallow.ecc_max = 0.9 * (1.0 - depth_margin / rb);
  shallow.polar_max = pi / 6.0;
  out.push_back(shallow);

  for (auto& r : out) r.depth_margin = depth_margin;
  return out;
}

DipoleRegion catalog_region(int index, const HeadModel& head, double depth_margin) {
  if (index < 1 || index > 6) throw InvalidArgument("catalog index must be in 1..6");
  return region_catalog(head, depth_margin)[static_cast<std::size_t>(index - 1)];
}

}  // namespace mfstune
