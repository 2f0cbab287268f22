#include "mfstune/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mfstune/errors.hpp"

namespace mfstune {

namespace {

constexpr double kSurfaceTol = 1e-9;

void check_on_sphere(const PointSet& eval, double radius, const char* what) {
  for (const auto& p : eval.points) {
    if (std::abs(p.norm() - radius) > kSurfaceTol * radius) {
      std::ostringstream msg;
      msg << what << ": evaluation point is not on the sphere of radius " << radius;
      throw InvalidArgument(msg.str());
    }
  }
}

void check_inside(const Dipole& dipole, double radius) {
  if (!dipole.position.allFinite() || !dipole.moment.allFinite()) {
    throw DomainError("dipole has non-finite position or moment");
  }
  if (!(dipole.position.norm() < radius)) {
    std::ostringstream msg;
    msg << "dipole at distance " << dipole.position.norm() << " m is outside the brain (radius "
        << radius << " m)";
    throw DomainError(msg.str());
  }
}

// Coefficient map across an interface at normalized radius s, from the inner
// layer (conductivity sigma_in) to the outer layer (sigma_out), for the radial
// basis a*s^n + b*s^-(n+1).
struct Transfer {
  double m11, m12, m21, m22;
};

Transfer interface_transfer(double sigma_out, double sigma_in, double s, int n) {
  const double nd = n;
  const double denom = sigma_out * (2.0 * nd + 1.0);
  const double s_pow = std::pow(s, 2.0 * nd + 1.0);
  return {(sigma_out * (nd + 1.0) + sigma_in * nd) / denom,
          (nd + 1.0) * (sigma_out - sigma_in) / (s_pow * denom),
          nd * (sigma_out - sigma_in) * s_pow / denom,
          (sigma_out * nd + sigma_in * (nd + 1.0)) / denom};
}

// Per-dipole geometry shared by every evaluation point.
struct SourceFrame {
  Vec3 dir;           // unit vector towards the dipole (z if at origin)
  double q_radial;    // q . dir
  double ecc;         // |r0| / r_scalp
  double prefactor;   // 1 / (4 pi sigma_brain r_scalp^2)
};

SourceFrame make_frame(const HeadModel& head, const Dipole& dipole) {
  const double r0 = dipole.position.norm();
  SourceFrame f;
  f.dir = r0 > 0.0 ? Vec3(dipole.position / r0) : Vec3(Vec3::UnitZ());
  f.q_radial = dipole.moment.dot(f.dir);
  f.ecc = r0 / head.r_scalp;
  f.prefactor = 1.0 / (4.0 * std::numbers::pi * head.sigma_brain * head.r_scalp * head.r_scalp);
  return f;
}

// Sums gain[n] * ecc^(n-1) * h_n(x) for n = 1..gains.size(), with
// h_n = n P_n(x) (q.r0hat) + P_n'(x) (q.rhat - x q.r0hat).
double sum_series(const std::vector<double>& gains, const SourceFrame& f, const Vec3& rhat,
                  const Vec3& moment) {
  const double x = std::clamp(rhat.dot(f.dir), -1.0, 1.0);
  const double q_tangent = moment.dot(rhat) - x * f.q_radial;
  // P_{n-1}, P_n and P'_{n-1}, P'_n
  double p_prev = 1.0, p_cur = x;
  double dp_prev = 0.0, dp_cur = 1.0;
  double ecc_pow = 1.0;
  double total = 0.0;
  const int degrees = static_cast<int>(gains.size());
  for (int n = 1; n <= degrees; ++n) {
    const double h = n * p_cur * f.q_radial + dp_cur * q_tangent;
    total += gains[static_cast<std::size_t>(n - 1)] * ecc_pow * h;
    const double p_next = ((2.0 * n + 1.0) * x * p_cur - n * p_prev) / (n + 1.0);
    const double dp_next = dp_prev + (2.0 * n + 1.0) * p_cur;
    p_prev = p_cur;
    p_cur = p_next;
    dp_prev = dp_cur;
    dp_cur = dp_next;
    ecc_pow *= f.ecc;
  }
  return total;
}

ScalpField evaluate(const HeadModel& head, const Dipole& dipole, const PointSet& eval,
                    const std::vector<double>& gains) {
  const SourceFrame f = make_frame(head, dipole);
  ScalpField out;
  out.values.reserve(eval.size());
  for (const auto& p : eval.points) {
    out.values.push_back(f.prefactor * sum_series(gains, f, p.normalized(), dipole.moment));
  }
  return out;
}

}  // namespace

double layered_degree_gain(const HeadModel& head, int n) {
  if (n < 1) throw InvalidArgument("harmonic degree must be >= 1");
  const double s_brain = head.r_brain / head.r_scalp;
  const double s_skull = head.r_skull / head.r_scalp;
  const double nd = n;

  // Brain coefficients are (A, 1): the unit primary field plus an unknown
  // regular part A. Track the A-coefficient and the constant separately.
  const Transfer t3 = interface_transfer(head.sigma_skull, head.sigma_brain, s_brain, n);
  const Transfer t2 = interface_transfer(head.sigma_scalp, head.sigma_skull, s_skull, n);
  const double skull_aA = t3.m11, skull_bA = t3.m21;
  const double skull_a1 = t3.m12, skull_b1 = t3.m22;
  const double scalp_aA = t2.m11 * skull_aA + t2.m12 * skull_bA;
  const double scalp_bA = t2.m21 * skull_aA + t2.m22 * skull_bA;
  const double scalp_a1 = t2.m11 * skull_a1 + t2.m12 * skull_b1;
  const double scalp_b1 = t2.m21 * skull_a1 + t2.m22 * skull_b1;

  // Zero radial current at the scalp: n a - (n + 1) b = 0 at s = 1.
  const double amp =
      -(nd * scalp_a1 - (nd + 1.0) * scalp_b1) / (nd * scalp_aA - (nd + 1.0) * scalp_bA);
  const double gain = (scalp_aA * amp + scalp_a1) + (scalp_bA * amp + scalp_b1);
  if (!std::isfinite(gain)) {
    throw ConvergenceError("layered series coefficient overflowed at degree " +
                           std::to_string(n));
  }
  return gain;
}

SeriesField layered_potential(const HeadModel& head, const Dipole& dipole, const PointSet& eval,
                              double tol, int max_degree) {
  head.validate();
  check_inside(dipole, head.r_brain);
  check_on_sphere(eval, head.r_scalp, "layered_potential");
  if (!(tol > 0.0)) throw InvalidArgument("oracle tolerance must be positive");
  if (max_degree < 1) throw InvalidArgument("max_degree must be >= 1");

  const double q_norm = dipole.moment.norm();
  if (q_norm == 0.0) {
    return {ScalpField{std::vector<double>(eval.size(), 0.0)}, 1};
  }

  // Per-term bound: |h_n| <= |q| (n + n (n + 1) / 2). The tail after degree N
  // is bounded by the N-th term times 1 / (1 - rho), rho the worst-case ratio
  // of consecutive bounds.
  const double ecc = dipole.position.norm() / head.r_scalp;
  std::vector<double> gains;
  const double reference = std::abs(layered_degree_gain(head, 1));
  double ecc_pow = 1.0;
  for (int n = 1; n <= max_degree; ++n) {
    const double g = layered_degree_gain(head, n);
    gains.push_back(g);
    if (n >= 2) {
      const double nd = n;
      const double bound = std::abs(g) * ecc_pow * (nd + nd * (nd + 1.0) / 2.0);
      const double growth = ((nd + 2.0) / (nd + 1.0)) * ((nd + 2.0) / (nd + 1.0));
      const double rho = ecc * growth;
      if (rho < 1.0 && bound / (1.0 - rho) < tol * reference) {
        return {evaluate(head, dipole, eval, gains), n};
      }
    }
    if (ecc == 0.0 && n >= 1) {
      return {evaluate(head, dipole, eval, gains), n};
    }
    ecc_pow *= ecc;
  }
  std::ostringstream msg;
  msg << "layered series did not reach tolerance " << tol << " within " << max_degree
      << " degrees (eccentricity " << dipole.position.norm() / head.r_brain << ")";
  throw ConvergenceError(msg.str());
}

ScalpField layered_potential_to_degree(const HeadModel& head, const Dipole& dipole,
                                       const PointSet& eval, int degrees) {
  head.validate();
  check_inside(dipole, head.r_brain);
  check_on_sphere(eval, head.r_scalp, "layered_potential_to_degree");
  if (degrees < 1) throw InvalidArgument("degrees must be >= 1");
  std::vector<double> gains;
  gains.reserve(static_cast<std::size_t>(degrees));
  for (int n = 1; n <= degrees; ++n) gains.push_back(layered_degree_gain(head, n));
  return evaluate(head, dipole, eval, gains);
}

ScalpField homogeneous_reference(double sigma, double radius, const Dipole& dipole,
                                 const PointSet& eval) {
  if (!(sigma > 0.0) || !(radius > 0.0)) {
    throw InvalidArgument("homogeneous_reference requires positive sigma and radius");
  }
  check_inside(dipole, radius);
  check_on_sphere(eval, radius, "homogeneous_reference");
  const double scale = 1.0 / (4.0 * std::numbers::pi * sigma);
  const Vec3& r0 = dipole.position;
  const Vec3& q = dipole.moment;
  ScalpField out;
  out.values.reserve(eval.size());
  for (const auto& r : eval.points) {
    const Vec3 d = r - r0;
    const double dn = d.norm();
    // Frank's formula: twice the free-space field plus the image correction.
    const double denom = radius * (radius * dn + radius * radius - r.dot(r0));
    const double v = 2.0 * q.dot(d) / (dn * dn * dn) + q.dot(r + radius * d / dn) / denom;
    out.values.push_back(scale * v);
  }
  return out;
}

}  // namespace mfstune
