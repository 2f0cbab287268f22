#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "mfstune/errors.hpp"
#include "mfstune/oracle.hpp"

using namespace mfstune;
using std::numbers::pi;

namespace {

PointSet single(const Vec3& p) { return PointSet{{p}, p.norm()}; }

Dipole random_dipole(std::mt19937_64& g, double max_r) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> n;
  Vec3 p;
  do p = Vec3(u(g), u(g), u(g));
  while (p.norm() > 1);
  return {p * max_r, Vec3(n(g), n(g), n(g)).normalized()};
}

// Degree-n gain from a direct solve of the five interface conditions.
// Unknowns: brain A r^n; skull B r^n + C r^-(n+1); scalp D r^n + E r^-(n+1).
// The primary part in the brain is r^-(n+1).
double gain_by_direct_solve(const HeadModel& h, int n) {
  const double N = n;
  auto rp = [&](double r) { return std::pow(r, N); };
  auto rm = [&](double r) { return std::pow(r, -N - 1); };
  auto drp = [&](double r) { return N * std::pow(r, N - 1); };
  auto drm = [&](double r) { return -(N + 1) * std::pow(r, -N - 2); };
  // Radii in units of r_scalp keep the powers representable at high degree.
  const double a = h.r_brain / h.r_scalp, b = h.r_skull / h.r_scalp, c = 1.0;
  const double sb = h.sigma_brain, sk = h.sigma_skull, ss = h.sigma_scalp;
  Eigen::Matrix<double, 5, 5> m = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 1> rhs = Eigen::Matrix<double, 5, 1>::Zero();
  // brain/skull potential
  m.row(0) << rp(a), -rp(a), -rm(a), 0, 0;
  rhs[0] = -rm(a);
  // brain/skull current
  m.row(1) << sb * drp(a), -sk * drp(a), -sk * drm(a), 0, 0;
  rhs[1] = -sb * drm(a);
  // skull/scalp potential and current
  m.row(2) << 0, rp(b), rm(b), -rp(b), -rm(b);
  m.row(3) << 0, sk * drp(b), sk * drm(b), -ss * drp(b), -ss * drm(b);
  // insulated scalp
  m.row(4) << 0, 0, 0, drp(c), drm(c);
  const Eigen::Matrix<double, 5, 1> x = m.fullPivLu().solve(rhs);
  return (x[3] * rp(c) + x[4] * rm(c)) / rm(c);
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2 / ((1 - z * z) * dp * dp);
  }
}

}  // namespace

TEST_CASE("central dipole matches the closed form") {
  HeadModel h;
  h.sigma_skull = h.sigma_scalp = h.sigma_brain = 0.33;
  const Dipole d{Vec3::Zero(), Vec3::UnitZ()};
  const double expected = 3.0 / (4 * pi * 0.33 * 0.01);
  CHECK(expected == doctest::Approx(72.34).epsilon(1e-3));
  const auto layered = layered_potential(h, d, single(Vec3(0, 0, 0.1)));
  CHECK(layered.field.values[0] == doctest::Approx(expected).epsilon(1e-12));
  const auto closed = homogeneous_reference(0.33, 0.1, d, single(Vec3(0, 0, 0.1)));
  CHECK(closed.values[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("homogeneous reference basics") {
  const Dipole d{Vec3::Zero(), Vec3::UnitZ()};
  CHECK(std::abs(homogeneous_reference(0.33, 0.1, d, single(Vec3(0.1, 0, 0))).values[0]) < 1e-12);
  const Dipole off{Vec3(0.01, -0.02, 0.03), Vec3(0.3, 0.1, -0.5)};
  Dipole twice = off;
  twice.moment *= 2;
  const PointSet eval = spiral_points(50, 0.1);
  const auto a = homogeneous_reference(0.33, 0.1, off, eval).values;
  const auto b = homogeneous_reference(0.33, 0.1, twice, eval).values;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(2 * a[i]).epsilon(1e-14));
}

TEST_CASE("degree gain matches a direct interface solve") {
  const HeadModel h;
  for (int n : {1, 2, 3, 5, 10, 25, 60}) {
    const double expected = gain_by_direct_solve(h, n);
    // The direct 5x5 solve loses digits as the powers spread at high degree.
    CHECK(layered_degree_gain(h, n) == doctest::Approx(expected).epsilon(n < 30 ? 1e-9 : 1e-7));
  }
  HeadModel uniform;
  uniform.sigma_skull = uniform.sigma_scalp = uniform.sigma_brain;
  for (int n : {1, 4, 9}) CHECK(layered_degree_gain(uniform, n) == doctest::Approx((2.0 * n + 1) / n));
}

TEST_CASE("equal conductivities reduce to the homogeneous sphere") {
  HeadModel h;
  h.sigma_skull = h.sigma_scalp = h.sigma_brain;
  std::mt19937_64 g(11);
  const PointSet eval = spiral_points(200, h.r_scalp);
  for (int i = 0; i < 20; ++i) {
    const Dipole d = random_dipole(g, 0.8 * h.r_brain);
    const auto a = layered_potential(h, d, eval).field.values;
    const auto b = homogeneous_reference(h.sigma_brain, h.r_scalp, d, eval).values;
    double num = 0, den = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      num = std::max(num, std::abs(a[k] - b[k]));
      den = std::max(den, std::abs(b[k]));
    }
    CHECK(num / den < 1e-8);
  }
}

TEST_CASE("zero moment gives a zero field") {
  const HeadModel h;
  const auto f = layered_potential(h, {Vec3(0.01, 0, 0.02), Vec3::Zero()}, spiral_points(30, h.r_scalp));
  for (double v : f.field.values) CHECK(v == 0.0);
}

TEST_CASE("axial dipole field is axisymmetric") {
  const HeadModel h;
  const Dipole d{Vec3(0, 0, 0.05), Vec3::UnitZ()};
  for (double polar : {0.2, 1.0, 2.5}) {
    PointSet ring;
    ring.radius = h.r_scalp;
    for (int k = 0; k < 9; ++k) {
      const double az = 2 * pi * k / 9;
      ring.points.push_back(h.r_scalp * Vec3(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar)));
    }
    const auto v = layered_potential(h, d, ring).field.values;
    for (double x : v) CHECK(x == doctest::Approx(v[0]).epsilon(1e-10));
  }
}

TEST_CASE("field is linear in the moment") {
  const HeadModel h;
  const PointSet eval = spiral_points(100, h.r_scalp);
  const Vec3 pos(0.02, -0.01, 0.04);
  const Vec3 q1(1, 0.2, -0.3), q2(-0.4, 0.9, 0.1);
  const auto f1 = layered_potential(h, {pos, q1}, eval).field.values;
  const auto f2 = layered_potential(h, {pos, q2}, eval).field.values;
  const auto f = layered_potential(h, {pos, 1.5 * q1 - 2.0 * q2}, eval).field.values;
  double scale = 0;
  for (double v : f) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k < f.size(); ++k) CHECK(std::abs(f[k] - (1.5 * f1[k] - 2.0 * f2[k])) < 1e-10 * scale);
}

TEST_CASE("scalp mean vanishes") {
  // Exact product quadrature for degrees far above the series truncation.
  const HeadModel h;
  std::vector<double> x, w;
  gauss_legendre(96, x, w);
  const int n_az = 192;
  PointSet eval;
  eval.radius = h.r_scalp;
  std::vector<double> weight;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = std::sqrt(1 - x[i] * x[i]);
    for (int k = 0; k < n_az; ++k) {
      const double az = 2 * pi * k / n_az;
      eval.points.push_back(h.r_scalp * Vec3(s * std::cos(az), s * std::sin(az), x[i]));
      weight.push_back(w[i] * 2 * pi / n_az);
    }
  }
  std::mt19937_64 g(3);
  for (int t = 0; t < 3; ++t) {
    const Dipole d = random_dipole(g, 0.6 * h.r_brain);
    const auto v = layered_potential(h, d, eval).field.values;
    double mean = 0, mag = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      mean += weight[k] * v[k];
      mag += weight[k] * std::abs(v[k]);
    }
    CHECK(std::abs(mean) < 1e-10 * mag);
  }
}

TEST_CASE("doubling the truncation degree changes nothing") {
  const HeadModel h;
  std::mt19937_64 g(5);
  const PointSet eval = spiral_points(100, h.r_scalp);
  for (int t = 0; t < 5; ++t) {
    const Dipole d = random_dipole(g, 0.85 * h.r_brain);
    const SeriesField s = layered_potential(h, d, eval);
    const auto doubled = layered_potential_to_degree(h, d, eval, 2 * s.degrees).values;
    double diff = 0, scale = 0;
    for (std::size_t k = 0; k < doubled.size(); ++k) {
      diff = std::max(diff, std::abs(doubled[k] - s.field.values[k]));
      scale = std::max(scale, std::abs(doubled[k]));
    }
    CHECK(diff < 1e-10 * scale);
  }
}

TEST_CASE("oracle domain errors") {
  const HeadModel h;
  const PointSet eval = spiral_points(10, h.r_scalp);
  CHECK_THROWS_AS(layered_potential(h, {Vec3(0, 0, 0.09), Vec3::UnitZ()}, eval), DomainError);
  CHECK_THROWS_AS(layered_potential(h, {Vec3(0, 0, 0.0869), Vec3::UnitZ()}, eval, 1e-10, 20), ConvergenceError);
  CHECK_THROWS_AS(layered_potential(h, {Vec3(0, 0, 0.01), Vec3::UnitZ()}, spiral_points(10, 0.09)), InvalidArgument);
}
