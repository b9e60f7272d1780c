// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ovseg3r/normals.hpp"
#include "ovseg3r/rng.hpp"

using namespace ovseg3r;

namespace {

PointCloud plane_cloud(Rng& rng, std::uint32_t n, const double basis_u[3],
                       const double basis_v[3]) {
  PointCloud cloud;
  cloud.positions.resize(n);
  for (auto& p : cloud.positions) {
    const double a = rng.uniform(0, 2);
    const double b = rng.uniform(0, 2);
    p = {static_cast<float>(a * basis_u[0] + b * basis_v[0]),
         static_cast<float>(a * basis_u[1] + b * basis_v[1]),
         static_cast<float>(a * basis_u[2] + b * basis_v[2])};
  }
  return cloud;
}

double angle_deg(const Vec3f& n, const double r[3]) {
  const double dot = std::abs(n[0] * r[0] + n[1] * r[1] + n[2] * r[2]);
  return std::acos(std::min(1.0, dot)) * 180.0 / M_PI;
}

} // namespace

TEST_CASE("plane z=0: every normal is exactly (0,0,1)") {
  Rng rng(11);
  const double u[3] = {1, 0, 0}, v[3] = {0, 1, 0};
  const PointCloud cloud = plane_cloud(rng, 500, u, v);
  const KnnIndex index(cloud, 8);
  const NormalField field = estimate_normals(cloud, index);
  field.validate();
  const double up[3] = {0, 0, 1};
  for (std::size_t i = 0; i < field.size(); ++i) {
    CHECK_FALSE(field.degenerate[i]);
    CHECK(angle_deg(field.normals[i], up) < 0.01);
    CHECK(field.normals[i][2] > 0.0f); // max-component sign rule
  }
}

TEST_CASE("plane x+y+z=0: normals all-positive by the sign rule") {
  Rng rng(12);
  // span of the plane x+y+z=0
  const double u[3] = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0};
  const double v[3] = {1.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0), -2.0 / std::sqrt(6.0)};
  const PointCloud cloud = plane_cloud(rng, 500, u, v);
  const KnnIndex index(cloud, 8);
  const NormalField field = estimate_normals(cloud, index);
  const double expected[3] = {1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
  for (std::size_t i = 0; i < field.size(); ++i) {
    // f32 positions sit ~1e-7 off the exact plane, so allow a hair more
    // than the axis-aligned case.
    CHECK(angle_deg(field.normals[i], expected) < 0.05);
    CHECK(field.normals[i][0] > 0.0f);
    CHECK(field.normals[i][1] > 0.0f);
    CHECK(field.normals[i][2] > 0.0f);
  }
}

TEST_CASE("noisy sphere: angular error under 5 degrees for 99% of points") {
  Rng rng(13);
  PointCloud cloud;
  std::vector<std::array<double, 3>> exact(2000);
  cloud.positions.resize(2000);
  for (std::size_t i = 0; i < 2000; ++i) {
    double d[3];
    double norm;
    do {
      for (int a = 0; a < 3; ++a) d[a] = rng.gaussian();
      norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    } while (norm < 1e-9);
    for (int a = 0; a < 3; ++a) d[a] /= norm;
    exact[i] = {d[0], d[1], d[2]};
    cloud.positions[i] = {static_cast<float>(d[0] + rng.gaussian() * 0.005),
                          static_cast<float>(d[1] + rng.gaussian() * 0.005),
                          static_cast<float>(d[2] + rng.gaussian() * 0.005)};
  }
  const KnnIndex index(cloud, 16);
  const NormalField field = estimate_normals(cloud, index);
  std::size_t good = 0;
  for (std::size_t i = 0; i < 2000; ++i)
    if (angle_deg(field.normals[i], exact[i].data()) < 5.0) ++good;
  CHECK(good >= 1980);
}

TEST_CASE("view origins orient normals toward the camera") {
  Rng rng(14);
  const double u[3] = {1, 0, 0}, v[3] = {0, 1, 0};
  const PointCloud cloud = plane_cloud(rng, 300, u, v);
  const KnnIndex index(cloud, 8);
  std::vector<Vec3f> below(cloud.size(), Vec3f{1.0f, 1.0f, -5.0f});
  const NormalField field = estimate_normals(cloud, index, &below);
  for (std::size_t i = 0; i < field.size(); ++i) CHECK(field.normals[i][2] < 0.0f);
}

TEST_CASE("coincident neighborhoods flag degeneracy with the fallback normal") {
  PointCloud cloud;
  cloud.positions.assign(6, {2.0f, 2.0f, 2.0f});
  const KnnIndex index(cloud, 4);
  const NormalField field = estimate_normals(cloud, index);
  for (std::size_t i = 0; i < field.size(); ++i) {
    CHECK(field.degenerate[i]);
    CHECK(field.normals[i] == Vec3f{0, 0, 1});
  }
}

TEST_CASE("rotation invariance: rotating the cloud rotates the normals") {
  Rng rng(15);
  // A gently curved sheet so normals vary across points.
  PointCloud cloud;
  cloud.positions.resize(600);
  for (auto& p : cloud.positions) {
    const double x = rng.uniform(0, 2);
    const double y = rng.uniform(0, 2);
    p = {static_cast<float>(x), static_cast<float>(y),
         static_cast<float>(0.2 * std::sin(x) * std::cos(y))};
  }
  const double c = std::cos(0.7), s = std::sin(0.7);
  PointCloud rotated;
  rotated.positions.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3f& p = cloud.positions[i];
    rotated.positions[i] = {static_cast<float>(c * p[0] - s * p[1]),
                            static_cast<float>(s * p[0] + c * p[1]), p[2]};
  }
  const KnnIndex index(cloud, 12);
  const KnnIndex rotated_index(rotated, 12);
  const NormalField base = estimate_normals(cloud, index);
  const NormalField turned = estimate_normals(rotated, rotated_index);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3f& n = base.normals[i];
    const double expected[3] = {c * n[0] - s * n[1], s * n[0] + c * n[1], n[2]};
    // compare up to the sign rule
    const Vec3f& m = turned.normals[i];
    const double dot = std::abs(m[0] * expected[0] + m[1] * expected[1] + m[2] * expected[2]);
    CHECK(dot > 1.0 - 1e-4);
  }
}

TEST_CASE("determinism: identical inputs give bit-identical normals across thread counts") {
  Rng rng(16);
  PointCloud cloud;
  cloud.positions.resize(4000);
  for (auto& p : cloud.positions)
    p = {static_cast<float>(rng.uniform(0, 1)), static_cast<float>(rng.uniform(0, 1)),
         static_cast<float>(rng.uniform(0, 1))};
  const KnnIndex index(cloud, 8);
  const NormalField a = estimate_normals(cloud, index, nullptr, 1);
  const NormalField b = estimate_normals(cloud, index, nullptr, 8);
  CHECK(a.normals == b.normals);
  CHECK(a.degenerate == b.degenerate);
}

TEST_CASE("k below 3 is rejected") {
  PointCloud cloud;
  cloud.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const KnnIndex index(cloud, 2);
  CHECK_THROWS_WITH_AS(estimate_normals(cloud, index), doctest::Contains("at least 3"),
                       ValidationError);
}
