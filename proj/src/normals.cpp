// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/normals.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ovseg3r/parallel.hpp"

namespace ovseg3r {

namespace {

void orient_by_component(Eigen::Vector3d& n) {
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(n[a]) > std::abs(n[axis])) axis = a;
  if (n[axis] < 0.0) n = -n;
}

} // namespace

NormalField estimate_normals(const PointCloud& cloud, const KnnIndex& index,
                             const std::vector<Vec3f>* view_origins, int threads) {
  if (index.size() != cloud.size())
    throw ValidationError("estimate_normals: index was built over a different cloud");
  if (index.k() < 3)
    throw ValidationError("estimate_normals: k must be at least 3 for a well-posed covariance");
  if (view_origins != nullptr && view_origins->size() != cloud.size())
    throw ValidationError("estimate_normals: view origin count does not match cloud");

  NormalField field;
  field.normals.resize(cloud.size());
  field.degenerate.assign(cloud.size(), 0);

  parallel_for(cloud.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> neighbors;
    for (std::size_t i = begin; i < end; ++i) {
      index.query(static_cast<std::uint32_t>(i), neighbors);

      // Neighborhood = query point plus its k neighbors.
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      const auto add = [&](const Vec3f& p) {
        mean += Eigen::Vector3d(p[0], p[1], p[2]);
      };
      add(cloud.positions[i]);
      for (std::uint32_t j : neighbors) add(cloud.positions[j]);
      const double count = 1.0 + static_cast<double>(neighbors.size());
      mean /= count;

      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      const auto accumulate = [&](const Vec3f& p) {
        const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
        cov += d * d.transpose();
      };
      accumulate(cloud.positions[i]);
      for (std::uint32_t j : neighbors) accumulate(cloud.positions[j]);
      cov /= count;

      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
      const Eigen::Vector3d& eigenvalues = solver.eigenvalues(); // ascending
      Eigen::Vector3d normal = solver.eigenvectors().col(0);

      const double trace = cov.trace();
      const bool degenerate = !(trace > 0.0) || eigenvalues[1] <= 1e-12 * trace;
      if (degenerate) {
        field.normals[i] = {0.0f, 0.0f, 1.0f};
        field.degenerate[i] = 1;
        continue;
      }

      normal.normalize();
      bool oriented = false;
      if (view_origins != nullptr) {
        const Vec3f& o = (*view_origins)[i];
        const Vec3f& p = cloud.positions[i];
        const Eigen::Vector3d to_origin(static_cast<double>(o[0]) - p[0],
                                        static_cast<double>(o[1]) - p[1],
                                        static_cast<double>(o[2]) - p[2]);
        const double d = normal.dot(to_origin);
        if (d != 0.0) {
          if (d < 0.0) normal = -normal;
          oriented = true;
        }
      }
      if (!oriented) orient_by_component(normal);

      field.normals[i] = {static_cast<float>(normal[0]), static_cast<float>(normal[1]),
                          static_cast<float>(normal[2])};
    }
  });

  return field;
}

} // namespace ovseg3r
