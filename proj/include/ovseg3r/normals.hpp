// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_NORMALS_HPP
#define OVSEG3R_NORMALS_HPP

#include <cstdint>
#include <vector>

#include "ovseg3r/knn.hpp"
#include "ovseg3r/types.hpp"

namespace ovseg3r {

/// Per-point unit normals plus a flag for neighborhoods too degenerate
/// to define a direction (those points carry the fallback (0,0,1)).
struct NormalField {
  std::vector<Vec3f> normals;
  std::vector<std::uint8_t> degenerate;

  std::size_t size() const { return normals.size(); }

  void validate() const {
    if (degenerate.size() != normals.size())
      throw ValidationError("NormalField: flag length mismatch");
    for (std::size_t i = 0; i < normals.size(); ++i) {
      const Vec3f& n = normals[i];
      if (!finite(n))
        throw ValidationError("NormalField: non-finite normal at point " + std::to_string(i));
      const double norm =
          std::sqrt(static_cast<double>(n[0]) * n[0] + static_cast<double>(n[1]) * n[1] +
                    static_cast<double>(n[2]) * n[2]);
      if (std::abs(norm - 1.0) > 1e-5)
        throw ValidationError("NormalField: non-unit normal at point " + std::to_string(i));
    }
  }
};

/// PCA normal per point: smallest-eigenvalue eigenvector of the 3x3
/// covariance over the point and its k neighbors, centered on the
/// neighborhood mean. Sign faces the per-point view origin when origins
/// are given, otherwise the largest-magnitude component is made
/// positive. Requires index.k() >= 3.
NormalField estimate_normals(const PointCloud& cloud, const KnnIndex& index,
                             const std::vector<Vec3f>* view_origins = nullptr,
                             int threads = 0);

} // namespace ovseg3r

#endif // OVSEG3R_NORMALS_HPP
