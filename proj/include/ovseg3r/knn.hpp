// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_KNN_HPP
#define OVSEG3R_KNN_HPP

#include <cstdint>
#include <vector>

#include "ovseg3r/types.hpp"

namespace ovseg3r {

/// Exact k-nearest-neighbor index over a point cloud, backed by a
/// median-split k-d tree. query(i) returns the k indices != i closest
/// to point i under Euclidean distance, ascending, with distance ties
/// broken by ascending index. Queries are pure and thread-safe.
class KnnIndex {
public:
  KnnIndex(const PointCloud& cloud, std::uint32_t k);

  std::uint32_t k() const { return k_; }
  std::size_t size() const { return positions_.size(); }

  void query(std::uint32_t i, std::vector<std::uint32_t>& out) const;

  std::vector<std::uint32_t> query(std::uint32_t i) const {
    std::vector<std::uint32_t> out;
    query(i, out);
    return out;
  }

  /// Flat N x k neighbor table, row i = query(i). Row-parallel.
  std::vector<std::uint32_t> all_neighbors(int threads = 0) const;

private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;   // leaf when right == 0
    std::uint32_t right = 0; // index of right child; left child is adjacent
    float split = 0.0f;
    std::uint8_t axis = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3f> positions_;
  std::vector<std::uint32_t> order_; // permutation grouped by leaf
  std::vector<Node> nodes_;
  std::uint32_t k_ = 0;
};

/// k >= 1 and k < N required; exact by construction.
KnnIndex build_knn_index(const PointCloud& cloud, std::uint32_t k);

} // namespace ovseg3r

#endif // OVSEG3R_KNN_HPP
