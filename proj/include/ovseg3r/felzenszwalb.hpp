// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_FELZENSZWALB_HPP
#define OVSEG3R_FELZENSZWALB_HPP

#include <cstdint>
#include <vector>

#include "ovseg3r/graph.hpp"
#include "ovseg3r/types.hpp"

namespace ovseg3r {

/// Disjoint-set forest with union by size, path compression, and a
/// per-root adaptive merge threshold. Fresh roots start at sp_thresh.
class DisjointForest {
public:
  DisjointForest(std::uint32_t count, double initial_threshold)
      : parent_(count), size_(count, 1), threshold_(count, initial_threshold),
        components_(count) {
    for (std::uint32_t i = 0; i < count; ++i) parent_[i] = i;
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  /// Merge two distinct roots; returns the surviving root.
  std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
    if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    --components_;
    return a;
  }

  std::uint32_t size(std::uint32_t root) const { return size_[root]; }
  double threshold(std::uint32_t root) const { return threshold_[root]; }
  void set_threshold(std::uint32_t root, double t) { threshold_[root] = t; }
  std::uint32_t component_count() const { return components_; }

private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
  std::vector<double> threshold_;
  std::uint32_t components_;
};

/// Felzenszwalb segmentation with adaptive thresholds. Edges are
/// processed by ascending weight (ties by ascending (i,j)); an edge
/// merges two components iff its weight is within both roots'
/// thresholds, and the merged root's threshold becomes
/// w + sp_thresh / size. A second pass over the same order force-merges
/// components smaller than sp_min. Labels are consecutive from 0 in
/// order of first appearance by point index.
SuperpointMask felzenszwalb_segment(std::size_t point_count, const EdgeList& edges,
                                    const SegmentConfig& cfg);

inline SuperpointMask felzenszwalb_segment(const PointCloud& points, const EdgeList& edges,
                                           const SegmentConfig& cfg) {
  return felzenszwalb_segment(points.size(), edges, cfg);
}

/// normals -> boundary-aware graph -> segmentation, with k-NN built at
/// the given k. Optional per-point origins orient the normals.
SuperpointMask segment_pipeline(const PointCloud& points, const CorrespondenceTable& corr,
                                const InstanceRaster& raster, const SegmentConfig& cfg,
                                std::uint32_t k = 16,
                                const std::vector<Vec3f>* view_origins = nullptr,
                                int threads = 0);

} // namespace ovseg3r

#endif // OVSEG3R_FELZENSZWALB_HPP
