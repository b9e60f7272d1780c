// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/felzenszwalb.hpp"

#include <algorithm>

namespace ovseg3r {

namespace {

std::vector<EdgeList::Edge> by_ascending_weight(const EdgeList& edges) {
  std::vector<EdgeList::Edge> sorted(edges.edges);
  std::sort(sorted.begin(), sorted.end(), [](const EdgeList::Edge& a, const EdgeList::Edge& b) {
    if (a.w != b.w) return a.w < b.w;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  return sorted;
}

} // namespace

SuperpointMask felzenszwalb_segment(std::size_t point_count, const EdgeList& edges,
                                    const SegmentConfig& cfg) {
  cfg.validate();
  if (point_count == 0)
    throw ValidationError("felzenszwalb_segment: point count must be positive");
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges.edges[e].j >= point_count)
      throw ValidationError("felzenszwalb_segment: edge endpoint out of range at edge " +
                            std::to_string(e));

  const auto sorted = by_ascending_weight(edges);
  const std::uint32_t n = static_cast<std::uint32_t>(point_count);
  DisjointForest forest(n, cfg.sp_thresh);

  for (const auto& e : sorted) {
    const std::uint32_t root_i = forest.find(e.i);
    const std::uint32_t root_j = forest.find(e.j);
    if (root_i == root_j) continue;
    const double w = e.w;
    if (w <= forest.threshold(root_i) && w <= forest.threshold(root_j)) {
      const std::uint32_t merged = forest.unite(root_i, root_j);
      forest.set_threshold(merged, w + static_cast<double>(cfg.sp_thresh) / forest.size(merged));
    }
  }

  // Force-merge small segments, same edge order.
  if (cfg.sp_min > 1) {
    for (const auto& e : sorted) {
      const std::uint32_t root_i = forest.find(e.i);
      const std::uint32_t root_j = forest.find(e.j);
      if (root_i == root_j) continue;
      if (forest.size(root_i) < cfg.sp_min || forest.size(root_j) < cfg.sp_min)
        forest.unite(root_i, root_j);
    }
  }

  SuperpointMask mask;
  mask.point_labels.resize(point_count);
  std::vector<std::uint32_t> label_of_root(point_count, UINT32_MAX);
  std::uint32_t next = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t root = forest.find(i);
    if (label_of_root[root] == UINT32_MAX) label_of_root[root] = next++;
    mask.point_labels[i] = label_of_root[root];
  }
  mask.superpoint_count = next;
  return mask;
}

SuperpointMask segment_pipeline(const PointCloud& points, const CorrespondenceTable& corr,
                                const InstanceRaster& raster, const SegmentConfig& cfg,
                                std::uint32_t k, const std::vector<Vec3f>* view_origins,
                                int threads) {
  const KnnIndex index = build_knn_index(points, k);
  const NormalField normals = estimate_normals(points, index, view_origins, threads);
  const EdgeList edges =
      build_boundary_aware_graph(points, normals, index, corr, raster, cfg, threads);
  return felzenszwalb_segment(points.size(), edges, cfg);
}

} // namespace ovseg3r
