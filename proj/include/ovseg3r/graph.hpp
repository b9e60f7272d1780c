// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_GRAPH_HPP
#define OVSEG3R_GRAPH_HPP

#include <cstdint>

#include "ovseg3r/knn.hpp"
#include "ovseg3r/normals.hpp"
#include "ovseg3r/types.hpp"

namespace ovseg3r {

/// Edges whose endpoints live in different views compare instance ids
/// from different namespaces; prune drops them, keep admits them.
enum class CrossViewPolicy { kPrune, kKeep };

/// Background pixels (-1): label treats -1 as an ordinary id so two
/// background points connect; prune disconnects any edge touching one.
enum class BackgroundPolicy { kLabel, kPrune };

struct SegmentConfig {
  float sp_thresh = 0.1f;
  std::uint32_t sp_min = 25;
  CrossViewPolicy cross_view = CrossViewPolicy::kPrune;
  BackgroundPolicy background = BackgroundPolicy::kLabel;

  void validate() const {
    if (!(sp_thresh > 0.0f))
      throw ValidationError("SegmentConfig: sp_thresh must be positive");
    if (sp_min < 1) throw ValidationError("SegmentConfig: sp_min must be at least 1");
  }
};

/// KNN graph with edges dropped at 2D instance boundaries. For each
/// point i and neighbor j, edge (min,max) with weight 1 - n_i.n_j is
/// emitted iff the instance test passes on the rasters at the points'
/// nearest pixels. Output is deduplicated and sorted by (i,j).
EdgeList build_boundary_aware_graph(const PointCloud& points, const NormalField& normals,
                                    const KnnIndex& index, const CorrespondenceTable& corr,
                                    const InstanceRaster& raster, const SegmentConfig& cfg,
                                    int threads = 0);

/// Same pruning rule, no raster: every KNN edge passes. Used for
/// geometry-only ablations.
EdgeList build_geometry_graph(const PointCloud& points, const NormalField& normals,
                              const KnnIndex& index, int threads = 0);

} // namespace ovseg3r

#endif // OVSEG3R_GRAPH_HPP
