// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_VIP_HPP
#define OVSEG3R_VIP_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "ovseg3r/types.hpp"

namespace ovseg3r {

/// Dense boolean matrix, row-major, one byte per cell.
struct MaskMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> data;

  static MaskMatrix zeros(std::uint32_t r, std::uint32_t c) {
    MaskMatrix m;
    m.rows = r;
    m.cols = c;
    m.data.assign(static_cast<std::size_t>(r) * c, 0);
    return m;
  }

  bool at(std::uint32_t r, std::uint32_t c) const {
    return data[static_cast<std::size_t>(r) * cols + c] != 0;
  }
  void set(std::uint32_t r, std::uint32_t c, bool v) {
    data[static_cast<std::size_t>(r) * cols + c] = v ? 1 : 0;
  }

  bool operator==(const MaskMatrix&) const = default;
};

/// View-belonging masks for points, superpoints, and queries. The
/// point rows are not materialized (each point belongs to exactly one
/// view, so the per-point view index carries the whole V x N matrix).
struct VisibilityMasks {
  std::uint32_t view_count = 0;
  std::vector<std::uint32_t> point_views; // N
  MaskMatrix superpoint_vis;              // V x n
  MaskMatrix query_vis;                   // V x q

  bool point_vis(std::uint32_t view, std::uint32_t point) const {
    return point_views[point] == view;
  }

  bool operator==(const VisibilityMasks&) const = default;
};

/// View-belonging masks: a superpoint is visible in a view iff any of
/// its points was reconstructed from that view; a query is visible
/// where its initializing superpoint is.
VisibilityMasks compute_visibility(const CorrespondenceTable& corr, const SuperpointMask& sp,
                                   std::span<const std::uint32_t> init_superpoints);

/// One view's slice of the scene-level prediction.
struct ViewPartition {
  std::uint32_t view_index = 0;
  std::vector<std::uint32_t> query_rows;      // global query indices, ascending
  std::vector<std::uint32_t> superpoint_cols; // global superpoint indices, ascending
  MaskMatrix masks;                           // q_v x n_v
  std::vector<std::int32_t> classes;          // q_v

  bool operator==(const ViewPartition&) const = default;
};

/// Slice masks and classes per view by the visibility masks. Views
/// with no visible query yield empty records rather than being omitted.
std::vector<ViewPartition> partition_predictions(const ScenePrediction& pred,
                                                 const VisibilityMasks& vis);

/// Masks = (Q S^T > tau); classes = argmax over text rows of Q T^T,
/// ties to the lowest class index. Dot products accumulate left to
/// right in double.
ScenePrediction decode_predictions(const FeatureMatrix& queries, const FeatureMatrix& sp_features,
                                   const FeatureMatrix& text, double tau,
                                   std::span<const std::uint32_t> init_superpoints,
                                   int threads = 0);

/// feasible[a][g]: ground-truth mask g covers query a's initializing
/// superpoint, i.e. the pair may be matched during supervision.
MaskMatrix match_feasibility(const MaskMatrix& gt_masks,
                             std::span<const std::uint32_t> init_superpoints);

} // namespace ovseg3r

#endif // OVSEG3R_VIP_HPP
