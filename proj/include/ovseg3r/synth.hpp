// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_SYNTH_HPP
#define OVSEG3R_SYNTH_HPP

#include <cstdint>
#include <vector>

#include "ovseg3r/types.hpp"

namespace ovseg3r::synth {

/// flush_object: wall plane with a barely-proud rectangular patch under
///   a distinct instance id (painting-on-wall).
/// box_room: floor, two walls and a box, viewed along cycling axes.
/// two_view_seam: one plane whose points split across two views.
/// random_blobs: seeded ball clusters, views assigned at random.
enum class SceneKind { kFlushObject, kBoxRoom, kTwoViewSeam, kRandomBlobs };

struct SceneRecipe {
  SceneKind kind = SceneKind::kFlushObject;
  std::uint32_t point_count = 50000;
  std::uint32_t view_count = 2;
  std::uint32_t raster_height = 64;
  std::uint32_t raster_width = 64;
  double smoothing_sigma = 0.0; // meters; models reconstruction over-smoothing
  std::uint64_t seed = 0;

  void validate() const {
    if (point_count == 0) throw ValidationError("SceneRecipe: point count must be positive");
    if (view_count == 0) throw ValidationError("SceneRecipe: view count must be positive");
    if (raster_height < 2 || raster_width < 2)
      throw ValidationError("SceneRecipe: raster dims must be at least 2");
    if (!(smoothing_sigma >= 0.0) || !std::isfinite(smoothing_sigma))
      throw ValidationError("SceneRecipe: smoothing sigma must be finite and >= 0");
  }
};

/// A generated scene with everything the pipeline consumes plus the
/// ground truth the tests compare against. gt_labels are global
/// instance ids derived from the rasters through the correspondence
/// table, so rendering ground truth through the table reproduces them
/// exactly; raster ids are per-view local and map back through
/// local_to_global.
struct SceneBundle {
  PointCloud cloud;
  CorrespondenceTable corr;
  InstanceRaster raster;
  std::vector<std::int32_t> gt_labels;                     // per point; -1 = background
  std::vector<std::vector<std::int32_t>> local_to_global;  // per view
  std::vector<Vec3f> view_origins;                         // per view
  std::uint32_t instance_count = 0;

  std::vector<Vec3f> per_point_origins() const {
    std::vector<Vec3f> origins(corr.point_count());
    for (std::size_t i = 0; i < corr.point_count(); ++i)
      origins[i] = view_origins[corr.entries[i].view];
    return origins;
  }
};

/// Deterministic per seed. Throws when point_count cannot cover the
/// recipe geometry (some instance would receive no points).
SceneBundle generate(const SceneRecipe& recipe);

} // namespace ovseg3r::synth

#endif // OVSEG3R_SYNTH_HPP
