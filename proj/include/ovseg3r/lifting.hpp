// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_LIFTING_HPP
#define OVSEG3R_LIFTING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ovseg3r/types.hpp"

namespace ovseg3r {

/// Per-point 2D features sampled from the per-view feature maps at the
/// correspondence coordinates. Normalized (x,y) maps to the continuous
/// grid coordinate x*(w-1) (align-corners), clamped, then bilinear.
FeatureMatrix sample_point_features(const ImageFeatureStack& stack,
                                    const CorrespondenceTable& corr, int threads = 0);

/// View-wise 3D annotations: for each view, its points ascending, each
/// tagged with the raster id at its nearest pixel.
std::vector<ViewAnnotation> lift_masks(const InstanceRaster& raster,
                                       const CorrespondenceTable& corr);

/// Row k = mean of the point feature rows labeled k.
FeatureMatrix pool_superpoint_features(const FeatureMatrix& point_features,
                                       const SuperpointMask& superpoints, int threads = 0);

/// Class-name prompt padded to T entries with seeded negatives.
struct PromptSpec {
  std::vector<std::string> positive_classes;
  std::vector<std::string> padded_classes; // positives in order, then sampled negatives
  std::string prompt_string;               // "a . b . c ."
  std::uint64_t seed = 0;
};

/// Negatives are sampled without replacement from vocabulary minus the
/// positives; draw order is kept. Deterministic per seed.
PromptSpec build_prompt(const std::vector<std::string>& positive,
                        const std::vector<std::string>& vocabulary, std::uint32_t padded_size,
                        std::uint64_t seed);

} // namespace ovseg3r

#endif // OVSEG3R_LIFTING_HPP
