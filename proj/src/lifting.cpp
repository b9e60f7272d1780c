// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ovseg3r/parallel.hpp"
#include "ovseg3r/rng.hpp"

namespace ovseg3r {

FeatureMatrix sample_point_features(const ImageFeatureStack& stack,
                                    const CorrespondenceTable& corr, int threads) {
  if (corr.view_count() != stack.views)
    throw ValidationError("sample_point_features: view counts differ");

  const std::uint32_t n = static_cast<std::uint32_t>(corr.point_count());
  FeatureMatrix out = FeatureMatrix::zeros(n, stack.channels);

  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = corr.entries[i];
      const double u =
          std::clamp(static_cast<double>(e.x) * (stack.width - 1), 0.0,
                     static_cast<double>(stack.width - 1));
      const double v =
          std::clamp(static_cast<double>(e.y) * (stack.height - 1), 0.0,
                     static_cast<double>(stack.height - 1));
      const std::uint32_t x0 = static_cast<std::uint32_t>(u);
      const std::uint32_t y0 = static_cast<std::uint32_t>(v);
      const std::uint32_t x1 = std::min(x0 + 1, stack.width - 1);
      const std::uint32_t y1 = std::min(y0 + 1, stack.height - 1);
      const double fx = u - x0;
      const double fy = v - y0;

      const float* c00 = stack.at(e.view, y0, x0);
      const float* c10 = stack.at(e.view, y0, x1);
      const float* c01 = stack.at(e.view, y1, x0);
      const float* c11 = stack.at(e.view, y1, x1);
      float* row = out.row(static_cast<std::uint32_t>(i));
      for (std::uint32_t c = 0; c < stack.channels; ++c) {
        const double value = (1.0 - fx) * (1.0 - fy) * c00[c] + fx * (1.0 - fy) * c10[c] +
                             (1.0 - fx) * fy * c01[c] + fx * fy * c11[c];
        if (!std::isfinite(value))
          throw ValidationError("sample_point_features: non-finite sample at point " +
                                std::to_string(i));
        row[c] = static_cast<float>(value);
      }
    }
  });
  return out;
}

std::vector<ViewAnnotation> lift_masks(const InstanceRaster& raster,
                                       const CorrespondenceTable& corr) {
  if (corr.view_count() != raster.views)
    throw ValidationError("lift_masks: view counts differ");
  for (const auto& d : corr.view_dims)
    if (d.height != raster.height || d.width != raster.width)
      throw ValidationError("lift_masks: correspondence/raster dims differ");

  std::vector<ViewAnnotation> annotations(raster.views);
  for (std::uint32_t v = 0; v < raster.views; ++v) annotations[v].view_index = v;
  for (std::size_t i = 0; i < corr.point_count(); ++i) {
    const auto& e = corr.entries[i];
    auto& ann = annotations[e.view];
    ann.point_indices.push_back(static_cast<std::uint32_t>(i));
    ann.instance_ids.push_back(raster.at_nearest(e));
  }
  return annotations;
}

FeatureMatrix pool_superpoint_features(const FeatureMatrix& point_features,
                                       const SuperpointMask& superpoints, int threads) {
  superpoints.validate();
  if (point_features.rows != superpoints.point_count())
    throw ValidationError("pool_superpoint_features: row count does not match point count");

  const auto groups = superpoints.members();
  FeatureMatrix out = FeatureMatrix::zeros(superpoints.superpoint_count, point_features.cols);

  parallel_for(groups.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> acc(point_features.cols);
    for (std::size_t k = begin; k < end; ++k) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::uint32_t i : groups[k]) {
        const float* row = point_features.row(i);
        for (std::uint32_t c = 0; c < point_features.cols; ++c) acc[c] += row[c];
      }
      const double inv = 1.0 / static_cast<double>(groups[k].size());
      float* row = out.row(static_cast<std::uint32_t>(k));
      for (std::uint32_t c = 0; c < point_features.cols; ++c)
        row[c] = static_cast<float>(acc[c] * inv);
    }
  });
  return out;
}

PromptSpec build_prompt(const std::vector<std::string>& positive,
                        const std::vector<std::string>& vocabulary, std::uint32_t padded_size,
                        std::uint64_t seed) {
  if (padded_size == 0) throw ValidationError("build_prompt: padded size must be positive");
  if (positive.size() > padded_size)
    throw ValidationError("build_prompt: more positive classes than the padded size");
  std::unordered_set<std::string> positive_set(positive.begin(), positive.end());
  if (positive_set.size() != positive.size())
    throw ValidationError("build_prompt: duplicate positive class");

  // Candidate negatives: vocabulary order, deduplicated, positives excluded.
  std::vector<std::string> pool;
  std::unordered_set<std::string> seen;
  for (const auto& name : vocabulary) {
    if (positive_set.count(name) || seen.count(name)) continue;
    seen.insert(name);
    pool.push_back(name);
  }
  const std::uint32_t need = padded_size - static_cast<std::uint32_t>(positive.size());
  if (pool.size() < need)
    throw ValidationError("build_prompt: vocabulary has only " + std::to_string(pool.size()) +
                          " usable negatives, need " + std::to_string(need));

  PromptSpec spec;
  spec.seed = seed;
  spec.positive_classes = positive;
  spec.padded_classes = positive;
  Rng rng(seed);
  for (std::uint32_t idx : rng.sample_distinct(static_cast<std::uint32_t>(pool.size()), need))
    spec.padded_classes.push_back(pool[idx]);

  for (std::size_t i = 0; i < spec.padded_classes.size(); ++i) {
    if (i > 0) spec.prompt_string += " . ";
    spec.prompt_string += spec.padded_classes[i];
  }
  spec.prompt_string += " .";
  return spec;
}

} // namespace ovseg3r
