// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/vip.hpp"

#include "ovseg3r/parallel.hpp"

namespace ovseg3r {

VisibilityMasks compute_visibility(const CorrespondenceTable& corr, const SuperpointMask& sp,
                                   std::span<const std::uint32_t> init_superpoints) {
  if (sp.point_count() != corr.point_count())
    throw ValidationError("compute_visibility: superpoint mask does not match correspondences");
  const std::uint32_t views = corr.view_count();
  const std::uint32_t n = sp.superpoint_count;
  for (std::size_t a = 0; a < init_superpoints.size(); ++a)
    if (init_superpoints[a] >= n)
      throw ValidationError("compute_visibility: init superpoint index out of range at query " +
                            std::to_string(a));

  VisibilityMasks vis;
  vis.view_count = views;
  vis.point_views.resize(corr.point_count());
  vis.superpoint_vis = MaskMatrix::zeros(views, n);

  // Sparse accumulation: one pass over points, no V x N matrix.
  for (std::size_t i = 0; i < corr.point_count(); ++i) {
    const std::uint32_t v = corr.entries[i].view;
    vis.point_views[i] = v;
    vis.superpoint_vis.set(v, sp.point_labels[i], true);
  }

  const std::uint32_t q = static_cast<std::uint32_t>(init_superpoints.size());
  vis.query_vis = MaskMatrix::zeros(views, q);
  for (std::uint32_t v = 0; v < views; ++v)
    for (std::uint32_t a = 0; a < q; ++a)
      vis.query_vis.set(v, a, vis.superpoint_vis.at(v, init_superpoints[a]));
  return vis;
}

std::vector<ViewPartition> partition_predictions(const ScenePrediction& pred,
                                                 const VisibilityMasks& vis) {
  pred.validate();
  if (vis.superpoint_vis.cols != pred.superpoint_count)
    throw ValidationError("partition_predictions: superpoint counts differ");
  if (vis.query_vis.cols != pred.query_count())
    throw ValidationError("partition_predictions: query counts differ");

  std::vector<ViewPartition> parts(vis.view_count);
  for (std::uint32_t v = 0; v < vis.view_count; ++v) {
    ViewPartition& part = parts[v];
    part.view_index = v;
    for (std::uint32_t a = 0; a < pred.query_count(); ++a)
      if (vis.query_vis.at(v, a)) part.query_rows.push_back(a);
    for (std::uint32_t k = 0; k < pred.superpoint_count; ++k)
      if (vis.superpoint_vis.at(v, k)) part.superpoint_cols.push_back(k);

    part.masks = MaskMatrix::zeros(static_cast<std::uint32_t>(part.query_rows.size()),
                                   static_cast<std::uint32_t>(part.superpoint_cols.size()));
    part.classes.reserve(part.query_rows.size());
    for (std::uint32_t a = 0; a < part.query_rows.size(); ++a) {
      const std::uint32_t query = part.query_rows[a];
      part.classes.push_back(pred.classes[query]);
      for (std::uint32_t b = 0; b < part.superpoint_cols.size(); ++b)
        part.masks.set(a, b, pred.mask_at(query, part.superpoint_cols[b]));
    }
  }
  return parts;
}

ScenePrediction decode_predictions(const FeatureMatrix& queries, const FeatureMatrix& sp_features,
                                   const FeatureMatrix& text, double tau,
                                   std::span<const std::uint32_t> init_superpoints,
                                   int threads) {
  if (queries.cols != sp_features.cols || queries.cols != text.cols)
    throw ValidationError("decode_predictions: feature dimensions differ");
  if (init_superpoints.size() != queries.rows)
    throw ValidationError("decode_predictions: init count does not match query count");
  if (text.rows == 0) throw ValidationError("decode_predictions: no text classes");

  ScenePrediction pred;
  pred.superpoint_count = sp_features.rows;
  pred.masks.assign(static_cast<std::size_t>(queries.rows) * sp_features.rows, 0);
  pred.classes.resize(queries.rows);
  pred.init_superpoints.assign(init_superpoints.begin(), init_superpoints.end());

  const std::uint32_t c = queries.cols;
  const auto dot = [c](const float* a, const float* b) {
    double acc = 0.0;
    for (std::uint32_t t = 0; t < c; ++t) acc += static_cast<double>(a[t]) * b[t];
    return acc;
  };

  parallel_for(queries.rows, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      const float* qrow = queries.row(static_cast<std::uint32_t>(a));
      std::uint8_t* mask = pred.masks.data() + a * sp_features.rows;
      for (std::uint32_t k = 0; k < sp_features.rows; ++k)
        mask[k] = dot(qrow, sp_features.row(k)) > tau ? 1 : 0;

      std::int32_t best_class = 0;
      double best_score = dot(qrow, text.row(0));
      for (std::uint32_t t = 1; t < text.rows; ++t) {
        const double score = dot(qrow, text.row(t));
        if (score > best_score) {
          best_score = score;
          best_class = static_cast<std::int32_t>(t);
        }
      }
      pred.classes[a] = best_class;
    }
  });

  pred.validate();
  return pred;
}

MaskMatrix match_feasibility(const MaskMatrix& gt_masks,
                             std::span<const std::uint32_t> init_superpoints) {
  for (std::size_t a = 0; a < init_superpoints.size(); ++a)
    if (init_superpoints[a] >= gt_masks.cols)
      throw ValidationError("match_feasibility: init superpoint out of range at query " +
                            std::to_string(a));
  MaskMatrix feasible = MaskMatrix::zeros(static_cast<std::uint32_t>(init_superpoints.size()),
                                          gt_masks.rows);
  for (std::uint32_t a = 0; a < init_superpoints.size(); ++a)
    for (std::uint32_t g = 0; g < gt_masks.rows; ++g)
      feasible.set(a, g, gt_masks.at(g, init_superpoints[a]));
  return feasible;
}

} // namespace ovseg3r
