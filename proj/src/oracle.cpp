// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ovseg3r/codec.hpp"
#include "ovseg3r/felzenszwalb.hpp"
#include "ovseg3r/lifting.hpp"

namespace ovseg3r::oracle {

SuperpointMask felzenszwalb(std::size_t point_count, const EdgeList& edges,
                            const SegmentConfig& cfg) {
  cfg.validate();
  const std::uint32_t n = static_cast<std::uint32_t>(point_count);

  std::vector<EdgeList::Edge> sorted(edges.edges);
  std::sort(sorted.begin(), sorted.end(), [](const EdgeList::Edge& a, const EdgeList::Edge& b) {
    if (a.w != b.w) return a.w < b.w;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  std::vector<std::uint32_t> component(n);
  for (std::uint32_t i = 0; i < n; ++i) component[i] = i;
  std::vector<std::uint32_t> comp_size(n, 1);
  std::vector<double> comp_threshold(n, cfg.sp_thresh);

  const auto merge = [&](std::uint32_t into, std::uint32_t from) {
    for (std::uint32_t p = 0; p < n; ++p)
      if (component[p] == from) component[p] = into;
    comp_size[into] += comp_size[from];
  };

  for (const auto& e : sorted) {
    const std::uint32_t ci = component[e.i];
    const std::uint32_t cj = component[e.j];
    if (ci == cj) continue;
    const double w = e.w;
    if (w <= comp_threshold[ci] && w <= comp_threshold[cj]) {
      merge(ci, cj);
      comp_threshold[ci] = w + static_cast<double>(cfg.sp_thresh) / comp_size[ci];
    }
  }

  for (const auto& e : sorted) {
    const std::uint32_t ci = component[e.i];
    const std::uint32_t cj = component[e.j];
    if (ci == cj) continue;
    if (comp_size[ci] < cfg.sp_min || comp_size[cj] < cfg.sp_min) merge(ci, cj);
  }

  SuperpointMask mask;
  mask.point_labels.resize(n);
  std::vector<std::uint32_t> label(n, UINT32_MAX);
  std::uint32_t next = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (label[component[i]] == UINT32_MAX) label[component[i]] = next++;
    mask.point_labels[i] = label[component[i]];
  }
  mask.superpoint_count = next;
  return mask;
}

FeatureMatrix pool(const FeatureMatrix& point_features, const SuperpointMask& superpoints) {
  FeatureMatrix out =
      FeatureMatrix::zeros(superpoints.superpoint_count, point_features.cols);
  for (std::uint32_t k = 0; k < superpoints.superpoint_count; ++k) {
    std::uint32_t count = 0;
    std::vector<double> acc(point_features.cols, 0.0);
    for (std::uint32_t i = 0; i < point_features.rows; ++i) {
      if (superpoints.point_labels[i] != k) continue;
      ++count;
      for (std::uint32_t c = 0; c < point_features.cols; ++c) acc[c] += point_features.at(i, c);
    }
    for (std::uint32_t c = 0; c < point_features.cols; ++c)
      out.at(k, c) = static_cast<float>(acc[c] / count);
  }
  return out;
}

FeatureMatrix bilinear(const ImageFeatureStack& stack, const CorrespondenceTable& corr) {
  const std::uint32_t n = static_cast<std::uint32_t>(corr.point_count());
  FeatureMatrix out = FeatureMatrix::zeros(n, stack.channels);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& e = corr.entries[i];
    double u = static_cast<double>(e.x) * (stack.width - 1);
    double v = static_cast<double>(e.y) * (stack.height - 1);
    u = std::min(std::max(u, 0.0), static_cast<double>(stack.width - 1));
    v = std::min(std::max(v, 0.0), static_cast<double>(stack.height - 1));
    const std::uint32_t x0 = static_cast<std::uint32_t>(u);
    const std::uint32_t y0 = static_cast<std::uint32_t>(v);
    const std::uint32_t x1 = x0 + 1 < stack.width ? x0 + 1 : stack.width - 1;
    const std::uint32_t y1 = y0 + 1 < stack.height ? y0 + 1 : stack.height - 1;
    const double fx = u - x0;
    const double fy = v - y0;
    for (std::uint32_t c = 0; c < stack.channels; ++c) {
      const double value = (1.0 - fx) * (1.0 - fy) * stack.at(e.view, y0, x0)[c] +
                           fx * (1.0 - fy) * stack.at(e.view, y0, x1)[c] +
                           (1.0 - fx) * fy * stack.at(e.view, y1, x0)[c] +
                           fx * fy * stack.at(e.view, y1, x1)[c];
      out.at(i, c) = static_cast<float>(value);
    }
  }
  return out;
}

VisibilityMasks visibility(const CorrespondenceTable& corr, const SuperpointMask& sp,
                           std::span<const std::uint32_t> init_superpoints) {
  const std::uint32_t views = corr.view_count();
  const std::uint32_t n_points = static_cast<std::uint32_t>(corr.point_count());
  const std::uint32_t n_sp = sp.superpoint_count;

  // Materialize V^p and M^sp densely, then take the boolean product.
  std::vector<std::uint8_t> point_vis(static_cast<std::size_t>(views) * n_points, 0);
  for (std::uint32_t i = 0; i < n_points; ++i)
    point_vis[static_cast<std::size_t>(corr.entries[i].view) * n_points + i] = 1;
  std::vector<std::uint8_t> sp_mask(static_cast<std::size_t>(n_sp) * n_points, 0);
  for (std::uint32_t i = 0; i < n_points; ++i)
    sp_mask[static_cast<std::size_t>(sp.point_labels[i]) * n_points + i] = 1;

  VisibilityMasks vis;
  vis.view_count = views;
  vis.point_views.resize(n_points);
  for (std::uint32_t i = 0; i < n_points; ++i) {
    for (std::uint32_t v = 0; v < views; ++v)
      if (point_vis[static_cast<std::size_t>(v) * n_points + i]) vis.point_views[i] = v;
  }

  vis.superpoint_vis = MaskMatrix::zeros(views, n_sp);
  for (std::uint32_t v = 0; v < views; ++v)
    for (std::uint32_t k = 0; k < n_sp; ++k) {
      std::uint32_t dot = 0;
      for (std::uint32_t i = 0; i < n_points; ++i)
        dot += sp_mask[static_cast<std::size_t>(k) * n_points + i] *
               point_vis[static_cast<std::size_t>(v) * n_points + i];
      vis.superpoint_vis.set(v, k, dot > 0);
    }

  vis.query_vis = MaskMatrix::zeros(views, static_cast<std::uint32_t>(init_superpoints.size()));
  for (std::uint32_t v = 0; v < views; ++v)
    for (std::uint32_t a = 0; a < init_superpoints.size(); ++a)
      vis.query_vis.set(v, a, vis.superpoint_vis.at(v, init_superpoints[a]));
  return vis;
}

std::vector<ViewPartition> partition(const ScenePrediction& pred, const VisibilityMasks& vis) {
  std::vector<ViewPartition> parts;
  for (std::uint32_t v = 0; v < vis.view_count; ++v) {
    ViewPartition part;
    part.view_index = v;
    for (std::uint32_t a = 0; a < pred.query_count(); ++a)
      if (vis.query_vis.at(v, a)) part.query_rows.push_back(a);
    for (std::uint32_t k = 0; k < pred.superpoint_count; ++k)
      if (vis.superpoint_vis.at(v, k)) part.superpoint_cols.push_back(k);
    const std::uint32_t qv = static_cast<std::uint32_t>(part.query_rows.size());
    const std::uint32_t nv = static_cast<std::uint32_t>(part.superpoint_cols.size());
    part.masks = MaskMatrix::zeros(qv, nv);
    for (std::uint32_t a = 0; a < qv; ++a)
      for (std::uint32_t b = 0; b < nv; ++b)
        part.masks.set(a, b,
                       pred.masks[static_cast<std::size_t>(part.query_rows[a]) *
                                      pred.superpoint_count +
                                  part.superpoint_cols[b]] != 0);
    for (std::uint32_t a = 0; a < qv; ++a) part.classes.push_back(pred.classes[part.query_rows[a]]);
    parts.push_back(std::move(part));
  }
  return parts;
}

ScenePrediction decode(const FeatureMatrix& queries, const FeatureMatrix& sp_features,
                       const FeatureMatrix& text, double tau,
                       std::span<const std::uint32_t> init_superpoints) {
  ScenePrediction pred;
  pred.superpoint_count = sp_features.rows;
  pred.masks.assign(static_cast<std::size_t>(queries.rows) * sp_features.rows, 0);
  pred.classes.resize(queries.rows);
  pred.init_superpoints.assign(init_superpoints.begin(), init_superpoints.end());

  for (std::uint32_t a = 0; a < queries.rows; ++a) {
    for (std::uint32_t k = 0; k < sp_features.rows; ++k) {
      double acc = 0.0;
      for (std::uint32_t c = 0; c < queries.cols; ++c)
        acc += static_cast<double>(queries.at(a, c)) * sp_features.at(k, c);
      pred.masks[static_cast<std::size_t>(a) * sp_features.rows + k] = acc > tau ? 1 : 0;
    }
    std::int32_t best = 0;
    double best_score = 0.0;
    for (std::uint32_t t = 0; t < text.rows; ++t) {
      double acc = 0.0;
      for (std::uint32_t c = 0; c < queries.cols; ++c)
        acc += static_cast<double>(queries.at(a, c)) * text.at(t, c);
      if (t == 0 || acc > best_score) {
        best_score = acc;
        best = static_cast<std::int32_t>(t);
      }
    }
    pred.classes[a] = best;
  }
  return pred;
}

MaskMatrix feasibility(const MaskMatrix& gt_masks,
                       std::span<const std::uint32_t> init_superpoints) {
  MaskMatrix out = MaskMatrix::zeros(static_cast<std::uint32_t>(init_superpoints.size()),
                                     gt_masks.rows);
  for (std::uint32_t a = 0; a < init_superpoints.size(); ++a)
    for (std::uint32_t g = 0; g < gt_masks.rows; ++g)
      out.set(a, g, gt_masks.at(g, init_superpoints[a]));
  return out;
}

// --- random instances -----------------------------------------------------------

RandomGraph random_graph(Rng& rng, std::uint32_t max_points, std::uint32_t max_edges) {
  RandomGraph g;
  g.point_count = 2 + rng.below(max_points - 1);
  const std::uint64_t possible =
      static_cast<std::uint64_t>(g.point_count) * (g.point_count - 1) / 2;
  const std::uint32_t target =
      static_cast<std::uint32_t>(std::min<std::uint64_t>(max_edges, possible));
  const std::uint32_t count = target == 0 ? 0 : rng.below(target + 1);

  std::set<std::uint64_t> keys;
  while (keys.size() < count) {
    std::uint32_t i = rng.below(g.point_count);
    std::uint32_t j = rng.below(g.point_count);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    keys.insert((static_cast<std::uint64_t>(i) << 32) | j);
  }
  for (std::uint64_t key : keys) {
    EdgeList::Edge e;
    e.i = static_cast<std::uint32_t>(key >> 32);
    e.j = static_cast<std::uint32_t>(key & 0xffffffffu);
    e.w = static_cast<float>(rng.uniform(0.0, 2.0));
    g.edges.edges.push_back(e);
  }
  return g;
}

FeatureMatrix random_matrix(Rng& rng, std::uint32_t rows, std::uint32_t cols, double lo,
                            double hi) {
  FeatureMatrix m = FeatureMatrix::zeros(rows, cols);
  for (auto& v : m.data) v = static_cast<float>(rng.uniform(lo, hi));
  return m;
}

SuperpointMask random_superpoints(Rng& rng, std::uint32_t point_count,
                                  std::uint32_t superpoint_count) {
  SuperpointMask sp;
  sp.superpoint_count = superpoint_count;
  sp.point_labels.resize(point_count);
  // First n points pin one member per label, rest fall anywhere.
  for (std::uint32_t i = 0; i < point_count; ++i)
    sp.point_labels[i] = i < superpoint_count ? i : rng.below(superpoint_count);
  rng.shuffle(sp.point_labels);
  return sp;
}

CorrespondenceTable random_corr(Rng& rng, std::uint32_t point_count, std::uint32_t views,
                                std::uint32_t height, std::uint32_t width) {
  CorrespondenceTable corr;
  corr.view_dims.assign(views, {height, width});
  corr.entries.resize(point_count);
  for (auto& e : corr.entries) {
    e.view = rng.below(views);
    e.x = static_cast<float>(rng.uniform());
    e.y = static_cast<float>(rng.uniform());
  }
  return corr;
}

ImageFeatureStack random_stack(Rng& rng, std::uint32_t views, std::uint32_t height,
                               std::uint32_t width, std::uint32_t channels) {
  ImageFeatureStack s;
  s.views = views;
  s.height = height;
  s.width = width;
  s.channels = channels;
  s.data.resize(static_cast<std::size_t>(views) * height * width * channels);
  for (auto& v : s.data) v = static_cast<float>(rng.uniform(-4.0, 4.0));
  return s;
}

ScenePrediction random_prediction(Rng& rng, std::uint32_t queries, std::uint32_t superpoints) {
  ScenePrediction p;
  p.superpoint_count = superpoints;
  p.masks.resize(static_cast<std::size_t>(queries) * superpoints);
  for (auto& m : p.masks) m = static_cast<std::uint8_t>(rng.below(2));
  p.classes.resize(queries);
  for (auto& c : p.classes) c = static_cast<std::int32_t>(rng.below(20));
  p.init_superpoints = rng.sample_distinct(superpoints, queries);
  return p;
}

// --- trial harness ---------------------------------------------------------------

namespace {

bool max_abs_close(const FeatureMatrix& a, const FeatureMatrix& b, double tol) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (std::abs(static_cast<double>(a.data[i]) - b.data[i]) > tol) return false;
  return true;
}

void dump_felz(const std::filesystem::path& dir, std::uint32_t point_count,
               const EdgeList& edges, const SegmentConfig& cfg) {
  std::filesystem::create_directories(dir);
  io::write_file(dir / "edges.oveg", io::encode_oveg(edges));
  const std::string meta = "{\n  \"point_count\": " + std::to_string(point_count) +
                           ",\n  \"sp_thresh\": " + std::to_string(cfg.sp_thresh) +
                           ",\n  \"sp_min\": " + std::to_string(cfg.sp_min) + "\n}\n";
  io::write_file(dir / "config.json",
                 {reinterpret_cast<const std::uint8_t*>(meta.data()), meta.size()});
}

/// Greedy shrink: drop edges one at a time while the mismatch persists.
EdgeList shrink_felz(std::uint32_t point_count, EdgeList edges, const SegmentConfig& cfg) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t e = 0; e < edges.size();) {
      EdgeList candidate = edges;
      candidate.edges.erase(candidate.edges.begin() + static_cast<std::ptrdiff_t>(e));
      const bool still_mismatched =
          !(felzenszwalb_segment(point_count, candidate, cfg) ==
            felzenszwalb(point_count, candidate, cfg));
      if (still_mismatched) {
        edges = std::move(candidate);
        changed = true;
      } else {
        ++e;
      }
    }
  }
  return edges;
}

} // namespace

std::optional<TrialFailure> run_trials(TrialKind kind, std::uint32_t trials, std::uint64_t seed,
                                       const std::filesystem::path& dump_root) {
  Rng rng(seed);
  for (std::uint32_t t = 0; t < trials; ++t) {
    switch (kind) {
      case TrialKind::kFelzenszwalb: {
        const RandomGraph g = random_graph(rng, 200, 2000);
        SegmentConfig cfg;
        cfg.sp_thresh = static_cast<float>(rng.uniform(0.05, 1.0));
        const std::uint32_t sp_mins[3] = {1, 3, 10};
        cfg.sp_min = sp_mins[rng.below(3)];
        const SuperpointMask fast = felzenszwalb_segment(g.point_count, g.edges, cfg);
        const SuperpointMask naive = felzenszwalb(g.point_count, g.edges, cfg);
        if (!(fast == naive)) {
          const EdgeList shrunk = shrink_felz(g.point_count, g.edges, cfg);
          const auto dir = dump_root / ("felz_trial_" + std::to_string(t));
          dump_felz(dir, g.point_count, shrunk, cfg);
          return TrialFailure{t, "felzenszwalb partition mismatch", dir};
        }
        break;
      }
      case TrialKind::kPool: {
        const std::uint32_t n = 50 + rng.below(951);
        const std::uint32_t sp = 1 + rng.below(std::min(n, 40u));
        const std::uint32_t c = 1 + rng.below(32);
        const SuperpointMask mask = random_superpoints(rng, n, sp);
        const FeatureMatrix features = random_matrix(rng, n, c, -10.0, 10.0);
        const FeatureMatrix fast = pool_superpoint_features(features, mask);
        const FeatureMatrix naive = pool(features, mask);
        if (!max_abs_close(fast, naive, 1e-6)) {
          const auto dir = dump_root / ("pool_trial_" + std::to_string(t));
          std::filesystem::create_directories(dir);
          io::write_file(dir / "features.ovfm", io::encode_ovfm(features));
          io::write_file(dir / "superpoints.ovsp", io::encode_ovsp(mask));
          return TrialFailure{t, "pooled feature mismatch beyond 1e-6", dir};
        }
        break;
      }
      case TrialKind::kBilinear: {
        const std::uint32_t views = 1 + rng.below(3);
        const std::uint32_t h = 2 + rng.below(15);
        const std::uint32_t w = 2 + rng.below(15);
        const std::uint32_t c = 1 + rng.below(16);
        const std::uint32_t n = 1 + rng.below(500);
        const ImageFeatureStack stack = random_stack(rng, views, h, w, c);
        const CorrespondenceTable corr = random_corr(rng, n, views, h * 4, w * 4);
        const FeatureMatrix fast = sample_point_features(stack, corr);
        const FeatureMatrix naive = bilinear(stack, corr);
        if (!max_abs_close(fast, naive, 1e-6)) {
          const auto dir = dump_root / ("bilinear_trial_" + std::to_string(t));
          std::filesystem::create_directories(dir);
          io::write_file(dir / "stack.ovif", io::encode_ovif(stack));
          io::write_file(dir / "corr.ov3c", io::encode_ov3c(corr));
          return TrialFailure{t, "bilinear sample mismatch beyond 1e-6", dir};
        }
        break;
      }
      case TrialKind::kVip: {
        const std::uint32_t n = 20 + rng.below(481);
        const std::uint32_t views = 1 + rng.below(5);
        const std::uint32_t sp = 1 + rng.below(std::min(n, 60u));
        const std::uint32_t q = rng.below(sp + 1);
        const SuperpointMask mask = random_superpoints(rng, n, sp);
        const CorrespondenceTable corr = random_corr(rng, n, views, 32, 32);
        const ScenePrediction pred = random_prediction(rng, q, sp);

        const VisibilityMasks fast_vis = compute_visibility(corr, mask, pred.init_superpoints);
        const VisibilityMasks naive_vis = visibility(corr, mask, pred.init_superpoints);
        bool ok = fast_vis == naive_vis;
        std::string what = ok ? "" : "visibility mismatch";
        if (ok) {
          const auto fast_parts = partition_predictions(pred, fast_vis);
          const auto naive_parts = partition(pred, naive_vis);
          ok = fast_parts == naive_parts;
          if (!ok) what = "partition mismatch";
        }
        if (ok) {
          const std::uint32_t c = 1 + rng.below(24);
          const std::uint32_t classes = 1 + rng.below(12);
          const FeatureMatrix queries = random_matrix(rng, q, c, -2.0, 2.0);
          const FeatureMatrix sp_features = random_matrix(rng, sp, c, -2.0, 2.0);
          const FeatureMatrix text = random_matrix(rng, classes, c, -2.0, 2.0);
          const double tau = rng.uniform(-1.0, 1.0);
          const ScenePrediction fast_pred =
              decode_predictions(queries, sp_features, text, tau, pred.init_superpoints);
          const ScenePrediction naive_pred =
              decode(queries, sp_features, text, tau, pred.init_superpoints);
          ok = fast_pred == naive_pred;
          if (!ok) what = "decode mismatch";
        }
        if (!ok) {
          const auto dir = dump_root / ("vip_trial_" + std::to_string(t));
          std::filesystem::create_directories(dir);
          io::write_file(dir / "corr.ov3c", io::encode_ov3c(corr));
          io::write_file(dir / "superpoints.ovsp", io::encode_ovsp(mask));
          io::write_file(dir / "prediction.ovpr", io::encode_ovpr(pred));
          return TrialFailure{t, what, dir};
        }
        break;
      }
    }
  }
  return std::nullopt;
}

} // namespace ovseg3r::oracle
