// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/synth.hpp"

#include <algorithm>
#include <cmath>

#include "ovseg3r/knn.hpp"
#include "ovseg3r/parallel.hpp"
#include "ovseg3r/rng.hpp"

namespace ovseg3r::synth {

namespace {

// Room-scale world box shared by the scene kinds.
constexpr double kRoomX = 4.0;
constexpr double kRoomY = 3.0;
constexpr double kRoomZ = 2.5;

// How far a flush patch sits proud of its wall. Small enough to read
// as flush, large enough that geometry alone can still sense it at
// sigma = 0; smoothing erases it.
constexpr double kPatchDepth = 0.008;

struct Rect {
  int normal_axis = 2;
  double level = 0.0;
  int a_axis = 0;
  double a_lo = 0.0, a_hi = 1.0;
  int b_axis = 1;
  double b_lo = 0.0, b_hi = 1.0;
  std::int32_t instance = 0;

  double area() const { return (a_hi - a_lo) * (b_hi - b_lo); }

  bool contains(const double p[3]) const {
    return p[a_axis] >= a_lo && p[a_axis] <= a_hi && p[b_axis] >= b_lo && p[b_axis] <= b_hi;
  }
};

struct ViewSpec {
  int axis = 2; // projection axis
  int dir = 1;  // +1: camera on the positive side
  int u_axis = 0;
  double u_lo = 0.0, u_hi = 1.0;
  int v_axis = 1;
  double v_lo = 0.0, v_hi = 1.0;
};

struct Blob {
  double center[3] = {0, 0, 0};
  double radius = 0.1;
};

ViewSpec view_for_axis(int axis, int dir) {
  ViewSpec v;
  v.axis = axis;
  v.dir = dir;
  switch (axis) {
    case 2: v = {2, dir, 0, 0.0, kRoomX, 1, 0.0, kRoomY}; break;
    case 1: v = {1, dir, 0, 0.0, kRoomX, 2, 0.0, kRoomZ}; break;
    default: v = {0, dir, 1, 0.0, kRoomY, 2, 0.0, kRoomZ}; break;
  }
  return v;
}

float clamp01(double x) {
  return static_cast<float>(std::clamp(x, 0.0, 1.0));
}

CorrespondenceTable::Entry project(const ViewSpec& view, std::uint32_t view_index,
                                   const double p[3]) {
  CorrespondenceTable::Entry e;
  e.view = view_index;
  e.x = clamp01((p[view.u_axis] - view.u_lo) / (view.u_hi - view.u_lo));
  e.y = clamp01((p[view.v_axis] - view.v_lo) / (view.v_hi - view.v_lo));
  return e;
}

/// Analytic depth-tested rasterization with global ids. Only rects
/// whose normal matches the view axis rasterize; edge-on rects project
/// to measure-zero strips.
void rasterize_rects(const ViewSpec& view, const std::vector<Rect>& rects,
                     std::uint32_t height, std::uint32_t width, std::int32_t* out) {
  for (std::uint32_t py = 0; py < height; ++py) {
    const double wv = view.v_lo + (view.v_hi - view.v_lo) * py / (height - 1);
    for (std::uint32_t px = 0; px < width; ++px) {
      const double wu = view.u_lo + (view.u_hi - view.u_lo) * px / (width - 1);
      double p[3];
      p[view.u_axis] = wu;
      p[view.v_axis] = wv;
      std::int32_t winner = -1;
      double best_depth = 0.0;
      for (const Rect& r : rects) {
        if (r.normal_axis != view.axis) continue;
        p[view.axis] = r.level;
        if (!r.contains(p)) continue;
        const double depth = view.dir > 0 ? r.level : -r.level; // larger = nearer
        if (winner == -1 || depth > best_depth) {
          winner = r.instance;
          best_depth = depth;
        }
      }
      out[static_cast<std::size_t>(py) * width + px] = winner;
    }
  }
}

void rasterize_blobs(const ViewSpec& view, const std::vector<Blob>& blobs,
                     std::uint32_t height, std::uint32_t width, std::int32_t* out) {
  for (std::uint32_t py = 0; py < height; ++py) {
    const double wv = view.v_lo + (view.v_hi - view.v_lo) * py / (height - 1);
    for (std::uint32_t px = 0; px < width; ++px) {
      const double wu = view.u_lo + (view.u_hi - view.u_lo) * px / (width - 1);
      std::int32_t winner = -1;
      double best_depth = 0.0;
      for (std::size_t b = 0; b < blobs.size(); ++b) {
        const Blob& blob = blobs[b];
        const double du = wu - blob.center[view.u_axis];
        const double dv = wv - blob.center[view.v_axis];
        if (du * du + dv * dv > blob.radius * blob.radius) continue;
        const double depth =
            view.dir > 0 ? blob.center[view.axis] : -blob.center[view.axis];
        if (winner == -1 || depth > best_depth) {
          winner = static_cast<std::int32_t>(b);
          best_depth = depth;
        }
      }
      out[static_cast<std::size_t>(py) * width + px] = winner;
    }
  }
}

/// Snap a normalized coordinate to the nearest pixel-cell edge so that
/// region membership of a point and of its pixel center always agree.
double snap_to_cell_edge(double frac, std::uint32_t extent) {
  const double cells = static_cast<double>(extent - 1);
  return (std::round(frac * cells - 0.5) + 0.5) / cells;
}

std::uint32_t pick_rect(const std::vector<Rect>& rects, double total_area, Rng& rng) {
  double target = rng.uniform() * total_area;
  for (std::uint32_t r = 0; r + 1 < rects.size(); ++r) {
    target -= rects[r].area();
    if (target < 0.0) return r;
  }
  return static_cast<std::uint32_t>(rects.size() - 1);
}

void smooth_positions(PointCloud& cloud, double sigma, int threads) {
  if (sigma <= 0.0 || cloud.size() < 3) return;
  const std::uint32_t k = std::min<std::uint32_t>(32, static_cast<std::uint32_t>(cloud.size()) - 1);
  const KnnIndex index(cloud, k);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<Vec3f> smoothed(cloud.size());
  parallel_for(cloud.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> neighbors;
    for (std::size_t i = begin; i < end; ++i) {
      index.query(static_cast<std::uint32_t>(i), neighbors);
      const Vec3f& self = cloud.positions[i];
      double acc[3] = {self[0], self[1], self[2]};
      double total = 1.0;
      for (std::uint32_t j : neighbors) {
        const Vec3f& p = cloud.positions[j];
        const double dx = static_cast<double>(p[0]) - self[0];
        const double dy = static_cast<double>(p[1]) - self[1];
        const double dz = static_cast<double>(p[2]) - self[2];
        const double w = std::exp(-(dx * dx + dy * dy + dz * dz) * inv);
        acc[0] += w * p[0];
        acc[1] += w * p[1];
        acc[2] += w * p[2];
        total += w;
      }
      smoothed[i] = {static_cast<float>(acc[0] / total), static_cast<float>(acc[1] / total),
                     static_cast<float>(acc[2] / total)};
    }
  });
  cloud.positions = std::move(smoothed);
}

struct Build {
  std::vector<Rect> rects;   // empty for blob scenes
  std::vector<Blob> blobs;   // empty for rect scenes
  std::vector<ViewSpec> views;
  std::uint32_t instance_count = 0;
  std::vector<double> positions;            // 3N, pre-smoothing
  std::vector<std::int32_t> built_from;     // construction instance per point
  std::vector<std::uint32_t> point_views;
};

int view_axis_cycle(std::uint32_t v) {
  static constexpr int axes[3] = {2, 1, 0};
  return axes[v % 3];
}

int view_dir_for_axis(int axis) {
  return axis == 1 ? -1 : 1; // front camera sits at low y, others on the high side
}

/// Lowest view whose projection axis best aligns with the rect normal.
std::uint32_t best_view(const std::vector<ViewSpec>& views, int normal_axis) {
  std::uint32_t best = 0;
  int best_dot = -1;
  for (std::uint32_t v = 0; v < views.size(); ++v) {
    const int dot = views[v].axis == normal_axis ? 1 : 0;
    if (dot > best_dot) {
      best_dot = dot;
      best = v;
    }
  }
  return best;
}

Build build_flush_object(const SceneRecipe& recipe, Rng& rng) {
  if (recipe.point_count < 100)
    throw ValidationError("SceneRecipe: flush_object needs at least 100 points");
  Build b;
  // Patch bounds snapped to pixel-cell edges of the projection grid.
  const double px_lo = snap_to_cell_edge(0.35, recipe.raster_width) * kRoomX;
  const double px_hi = snap_to_cell_edge(0.60, recipe.raster_width) * kRoomX;
  const double py_lo = snap_to_cell_edge(0.35, recipe.raster_height) * kRoomY;
  const double py_hi = snap_to_cell_edge(0.65, recipe.raster_height) * kRoomY;
  b.rects.push_back({2, 0.0, 0, 0.0, kRoomX, 1, 0.0, kRoomY, 0});            // wall
  b.rects.push_back({2, kPatchDepth, 0, px_lo, px_hi, 1, py_lo, py_hi, 1});  // painting
  b.instance_count = 2;
  for (std::uint32_t v = 0; v < recipe.view_count; ++v)
    b.views.push_back(view_for_axis(2, 1));

  b.positions.reserve(recipe.point_count * 3);
  for (std::uint32_t i = 0; i < recipe.point_count; ++i) {
    double p[3];
    p[0] = rng.uniform(0.0, kRoomX);
    p[1] = rng.uniform(0.0, kRoomY);
    const bool in_patch = p[0] >= px_lo && p[0] <= px_hi && p[1] >= py_lo && p[1] <= py_hi;
    p[2] = in_patch ? kPatchDepth : 0.0;
    b.positions.insert(b.positions.end(), {p[0], p[1], p[2]});
    b.built_from.push_back(in_patch ? 1 : 0);
    b.point_views.push_back(rng.below(recipe.view_count));
  }
  return b;
}

Build build_box_room(const SceneRecipe& recipe, Rng& rng) {
  if (recipe.point_count < 1000)
    throw ValidationError("SceneRecipe: box_room needs at least 1000 points");
  Build b;
  b.rects.push_back({2, 0.0, 0, 0.0, kRoomX, 1, 0.0, kRoomY, 0});    // floor
  b.rects.push_back({1, kRoomY, 0, 0.0, kRoomX, 2, 0.0, kRoomZ, 1}); // back wall
  b.rects.push_back({0, 0.0, 1, 0.0, kRoomY, 2, 0.0, kRoomZ, 2});    // left wall
  const double bx0 = 2.2, bx1 = 3.0, by0 = 1.0, by1 = 1.8, bz = 0.7;
  b.rects.push_back({2, bz, 0, bx0, bx1, 1, by0, by1, 3});  // box top
  b.rects.push_back({1, by0, 0, bx0, bx1, 2, 0.0, bz, 3});  // box front
  b.rects.push_back({1, by1, 0, bx0, bx1, 2, 0.0, bz, 3});  // box back
  b.rects.push_back({0, bx0, 1, by0, by1, 2, 0.0, bz, 3});  // box left
  b.rects.push_back({0, bx1, 1, by0, by1, 2, 0.0, bz, 3});  // box right
  b.instance_count = 4;
  for (std::uint32_t v = 0; v < recipe.view_count; ++v) {
    const int axis = view_axis_cycle(v);
    b.views.push_back(view_for_axis(axis, view_dir_for_axis(axis)));
  }

  double total_area = 0.0;
  for (const Rect& r : b.rects) total_area += r.area();
  b.positions.reserve(recipe.point_count * 3);
  for (std::uint32_t i = 0; i < recipe.point_count; ++i) {
    const Rect& r = b.rects[pick_rect(b.rects, total_area, rng)];
    double p[3];
    p[r.normal_axis] = r.level;
    p[r.a_axis] = rng.uniform(r.a_lo, r.a_hi);
    p[r.b_axis] = rng.uniform(r.b_lo, r.b_hi);
    b.positions.insert(b.positions.end(), {p[0], p[1], p[2]});
    b.built_from.push_back(r.instance);
    b.point_views.push_back(best_view(b.views, r.normal_axis));
  }
  return b;
}

Build build_two_view_seam(const SceneRecipe& recipe, Rng& rng) {
  if (recipe.point_count < 4)
    throw ValidationError("SceneRecipe: two_view_seam needs at least 4 points");
  if (recipe.view_count < 2)
    throw ValidationError("SceneRecipe: two_view_seam needs at least 2 views");
  Build b;
  b.rects.push_back({2, 0.0, 0, 0.0, kRoomX, 1, 0.0, kRoomY, 0});
  b.instance_count = 1;
  for (std::uint32_t v = 0; v < recipe.view_count; ++v)
    b.views.push_back(view_for_axis(2, 1));

  b.positions.reserve(recipe.point_count * 3);
  for (std::uint32_t i = 0; i < recipe.point_count; ++i) {
    const double x = rng.uniform(0.0, kRoomX);
    const double y = rng.uniform(0.0, kRoomY);
    b.positions.insert(b.positions.end(), {x, y, 0.0});
    b.built_from.push_back(0);
    b.point_views.push_back(x < kRoomX / 2 ? 0u : 1u);
  }
  return b;
}

Build build_random_blobs(const SceneRecipe& recipe, Rng& rng) {
  if (recipe.point_count < 16)
    throw ValidationError("SceneRecipe: random_blobs needs at least 16 points");
  Build b;
  const std::uint32_t blob_count = 4 + rng.below(5);
  for (std::uint32_t k = 0; k < blob_count; ++k) {
    Blob blob;
    blob.center[0] = rng.uniform(0.6, kRoomX - 0.6);
    blob.center[1] = rng.uniform(0.6, kRoomY - 0.6);
    blob.center[2] = rng.uniform(0.6, kRoomZ - 0.6);
    blob.radius = rng.uniform(0.15, 0.4);
    b.blobs.push_back(blob);
  }
  b.instance_count = blob_count;
  for (std::uint32_t v = 0; v < recipe.view_count; ++v) {
    const int axis = view_axis_cycle(v);
    b.views.push_back(view_for_axis(axis, 1));
  }

  b.positions.reserve(recipe.point_count * 3);
  for (std::uint32_t i = 0; i < recipe.point_count; ++i) {
    const std::uint32_t k = rng.below(blob_count);
    const Blob& blob = b.blobs[k];
    double offset[3];
    double norm2;
    do {
      norm2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        offset[a] = rng.uniform(-1.0, 1.0);
        norm2 += offset[a] * offset[a];
      }
    } while (norm2 > 1.0);
    b.positions.insert(b.positions.end(), {blob.center[0] + offset[0] * blob.radius,
                                           blob.center[1] + offset[1] * blob.radius,
                                           blob.center[2] + offset[2] * blob.radius});
    b.built_from.push_back(static_cast<std::int32_t>(k));
    b.point_views.push_back(rng.below(recipe.view_count));
  }
  return b;
}

} // namespace

SceneBundle generate(const SceneRecipe& recipe) {
  recipe.validate();
  Rng rng(recipe.seed);

  Build b;
  switch (recipe.kind) {
    case SceneKind::kFlushObject: b = build_flush_object(recipe, rng); break;
    case SceneKind::kBoxRoom: b = build_box_room(recipe, rng); break;
    case SceneKind::kTwoViewSeam: b = build_two_view_seam(recipe, rng); break;
    case SceneKind::kRandomBlobs: b = build_random_blobs(recipe, rng); break;
  }

  // Every instance must have been sampled at least once.
  {
    std::vector<std::uint32_t> hits(b.instance_count, 0);
    for (std::int32_t c : b.built_from) hits[c]++;
    for (std::uint32_t inst = 0; inst < b.instance_count; ++inst)
      if (hits[inst] == 0)
        throw ValidationError("SceneRecipe: N too small to cover recipe geometry (instance " +
                              std::to_string(inst) + " got no points)");
  }

  SceneBundle bundle;
  const std::uint32_t n = recipe.point_count;
  const std::uint32_t views = recipe.view_count;

  bundle.cloud.positions.resize(n);
  for (std::uint32_t i = 0; i < n; ++i)
    bundle.cloud.positions[i] = {static_cast<float>(b.positions[3 * i]),
                                 static_cast<float>(b.positions[3 * i + 1]),
                                 static_cast<float>(b.positions[3 * i + 2])};

  bundle.corr.view_dims.assign(views, {recipe.raster_height, recipe.raster_width});
  bundle.corr.entries.resize(n);
  for (std::uint32_t i = 0; i < n; ++i)
    bundle.corr.entries[i] = project(b.views[b.point_views[i]], b.point_views[i],
                                     &b.positions[3 * i]);

  // Global-id rasters drive both the stored rasters and the per-point
  // ground truth, so the two agree by construction.
  InstanceRaster global;
  global.views = views;
  global.height = recipe.raster_height;
  global.width = recipe.raster_width;
  global.labels.assign(static_cast<std::size_t>(views) * global.height * global.width, -1);
  for (std::uint32_t v = 0; v < views; ++v) {
    std::int32_t* plane =
        global.labels.data() + static_cast<std::size_t>(v) * global.height * global.width;
    if (!b.blobs.empty())
      rasterize_blobs(b.views[v], b.blobs, global.height, global.width, plane);
    else
      rasterize_rects(b.views[v], b.rects, global.height, global.width, plane);
  }

  bundle.gt_labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i)
    bundle.gt_labels[i] = global.at_nearest(bundle.corr.entries[i]);

  // Per-view relabel to contiguous local ids.
  bundle.raster = global;
  bundle.local_to_global.resize(views);
  const std::size_t per_view = static_cast<std::size_t>(global.height) * global.width;
  for (std::uint32_t v = 0; v < views; ++v) {
    std::int32_t* plane = bundle.raster.labels.data() + static_cast<std::size_t>(v) * per_view;
    std::vector<std::int32_t> used(plane, plane + per_view);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    if (!used.empty() && used.front() == -1) used.erase(used.begin());
    std::vector<std::int32_t> remap(b.instance_count, -1);
    for (std::size_t k = 0; k < used.size(); ++k) remap[used[k]] = static_cast<std::int32_t>(k);
    for (std::size_t c = 0; c < per_view; ++c)
      if (plane[c] >= 0) plane[c] = remap[plane[c]];
    bundle.local_to_global[v] = used;
  }

  smooth_positions(bundle.cloud, recipe.smoothing_sigma, 0);

  bundle.view_origins.resize(views);
  for (std::uint32_t v = 0; v < views; ++v) {
    const ViewSpec& spec = b.views[v];
    double origin[3];
    origin[spec.u_axis] = (spec.u_lo + spec.u_hi) / 2.0;
    origin[spec.v_axis] = (spec.v_lo + spec.v_hi) / 2.0;
    origin[spec.axis] = spec.dir > 0 ? 2.0 * kRoomX : -2.0 * kRoomX;
    bundle.view_origins[v] = {static_cast<float>(origin[0]), static_cast<float>(origin[1]),
                              static_cast<float>(origin[2])};
  }
  bundle.instance_count = b.instance_count;
  return bundle;
}

} // namespace ovseg3r::synth
