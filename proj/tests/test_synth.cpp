// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "ovseg3r/codec.hpp"
#include "ovseg3r/felzenszwalb.hpp"
#include "ovseg3r/normals.hpp"
#include "ovseg3r/ply.hpp"
#include "ovseg3r/synth.hpp"

using namespace ovseg3r;
using synth::SceneBundle;
using synth::SceneKind;
using synth::SceneRecipe;

namespace {

SceneRecipe recipe_of(SceneKind kind, std::uint32_t n, std::uint32_t views, double sigma,
                      std::uint64_t seed) {
  SceneRecipe recipe;
  recipe.kind = kind;
  recipe.point_count = n;
  recipe.view_count = views;
  recipe.smoothing_sigma = sigma;
  recipe.seed = seed;
  return recipe;
}

std::vector<std::uint8_t> bundle_bytes(const SceneBundle& bundle) {
  std::vector<std::uint8_t> all = io::encode_ply(bundle.cloud);
  const auto corr = io::encode_ov3c(bundle.corr);
  const auto raster = io::encode_ov2m(bundle.raster);
  all.insert(all.end(), corr.begin(), corr.end());
  all.insert(all.end(), raster.begin(), raster.end());
  for (std::int32_t gt : bundle.gt_labels)
    all.push_back(static_cast<std::uint8_t>(gt & 0xff));
  return all;
}

/// Mean cross-instance edge weight minus mean within-instance weight on
/// the geometry-only KNN graph.
double normal_weight_gap(const SceneBundle& scene) {
  const KnnIndex index(scene.cloud, 16);
  const auto origins = scene.per_point_origins();
  const NormalField normals = estimate_normals(scene.cloud, index, &origins);
  const EdgeList edges = build_geometry_graph(scene.cloud, normals, index);
  double cross_sum = 0.0, within_sum = 0.0;
  std::size_t cross_count = 0, within_count = 0;
  for (const auto& e : edges.edges) {
    if (scene.gt_labels[e.i] != scene.gt_labels[e.j]) {
      cross_sum += e.w;
      ++cross_count;
    } else {
      within_sum += e.w;
      ++within_count;
    }
  }
  REQUIRE(cross_count > 0);
  REQUIRE(within_count > 0);
  return cross_sum / cross_count - within_sum / within_count;
}

} // namespace

TEST_CASE("identical recipe and seed produce byte-identical bundles") {
  const SceneRecipe recipe = recipe_of(SceneKind::kRandomBlobs, 4000, 3, 0.01, 99);
  const SceneBundle a = synth::generate(recipe);
  const SceneBundle b = synth::generate(recipe);
  CHECK(bundle_bytes(a) == bundle_bytes(b));
}

TEST_CASE("flush object at sigma 0: two instances, patch points sit proud of the wall") {
  const SceneBundle scene = synth::generate(recipe_of(SceneKind::kFlushObject, 20000, 2, 0.0, 1));
  std::set<std::int32_t> ids(scene.gt_labels.begin(), scene.gt_labels.end());
  CHECK(ids == std::set<std::int32_t>{0, 1});
  // Ground truth and geometry agree: exactly the patch points carry the
  // patch offset, so every patch point lies inside the patch rectangle.
  for (std::size_t i = 0; i < scene.gt_labels.size(); ++i) {
    if (scene.gt_labels[i] == 1)
      CHECK(scene.cloud.positions[i][2] > 0.0f);
    else
      CHECK(scene.cloud.positions[i][2] == 0.0f);
  }
}

TEST_CASE("two-view seam splits the plane into two nonempty view sets") {
  const SceneBundle scene = synth::generate(recipe_of(SceneKind::kTwoViewSeam, 500, 2, 0.0, 2));
  std::size_t in_view[2] = {0, 0};
  for (const auto& e : scene.corr.entries) in_view[e.view]++;
  CHECK(in_view[0] > 0);
  CHECK(in_view[1] > 0);
  CHECK(in_view[0] + in_view[1] == scene.corr.point_count());
}

TEST_CASE("rendering ground truth through the correspondences reproduces gt exactly") {
  for (const SceneKind kind : {SceneKind::kFlushObject, SceneKind::kBoxRoom,
                               SceneKind::kTwoViewSeam, SceneKind::kRandomBlobs}) {
    for (const double sigma : {0.0, 0.02}) {
      const SceneBundle scene =
          synth::generate(recipe_of(kind, kind == SceneKind::kBoxRoom ? 5000 : 3000, 3, sigma, 3));
      for (std::size_t i = 0; i < scene.gt_labels.size(); ++i) {
        const auto& e = scene.corr.entries[i];
        const std::int32_t local = scene.raster.at_nearest(e);
        const std::int32_t global =
            local < 0 ? -1 : scene.local_to_global[e.view][local];
        REQUIRE(global == scene.gt_labels[i]);
      }
    }
  }
}

TEST_CASE("bundle artifacts satisfy their type invariants") {
  const SceneBundle scene = synth::generate(recipe_of(SceneKind::kBoxRoom, 4000, 3, 0.01, 4));
  scene.cloud.validate();
  scene.corr.validate();
  scene.raster.validate();
  CHECK(scene.instance_count == 4);
  // per-view ids are contiguous from 0
  CHECK_FALSE(io::decode_ov2m(io::encode_ov2m(scene.raster)).relabeled);
}

TEST_CASE("too few points for the recipe geometry is an error") {
  CHECK_THROWS_WITH_AS(synth::generate(recipe_of(SceneKind::kBoxRoom, 999, 3, 0.0, 5)),
                       doctest::Contains("at least 1000"), ValidationError);
  CHECK_THROWS_WITH_AS(synth::generate(recipe_of(SceneKind::kFlushObject, 99, 2, 0.0, 5)),
                       doctest::Contains("at least 100"), ValidationError);
}

TEST_CASE("smoothing strictly shrinks the inter-instance normal-weight gap") {
  const double gap0 = normal_weight_gap(
      synth::generate(recipe_of(SceneKind::kFlushObject, 20000, 2, 0.0, 11)));
  const double gap1 = normal_weight_gap(
      synth::generate(recipe_of(SceneKind::kFlushObject, 20000, 2, 0.01, 11)));
  const double gap2 = normal_weight_gap(
      synth::generate(recipe_of(SceneKind::kFlushObject, 20000, 2, 0.03, 11)));
  CHECK(gap0 > gap1);
  CHECK(gap1 > gap2);
  CHECK(gap0 > 0.0);
}

TEST_CASE("flush object: boundary pruning keeps superpoints instance-pure") {
  const SceneBundle scene =
      synth::generate(recipe_of(SceneKind::kFlushObject, 20000, 2, 0.01, 12));
  SegmentConfig cfg;
  const auto origins = scene.per_point_origins();
  const SuperpointMask mask =
      segment_pipeline(scene.cloud, scene.corr, scene.raster, cfg, 16, &origins);
  mask.validate();

  // (view, raster id) must be constant within every superpoint.
  std::map<std::uint32_t, std::pair<std::uint32_t, std::int32_t>> seen;
  for (std::size_t i = 0; i < mask.point_count(); ++i) {
    const auto& e = scene.corr.entries[i];
    const std::pair<std::uint32_t, std::int32_t> key{e.view, scene.raster.at_nearest(e)};
    const auto [it, fresh] = seen.try_emplace(mask.point_labels[i], key);
    if (!fresh) REQUIRE(it->second == key);
  }
}

TEST_CASE("empty raster with background=label reduces to geometry-only segmentation") {
  const SceneBundle scene = synth::generate(recipe_of(SceneKind::kTwoViewSeam, 3000, 2, 0.0, 13));
  InstanceRaster empty = scene.raster;
  std::fill(empty.labels.begin(), empty.labels.end(), -1);

  SegmentConfig cfg;
  cfg.cross_view = CrossViewPolicy::kKeep;
  cfg.background = BackgroundPolicy::kLabel;
  const SuperpointMask with_empty =
      segment_pipeline(scene.cloud, scene.corr, empty, cfg);

  const KnnIndex index(scene.cloud, 16);
  const NormalField normals = estimate_normals(scene.cloud, index);
  const EdgeList edges = build_geometry_graph(scene.cloud, normals, index);
  const SuperpointMask geometry = felzenszwalb_segment(scene.cloud.size(), edges, cfg);
  CHECK(with_empty == geometry);
}
