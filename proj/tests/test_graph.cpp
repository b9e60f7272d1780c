// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ovseg3r/graph.hpp"
#include "ovseg3r/rng.hpp"
#include "ovseg3r/synth.hpp"

using namespace ovseg3r;

namespace {

/// Two points a fixed distance apart plus far-away padding so the KNN
/// pair is exactly (0,1). Normals and raster cells are set per case.
struct PairScene {
  PointCloud cloud;
  NormalField normals;
  CorrespondenceTable corr;
  InstanceRaster raster;

  PairScene() {
    cloud.positions = {{0, 0, 0}, {0.1f, 0, 0}, {50, 50, 50}, {50, 50, 51}};
    normals.normals.assign(4, {0, 0, 1});
    normals.degenerate.assign(4, 0);
    corr.view_dims = {{2, 2}, {2, 2}};
    // points 0,1 at opposite corners of view 0's raster
    corr.entries = {{0, 0.0f, 0.0f}, {0, 1.0f, 1.0f}, {1, 0.0f, 0.0f}, {1, 1.0f, 1.0f}};
    raster.views = 2;
    raster.height = 2;
    raster.width = 2;
    raster.labels.assign(8, 0);
  }

  EdgeList build(const SegmentConfig& cfg) const {
    const KnnIndex index(cloud, 1);
    return build_boundary_aware_graph(cloud, normals, index, corr, raster, cfg);
  }
};

const EdgeList::Edge* find_edge(const EdgeList& edges, std::uint32_t i, std::uint32_t j) {
  for (const auto& e : edges.edges)
    if (e.i == i && e.j == j) return &e;
  return nullptr;
}

} // namespace

TEST_CASE("same view, same id, identical normals: one edge with weight 0") {
  PairScene scene;
  SegmentConfig cfg;
  const EdgeList edges = scene.build(cfg);
  const auto* e = find_edge(edges, 0, 1);
  REQUIRE(e != nullptr);
  CHECK(e->w == 0.0f);
}

TEST_CASE("same view, different ids: the edge is dropped") {
  PairScene scene;
  scene.raster.at(0, 0, 0) = 3; // pixel of point 0
  scene.raster.at(0, 1, 1) = 7; // pixel of point 1
  SegmentConfig cfg;
  const EdgeList edges = scene.build(cfg);
  CHECK(find_edge(edges, 0, 1) == nullptr);
}

TEST_CASE("normals at 90 degrees, same id: weight 1") {
  PairScene scene;
  scene.normals.normals[1] = {1, 0, 0};
  SegmentConfig cfg;
  const EdgeList edges = scene.build(cfg);
  const auto* e = find_edge(edges, 0, 1);
  REQUIRE(e != nullptr);
  CHECK(e->w == doctest::Approx(1.0f));
}

TEST_CASE("background pixels: label connects, prune disconnects") {
  PairScene scene;
  scene.raster.labels.assign(8, -1);
  SegmentConfig cfg;
  cfg.background = BackgroundPolicy::kLabel;
  CHECK(find_edge(scene.build(cfg), 0, 1) != nullptr);
  cfg.background = BackgroundPolicy::kPrune;
  CHECK(find_edge(scene.build(cfg), 0, 1) == nullptr);
}

TEST_CASE("cross-view pairs obey the policy") {
  PairScene scene;
  scene.corr.entries[1].view = 1; // same instance id 0, different view
  SegmentConfig cfg;
  cfg.cross_view = CrossViewPolicy::kPrune;
  CHECK(find_edge(scene.build(cfg), 0, 1) == nullptr);
  cfg.cross_view = CrossViewPolicy::kKeep;
  CHECK(find_edge(scene.build(cfg), 0, 1) != nullptr);
}

TEST_CASE("two-view scene with pruning: every edge stays within one view") {
  synth::SceneRecipe recipe;
  recipe.kind = synth::SceneKind::kTwoViewSeam;
  recipe.point_count = 4000;
  recipe.view_count = 2;
  recipe.seed = 5;
  const synth::SceneBundle scene = synth::generate(recipe);
  const KnnIndex index(scene.cloud, 8);
  const auto origins = scene.per_point_origins();
  const NormalField normals = estimate_normals(scene.cloud, index, &origins);
  SegmentConfig cfg;
  cfg.cross_view = CrossViewPolicy::kPrune;
  const EdgeList edges = build_boundary_aware_graph(scene.cloud, normals, index, scene.corr,
                                                    scene.raster, cfg);
  REQUIRE(edges.size() > 0);
  for (const auto& e : edges.edges)
    REQUIRE(scene.corr.entries[e.i].view == scene.corr.entries[e.j].view);
}

TEST_CASE("empty raster with keep+label equals the geometry-only graph") {
  synth::SceneRecipe recipe;
  recipe.kind = synth::SceneKind::kTwoViewSeam;
  recipe.point_count = 2000;
  recipe.view_count = 2;
  recipe.seed = 6;
  const synth::SceneBundle scene = synth::generate(recipe);
  const KnnIndex index(scene.cloud, 8);
  const NormalField normals = estimate_normals(scene.cloud, index);

  InstanceRaster empty = scene.raster;
  std::fill(empty.labels.begin(), empty.labels.end(), -1);
  SegmentConfig cfg;
  cfg.cross_view = CrossViewPolicy::kKeep;
  cfg.background = BackgroundPolicy::kLabel;
  const EdgeList boundary =
      build_boundary_aware_graph(scene.cloud, normals, index, scene.corr, empty, cfg);
  const EdgeList geometry = build_geometry_graph(scene.cloud, normals, index);
  CHECK(boundary == geometry);
}

TEST_CASE("output is deduplicated, sorted by (i,j), and thread-stable") {
  synth::SceneRecipe recipe;
  recipe.kind = synth::SceneKind::kRandomBlobs;
  recipe.point_count = 3000;
  recipe.view_count = 2;
  recipe.seed = 7;
  const synth::SceneBundle scene = synth::generate(recipe);
  const KnnIndex index(scene.cloud, 6);
  const NormalField normals = estimate_normals(scene.cloud, index);
  SegmentConfig cfg;
  const EdgeList one = build_boundary_aware_graph(scene.cloud, normals, index, scene.corr,
                                                  scene.raster, cfg, 1);
  const EdgeList eight = build_boundary_aware_graph(scene.cloud, normals, index, scene.corr,
                                                    scene.raster, cfg, 8);
  CHECK(one == eight);
  one.validate(); // i<j, weight range, no duplicates
  for (std::size_t e = 1; e < one.size(); ++e) {
    const bool ordered = one.edges[e - 1].i < one.edges[e].i ||
                         (one.edges[e - 1].i == one.edges[e].i &&
                          one.edges[e - 1].j < one.edges[e].j);
    REQUIRE(ordered);
  }
}

TEST_CASE("correspondence/raster dimension mismatch is an error") {
  PairScene scene;
  scene.raster.height = 3;
  scene.raster.labels.assign(2 * 3 * 2, 0);
  SegmentConfig cfg;
  CHECK_THROWS_WITH_AS(scene.build(cfg), doctest::Contains("mismatch"), ValidationError);
}
