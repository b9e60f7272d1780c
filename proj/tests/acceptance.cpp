// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Run as: acceptance --cli <path-to-ovseg3r-binary> [--workdir <dir>]

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ovseg3r/codec.hpp"
#include "ovseg3r/felzenszwalb.hpp"
#include "ovseg3r/hash.hpp"
#include "ovseg3r/lifting.hpp"
#include "ovseg3r/normals.hpp"
#include "ovseg3r/oracle.hpp"
#include "ovseg3r/ply.hpp"
#include "ovseg3r/rng.hpp"
#include "ovseg3r/synth.hpp"
#include "ovseg3r/vip.hpp"

namespace fs = std::filesystem;
using namespace ovseg3r;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli;
fs::path g_work;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

[[noreturn]] void fail(const std::string& detail) { throw std::runtime_error(detail); }

void expect(bool ok, const std::string& detail) {
  if (!ok) fail(detail);
}

synth::SceneRecipe recipe_of(synth::SceneKind kind, std::uint32_t n, std::uint32_t views,
                             double sigma, std::uint64_t seed) {
  synth::SceneRecipe recipe;
  recipe.kind = kind;
  recipe.point_count = n;
  recipe.view_count = views;
  recipe.smoothing_sigma = sigma;
  recipe.seed = seed;
  return recipe;
}

/// True iff every superpoint holds exactly one (view, raster-id) pair.
bool superpoints_pure(const synth::SceneBundle& scene, const SuperpointMask& mask) {
  std::map<std::uint32_t, std::pair<std::uint32_t, std::int32_t>> seen;
  for (std::size_t i = 0; i < mask.point_count(); ++i) {
    const auto& e = scene.corr.entries[i];
    const std::pair<std::uint32_t, std::int32_t> key{e.view, scene.raster.at_nearest(e)};
    const auto [it, fresh] = seen.try_emplace(mask.point_labels[i], key);
    if (!fresh && it->second != key) return false;
  }
  return true;
}

// --- criteria -------------------------------------------------------------------

void criterion_instance_purity() {
  const auto start = Clock::now();
  const double sigmas[3] = {0.0, 0.01, 0.03};
  int scenes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const synth::SceneKind kind :
         {synth::SceneKind::kFlushObject, synth::SceneKind::kBoxRoom}) {
      const std::uint32_t views = kind == synth::SceneKind::kBoxRoom ? 3 : 2;
      const synth::SceneBundle scene =
          synth::generate(recipe_of(kind, 50000, views, sigmas[seed % 3], seed));
      SegmentConfig cfg; // boundary pruning defaults
      const auto origins = scene.per_point_origins();
      const SuperpointMask mask =
          segment_pipeline(scene.cloud, scene.corr, scene.raster, cfg, 16, &origins);
      mask.validate();
      if (!superpoints_pure(scene, mask))
        fail("impure superpoint in scene seed=" + std::to_string(seed));
      ++scenes;
      if (scenes == 20) break;
    }
    if (scenes == 20) break;
  }
  expect(scenes == 20, "expected 20 scenes, ran " + std::to_string(scenes));
  const double elapsed = seconds_since(start);
  expect(elapsed < 30.0, "runtime " + std::to_string(elapsed) + "s exceeds 30s");
}

void criterion_mechanism_reproduction() {
  const synth::SceneBundle scene =
      synth::generate(recipe_of(synth::SceneKind::kFlushObject, 50000, 2, 0.03, 3));
  const KnnIndex index(scene.cloud, 16);
  const auto origins = scene.per_point_origins();
  const NormalField normals = estimate_normals(scene.cloud, index, &origins);
  SegmentConfig cfg;

  const auto mixed_count = [&](const SuperpointMask& mask) {
    std::vector<std::uint8_t> has_wall(mask.superpoint_count, 0);
    std::vector<std::uint8_t> has_patch(mask.superpoint_count, 0);
    for (std::size_t i = 0; i < mask.point_count(); ++i) {
      if (scene.gt_labels[i] == 0) has_wall[mask.point_labels[i]] = 1;
      else has_patch[mask.point_labels[i]] = 1;
    }
    std::size_t mixed = 0;
    for (std::uint32_t k = 0; k < mask.superpoint_count; ++k)
      if (has_wall[k] && has_patch[k]) ++mixed;
    return mixed;
  };

  // geometry-only: the raster is ignored entirely
  const EdgeList geometry_edges = build_geometry_graph(scene.cloud, normals, index);
  const SuperpointMask geometry =
      felzenszwalb_segment(scene.cloud.size(), geometry_edges, cfg);
  expect(mixed_count(geometry) >= 1, "geometry-only run produced no mixed superpoint");

  // boundary-aware
  const EdgeList pruned_edges = build_boundary_aware_graph(scene.cloud, normals, index,
                                                           scene.corr, scene.raster, cfg);
  const SuperpointMask aware = felzenszwalb_segment(scene.cloud.size(), pruned_edges, cfg);
  expect(mixed_count(aware) == 0, "boundary-aware run produced a mixed superpoint");

  std::vector<std::uint8_t> pure_patch(aware.superpoint_count, 1);
  std::vector<std::uint8_t> has_patch(aware.superpoint_count, 0);
  for (std::size_t i = 0; i < aware.point_count(); ++i) {
    if (scene.gt_labels[i] == 1) has_patch[aware.point_labels[i]] = 1;
    else pure_patch[aware.point_labels[i]] = 0;
  }
  bool inside = false;
  for (std::uint32_t k = 0; k < aware.superpoint_count; ++k)
    inside = inside || (has_patch[k] && pure_patch[k]);
  expect(inside, "no superpoint lies fully inside the painting");
}

void criterion_felzenszwalb_oracle() {
  const auto start = Clock::now();
  const auto failure = oracle::run_trials(oracle::TrialKind::kFelzenszwalb, 50, 20260809,
                                          g_work / "dumps");
  if (failure)
    fail("trial " + std::to_string(failure->trial) + ": " + failure->detail + " (dumped to " +
         failure->dump_dir.string() + ")");
  const double elapsed = seconds_since(start);
  expect(elapsed < 5.0, "runtime " + std::to_string(elapsed) + "s exceeds 5s");
}

void criterion_hand_traces() {
  EdgeList edges;
  edges.edges = {{0, 1, 0.01f}, {1, 2, 0.01f}, {2, 3, 1.5f}};
  SegmentConfig cfg;
  cfg.sp_thresh = 0.1f;
  cfg.sp_min = 1;
  const SuperpointMask first = felzenszwalb_segment(4, edges, cfg);
  expect(first.point_labels == std::vector<std::uint32_t>{0, 0, 0, 1},
         "sp_min=1 trace gave the wrong partition");
  cfg.sp_min = 2;
  const SuperpointMask second = felzenszwalb_segment(4, edges, cfg);
  expect(second.point_labels == std::vector<std::uint32_t>{0, 0, 0, 0},
         "sp_min=2 trace gave the wrong partition");
}

void criterion_numerical_oracles() {
  for (const auto kind :
       {oracle::TrialKind::kPool, oracle::TrialKind::kBilinear, oracle::TrialKind::kVip}) {
    const auto failure = oracle::run_trials(kind, 50, 77, g_work / "dumps");
    if (failure)
      fail("trial " + std::to_string(failure->trial) + ": " + failure->detail);
  }
}

void criterion_vip_structure() {
  Rng rng(6060);
  for (int scene_index = 0; scene_index < 20; ++scene_index) {
    const std::uint32_t views = 2 + rng.below(3);
    const synth::SceneBundle scene = synth::generate(recipe_of(
        synth::SceneKind::kRandomBlobs, 2000 + rng.below(2000), views, 0.0, 1000 + scene_index));
    SegmentConfig cfg;
    cfg.sp_min = 5;
    const SuperpointMask mask =
        segment_pipeline(scene.cloud, scene.corr, scene.raster, cfg, 8);
    const std::uint32_t q = std::min<std::uint32_t>(mask.superpoint_count, 1 + rng.below(24));
    const ScenePrediction pred = oracle::random_prediction(rng, q, mask.superpoint_count);
    const VisibilityMasks vis = compute_visibility(scene.corr, mask, pred.init_superpoints);
    const auto parts = partition_predictions(pred, vis);

    // (a) queries only appear where their init superpoint has points
    std::vector<std::set<std::uint32_t>> sp_views(mask.superpoint_count);
    for (std::size_t i = 0; i < mask.point_count(); ++i)
      sp_views[mask.point_labels[i]].insert(scene.corr.entries[i].view);
    for (const auto& part : parts)
      for (std::uint32_t a : part.query_rows)
        expect(sp_views[pred.init_superpoints[a]].count(part.view_index) > 0,
               "query exposed in a view without its init superpoint");

    // (b) partitioned cells equal scene-level cells
    for (const auto& part : parts)
      for (std::uint32_t a = 0; a < part.query_rows.size(); ++a)
        for (std::uint32_t b = 0; b < part.superpoint_cols.size(); ++b)
          expect(part.masks.at(a, b) ==
                     pred.mask_at(part.query_rows[a], part.superpoint_cols[b]),
                 "partitioned cell disagrees with the scene cell");

    // (c) full coverage at sigma 0: every query appears somewhere
    for (std::uint32_t a = 0; a < q; ++a) {
      bool anywhere = false;
      for (std::uint32_t v = 0; v < views; ++v) anywhere = anywhere || vis.query_vis.at(v, a);
      expect(anywhere, "query appears in no view");
    }
  }
}

void criterion_normal_accuracy() {
  // exact planes
  {
    const synth::SceneBundle scene =
        synth::generate(recipe_of(synth::SceneKind::kTwoViewSeam, 20000, 2, 0.0, 4));
    const KnnIndex index(scene.cloud, 16);
    const NormalField field = estimate_normals(scene.cloud, index);
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double dot = std::abs(field.normals[i][2]);
      const double angle = std::acos(std::min(1.0, dot)) * 180.0 / M_PI;
      if (angle >= 0.01) fail("plane normal off by " + std::to_string(angle) + " degrees");
    }
  }
  // noisy sphere
  {
    Rng rng(5);
    PointCloud cloud;
    std::vector<std::array<double, 3>> radial(2000);
    cloud.positions.resize(2000);
    for (std::size_t i = 0; i < 2000; ++i) {
      double d[3];
      double norm;
      do {
        for (int a = 0; a < 3; ++a) d[a] = rng.gaussian();
        norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      } while (norm < 1e-9);
      for (int a = 0; a < 3; ++a) d[a] /= norm;
      radial[i] = {d[0], d[1], d[2]};
      cloud.positions[i] = {static_cast<float>(d[0] + rng.gaussian() * 0.005),
                            static_cast<float>(d[1] + rng.gaussian() * 0.005),
                            static_cast<float>(d[2] + rng.gaussian() * 0.005)};
    }
    const KnnIndex index(cloud, 16);
    const NormalField field = estimate_normals(cloud, index);
    std::size_t good = 0;
    for (std::size_t i = 0; i < 2000; ++i) {
      const double dot = std::abs(field.normals[i][0] * radial[i][0] +
                                  field.normals[i][1] * radial[i][1] +
                                  field.normals[i][2] * radial[i][2]);
      if (std::acos(std::min(1.0, dot)) * 180.0 / M_PI < 5.0) ++good;
    }
    expect(good >= 1980, "only " + std::to_string(good) + "/2000 sphere normals within 5 deg");
  }
}

int run_cli(const std::string& args) {
  const std::string command = g_cli + " " + args + " >" + (g_work / "cli.log").string() + " 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_determinism() {
  expect(!g_cli.empty(), "needs --cli <binary>");
  const fs::path scene_dir = g_work / "det_scene";
  expect(run_cli("synth --scene box-room --n 20000 --views 3 --sigma 0.01 --seed 21 --out " +
                 scene_dir.string()) == 0,
         "synth failed");
  const auto pipeline = [&](const fs::path& out, int threads) {
    return run_cli("--threads " + std::to_string(threads) + " pipeline --points " +
                   (scene_dir / "points.ply").string() + " --corr " +
                   (scene_dir / "corr.ov3c").string() + " --masks " +
                   (scene_dir / "masks.ov2m").string() + " --view-origins " +
                   (scene_dir / "origins.ovfm").string() + " --out-dir " + out.string());
  };
  const fs::path out1 = g_work / "det_t1";
  const fs::path out8 = g_work / "det_t8";
  expect(pipeline(out1, 1) == 0, "pipeline with --threads 1 failed");
  expect(pipeline(out8, 8) == 0, "pipeline with --threads 8 failed");

  std::vector<fs::path> names;
  for (const auto& entry : fs::recursive_directory_iterator(out1))
    if (entry.is_regular_file()) names.push_back(fs::relative(entry.path(), out1));
  expect(!names.empty(), "pipeline produced no artifacts");
  std::size_t manifests = 0;
  for (const auto& name : names) {
    expect(fs::exists(out8 / name), "missing artifact " + name.string());
    const auto a = io::read_file(out1 / name);
    const auto b = io::read_file(out8 / name);
    if (a != b) fail("artifact differs across thread counts: " + name.string());
    if (name.string().find("manifest") != std::string::npos) ++manifests;
  }
  expect(manifests >= 4, "expected per-stage manifests");
}

void criterion_performance() {
  const synth::SceneBundle scene =
      synth::generate(recipe_of(synth::SceneKind::kBoxRoom, 1000000, 3, 0.0, 6));
  const auto origins = scene.per_point_origins();
  const auto start = Clock::now();
  SegmentConfig cfg;
  const SuperpointMask mask =
      segment_pipeline(scene.cloud, scene.corr, scene.raster, cfg, 16, &origins);
  const double elapsed = seconds_since(start);
  expect(mask.point_count() == 1000000, "wrong output size");
  expect(elapsed <= 60.0, "segment_pipeline took " + std::to_string(elapsed) + "s (> 60s)");

  std::ifstream status("/proc/self/status");
  std::string line;
  long hwm_kb = 0;
  while (std::getline(status, line))
    if (line.rfind("VmHWM:", 0) == 0) hwm_kb = std::atol(line.c_str() + 6);
  expect(hwm_kb > 0, "could not read VmHWM");
  expect(hwm_kb <= 8L * 1024 * 1024,
         "peak memory " + std::to_string(hwm_kb / 1024) + " MiB exceeds 8 GiB");
}

void criterion_codec_roundtrips() {
  Rng rng(909);
  for (int trial = 0; trial < 100; ++trial) {
    PointCloud cloud;
    cloud.positions.resize(1 + rng.below(50));
    for (auto& p : cloud.positions)
      p = {static_cast<float>(rng.uniform(-5, 5)), static_cast<float>(rng.uniform(-5, 5)),
           static_cast<float>(rng.uniform(-5, 5))};
    expect(io::decode_ply(io::encode_ply(cloud)).positions == cloud.positions, "ply round trip");

    const CorrespondenceTable corr = oracle::random_corr(
        rng, 1 + rng.below(40), 1 + rng.below(4), 2 + rng.below(20), 2 + rng.below(20));
    const CorrespondenceTable corr2 = io::decode_ov3c(io::encode_ov3c(corr));
    expect(corr2.entries == corr.entries && corr2.view_dims == corr.view_dims,
           "ov3c round trip");

    InstanceRaster raster;
    raster.views = 1 + rng.below(3);
    raster.height = 2 + rng.below(6);
    raster.width = 2 + rng.below(6);
    raster.labels.assign(static_cast<std::size_t>(raster.views) * raster.height * raster.width,
                         -1);
    for (std::uint32_t v = 0; v < raster.views; ++v) {
      const std::uint32_t ids = 1 + rng.below(4);
      for (std::uint32_t y = 0; y < raster.height; ++y)
        for (std::uint32_t x = 0; x < raster.width; ++x)
          raster.at(v, y, x) =
              static_cast<std::int32_t>(rng.below(ids + 1)) - 1; // -1..ids-1
      // force contiguity per view: stamp each id into its own cell
      for (std::uint32_t id = 0; id < ids; ++id)
        raster.at(v, id / raster.width, id % raster.width) = static_cast<std::int32_t>(id);
    }
    const auto raster2 = io::decode_ov2m(io::encode_ov2m(raster));
    expect(!raster2.relabeled && raster2.raster.labels == raster.labels, "ov2m round trip");

    const FeatureMatrix matrix =
        oracle::random_matrix(rng, 1 + rng.below(16), 1 + rng.below(16), -50, 50);
    expect(io::decode_ovfm(io::encode_ovfm(matrix)) == matrix, "ovfm round trip");

    const ImageFeatureStack stack = oracle::random_stack(rng, 1 + rng.below(3), 2 + rng.below(6),
                                                         2 + rng.below(6), 1 + rng.below(6));
    expect(io::decode_ovif(io::encode_ovif(stack)).data == stack.data, "ovif round trip");

    const std::uint32_t n_points = 1 + rng.below(60);
    const SuperpointMask mask =
        oracle::random_superpoints(rng, n_points, 1 + rng.below(n_points));
    expect(io::decode_ovsp(io::encode_ovsp(mask)) == mask, "ovsp round trip");

    const oracle::RandomGraph graph = oracle::random_graph(rng, 50, 160);
    expect(io::decode_oveg(io::encode_oveg(graph.edges)) == graph.edges, "oveg round trip");

    const std::uint32_t sp = 1 + rng.below(20);
    const ScenePrediction pred = oracle::random_prediction(rng, rng.below(sp + 1), sp);
    expect(io::decode_ovpr(io::encode_ovpr(pred)) == pred, "ovpr round trip");
  }

  // ten hand-corrupted files, each hitting a documented error class
  int rejected = 0;
  const auto expect_codec_error = [&](std::function<void()> attempt, const char* what) {
    try {
      attempt();
      fail(std::string("corrupt file accepted: ") + what);
    } catch (const ValidationError&) {
      ++rejected;
    }
  };

  io::ByteWriter bad_magic;
  bad_magic.magic("XXXX");
  bad_magic.u32(1);
  expect_codec_error([&] { io::decode_ov3c(bad_magic.take()); }, "magic");

  io::ByteWriter bad_version;
  bad_version.magic("OVSP");
  bad_version.u32(12);
  expect_codec_error([&] { io::decode_ovsp(bad_version.take()); }, "version");

  io::ByteWriter truncated;
  truncated.magic("OVFM");
  truncated.u32(1);
  truncated.u32(4);
  truncated.u32(4);
  truncated.f32(1.0f);
  expect_codec_error([&] { io::decode_ovfm(truncated.take()); }, "truncation");

  io::ByteWriter nan_matrix;
  nan_matrix.magic("OVFM");
  nan_matrix.u32(1);
  nan_matrix.u32(1);
  nan_matrix.u32(1);
  nan_matrix.f32(std::numeric_limits<float>::quiet_NaN());
  expect_codec_error([&] { io::decode_ovfm(nan_matrix.take()); }, "non-finite");

  io::ByteWriter label_range;
  label_range.magic("OVSP");
  label_range.u32(1);
  label_range.u32(2);
  label_range.u32(1);
  label_range.u32(0);
  label_range.u32(5);
  expect_codec_error([&] { io::decode_ovsp(label_range.take()); }, "label range");

  io::ByteWriter coord_range;
  coord_range.magic("OV3C");
  coord_range.u32(1);
  coord_range.u32(1);
  coord_range.u32(1);
  coord_range.u32(2);
  coord_range.u32(2);
  coord_range.u32(0);
  coord_range.f32(2.0f);
  coord_range.f32(0.0f);
  expect_codec_error([&] { io::decode_ov3c(coord_range.take()); }, "coordinate range");

  io::ByteWriter swapped_edge;
  swapped_edge.magic("OVEG");
  swapped_edge.u32(1);
  swapped_edge.u64(1);
  swapped_edge.u32(7);
  swapped_edge.u32(3);
  swapped_edge.f32(0.5f);
  expect_codec_error([&] { io::decode_oveg(swapped_edge.take()); }, "i >= j");

  io::ByteWriter heavy_edge;
  heavy_edge.magic("OVEG");
  heavy_edge.u32(1);
  heavy_edge.u64(1);
  heavy_edge.u32(0);
  heavy_edge.u32(1);
  heavy_edge.f32(3.0f);
  expect_codec_error([&] { io::decode_oveg(heavy_edge.take()); }, "weight range");

  io::ByteWriter bad_cell;
  bad_cell.magic("OVPR");
  bad_cell.u32(1);
  bad_cell.u32(1);
  bad_cell.u32(1);
  bad_cell.u8(9);
  bad_cell.i32(0);
  bad_cell.u32(0);
  expect_codec_error([&] { io::decode_ovpr(bad_cell.take()); }, "mask cell");

  io::ByteWriter low_id;
  low_id.magic("OV2M");
  low_id.u32(1);
  low_id.u32(1);
  low_id.u32(1);
  low_id.u32(1);
  low_id.i32(-4);
  expect_codec_error([&] { io::decode_ov2m(low_id.take()); }, "id below -1");

  expect(rejected == 10, "expected 10 rejected corruptions, got " + std::to_string(rejected));
}

} // namespace

int main(int argc, char** argv) {
  for (int a = 1; a + 1 < argc; ++a) {
    if (std::string(argv[a]) == "--cli") g_cli = argv[a + 1];
    if (std::string(argv[a]) == "--workdir") g_work = argv[a + 1];
  }
  if (g_work.empty()) g_work = fs::temp_directory_path() / "ovseg3r_acceptance";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    const char* name;
    std::function<void()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "instance purity on flush_object and box_room scenes", criterion_instance_purity},
      {2, "flush-object mechanism reproduction", criterion_mechanism_reproduction},
      {3, "felzenszwalb oracle equivalence", criterion_felzenszwalb_oracle},
      {4, "hand-computed 4-point traces", criterion_hand_traces},
      {5, "numerical oracles (pool, bilinear, visibility, partition, decode)",
       criterion_numerical_oracles},
      {6, "VIP structural guarantees", criterion_vip_structure},
      {7, "normal estimation accuracy", criterion_normal_accuracy},
      {8, "pipeline determinism across thread counts", criterion_determinism},
      {9, "million-point performance envelope", criterion_performance},
      {10, "codec round-trips and corruption handling", criterion_codec_roundtrips},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = Clock::now();
    try {
      criterion.run();
      std::printf("[PASS] C%-2d %s (%.1fs)\n", criterion.id, criterion.name,
                  seconds_since(start));
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] C%-2d %s: %s\n", criterion.id, criterion.name, e.what());
    }
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
