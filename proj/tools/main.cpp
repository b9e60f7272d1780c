// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ovseg3r/codec.hpp"
#include "ovseg3r/felzenszwalb.hpp"
#include "ovseg3r/lifting.hpp"
#include "ovseg3r/normals.hpp"
#include "ovseg3r/oracle.hpp"
#include "ovseg3r/pipeline.hpp"
#include "ovseg3r/ply.hpp"
#include "ovseg3r/synth.hpp"
#include "ovseg3r/vip.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ovseg3r;

namespace {

std::string full_message(const std::exception& e) {
  std::string msg = e.what();
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    msg += ": " + full_message(inner);
  } catch (...) {
  }
  return msg;
}

std::vector<std::uint8_t> slurp(const std::string& path) { return io::read_file(path); }

std::vector<std::string> split_commas(const std::string& joined) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= joined.size()) {
    const std::size_t comma = joined.find(',', start);
    if (comma == std::string::npos) {
      if (start < joined.size()) out.push_back(joined.substr(start));
      break;
    }
    if (comma > start) out.push_back(joined.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::uint32_t> read_indices(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<std::uint32_t> out;
  long long value;
  while (in >> value) {
    if (value < 0) throw ValidationError("index file " + path + ": negative index");
    out.push_back(static_cast<std::uint32_t>(value));
  }
  if (!in.eof()) throw ValidationError("index file " + path + ": malformed integer");
  return out;
}

NormalField normals_from_matrix(const FeatureMatrix& m, std::size_t expected_points) {
  if (m.cols != 3 || m.rows != expected_points)
    throw ValidationError("normals matrix must be N x 3 for the point cloud");
  NormalField field;
  field.normals.resize(m.rows);
  field.degenerate.assign(m.rows, 0);
  for (std::uint32_t i = 0; i < m.rows; ++i)
    field.normals[i] = {m.at(i, 0), m.at(i, 1), m.at(i, 2)};
  return field;
}

synth::SceneKind parse_scene(const std::string& name) {
  if (name == "flush-object") return synth::SceneKind::kFlushObject;
  if (name == "box-room") return synth::SceneKind::kBoxRoom;
  if (name == "two-view-seam") return synth::SceneKind::kTwoViewSeam;
  if (name == "random-blobs") return synth::SceneKind::kRandomBlobs;
  throw ValidationError("unknown scene kind \"" + name +
                        "\" (flush-object, box-room, two-view-seam, random-blobs)");
}

void write_synth_bundle(const synth::SceneBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_file(dir / "points.ply", io::encode_ply(bundle.cloud));
  io::write_file(dir / "corr.ov3c", io::encode_ov3c(bundle.corr));
  io::write_file(dir / "masks.ov2m", io::encode_ov2m(bundle.raster));

  // Ground truth as OVSP: labels ranked by ascending gt id; -1 (background)
  // ranks first when present. scene.json records the mapping.
  std::vector<std::int32_t> distinct(bundle.gt_labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  SuperpointMask gt;
  gt.superpoint_count = static_cast<std::uint32_t>(distinct.size());
  gt.point_labels.resize(bundle.gt_labels.size());
  for (std::size_t i = 0; i < bundle.gt_labels.size(); ++i) {
    const auto it = std::lower_bound(distinct.begin(), distinct.end(), bundle.gt_labels[i]);
    gt.point_labels[i] = static_cast<std::uint32_t>(it - distinct.begin());
  }
  io::write_file(dir / "gt.ovsp", io::encode_ovsp(gt));

  FeatureMatrix origins = FeatureMatrix::zeros(
      static_cast<std::uint32_t>(bundle.view_origins.size()), 3);
  for (std::uint32_t v = 0; v < bundle.view_origins.size(); ++v) {
    origins.at(v, 0) = bundle.view_origins[v][0];
    origins.at(v, 1) = bundle.view_origins[v][1];
    origins.at(v, 2) = bundle.view_origins[v][2];
  }
  io::write_file(dir / "origins.ovfm", io::encode_ovfm(origins));

  json meta;
  meta["instance_count"] = bundle.instance_count;
  meta["gt_label_map"] = distinct; // ovsp label -> global instance id (-1 = background)
  meta["local_to_global"] = bundle.local_to_global;
  const std::string text = meta.dump(2) + "\n";
  io::write_file(dir / "scene.json",
                 {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"ovseg3r: superpoint construction and 2D-to-3D lifting toolkit"};
  app.require_subcommand(1);

  int threads = 0;
  bool json_log = false;
  app.add_option("--threads", threads,
                 "worker threads, 0 = hardware count (env OVSEG3R_THREADS)");
  app.add_flag("--json", json_log, "line-delimited JSON logs and errors on stderr");

  // --- normals ---------------------------------------------------------------
  std::string n_points, n_corr, n_origins, n_out;
  std::uint32_t n_k = 16;
  auto* cmd_normals = app.add_subcommand("normals", "estimate PCA normals");
  cmd_normals->add_option("--points", n_points)->required();
  cmd_normals->add_option("--k", n_k, "neighbors per point");
  cmd_normals->add_option("--corr", n_corr, "correspondences, needed with --origins");
  cmd_normals->add_option("--origins", n_origins, "V x 3 OVFM of per-view origins");
  cmd_normals->add_option("--out", n_out)->required();
  cmd_normals->callback([&] {
    const PointCloud cloud = io::decode_ply(slurp(n_points));
    const KnnIndex index = build_knn_index(cloud, n_k);
    std::vector<Vec3f> origins;
    const std::vector<Vec3f>* origins_ptr = nullptr;
    if (!n_origins.empty()) {
      if (n_corr.empty()) throw ValidationError("--origins requires --corr");
      const CorrespondenceTable corr = io::decode_ov3c(slurp(n_corr));
      if (corr.point_count() != cloud.size())
        throw ValidationError("correspondence count does not match point count");
      origins = expand_view_origins(io::decode_ovfm(slurp(n_origins)), corr);
      origins_ptr = &origins;
    }
    const NormalField field = estimate_normals(cloud, index, origins_ptr, threads);
    io::write_file(n_out, io::encode_ovfm(normals_matrix(field)));
  });

  // --- graph -----------------------------------------------------------------
  std::string g_points, g_normals, g_corr, g_masks, g_out;
  std::string g_cross = "prune", g_background = "label";
  std::uint32_t g_k = 16;
  auto* cmd_graph = app.add_subcommand("graph", "build the boundary-aware superpoint graph");
  cmd_graph->add_option("--points", g_points)->required();
  cmd_graph->add_option("--normals", g_normals)->required();
  cmd_graph->add_option("--corr", g_corr)->required();
  cmd_graph->add_option("--masks", g_masks)->required();
  cmd_graph->add_option("--k", g_k);
  cmd_graph->add_option("--cross-view", g_cross, "prune|keep");
  cmd_graph->add_option("--background", g_background, "label|prune");
  cmd_graph->add_option("--out", g_out)->required();
  cmd_graph->callback([&] {
    const PointCloud cloud = io::decode_ply(slurp(g_points));
    const NormalField normals =
        normals_from_matrix(io::decode_ovfm(slurp(g_normals)), cloud.size());
    const CorrespondenceTable corr = io::decode_ov3c(slurp(g_corr));
    const auto raster = io::decode_ov2m(slurp(g_masks));
    SegmentConfig cfg;
    cfg.cross_view = parse_cross_view(g_cross);
    cfg.background = parse_background(g_background);
    const KnnIndex index = build_knn_index(cloud, g_k);
    io::write_file(g_out, io::encode_oveg(build_boundary_aware_graph(
                              cloud, normals, index, corr, raster.raster, cfg, threads)));
  });

  // --- segment ----------------------------------------------------------------
  std::string s_points, s_edges, s_out;
  float s_thresh = 0.1f;
  std::uint32_t s_min = 25;
  auto* cmd_segment = app.add_subcommand("segment", "Felzenszwalb superpoint segmentation");
  cmd_segment->add_option("--points", s_points)->required();
  cmd_segment->add_option("--edges", s_edges)->required();
  cmd_segment->add_option("--thresh", s_thresh, "adaptive threshold parameter");
  cmd_segment->add_option("--min-size", s_min, "minimum superpoint size");
  cmd_segment->add_option("--out", s_out)->required();
  cmd_segment->callback([&] {
    const PointCloud cloud = io::decode_ply(slurp(s_points));
    const EdgeList edges = io::decode_oveg(slurp(s_edges));
    SegmentConfig cfg;
    cfg.sp_thresh = s_thresh;
    cfg.sp_min = s_min;
    io::write_file(s_out, io::encode_ovsp(felzenszwalb_segment(cloud.size(), edges, cfg)));
  });

  // --- lift --------------------------------------------------------------------
  std::string l_masks, l_corr, l_out;
  auto* cmd_lift = app.add_subcommand("lift", "lift 2D instance masks to view-wise annotations");
  cmd_lift->add_option("--masks", l_masks)->required();
  cmd_lift->add_option("--corr", l_corr)->required();
  cmd_lift->add_option("--out", l_out)->required();
  cmd_lift->callback([&] {
    const auto raster = io::decode_ov2m(slurp(l_masks));
    const CorrespondenceTable corr = io::decode_ov3c(slurp(l_corr));
    json out = json::array();
    for (const auto& ann : lift_masks(raster.raster, corr))
      out.push_back({{"view", ann.view_index},
                     {"points", ann.point_indices},
                     {"ids", ann.instance_ids}});
    const std::string text = out.dump(2) + "\n";
    io::write_file(l_out, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  });

  // --- sample-features -----------------------------------------------------------
  std::string f_features, f_corr, f_out;
  auto* cmd_sample = app.add_subcommand("sample-features", "bilinear per-point feature sampling");
  cmd_sample->add_option("--features", f_features)->required();
  cmd_sample->add_option("--corr", f_corr)->required();
  cmd_sample->add_option("--out", f_out)->required();
  cmd_sample->callback([&] {
    const ImageFeatureStack stack = io::decode_ovif(slurp(f_features));
    const CorrespondenceTable corr = io::decode_ov3c(slurp(f_corr));
    io::write_file(f_out, io::encode_ovfm(sample_point_features(stack, corr, threads)));
  });

  // --- pool -----------------------------------------------------------------------
  std::string p_features, p_superpoints, p_out;
  auto* cmd_pool = app.add_subcommand("pool", "mean-pool point features per superpoint");
  cmd_pool->add_option("--point-features", p_features)->required();
  cmd_pool->add_option("--superpoints", p_superpoints)->required();
  cmd_pool->add_option("--out", p_out)->required();
  cmd_pool->callback([&] {
    const FeatureMatrix features = io::decode_ovfm(slurp(p_features));
    const SuperpointMask mask = io::decode_ovsp(slurp(p_superpoints));
    io::write_file(p_out, io::encode_ovfm(pool_superpoint_features(features, mask, threads)));
  });

  // --- prompt -----------------------------------------------------------------------
  std::string pr_positive, pr_vocab;
  std::uint32_t pr_size = 8;
  std::uint64_t pr_seed = 0;
  auto* cmd_prompt = app.add_subcommand("prompt", "assemble a padded text prompt");
  cmd_prompt->add_option("--positive", pr_positive, "comma-separated positive class names");
  cmd_prompt->add_option("--vocab", pr_vocab, "file with one class name per line")->required();
  cmd_prompt->add_option("--T", pr_size, "padded class count");
  cmd_prompt->add_option("--seed", pr_seed);
  cmd_prompt->callback([&] {
    const PromptSpec spec =
        build_prompt(split_commas(pr_positive), read_lines(pr_vocab), pr_size, pr_seed);
    json out{{"positive", spec.positive_classes},
             {"padded", spec.padded_classes},
             {"prompt", spec.prompt_string},
             {"seed", spec.seed}};
    std::cout << out.dump(2) << "\n";
  });

  // --- decode --------------------------------------------------------------------
  std::string d_queries, d_sp, d_text, d_init, d_out;
  double d_tau = 0.0;
  auto* cmd_decode = app.add_subcommand("decode", "threshold masks and argmax classes");
  cmd_decode->add_option("--queries", d_queries)->required();
  cmd_decode->add_option("--sp-features", d_sp)->required();
  cmd_decode->add_option("--text", d_text)->required();
  cmd_decode->add_option("--tau", d_tau, "mask similarity threshold");
  cmd_decode->add_option("--init", d_init, "file of init superpoint indices")->required();
  cmd_decode->add_option("--out", d_out)->required();
  cmd_decode->callback([&] {
    const FeatureMatrix queries = io::decode_ovfm(slurp(d_queries));
    const FeatureMatrix sp_features = io::decode_ovfm(slurp(d_sp));
    const FeatureMatrix text = io::decode_ovfm(slurp(d_text));
    const auto init = read_indices(d_init);
    io::write_file(d_out, io::encode_ovpr(decode_predictions(queries, sp_features, text, d_tau,
                                                             init, threads)));
  });

  // --- partition --------------------------------------------------------------------
  std::string v_pred, v_superpoints, v_corr, v_out;
  auto* cmd_partition = app.add_subcommand("partition", "view-wise instance partition");
  cmd_partition->add_option("--pred", v_pred)->required();
  cmd_partition->add_option("--superpoints", v_superpoints)->required();
  cmd_partition->add_option("--corr", v_corr)->required();
  cmd_partition->add_option("--out", v_out, "output directory")->required();
  cmd_partition->callback([&] {
    const ScenePrediction pred = io::decode_ovpr(slurp(v_pred));
    const SuperpointMask mask = io::decode_ovsp(slurp(v_superpoints));
    const CorrespondenceTable corr = io::decode_ov3c(slurp(v_corr));
    write_partition_artifacts(pred, mask, corr, v_out);
  });

  // --- synth -----------------------------------------------------------------------
  std::string sy_scene = "flush-object", sy_out;
  std::uint32_t sy_n = 50000, sy_views = 2, sy_h = 64, sy_w = 64;
  double sy_sigma = 0.0;
  std::uint64_t sy_seed = 0;
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic multi-view scene");
  cmd_synth->add_option("--scene", sy_scene,
                        "flush-object|box-room|two-view-seam|random-blobs");
  cmd_synth->add_option("--n", sy_n, "point count");
  cmd_synth->add_option("--views", sy_views);
  cmd_synth->add_option("--height", sy_h, "raster height");
  cmd_synth->add_option("--width", sy_w, "raster width");
  cmd_synth->add_option("--sigma", sy_sigma, "position smoothing in meters");
  cmd_synth->add_option("--seed", sy_seed);
  cmd_synth->add_option("--out", sy_out, "output directory")->required();
  cmd_synth->callback([&] {
    synth::SceneRecipe recipe;
    recipe.kind = parse_scene(sy_scene);
    recipe.point_count = sy_n;
    recipe.view_count = sy_views;
    recipe.raster_height = sy_h;
    recipe.raster_width = sy_w;
    recipe.smoothing_sigma = sy_sigma;
    recipe.seed = sy_seed;
    write_synth_bundle(synth::generate(recipe), sy_out);
  });

  // --- oracle -----------------------------------------------------------------------
  std::string o_kind;
  std::uint32_t o_trials = 50;
  std::uint64_t o_seed = 7;
  std::string o_dump = "oracle_failures";
  auto* cmd_oracle = app.add_subcommand("oracle", "compare optimized ops against naive oracles");
  cmd_oracle->add_option("kind", o_kind, "felz|pool|bilinear|vip")->required();
  cmd_oracle->add_option("--trials", o_trials);
  cmd_oracle->add_option("--seed", o_seed);
  cmd_oracle->add_option("--dump-dir", o_dump, "where mismatching instances are written");
  cmd_oracle->callback([&] {
    oracle::TrialKind kind;
    if (o_kind == "felz") kind = oracle::TrialKind::kFelzenszwalb;
    else if (o_kind == "pool") kind = oracle::TrialKind::kPool;
    else if (o_kind == "bilinear") kind = oracle::TrialKind::kBilinear;
    else if (o_kind == "vip") kind = oracle::TrialKind::kVip;
    else throw ValidationError("oracle kind must be felz, pool, bilinear or vip");
    const auto failure = oracle::run_trials(kind, o_trials, o_seed, o_dump);
    if (failure)
      throw InternalError("oracle mismatch on trial " + std::to_string(failure->trial) + ": " +
                          failure->detail + " (reproduction in " + failure->dump_dir.string() +
                          ")");
    Logger(json_log, std::cerr)
        .event("oracle_ok", {{"kind", o_kind}, {"trials", o_trials}, {"seed", o_seed}});
  });

  // --- export-ply --------------------------------------------------------------------
  std::string e_points, e_labels, e_out;
  std::uint64_t e_seed = 0;
  auto* cmd_export = app.add_subcommand("export-ply", "write a label-colored PLY");
  cmd_export->add_option("--points", e_points)->required();
  cmd_export->add_option("--labels", e_labels, ".ovsp file or text file of per-point ints")
      ->required();
  cmd_export->add_option("--seed", e_seed, "color hash seed");
  cmd_export->add_option("--out", e_out)->required();
  cmd_export->callback([&] {
    const PointCloud cloud = io::decode_ply(slurp(e_points));
    std::vector<std::int32_t> labels;
    if (e_labels.size() >= 5 && e_labels.substr(e_labels.size() - 5) == ".ovsp") {
      const SuperpointMask mask = io::decode_ovsp(slurp(e_labels));
      labels.assign(mask.point_labels.begin(), mask.point_labels.end());
    } else {
      std::ifstream in(e_labels);
      if (!in) throw ValidationError("cannot open " + e_labels);
      long long v;
      while (in >> v) labels.push_back(static_cast<std::int32_t>(v));
      if (!in.eof()) throw ValidationError("label file " + e_labels + ": malformed integer");
    }
    io::write_file(e_out, export_ply(cloud, labels, e_seed));
  });

  // --- pipeline -----------------------------------------------------------------------
  std::string pl_config;
  bool pl_force = false;
  std::string pl_points, pl_corr, pl_masks, pl_features, pl_queries, pl_text, pl_init,
      pl_origins, pl_out;
  std::string pl_cross, pl_background;
  std::uint32_t pl_k = 0, pl_min = 0;
  float pl_thresh = -1.0f;
  double pl_tau = 0.0;
  auto* cmd_pipeline = app.add_subcommand("pipeline", "run all stages with caching + manifests");
  cmd_pipeline->add_option("--config", pl_config, "JSON config file");
  cmd_pipeline->add_flag("--force", pl_force, "rerun stages even when outputs are fresh");
  cmd_pipeline->add_option("--points", pl_points);
  cmd_pipeline->add_option("--corr", pl_corr);
  cmd_pipeline->add_option("--masks", pl_masks);
  cmd_pipeline->add_option("--features", pl_features);
  cmd_pipeline->add_option("--queries", pl_queries);
  cmd_pipeline->add_option("--text", pl_text);
  cmd_pipeline->add_option("--init", pl_init);
  cmd_pipeline->add_option("--view-origins", pl_origins);
  cmd_pipeline->add_option("--out-dir", pl_out);
  auto* opt_k = cmd_pipeline->add_option("--k", pl_k);
  auto* opt_thresh = cmd_pipeline->add_option("--thresh", pl_thresh);
  auto* opt_min = cmd_pipeline->add_option("--min-size", pl_min);
  auto* opt_cross = cmd_pipeline->add_option("--cross-view", pl_cross);
  auto* opt_background = cmd_pipeline->add_option("--background", pl_background);
  auto* opt_tau = cmd_pipeline->add_option("--tau", pl_tau);
  cmd_pipeline->callback([&] {
    PipelineConfig config;
    if (!pl_config.empty()) config = PipelineConfig::from_file(pl_config);
    const auto override_str = [](const std::string& value, std::string& into) {
      if (!value.empty()) into = value;
    };
    override_str(pl_points, config.points);
    override_str(pl_corr, config.corr);
    override_str(pl_masks, config.masks);
    override_str(pl_features, config.features);
    override_str(pl_queries, config.queries);
    override_str(pl_text, config.text);
    override_str(pl_init, config.init);
    override_str(pl_origins, config.view_origins);
    override_str(pl_out, config.out_dir);
    if (opt_k->count()) config.k = pl_k;
    if (opt_thresh->count()) config.sp_thresh = pl_thresh;
    if (opt_min->count()) config.sp_min = pl_min;
    if (opt_cross->count()) config.cross_view = pl_cross;
    if (opt_background->count()) config.background = pl_background;
    if (opt_tau->count()) config.tau = pl_tau;
    if (threads != 0) config.threads = threads;
    PipelineOptions options;
    options.force = pl_force;
    run_pipeline(config, options, Logger(json_log, std::cerr));
  });

  // global flags (--threads, --json) may appear after the subcommand
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ValidationError& e) {
    Logger(json_log, std::cerr).error("validation", full_message(e));
    return 2;
  } catch (const InternalError& e) {
    Logger(json_log, std::cerr).error("internal", full_message(e));
    return 3;
  } catch (const std::exception& e) {
    Logger(json_log, std::cerr).error("internal", full_message(e));
    return 3;
  }
  return 0;
}
