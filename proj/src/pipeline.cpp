// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "ovseg3r/codec.hpp"
#include "ovseg3r/felzenszwalb.hpp"
#include "ovseg3r/hash.hpp"
#include "ovseg3r/lifting.hpp"
#include "ovseg3r/normals.hpp"
#include "ovseg3r/vip.hpp"

namespace ovseg3r {

namespace fs = std::filesystem;
using nlohmann::json;

void Logger::event(const std::string& name, nlohmann::json fields) const {
  if (json_) {
    fields["event"] = name;
    *out_ << fields.dump() << "\n";
  } else {
    *out_ << name;
    for (const auto& [key, value] : fields.items())
      *out_ << " " << key << "=" << (value.is_string() ? value.get<std::string>() : value.dump());
    *out_ << "\n";
  }
  out_->flush();
}

void Logger::error(const std::string& kind, const std::string& message) const {
  if (json_) {
    *out_ << nlohmann::json{{"event", "error"}, {"error", kind}, {"message", message}}.dump()
          << "\n";
  } else {
    *out_ << "error: " << message << "\n";
    (void)kind;
  }
  out_->flush();
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config: document must be a JSON object");
  PipelineConfig c;
  const auto str = [&](const char* key, std::string& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
  };
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"points",  "corr",       "masks",      "features", "queries",
                                  "text",    "init",       "view_origins", "out_dir",
                                  "k",       "sp_thresh",  "sp_min",     "cross_view",
                                  "background", "tau",     "T",          "seed",     "threads"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("config: unknown key \"" + key + "\"");
    (void)value;
  }
  try {
    str("points", c.points);
    str("corr", c.corr);
    str("masks", c.masks);
    str("features", c.features);
    str("queries", c.queries);
    str("text", c.text);
    str("init", c.init);
    str("view_origins", c.view_origins);
    str("out_dir", c.out_dir);
    if (j.contains("k")) c.k = j.at("k").get<std::uint32_t>();
    if (j.contains("sp_thresh")) c.sp_thresh = j.at("sp_thresh").get<float>();
    if (j.contains("sp_min")) c.sp_min = j.at("sp_min").get<std::uint32_t>();
    if (j.contains("cross_view")) c.cross_view = j.at("cross_view").get<std::string>();
    if (j.contains("background")) c.background = j.at("background").get<std::string>();
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("T")) c.prompt_size = j.at("T").get<std::uint32_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config: " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

json PipelineConfig::to_json() const {
  return json{{"points", points},
              {"corr", corr},
              {"masks", masks},
              {"features", features},
              {"queries", queries},
              {"text", text},
              {"init", init},
              {"view_origins", view_origins},
              {"out_dir", out_dir},
              {"k", k},
              {"sp_thresh", sp_thresh},
              {"sp_min", sp_min},
              {"cross_view", cross_view},
              {"background", background},
              {"tau", tau},
              {"T", prompt_size},
              {"seed", seed},
              {"threads", threads}};
}

CrossViewPolicy parse_cross_view(const std::string& name) {
  if (name == "prune") return CrossViewPolicy::kPrune;
  if (name == "keep") return CrossViewPolicy::kKeep;
  throw ValidationError("cross-view policy must be prune or keep, got \"" + name + "\"");
}

BackgroundPolicy parse_background(const std::string& name) {
  if (name == "label") return BackgroundPolicy::kLabel;
  if (name == "prune") return BackgroundPolicy::kPrune;
  throw ValidationError("background policy must be label or prune, got \"" + name + "\"");
}

SegmentConfig PipelineConfig::segment_config() const {
  SegmentConfig cfg;
  cfg.sp_thresh = sp_thresh;
  cfg.sp_min = sp_min;
  cfg.cross_view = parse_cross_view(cross_view);
  cfg.background = parse_background(background);
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  segment_config();
  if (k < 1) throw ValidationError("config: k must be at least 1");
  if (points.empty() || corr.empty() || masks.empty())
    throw ValidationError("config: points, corr and masks are required");
  if (out_dir.empty()) throw ValidationError("config: out_dir is required");
  const bool decode_partial = !queries.empty() || !text.empty() || !init.empty();
  const bool decode_full = !queries.empty() && !text.empty() && !init.empty();
  if (decode_partial && !decode_full)
    throw ValidationError("config: queries, text and init must be given together");
  if (decode_full && features.empty())
    throw ValidationError("config: decode needs features for superpoint pooling");
}

// --- pipeline ---------------------------------------------------------------------

namespace {

std::string file_hash(const fs::path& path) {
  return hex64(fnv1a64(io::read_file(path)));
}

struct Stage {
  std::string name;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  json config = json::object();
};

bool outputs_fresh(const Stage& stage) {
  fs::file_time_type newest_input = fs::file_time_type::min();
  for (const auto& in : stage.inputs) {
    if (!fs::exists(in)) return false;
    newest_input = std::max(newest_input, fs::last_write_time(in));
  }
  for (const auto& out : stage.outputs) {
    if (!fs::exists(out)) return false;
    if (fs::last_write_time(out) < newest_input) return false;
  }
  return true;
}

void write_manifest(const fs::path& out_dir, const Stage& stage) {
  // Paths under out_dir are recorded relative to it, so reruns into a
  // different directory produce byte-identical manifests.
  const auto display = [&](const fs::path& path) {
    const auto relative = fs::relative(path, out_dir);
    if (!relative.empty() && relative.native().rfind("..", 0) != 0) return relative.string();
    return path.string();
  };
  json manifest;
  manifest["stage"] = stage.name;
  manifest["tool"] = kToolVersion;
  manifest["config"] = stage.config;
  json inputs = json::array();
  for (const auto& in : stage.inputs)
    inputs.push_back({{"path", display(in)}, {"fnv1a64", file_hash(in)}});
  json outputs = json::array();
  for (const auto& out : stage.outputs)
    outputs.push_back({{"path", display(out)}, {"fnv1a64", file_hash(out)}});
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  const std::string text = manifest.dump(2) + "\n";
  io::write_file(out_dir / (stage.name + ".manifest.json"),
                 {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

template <typename Run>
void run_stage(Stage& stage, const PipelineOptions& options, const Logger& log,
               const fs::path& out_dir, Run&& run) {
  if (!options.force && outputs_fresh(stage) &&
      fs::exists(out_dir / (stage.name + ".manifest.json"))) {
    log.event("stage_skipped", {{"stage", stage.name}});
    return;
  }
  try {
    run();
  } catch (...) {
    // write_file is atomic, so outputs are either absent or complete;
    // drop anything this stage had already finished plus its manifest.
    for (const auto& out : stage.outputs) fs::remove(out);
    fs::remove(out_dir / (stage.name + ".manifest.json"));
    std::throw_with_nested(ValidationError("stage " + stage.name + " failed"));
  }
  write_manifest(out_dir, stage);
  log.event("stage_done", {{"stage", stage.name}});
}

std::vector<std::uint32_t> read_init_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::uint32_t> init;
  long long value = 0;
  while (in >> value) {
    if (value < 0) throw ValidationError("init file: negative index");
    init.push_back(static_cast<std::uint32_t>(value));
  }
  if (!in.eof()) throw ValidationError("init file: malformed integer in " + path.string());
  return init;
}

json annotations_to_json(const std::vector<ViewAnnotation>& annotations) {
  json out = json::array();
  for (const auto& ann : annotations) {
    json rec;
    rec["view"] = ann.view_index;
    rec["points"] = ann.point_indices;
    rec["ids"] = ann.instance_ids;
    out.push_back(std::move(rec));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

} // namespace

void run_pipeline(const PipelineConfig& config, const PipelineOptions& options,
                  const Logger& log) {
  config.validate();
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);
  const SegmentConfig seg_cfg = config.segment_config();

  const fs::path normals_path = out_dir / "normals.ovfm";
  const fs::path edges_path = out_dir / "edges.oveg";
  const fs::path superpoints_path = out_dir / "superpoints.ovsp";
  const fs::path annotations_path = out_dir / "annotations.json";
  const fs::path point_features_path = out_dir / "point_features.ovfm";
  const fs::path sp_features_path = out_dir / "superpoint_features.ovfm";
  const fs::path prediction_path = out_dir / "prediction.ovpr";
  const fs::path parts_dir = out_dir / "parts";

  // Lazily decoded shared inputs.
  PointCloud cloud;
  CorrespondenceTable corr;
  bool corr_loaded = false;
  const auto load_cloud = [&] {
    if (cloud.positions.empty()) cloud = io::decode_ply(io::read_file(config.points));
  };
  const auto load_corr = [&] {
    if (!corr_loaded) {
      corr = io::decode_ov3c(io::read_file(config.corr));
      corr_loaded = true;
    }
  };

  // normals
  {
    Stage stage{"normals", {config.points}, {normals_path}, {{"k", config.k}}};
    if (!config.view_origins.empty()) {
      stage.inputs.push_back(config.view_origins);
      stage.inputs.push_back(config.corr);
      stage.config["view_origins"] = true;
    }
    run_stage(stage, options, log, out_dir, [&] {
      load_cloud();
      const KnnIndex index = build_knn_index(cloud, config.k);
      std::vector<Vec3f> origins;
      const std::vector<Vec3f>* origins_ptr = nullptr;
      if (!config.view_origins.empty()) {
        load_corr();
        const FeatureMatrix views = io::decode_ovfm(io::read_file(config.view_origins));
        origins = expand_view_origins(views, corr);
        origins_ptr = &origins;
      }
      const NormalField normals = estimate_normals(cloud, index, origins_ptr, config.threads);
      io::write_file(normals_path, io::encode_ovfm(normals_matrix(normals)));
    });
  }

  // graph
  {
    Stage stage{"graph",
                {config.points, normals_path, config.corr, config.masks},
                {edges_path},
                {{"k", config.k},
                 {"cross_view", config.cross_view},
                 {"background", config.background}}};
    run_stage(stage, options, log, out_dir, [&] {
      load_cloud();
      load_corr();
      const FeatureMatrix normals_matrix = io::decode_ovfm(io::read_file(normals_path));
      if (normals_matrix.cols != 3 || normals_matrix.rows != cloud.size())
        throw ValidationError("normals artifact does not match the point cloud");
      NormalField normals;
      normals.normals.resize(normals_matrix.rows);
      normals.degenerate.assign(normals_matrix.rows, 0);
      for (std::uint32_t i = 0; i < normals_matrix.rows; ++i)
        normals.normals[i] = {normals_matrix.at(i, 0), normals_matrix.at(i, 1),
                              normals_matrix.at(i, 2)};
      const auto raster = io::decode_ov2m(io::read_file(config.masks));
      if (raster.relabeled) log.event("raster_relabeled", {{"path", config.masks}});
      const KnnIndex index = build_knn_index(cloud, config.k);
      const EdgeList edges = build_boundary_aware_graph(cloud, normals, index, corr,
                                                        raster.raster, seg_cfg, config.threads);
      io::write_file(edges_path, io::encode_oveg(edges));
    });
  }

  // segment
  {
    Stage stage{"segment",
                {config.points, edges_path},
                {superpoints_path},
                {{"sp_thresh", config.sp_thresh}, {"sp_min", config.sp_min}}};
    run_stage(stage, options, log, out_dir, [&] {
      load_cloud();
      const EdgeList edges = io::decode_oveg(io::read_file(edges_path));
      const SuperpointMask mask = felzenszwalb_segment(cloud.size(), edges, seg_cfg);
      io::write_file(superpoints_path, io::encode_ovsp(mask));
    });
  }

  // lift
  {
    Stage stage{"lift", {config.masks, config.corr}, {annotations_path}, json::object()};
    run_stage(stage, options, log, out_dir, [&] {
      load_corr();
      const auto raster = io::decode_ov2m(io::read_file(config.masks));
      const auto annotations = lift_masks(raster.raster, corr);
      write_text(annotations_path, annotations_to_json(annotations).dump(2) + "\n");
    });
  }

  // sample-features + pool
  if (!config.features.empty()) {
    {
      Stage stage{"sample-features", {config.features, config.corr}, {point_features_path},
                  json::object()};
      run_stage(stage, options, log, out_dir, [&] {
        load_corr();
        const ImageFeatureStack stack = io::decode_ovif(io::read_file(config.features));
        const FeatureMatrix features = sample_point_features(stack, corr, config.threads);
        io::write_file(point_features_path, io::encode_ovfm(features));
      });
    }
    {
      Stage stage{"pool", {point_features_path, superpoints_path}, {sp_features_path},
                  json::object()};
      run_stage(stage, options, log, out_dir, [&] {
        const FeatureMatrix features = io::decode_ovfm(io::read_file(point_features_path));
        const SuperpointMask mask = io::decode_ovsp(io::read_file(superpoints_path));
        io::write_file(sp_features_path,
                       io::encode_ovfm(pool_superpoint_features(features, mask, config.threads)));
      });
    }
  }

  // decode + partition
  if (!config.queries.empty()) {
    {
      Stage stage{"decode",
                  {config.queries, sp_features_path, config.text, config.init},
                  {prediction_path},
                  {{"tau", config.tau}}};
      run_stage(stage, options, log, out_dir, [&] {
        const FeatureMatrix queries = io::decode_ovfm(io::read_file(config.queries));
        const FeatureMatrix sp_features = io::decode_ovfm(io::read_file(sp_features_path));
        const FeatureMatrix text = io::decode_ovfm(io::read_file(config.text));
        const auto init = read_init_file(config.init);
        const ScenePrediction pred =
            decode_predictions(queries, sp_features, text, config.tau, init, config.threads);
        io::write_file(prediction_path, io::encode_ovpr(pred));
      });
    }
    {
      Stage stage{"partition",
                  {prediction_path, superpoints_path, config.corr},
                  {parts_dir / "index.json"},
                  json::object()};
      run_stage(stage, options, log, out_dir, [&] {
        load_corr();
        const ScenePrediction pred = io::decode_ovpr(io::read_file(prediction_path));
        const SuperpointMask mask = io::decode_ovsp(io::read_file(superpoints_path));
        for (const auto& written : write_partition_artifacts(pred, mask, corr, parts_dir))
          if (written.filename() != "index.json") stage.outputs.push_back(written);
      });
    }
  }

  log.event("pipeline_done", {{"out_dir", config.out_dir}});
}

io::Rgb label_color(std::int32_t label, std::uint64_t seed) {
  if (label < 0) return {128, 128, 128};
  const std::uint64_t h = splitmix64(seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(label) + 1);
  // Spread across hue, keep saturation and value high so labels stay apart.
  const double hue = (h & 0xffff) / 65536.0 * 6.0;
  const double sat = 0.55 + ((h >> 16) & 0xff) / 255.0 * 0.45;
  const double val = 0.7 + ((h >> 24) & 0xff) / 255.0 * 0.3;
  const int sector = static_cast<int>(hue);
  const double f = hue - sector;
  const double p = val * (1 - sat);
  const double q = val * (1 - sat * f);
  const double t = val * (1 - sat * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (sector % 6) {
    case 0: r = val; g = t; b = p; break;
    case 1: r = q; g = val; b = p; break;
    case 2: r = p; g = val; b = t; break;
    case 3: r = p; g = q; b = val; break;
    case 4: r = t; g = p; b = val; break;
    case 5: r = val; g = p; b = q; break;
  }
  return {static_cast<std::uint8_t>(r * 255.0 + 0.5), static_cast<std::uint8_t>(g * 255.0 + 0.5),
          static_cast<std::uint8_t>(b * 255.0 + 0.5)};
}

std::vector<std::uint8_t> export_ply(const PointCloud& cloud,
                                     const std::vector<std::int32_t>& labels,
                                     std::uint64_t seed) {
  if (labels.size() != cloud.size())
    throw ValidationError("export_ply: label count does not match point count");
  std::vector<io::Rgb> colors(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) colors[i] = label_color(labels[i], seed);
  return io::encode_ply_colored(cloud, colors);
}

FeatureMatrix normals_matrix(const NormalField& field) {
  FeatureMatrix out = FeatureMatrix::zeros(static_cast<std::uint32_t>(field.size()), 3);
  for (std::uint32_t i = 0; i < field.size(); ++i) {
    out.at(i, 0) = field.normals[i][0];
    out.at(i, 1) = field.normals[i][1];
    out.at(i, 2) = field.normals[i][2];
  }
  return out;
}

std::vector<Vec3f> expand_view_origins(const FeatureMatrix& per_view,
                                       const CorrespondenceTable& corr) {
  if (per_view.cols != 3 || per_view.rows != corr.view_count())
    throw ValidationError("view origins must be V x 3 for the correspondence views");
  std::vector<Vec3f> origins(corr.point_count());
  for (std::size_t i = 0; i < corr.point_count(); ++i) {
    const float* row = per_view.row(corr.entries[i].view);
    origins[i] = {row[0], row[1], row[2]};
  }
  return origins;
}

std::vector<fs::path> write_partition_artifacts(const ScenePrediction& pred,
                                                const SuperpointMask& superpoints,
                                                const CorrespondenceTable& corr,
                                                const fs::path& parts_dir) {
  fs::create_directories(parts_dir);
  const VisibilityMasks vis = compute_visibility(corr, superpoints, pred.init_superpoints);
  const auto parts = partition_predictions(pred, vis);

  std::vector<fs::path> written;
  json index = json::array();
  for (const auto& part : parts) {
    ScenePrediction view_pred;
    view_pred.superpoint_count = static_cast<std::uint32_t>(part.superpoint_cols.size());
    view_pred.masks = part.masks.data;
    view_pred.classes = part.classes;
    for (std::uint32_t row : part.query_rows) {
      const std::uint32_t global_sp = pred.init_superpoints[row];
      const auto it = std::lower_bound(part.superpoint_cols.begin(), part.superpoint_cols.end(),
                                       global_sp);
      view_pred.init_superpoints.push_back(
          static_cast<std::uint32_t>(it - part.superpoint_cols.begin()));
    }
    char name[32];
    std::snprintf(name, sizeof name, "view_%03u.ovpr", part.view_index);
    if (view_pred.superpoint_count > 0) {
      io::write_file(parts_dir / name, io::encode_ovpr(view_pred));
      written.push_back(parts_dir / name);
    }
    index.push_back({{"view", part.view_index},
                     {"file", view_pred.superpoint_count > 0 ? name : ""},
                     {"query_rows", part.query_rows},
                     {"superpoint_cols", part.superpoint_cols}});
  }
  write_text(parts_dir / "index.json", index.dump(2) + "\n");
  written.push_back(parts_dir / "index.json");
  return written;
}

} // namespace ovseg3r
