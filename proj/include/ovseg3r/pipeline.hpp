// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_PIPELINE_HPP
#define OVSEG3R_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovseg3r/graph.hpp"
#include "ovseg3r/ply.hpp"
#include "ovseg3r/types.hpp"

namespace ovseg3r {

inline constexpr const char* kToolVersion = "ovseg3r 0.1.0";

/// Human or line-delimited-JSON event log.
class Logger {
public:
  Logger(bool json, std::ostream& out) : json_(json), out_(&out) {}

  void event(const std::string& name, nlohmann::json fields = nlohmann::json::object()) const;
  void error(const std::string& kind, const std::string& message) const;

private:
  bool json_;
  std::ostream* out_;
};

/// Pipeline settings, loadable from a JSON document. Unknown keys are
/// rejected; CLI flags override file values.
struct PipelineConfig {
  // io paths; empty = stage not requested
  std::string points;
  std::string corr;
  std::string masks;
  std::string features;     // OVIF; enables sample-features + pool
  std::string queries;      // OVFM; with text + init enables decode + partition
  std::string text;         // OVFM
  std::string init;         // text file of init superpoint indices
  std::string view_origins; // OVFM V x 3; orients normals
  std::string out_dir;

  std::uint32_t k = 16;
  float sp_thresh = 0.1f;
  std::uint32_t sp_min = 25;
  std::string cross_view = "prune";
  std::string background = "label";
  double tau = 0.0;
  std::uint32_t prompt_size = 8;
  std::uint64_t seed = 0;
  int threads = 0;

  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  SegmentConfig segment_config() const;
  void validate() const;
};

CrossViewPolicy parse_cross_view(const std::string& name);
BackgroundPolicy parse_background(const std::string& name);

struct PipelineOptions {
  bool force = false;
};

/// normals -> graph -> segment -> lift -> sample-features -> pool ->
/// decode -> partition, each stage writing its artifact plus a
/// manifest with config and input/output hashes. Stages are skipped
/// when their outputs are newer than their inputs, unless forced.
/// Later stages run only when their optional inputs are configured.
void run_pipeline(const PipelineConfig& config, const PipelineOptions& options,
                  const Logger& log);

/// Deterministic label colors: seeded hash per label, -1 renders gray.
io::Rgb label_color(std::int32_t label, std::uint64_t seed);
std::vector<std::uint8_t> export_ply(const PointCloud& cloud,
                                     const std::vector<std::int32_t>& labels,
                                     std::uint64_t seed);

/// N x 3 matrix view of a normal field, as emitted to OVFM.
FeatureMatrix normals_matrix(const struct NormalField& field);

/// Per-point origins from a V x 3 per-view origin matrix.
std::vector<Vec3f> expand_view_origins(const FeatureMatrix& per_view,
                                       const CorrespondenceTable& corr);

/// Per-view OVPR files plus index.json under parts_dir. Init indices in
/// a view file are positions within that view's superpoint column list.
/// Returns the paths written.
std::vector<std::filesystem::path> write_partition_artifacts(
    const ScenePrediction& pred, const SuperpointMask& superpoints,
    const CorrespondenceTable& corr, const std::filesystem::path& parts_dir);

} // namespace ovseg3r

#endif // OVSEG3R_PIPELINE_HPP
