// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_ORACLE_HPP
#define OVSEG3R_ORACLE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ovseg3r/graph.hpp"
#include "ovseg3r/rng.hpp"
#include "ovseg3r/types.hpp"
#include "ovseg3r/vip.hpp"

namespace ovseg3r::oracle {

// Naive reference implementations, kept deliberately independent of
// the optimized paths: plain arrays, full re-scans, scalar loops.
// Used only by tests and the `oracle` CLI.

/// Felzenszwalb by label re-scan: components are plain label arrays,
/// merging relabels every member, no forest and no path compression.
SuperpointMask felzenszwalb(std::size_t point_count, const EdgeList& edges,
                            const SegmentConfig& cfg);

FeatureMatrix pool(const FeatureMatrix& point_features, const SuperpointMask& superpoints);

FeatureMatrix bilinear(const ImageFeatureStack& stack, const CorrespondenceTable& corr);

/// Dense boolean matrix product M^sp V^p > 0 over materialized V x N.
VisibilityMasks visibility(const CorrespondenceTable& corr, const SuperpointMask& sp,
                           std::span<const std::uint32_t> init_superpoints);

std::vector<ViewPartition> partition(const ScenePrediction& pred, const VisibilityMasks& vis);

ScenePrediction decode(const FeatureMatrix& queries, const FeatureMatrix& sp_features,
                       const FeatureMatrix& text, double tau,
                       std::span<const std::uint32_t> init_superpoints);

MaskMatrix feasibility(const MaskMatrix& gt_masks,
                       std::span<const std::uint32_t> init_superpoints);

// --- random instance generators -----------------------------------------------

struct RandomGraph {
  std::uint32_t point_count = 0;
  EdgeList edges;
};
RandomGraph random_graph(Rng& rng, std::uint32_t max_points, std::uint32_t max_edges);
FeatureMatrix random_matrix(Rng& rng, std::uint32_t rows, std::uint32_t cols, double lo, double hi);
SuperpointMask random_superpoints(Rng& rng, std::uint32_t point_count,
                                  std::uint32_t superpoint_count);
CorrespondenceTable random_corr(Rng& rng, std::uint32_t point_count, std::uint32_t views,
                                std::uint32_t height, std::uint32_t width);
ImageFeatureStack random_stack(Rng& rng, std::uint32_t views, std::uint32_t height,
                               std::uint32_t width, std::uint32_t channels);
ScenePrediction random_prediction(Rng& rng, std::uint32_t queries, std::uint32_t superpoints);

// --- trial harness -------------------------------------------------------------

enum class TrialKind { kFelzenszwalb, kPool, kBilinear, kVip };

struct TrialFailure {
  std::uint32_t trial = 0;
  std::string detail;
  std::filesystem::path dump_dir; // reproduction written here
};

/// Runs seeded randomized comparisons of the optimized operations
/// against these oracles. On the first mismatch the instance is dumped
/// under dump_root (Felzenszwalb instances are shrunk edge-by-edge
/// first) and the failure is returned.
std::optional<TrialFailure> run_trials(TrialKind kind, std::uint32_t trials, std::uint64_t seed,
                                       const std::filesystem::path& dump_root);

} // namespace ovseg3r::oracle

#endif // OVSEG3R_ORACLE_HPP
