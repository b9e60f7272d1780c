// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/graph.hpp"

#include <algorithm>

#include "ovseg3r/parallel.hpp"

namespace ovseg3r {

namespace {

float edge_weight(const Vec3f& a, const Vec3f& b) {
  // Term order is symmetric in (a,b), so both directions of an edge
  // produce bit-identical weights and dedupe exactly.
  const double dot = static_cast<double>(a[0]) * b[0] + static_cast<double>(a[1]) * b[1] +
                     static_cast<double>(a[2]) * b[2];
  const double w = 1.0 - dot;
  return static_cast<float>(std::clamp(w, 0.0, 2.0));
}

EdgeList sorted_unique(std::vector<EdgeList::Edge> candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const EdgeList::Edge& a, const EdgeList::Edge& b) {
              return a.i < b.i || (a.i == b.i && a.j < b.j);
            });
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const EdgeList::Edge& a, const EdgeList::Edge& b) {
                                 return a.i == b.i && a.j == b.j;
                               }),
                   candidates.end());
  EdgeList list;
  list.edges = std::move(candidates);
  return list;
}

template <typename EmitTest>
EdgeList build_graph(const PointCloud& points, const NormalField& normals, const KnnIndex& index,
                     int threads, EmitTest&& passes) {
  const std::size_t n = points.size();
  if (normals.size() != n)
    throw ValidationError("graph: normal count does not match point count");
  if (index.size() != n)
    throw ValidationError("graph: index was built over a different cloud");

  // Chunked candidate collection: chunk order is ascending and each
  // chunk is filled independently, so the merged list does not depend
  // on the thread count.
  const int t = resolve_threads(threads);
  const std::size_t chunk_count = std::max<std::size_t>(1, static_cast<std::size_t>(t));
  const std::size_t chunk = (n + chunk_count - 1) / chunk_count;
  std::vector<std::vector<EdgeList::Edge>> partial(chunk_count);

  parallel_for(chunk_count, threads, [&](std::size_t cb, std::size_t ce) {
    std::vector<std::uint32_t> neighbors;
    for (std::size_t c = cb; c < ce; ++c) {
      const std::size_t begin = c * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      auto& out = partial[c];
      out.reserve((end - begin) * index.k());
      for (std::size_t i = begin; i < end; ++i) {
        index.query(static_cast<std::uint32_t>(i), neighbors);
        for (std::uint32_t j : neighbors) {
          const std::uint32_t a = std::min<std::uint32_t>(i, j);
          const std::uint32_t b = std::max<std::uint32_t>(i, j);
          if (!passes(a, b)) continue;
          out.push_back({a, b, edge_weight(normals.normals[a], normals.normals[b])});
        }
      }
    }
  });

  std::size_t total = 0;
  for (const auto& p : partial) total += p.size();
  std::vector<EdgeList::Edge> candidates;
  candidates.reserve(total);
  for (auto& p : partial) {
    candidates.insert(candidates.end(), p.begin(), p.end());
    p.clear();
    p.shrink_to_fit();
  }
  return sorted_unique(std::move(candidates));
}

} // namespace

EdgeList build_boundary_aware_graph(const PointCloud& points, const NormalField& normals,
                                    const KnnIndex& index, const CorrespondenceTable& corr,
                                    const InstanceRaster& raster, const SegmentConfig& cfg,
                                    int threads) {
  cfg.validate();
  if (corr.point_count() != points.size())
    throw ValidationError("graph: correspondence count does not match point count");
  if (corr.view_count() != raster.views)
    throw ValidationError("graph: correspondence/raster mismatch: view counts differ");
  for (const auto& d : corr.view_dims)
    if (d.height != raster.height || d.width != raster.width)
      throw ValidationError("graph: correspondence/raster mismatch: view dims differ");

  // Per-point view and instance id, resolved once.
  const std::size_t n = points.size();
  std::vector<std::uint32_t> view_of(n);
  std::vector<std::int32_t> id_of(n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = corr.entries[i];
      view_of[i] = e.view;
      id_of[i] = raster.at_nearest(e);
    }
  });

  const bool prune_background = cfg.background == BackgroundPolicy::kPrune;
  const bool keep_cross_view = cfg.cross_view == CrossViewPolicy::kKeep;
  return build_graph(points, normals, index, threads,
                     [&](std::uint32_t a, std::uint32_t b) {
                       if (prune_background && (id_of[a] == -1 || id_of[b] == -1)) return false;
                       if (view_of[a] != view_of[b]) return keep_cross_view;
                       return id_of[a] == id_of[b];
                     });
}

EdgeList build_geometry_graph(const PointCloud& points, const NormalField& normals,
                              const KnnIndex& index, int threads) {
  return build_graph(points, normals, index, threads,
                     [](std::uint32_t, std::uint32_t) { return true; });
}

} // namespace ovseg3r
