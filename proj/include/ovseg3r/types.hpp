// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_TYPES_HPP
#define OVSEG3R_TYPES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovseg3r {

/// Input or file-content violation. The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant (a bug, not bad input). CLI exit code 3.
class InternalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Vec3f = std::array<float, 3>;

inline bool finite(const Vec3f& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

/// Reconstructed scene geometry. Positions are meters in an arbitrary
/// world frame, stored as f32.
struct PointCloud {
  std::vector<Vec3f> positions;

  std::size_t size() const { return positions.size(); }

  void validate() const {
    if (positions.empty())
      throw ValidationError("PointCloud: must contain at least one point");
    for (std::size_t i = 0; i < positions.size(); ++i)
      if (!finite(positions[i]))
        throw ValidationError("PointCloud: non-finite coordinate at point " + std::to_string(i));
  }
};

struct ViewDims {
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  bool operator==(const ViewDims&) const = default;
};

/// Per-point record of the view and normalized pixel the point was
/// reconstructed from. The forward map point->(view,x,y) is total; the
/// inverse map is recovered by grouping entries by view.
struct CorrespondenceTable {
  struct Entry {
    std::uint32_t view = 0;
    float x = 0.0f;  // in [0,1], along width
    float y = 0.0f;  // in [0,1], along height

    bool operator==(const Entry&) const = default;
  };

  std::vector<Entry> entries;      // exactly one per point index
  std::vector<ViewDims> view_dims; // size V

  std::size_t point_count() const { return entries.size(); }
  std::uint32_t view_count() const { return static_cast<std::uint32_t>(view_dims.size()); }

  /// Inverse map: for each view, the ascending point indices reconstructed from it.
  std::vector<std::vector<std::uint32_t>> points_by_view() const {
    std::vector<std::vector<std::uint32_t>> by_view(view_dims.size());
    for (std::size_t i = 0; i < entries.size(); ++i)
      by_view[entries[i].view].push_back(static_cast<std::uint32_t>(i));
    return by_view;
  }

  void validate() const {
    if (entries.empty())
      throw ValidationError("CorrespondenceTable: must contain at least one record");
    if (view_dims.empty())
      throw ValidationError("CorrespondenceTable: view count must be positive");
    for (const auto& d : view_dims)
      if (d.height == 0 || d.width == 0)
        throw ValidationError("CorrespondenceTable: view dims must be positive");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Entry& e = entries[i];
      if (e.view >= view_dims.size())
        throw ValidationError("CorrespondenceTable: view index out of range at point " +
                              std::to_string(i));
      if (!(e.x >= 0.0f && e.x <= 1.0f && e.y >= 0.0f && e.y <= 1.0f))
        throw ValidationError("CorrespondenceTable: coordinates outside [0,1] at point " +
                              std::to_string(i));
    }
  }
};

/// Nearest raster pixel for a normalized coordinate. Instance ids are
/// categorical, so lookups snap rather than interpolate.
inline std::uint32_t nearest_pixel(float coord, std::uint32_t extent) {
  const float scaled = coord * static_cast<float>(extent - 1);
  long p = std::lround(scaled);
  if (p < 0) p = 0;
  if (p >= static_cast<long>(extent)) p = static_cast<long>(extent) - 1;
  return static_cast<std::uint32_t>(p);
}

/// Per-view integer id image. -1 marks background; ids >= 0 are
/// view-local instance ids, contiguous from 0 within each view.
struct InstanceRaster {
  std::uint32_t views = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::int32_t> labels; // views*height*width, view-major then row-major

  std::int32_t at(std::uint32_t v, std::uint32_t y, std::uint32_t x) const {
    return labels[(static_cast<std::size_t>(v) * height + y) * width + x];
  }
  std::int32_t& at(std::uint32_t v, std::uint32_t y, std::uint32_t x) {
    return labels[(static_cast<std::size_t>(v) * height + y) * width + x];
  }

  /// Raster value at the pixel nearest to a correspondence entry.
  std::int32_t at_nearest(const CorrespondenceTable::Entry& e) const {
    return at(e.view, nearest_pixel(e.y, height), nearest_pixel(e.x, width));
  }

  void validate() const {
    if (views == 0 || height == 0 || width == 0)
      throw ValidationError("InstanceRaster: dims must be positive");
    if (labels.size() != static_cast<std::size_t>(views) * height * width)
      throw ValidationError("InstanceRaster: label count does not match dims");
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < -1)
        throw ValidationError("InstanceRaster: id below -1 at cell " + std::to_string(i));
  }
};

/// Dense row-major real matrix. Carries point features, superpoint
/// features, query features and text features alike.
struct FeatureMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;

  static FeatureMatrix zeros(std::uint32_t r, std::uint32_t c) {
    FeatureMatrix m;
    m.rows = r;
    m.cols = c;
    m.data.assign(static_cast<std::size_t>(r) * c, 0.0f);
    return m;
  }

  float at(std::uint32_t r, std::uint32_t c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  float& at(std::uint32_t r, std::uint32_t c) {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  const float* row(std::uint32_t r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  float* row(std::uint32_t r) { return data.data() + static_cast<std::size_t>(r) * cols; }

  bool operator==(const FeatureMatrix&) const = default;

  void validate() const {
    if (data.size() != static_cast<std::size_t>(rows) * cols)
      throw ValidationError("FeatureMatrix: data size does not match dims");
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!std::isfinite(data[i]))
        throw ValidationError("FeatureMatrix: non-finite entry at index " + std::to_string(i));
  }
};

/// V x h x w x C stack of per-view image feature maps.
struct ImageFeatureStack {
  std::uint32_t views = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> data; // view-major, then rows, then cols, then channels

  const float* at(std::uint32_t v, std::uint32_t y, std::uint32_t x) const {
    return data.data() +
           ((static_cast<std::size_t>(v) * height + y) * width + x) * channels;
  }

  void validate() const {
    if (views == 0 || height == 0 || width == 0 || channels == 0)
      throw ValidationError("ImageFeatureStack: dims must be positive");
    if (data.size() != static_cast<std::size_t>(views) * height * width * channels)
      throw ValidationError("ImageFeatureStack: data size does not match dims");
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!std::isfinite(data[i]))
        throw ValidationError("ImageFeatureStack: non-finite entry at index " + std::to_string(i));
  }
};

/// Partition of N points into n superpoints, one label per point.
/// Labels are contiguous from 0 and every label is used.
struct SuperpointMask {
  std::vector<std::uint32_t> point_labels;
  std::uint32_t superpoint_count = 0;

  std::size_t point_count() const { return point_labels.size(); }

  bool operator==(const SuperpointMask&) const = default;

  /// Member point indices per superpoint, ascending within each group.
  std::vector<std::vector<std::uint32_t>> members() const {
    std::vector<std::vector<std::uint32_t>> groups(superpoint_count);
    for (std::size_t i = 0; i < point_labels.size(); ++i)
      groups[point_labels[i]].push_back(static_cast<std::uint32_t>(i));
    return groups;
  }

  void validate() const {
    if (point_labels.empty())
      throw ValidationError("SuperpointMask: must cover at least one point");
    if (superpoint_count == 0)
      throw ValidationError("SuperpointMask: superpoint count must be positive");
    std::vector<bool> used(superpoint_count, false);
    for (std::size_t i = 0; i < point_labels.size(); ++i) {
      if (point_labels[i] >= superpoint_count)
        throw ValidationError("SuperpointMask: label out of range at point " + std::to_string(i));
      used[point_labels[i]] = true;
    }
    for (std::uint32_t k = 0; k < superpoint_count; ++k)
      if (!used[k])
        throw ValidationError("SuperpointMask: label " + std::to_string(k) + " unused");
  }
};

/// Weighted undirected edges over point indices, stored with i < j and
/// no duplicates. Weights are 1 - dot of unit normals, hence in [0,2].
struct EdgeList {
  struct Edge {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    float w = 0.0f;

    bool operator==(const Edge&) const = default;
  };

  std::vector<Edge> edges;

  std::size_t size() const { return edges.size(); }

  bool operator==(const EdgeList&) const = default;

  void validate() const {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const Edge& ed = edges[e];
      if (ed.i >= ed.j)
        throw ValidationError("EdgeList: endpoints must satisfy i < j at edge " + std::to_string(e));
      if (!(ed.w >= 0.0f && ed.w <= 2.0f))
        throw ValidationError("EdgeList: weight outside [0,2] at edge " + std::to_string(e));
    }
    std::vector<std::uint64_t> keys(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e)
      keys[e] = (static_cast<std::uint64_t>(edges[e].i) << 32) | edges[e].j;
    if (!std::is_sorted(keys.begin(), keys.end())) std::sort(keys.begin(), keys.end());
    for (std::size_t e = 1; e < keys.size(); ++e)
      if (keys[e] == keys[e - 1])
        throw ValidationError("EdgeList: duplicate edge (" + std::to_string(keys[e] >> 32) + "," +
                              std::to_string(keys[e] & 0xffffffffu) + ")");
  }
};

/// q decoded query records: a boolean mask over n superpoints, a class
/// index, and the superpoint that initialized the query.
struct ScenePrediction {
  std::uint32_t superpoint_count = 0;           // n
  std::vector<std::uint8_t> masks;              // q*n, row-major, 0/1
  std::vector<std::int32_t> classes;            // q
  std::vector<std::uint32_t> init_superpoints;  // q, pairwise distinct

  std::uint32_t query_count() const { return static_cast<std::uint32_t>(classes.size()); }

  bool mask_at(std::uint32_t query, std::uint32_t superpoint) const {
    return masks[static_cast<std::size_t>(query) * superpoint_count + superpoint] != 0;
  }

  bool operator==(const ScenePrediction&) const = default;

  void validate() const {
    const std::size_t q = classes.size();
    if (init_superpoints.size() != q)
      throw ValidationError("ScenePrediction: classes/init length mismatch");
    if (masks.size() != q * superpoint_count)
      throw ValidationError("ScenePrediction: mask size does not match q*n");
    for (std::size_t i = 0; i < masks.size(); ++i)
      if (masks[i] > 1)
        throw ValidationError("ScenePrediction: mask cell not 0/1 at index " + std::to_string(i));
    for (std::size_t a = 0; a < q; ++a) {
      if (classes[a] < 0)
        throw ValidationError("ScenePrediction: negative class at query " + std::to_string(a));
      if (init_superpoints[a] >= superpoint_count)
        throw ValidationError("ScenePrediction: init superpoint out of range at query " +
                              std::to_string(a));
    }
    std::vector<std::uint32_t> sorted(init_superpoints);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t a = 1; a < sorted.size(); ++a)
      if (sorted[a] == sorted[a - 1])
        throw ValidationError("ScenePrediction: duplicate init superpoint " +
                              std::to_string(sorted[a]));
  }
};

/// The points of one view, each tagged with the 2D instance id found at
/// its pixel. Together over all views these realize the lifted
/// view-wise 3D annotation.
struct ViewAnnotation {
  std::uint32_t view_index = 0;
  std::vector<std::uint32_t> point_indices; // ascending
  std::vector<std::int32_t> instance_ids;   // same length, -1 allowed
};

} // namespace ovseg3r

#endif // OVSEG3R_TYPES_HPP
