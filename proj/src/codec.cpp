// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace ovseg3r::io {

namespace {

constexpr std::uint32_t kVersion = 1;

} // namespace

// --- OV3C --------------------------------------------------------------------

std::vector<std::uint8_t> encode_ov3c(const CorrespondenceTable& table) {
  table.validate();
  ByteWriter w;
  w.magic("OV3C");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(table.point_count()));
  w.u32(table.view_count());
  for (const auto& d : table.view_dims) {
    w.u32(d.height);
    w.u32(d.width);
  }
  for (const auto& e : table.entries) {
    w.u32(e.view);
    w.f32(e.x);
    w.f32(e.y);
  }
  return w.take();
}

CorrespondenceTable decode_ov3c(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "OV3C");
  r.expect_magic("OV3C");
  r.expect_version(kVersion);
  std::size_t at = r.pos();
  const std::uint32_t n = r.u32();
  if (n == 0) r.fail(at, "point count must be positive");
  at = r.pos();
  const std::uint32_t v = r.u32();
  if (v == 0) r.fail(at, "view count must be positive");

  CorrespondenceTable table;
  r.need_array(v, 8, "view dims");
  table.view_dims.resize(v);
  for (auto& d : table.view_dims) {
    at = r.pos();
    d.height = r.u32();
    d.width = r.u32();
    if (d.height == 0 || d.width == 0) r.fail(at, "view dims must be positive");
  }
  r.need_array(n, 12, "records");
  table.entries.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    at = r.pos();
    auto& e = table.entries[i];
    e.view = r.u32();
    e.x = r.f32();
    e.y = r.f32();
    if (e.view >= v) r.fail(at, "view index " + std::to_string(e.view) + " out of range");
    if (!(e.x >= 0.0f && e.x <= 1.0f) || !(e.y >= 0.0f && e.y <= 1.0f))
      r.fail(at, "coordinates outside [0,1] at point " + std::to_string(i));
  }
  r.expect_end();
  return table;
}

// --- OV2M --------------------------------------------------------------------

std::vector<std::uint8_t> encode_ov2m(const InstanceRaster& raster) {
  raster.validate();
  ByteWriter w;
  w.magic("OV2M");
  w.u32(kVersion);
  w.u32(raster.views);
  w.u32(raster.height);
  w.u32(raster.width);
  for (std::int32_t label : raster.labels) w.i32(label);
  return w.take();
}

RasterDecode decode_ov2m(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "OV2M");
  r.expect_magic("OV2M");
  r.expect_version(kVersion);
  std::size_t at = r.pos();
  RasterDecode out;
  InstanceRaster& raster = out.raster;
  raster.views = r.u32();
  raster.height = r.u32();
  raster.width = r.u32();
  if (raster.views == 0 || raster.height == 0 || raster.width == 0)
    r.fail(at, "dims must be positive");

  const std::uint64_t cells =
      static_cast<std::uint64_t>(raster.views) * raster.height * raster.width;
  r.need_array(cells, 4, "labels");
  raster.labels.resize(cells);
  for (std::uint64_t c = 0; c < cells; ++c) {
    at = r.pos();
    const std::int32_t label = r.i32();
    if (label < -1) r.fail(at, "instance id below -1 at cell " + std::to_string(c));
    raster.labels[c] = label;
  }
  r.expect_end();

  // Ids must be contiguous from 0 within each view; remap ascending if not.
  const std::size_t per_view = static_cast<std::size_t>(raster.height) * raster.width;
  for (std::uint32_t v = 0; v < raster.views; ++v) {
    std::int32_t* view = raster.labels.data() + static_cast<std::size_t>(v) * per_view;
    std::vector<std::int32_t> ids(view, view + per_view);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (!ids.empty() && ids.front() == -1) ids.erase(ids.begin());
    bool contiguous = true;
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (ids[k] != static_cast<std::int32_t>(k)) contiguous = false;
    if (contiguous) continue;
    out.relabeled = true;
    std::map<std::int32_t, std::int32_t> remap;
    for (std::size_t k = 0; k < ids.size(); ++k) remap[ids[k]] = static_cast<std::int32_t>(k);
    for (std::size_t c = 0; c < per_view; ++c)
      if (view[c] >= 0) view[c] = remap.at(view[c]);
  }
  return out;
}

// --- OVFM --------------------------------------------------------------------

std::vector<std::uint8_t> encode_ovfm(const FeatureMatrix& matrix) {
  matrix.validate();
  ByteWriter w;
  w.magic("OVFM");
  w.u32(kVersion);
  w.u32(matrix.rows);
  w.u32(matrix.cols);
  for (float v : matrix.data) w.f32(v);
  return w.take();
}

FeatureMatrix decode_ovfm(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "OVFM");
  r.expect_magic("OVFM");
  r.expect_version(kVersion);
  FeatureMatrix m;
  m.rows = r.u32();
  m.cols = r.u32();
  const std::uint64_t cells = static_cast<std::uint64_t>(m.rows) * m.cols;
  r.need_array(cells, 4, "values");
  m.data.resize(cells);
  for (std::uint64_t c = 0; c < cells; ++c) {
    const std::size_t at = r.pos();
    m.data[c] = r.f32();
    if (!std::isfinite(m.data[c])) r.fail(at, "non-finite value at index " + std::to_string(c));
  }
  r.expect_end();
  return m;
}

// --- OVIF --------------------------------------------------------------------

std::vector<std::uint8_t> encode_ovif(const ImageFeatureStack& stack) {
  stack.validate();
  ByteWriter w;
  w.magic("OVIF");
  w.u32(kVersion);
  w.u32(stack.views);
  w.u32(stack.height);
  w.u32(stack.width);
  w.u32(stack.channels);
  for (float v : stack.data) w.f32(v);
  return w.take();
}

ImageFeatureStack decode_ovif(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "OVIF");
  r.expect_magic("OVIF");
  r.expect_version(kVersion);
  const std::size_t at = r.pos();
  ImageFeatureStack s;
  s.views = r.u32();
  s.height = r.u32();
  s.width = r.u32();
  s.channels = r.u32();
  if (s.views == 0 || s.height == 0 || s.width == 0 || s.channels == 0)
    r.fail(at, "dims must be positive");
  const std::uint64_t cells =
      static_cast<std::uint64_t>(s.views) * s.height * s.width * s.channels;
  r.need_array(cells, 4, "values");
  s.data.resize(cells);
  for (std::uint64_t c = 0; c < cells; ++c) {
    const std::size_t vat = r.pos();
    s.data[c] = r.f32();
    if (!std::isfinite(s.data[c])) r.fail(vat, "non-finite value at index " + std::to_string(c));
  }
  r.expect_end();
  return s;
}

// --- OVSP --------------------------------------------------------------------

std::vector<std::uint8_t> encode_ovsp(const SuperpointMask& mask) {
  mask.validate();
  ByteWriter w;
  w.magic("OVSP");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(mask.point_count()));
  w.u32(mask.superpoint_count);
  for (std::uint32_t label : mask.point_labels) w.u32(label);
  return w.take();
}

SuperpointMask decode_ovsp(std::span<const std::uint8_t> bytes) {
  return decode_ovsp(bytes, true).mask;
}

SuperpointDecode decode_ovsp(std::span<const std::uint8_t> bytes, bool strict) {
  ByteReader r(bytes, "OVSP");
  r.expect_magic("OVSP");
  r.expect_version(kVersion);
  std::size_t at = r.pos();
  const std::uint32_t n_points = r.u32();
  if (n_points == 0) r.fail(at, "point count must be positive");
  at = r.pos();
  const std::uint32_t n_superpoints = r.u32();
  if (n_superpoints == 0) r.fail(at, "superpoint count must be positive");

  SuperpointDecode out;
  SuperpointMask& mask = out.mask;
  mask.superpoint_count = n_superpoints;
  r.need_array(n_points, 4, "labels");
  mask.point_labels.resize(n_points);
  std::vector<bool> used(n_superpoints, false);
  bool in_range = true;
  for (std::uint32_t i = 0; i < n_points; ++i) {
    at = r.pos();
    const std::uint32_t label = r.u32();
    mask.point_labels[i] = label;
    if (label >= n_superpoints) {
      if (strict)
        r.fail(at, "labels not contiguous: label " + std::to_string(label) +
                       " outside [0," + std::to_string(n_superpoints) + ")");
      in_range = false;
    } else {
      used[label] = true;
    }
  }
  r.expect_end();

  const bool all_used =
      in_range && std::all_of(used.begin(), used.end(), [](bool u) { return u; });
  if (all_used) return out;
  if (strict)
    throw CodecError("OVSP: labels not contiguous: not every label in [0," +
                         std::to_string(n_superpoints) + ") is used",
                     bytes.size());

  // Re-derive: relabel by first appearance in point order.
  out.rederived = true;
  std::map<std::uint32_t, std::uint32_t> remap;
  for (auto& label : mask.point_labels) {
    auto [it, fresh] = remap.try_emplace(label, static_cast<std::uint32_t>(remap.size()));
    label = it->second;
    (void)fresh;
  }
  mask.superpoint_count = static_cast<std::uint32_t>(remap.size());
  return out;
}

// --- OVEG --------------------------------------------------------------------

std::vector<std::uint8_t> encode_oveg(const EdgeList& edges) {
  edges.validate();
  ByteWriter w;
  w.magic("OVEG");
  w.u32(kVersion);
  w.u64(edges.size());
  for (const auto& e : edges.edges) {
    w.u32(e.i);
    w.u32(e.j);
    w.f32(e.w);
  }
  return w.take();
}

EdgeList decode_oveg(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "OVEG");
  r.expect_magic("OVEG");
  r.expect_version(kVersion);
  const std::uint64_t count = r.u64();
  r.need_array(count, 12, "edges");
  EdgeList list;
  list.edges.resize(count);
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::size_t at = r.pos();
    auto& ed = list.edges[e];
    ed.i = r.u32();
    ed.j = r.u32();
    ed.w = r.f32();
    if (ed.i >= ed.j)
      r.fail(at, "edge " + std::to_string(e) + " violates i < j");
    if (!(ed.w >= 0.0f && ed.w <= 2.0f))
      r.fail(at, "edge " + std::to_string(e) + " weight outside [0,2]");
  }
  r.expect_end();
  list.validate(); // duplicate check
  return list;
}

// --- OVPR --------------------------------------------------------------------

std::vector<std::uint8_t> encode_ovpr(const ScenePrediction& prediction) {
  prediction.validate();
  ByteWriter w;
  w.magic("OVPR");
  w.u32(kVersion);
  w.u32(prediction.query_count());
  w.u32(prediction.superpoint_count);
  w.raw(prediction.masks);
  for (std::int32_t c : prediction.classes) w.i32(c);
  for (std::uint32_t s : prediction.init_superpoints) w.u32(s);
  return w.take();
}

ScenePrediction decode_ovpr(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "OVPR");
  r.expect_magic("OVPR");
  r.expect_version(kVersion);
  std::size_t at = r.pos();
  const std::uint32_t q = r.u32();
  const std::uint32_t n = r.u32();
  if (n == 0) r.fail(at, "superpoint count must be positive");

  ScenePrediction p;
  p.superpoint_count = n;
  const std::uint64_t cells = static_cast<std::uint64_t>(q) * n;
  r.need_array(cells, 1, "masks");
  p.masks.resize(cells);
  for (std::uint64_t c = 0; c < cells; ++c) {
    at = r.pos();
    p.masks[c] = r.u8();
    if (p.masks[c] > 1) r.fail(at, "mask cell not 0/1 at index " + std::to_string(c));
  }
  r.need_array(q, 4, "classes");
  p.classes.resize(q);
  for (std::uint32_t a = 0; a < q; ++a) {
    at = r.pos();
    p.classes[a] = r.i32();
    if (p.classes[a] < 0) r.fail(at, "negative class at query " + std::to_string(a));
  }
  r.need_array(q, 4, "init superpoints");
  p.init_superpoints.resize(q);
  for (std::uint32_t a = 0; a < q; ++a) {
    at = r.pos();
    p.init_superpoints[a] = r.u32();
    if (p.init_superpoints[a] >= n)
      r.fail(at, "init superpoint out of range at query " + std::to_string(a));
  }
  r.expect_end();
  p.validate(); // distinctness
  return p;
}

// --- files --------------------------------------------------------------------

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw ValidationError("failed reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::filesystem::remove(tmp);
      throw ValidationError("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

} // namespace ovseg3r::io
