// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/ply.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <string>

#include "ovseg3r/codec.hpp"

namespace ovseg3r::io {

namespace {

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

bool parse_type(const std::string& name, PlyType& out) {
  if (name == "char" || name == "int8") out = PlyType::kInt8;
  else if (name == "uchar" || name == "uint8") out = PlyType::kUint8;
  else if (name == "short" || name == "int16") out = PlyType::kInt16;
  else if (name == "ushort" || name == "uint16") out = PlyType::kUint16;
  else if (name == "int" || name == "int32") out = PlyType::kInt32;
  else if (name == "uint" || name == "uint32") out = PlyType::kUint32;
  else if (name == "float" || name == "float32") out = PlyType::kFloat32;
  else if (name == "double" || name == "float64") out = PlyType::kFloat64;
  else return false;
  return true;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct Header {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t data_offset = 0;
};

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.emplace_back(line.substr(start, i - start));
  }
  return tokens;
}

Header parse_header(std::span<const std::uint8_t> bytes) {
  Header header;
  std::size_t pos = 0;
  bool first = true;
  bool format_seen = false;
  bool done = false;
  while (pos < bytes.size() && !done) {
    const std::size_t line_start = pos;
    std::size_t eol = pos;
    while (eol < bytes.size() && bytes[eol] != '\n') ++eol;
    std::string line(reinterpret_cast<const char*>(bytes.data() + pos), eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = eol < bytes.size() ? eol + 1 : eol;

    if (first) {
      if (line != "ply") throw CodecError("PLY: missing \"ply\" signature", 0);
      first = false;
      continue;
    }
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2) throw CodecError("PLY: malformed format line", line_start);
      if (tokens[1] == "ascii") header.binary = false;
      else if (tokens[1] == "binary_little_endian") header.binary = true;
      else throw CodecError("PLY: unsupported format " + tokens[1], line_start);
      format_seen = true;
    } else if (tokens[0] == "element") {
      if (tokens.size() != 3) throw CodecError("PLY: malformed element line", line_start);
      PlyElement e;
      e.name = tokens[1];
      e.count = std::strtoull(tokens[2].c_str(), nullptr, 10);
      header.elements.push_back(std::move(e));
    } else if (tokens[0] == "property") {
      if (header.elements.empty())
        throw CodecError("PLY: property before any element", line_start);
      PlyProperty p;
      if (tokens.size() == 5 && tokens[1] == "list") {
        p.is_list = true;
        if (!parse_type(tokens[2], p.count_type) || !parse_type(tokens[3], p.type))
          throw CodecError("PLY: unknown property type", line_start);
        p.name = tokens[4];
      } else if (tokens.size() == 3) {
        if (!parse_type(tokens[1], p.type))
          throw CodecError("PLY: unknown property type " + tokens[1], line_start);
        p.name = tokens[2];
      } else {
        throw CodecError("PLY: malformed property line", line_start);
      }
      header.elements.back().properties.push_back(std::move(p));
    } else if (tokens[0] == "end_header") {
      done = true;
    } else {
      throw CodecError("PLY: unknown header keyword " + tokens[0], line_start);
    }
  }
  if (!done) throw CodecError("PLY: missing end_header", bytes.size());
  if (!format_seen) throw CodecError("PLY: missing format line", bytes.size());
  header.data_offset = pos;
  return header;
}

class AsciiCursor {
public:
  AsciiCursor(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  double next_number() {
    while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
    if (pos_ >= bytes_.size())
      throw CodecError("PLY: unexpected end of ASCII data", pos_);
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
    const std::string token(reinterpret_cast<const char*>(bytes_.data() + start), pos_ - start);
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size())
      throw CodecError("PLY: malformed number \"" + token + "\"", start);
    return v;
  }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

double read_binary_scalar(ByteReader& r, PlyType t) {
  switch (t) {
    case PlyType::kInt8: return static_cast<std::int8_t>(r.u8());
    case PlyType::kUint8: return r.u8();
    case PlyType::kInt16:
    case PlyType::kUint16: {
      const std::uint16_t lo = r.u8();
      const std::uint16_t hi = r.u8();
      const std::uint16_t v = static_cast<std::uint16_t>(lo | (hi << 8));
      return t == PlyType::kInt16 ? static_cast<std::int16_t>(v) : v;
    }
    case PlyType::kInt32: return r.i32();
    case PlyType::kUint32: return r.u32();
    case PlyType::kFloat32: return r.f32();
    case PlyType::kFloat64: {
      const std::uint64_t bits = r.u64();
      double v;
      std::memcpy(&v, &bits, 8);
      return v;
    }
  }
  return 0.0;
}

} // namespace

PointCloud decode_ply(std::span<const std::uint8_t> bytes) {
  const Header header = parse_header(bytes);

  const PlyElement* vertex = nullptr;
  for (const auto& e : header.elements)
    if (e.name == "vertex") vertex = &e;
  if (vertex == nullptr) throw CodecError("PLY: no vertex element", bytes.size());
  if (vertex->count == 0) throw CodecError("PLY: vertex element is empty", bytes.size());

  int xyz_slot[3] = {-1, -1, -1};
  for (std::size_t p = 0; p < vertex->properties.size(); ++p) {
    const auto& prop = vertex->properties[p];
    int axis = -1;
    if (prop.name == "x") axis = 0;
    else if (prop.name == "y") axis = 1;
    else if (prop.name == "z") axis = 2;
    if (axis < 0) continue;
    if (prop.is_list || prop.type != PlyType::kFloat32)
      throw CodecError("PLY: property " + prop.name + " must be float", bytes.size());
    xyz_slot[axis] = static_cast<int>(p);
  }
  if (xyz_slot[0] < 0 || xyz_slot[1] < 0 || xyz_slot[2] < 0)
    throw CodecError("PLY: vertex element lacks float x,y,z", bytes.size());

  PointCloud cloud;
  ByteReader binary(bytes, "PLY");
  AsciiCursor ascii(bytes, header.data_offset);
  if (header.binary) binary.skip(header.data_offset);

  for (const auto& element : header.elements) {
    const bool is_vertex = (&element == vertex);
    if (is_vertex) cloud.positions.resize(element.count);
    for (std::size_t row = 0; row < element.count; ++row) {
      const std::size_t at = header.binary ? binary.pos() : ascii.pos();
      for (std::size_t p = 0; p < element.properties.size(); ++p) {
        const auto& prop = element.properties[p];
        std::size_t list_count = 1;
        if (prop.is_list) {
          const double c =
              header.binary ? read_binary_scalar(binary, prop.count_type) : ascii.next_number();
          list_count = static_cast<std::size_t>(c);
        }
        for (std::size_t item = 0; item < list_count; ++item) {
          const double v =
              header.binary ? read_binary_scalar(binary, prop.type) : ascii.next_number();
          if (!is_vertex || prop.is_list) continue;
          for (int axis = 0; axis < 3; ++axis) {
            if (xyz_slot[axis] != static_cast<int>(p)) continue;
            const float f = static_cast<float>(v);
            if (!std::isfinite(f))
              throw CodecError("PLY: non-finite coordinate at vertex " + std::to_string(row), at);
            cloud.positions[row][axis] = f;
          }
        }
      }
    }
  }
  return cloud;
}

std::vector<std::uint8_t> encode_ply(const PointCloud& cloud) {
  cloud.validate();
  std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                       std::to_string(cloud.size()) +
                       "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(header.data()), header.size()});
  for (const auto& p : cloud.positions) {
    w.f32(p[0]);
    w.f32(p[1]);
    w.f32(p[2]);
  }
  return w.take();
}

std::vector<std::uint8_t> encode_ply_colored(const PointCloud& cloud,
                                             std::span<const Rgb> colors) {
  cloud.validate();
  if (colors.size() != cloud.size())
    throw ValidationError("PLY: color count does not match point count");
  std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                       std::to_string(cloud.size()) +
                       "\nproperty float x\nproperty float y\nproperty float z\n"
                       "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                       "end_header\n";
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(header.data()), header.size()});
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    w.f32(cloud.positions[i][0]);
    w.f32(cloud.positions[i][1]);
    w.f32(cloud.positions[i][2]);
    w.u8(colors[i].r);
    w.u8(colors[i].g);
    w.u8(colors[i].b);
  }
  return w.take();
}

} // namespace ovseg3r::io
