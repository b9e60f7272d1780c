// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_CODEC_HPP
#define OVSEG3R_CODEC_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ovseg3r/types.hpp"

namespace ovseg3r::io {

/// Malformed stream. Carries the byte offset of the offending field;
/// the offset is also appended to what().
class CodecError : public ValidationError {
public:
  CodecError(const std::string& msg, std::size_t offset)
      : ValidationError(msg + " (byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

/// Little-endian reads over an in-memory buffer with offset tracking.
class ByteReader {
public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string format)
      : bytes_(bytes), format_(std::move(format)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::uint8_t u8() {
    need(1, "u8");
    return bytes_[pos_++];
  }

  void skip(std::size_t n) {
    need(n, "skip");
    pos_ += n;
  }

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 8;
    return v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  void expect_magic(const char magic[4]) {
    const std::size_t at = pos_;
    need(4, "magic");
    if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
      fail(at, std::string("bad magic, expected \"") + std::string(magic, 4) + "\"");
    pos_ += 4;
  }

  void expect_version(std::uint32_t version) {
    const std::size_t at = pos_;
    const std::uint32_t v = u32();
    if (v != version)
      fail(at, "unsupported version " + std::to_string(v) + ", expected " + std::to_string(version));
  }

  void expect_end() {
    if (!at_end()) fail(pos_, std::to_string(remaining()) + " trailing bytes");
  }

  [[noreturn]] void fail(std::size_t at, const std::string& why) const {
    throw CodecError(format_ + ": " + why, at);
  }

  /// Element count times element size must fit the remaining stream.
  void need_array(std::uint64_t count, std::uint64_t elem_size, const char* what) {
    const unsigned __int128 total =
        static_cast<unsigned __int128>(count) * static_cast<unsigned __int128>(elem_size);
    if (total > remaining())
      fail(pos_, std::string("dimension overflow: ") + what + " needs " +
                     std::to_string(static_cast<std::uint64_t>(total)) + " bytes, " +
                     std::to_string(remaining()) + " remain");
  }

private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      fail(pos_, std::string("unexpected end of stream reading ") + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::string format_;
  std::size_t pos_ = 0;
};

/// Little-endian append-only writer.
class ByteWriter {
public:
  void u8(std::uint8_t v) { out_.push_back(v); }

  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }

  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }

  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }

  void magic(const char m[4]) { out_.insert(out_.end(), m, m + 4); }

  void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  std::vector<std::uint8_t> out_;
};

// --- binary formats ---------------------------------------------------------

std::vector<std::uint8_t> encode_ov3c(const CorrespondenceTable& table);
CorrespondenceTable decode_ov3c(std::span<const std::uint8_t> bytes);

struct RasterDecode {
  InstanceRaster raster;
  bool relabeled = false; // ids were not contiguous per view and were remapped
};
std::vector<std::uint8_t> encode_ov2m(const InstanceRaster& raster);
RasterDecode decode_ov2m(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ovfm(const FeatureMatrix& matrix);
FeatureMatrix decode_ovfm(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ovif(const ImageFeatureStack& stack);
ImageFeatureStack decode_ovif(std::span<const std::uint8_t> bytes);

struct SuperpointDecode {
  SuperpointMask mask;
  bool rederived = false; // label set was rebuilt from first appearance
};
std::vector<std::uint8_t> encode_ovsp(const SuperpointMask& mask);
/// Strict decode: rejects out-of-range or unused labels.
SuperpointMask decode_ovsp(std::span<const std::uint8_t> bytes);
/// strict=false re-derives n and relabels by first appearance instead of rejecting.
SuperpointDecode decode_ovsp(std::span<const std::uint8_t> bytes, bool strict);

std::vector<std::uint8_t> encode_oveg(const EdgeList& edges);
EdgeList decode_oveg(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ovpr(const ScenePrediction& prediction);
ScenePrediction decode_ovpr(std::span<const std::uint8_t> bytes);

// --- file helpers ------------------------------------------------------------

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames, so failed runs never
/// leave partial artifacts behind.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace ovseg3r::io

#endif // OVSEG3R_CODEC_HPP
