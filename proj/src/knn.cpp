// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/knn.hpp"

#include <algorithm>
#include <cmath>

#include "ovseg3r/parallel.hpp"

namespace ovseg3r {

namespace {

constexpr std::uint32_t kLeafSize = 16;

double dist2(const Vec3f& a, const Vec3f& b) {
  const double dx = static_cast<double>(a[0]) - b[0];
  const double dy = static_cast<double>(a[1]) - b[1];
  const double dz = static_cast<double>(a[2]) - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// k best (distance^2, index) pairs, kept sorted ascending. Ties on
/// distance resolve to the lower index, which fixes the result set and
/// its order regardless of traversal.
class BestSet {
public:
  BestSet(std::uint32_t k) : k_(k) { entries_.reserve(k + 1); }

  bool full() const { return entries_.size() == k_; }
  double worst() const { return entries_.back().first; }

  bool admissible(double d2) const {
    return !full() || d2 <= worst();
  }

  void offer(double d2, std::uint32_t idx) {
    const std::pair<double, std::uint32_t> e{d2, idx};
    if (full() && !(e < entries_.back())) return;
    entries_.insert(std::upper_bound(entries_.begin(), entries_.end(), e), e);
    if (entries_.size() > k_) entries_.pop_back();
  }

  const std::vector<std::pair<double, std::uint32_t>>& entries() const { return entries_; }

private:
  std::uint32_t k_;
  std::vector<std::pair<double, std::uint32_t>> entries_;
};

} // namespace

KnnIndex::KnnIndex(const PointCloud& cloud, std::uint32_t k) : k_(k) {
  cloud.validate();
  if (k == 0) throw ValidationError("KnnIndex: k must be at least 1");
  if (static_cast<std::size_t>(k) >= cloud.size())
    throw ValidationError("KnnIndex: k too large (k=" + std::to_string(k) +
                          ", N=" + std::to_string(cloud.size()) + ")");
  positions_ = cloud.positions;
  order_.resize(positions_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * positions_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(positions_.size()));
}

std::uint32_t KnnIndex::build(std::uint32_t begin, std::uint32_t end) {
  const std::uint32_t node_id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({begin, end, 0, 0.0f, 0});
  if (end - begin <= kLeafSize) return node_id;

  // Split on the axis of largest extent at the median.
  float lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = hi[a] = positions_[order_[begin]][a];
  }
  for (std::uint32_t t = begin + 1; t < end; ++t) {
    const Vec3f& p = positions_[order_[t]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  std::uint8_t axis = 0;
  for (std::uint8_t a = 1; a < 3; ++a)
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [this, axis](std::uint32_t a, std::uint32_t b) {
                     const float pa = positions_[a][axis];
                     const float pb = positions_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const float split = positions_[order_[mid]][axis];

  nodes_[node_id].axis = axis;
  nodes_[node_id].split = split;
  build(begin, mid);
  nodes_[node_id].right = build(mid, end);
  return node_id;
}

void KnnIndex::query(std::uint32_t i, std::vector<std::uint32_t>& out) const {
  const Vec3f& target = positions_[i];
  BestSet best(k_);

  // Iterative depth-first descent, nearer child first.
  std::uint32_t stack[64];
  double plane_d2[64];
  int top = 0;
  stack[top] = 0;
  plane_d2[top] = 0.0;
  while (top >= 0) {
    const std::uint32_t node_id = stack[top];
    const double bound = plane_d2[top];
    --top;
    const Node& node = nodes_[node_id];
    if (best.full() && bound > best.worst()) continue;
    if (node.right == 0) {
      for (std::uint32_t t = node.begin; t < node.end; ++t) {
        const std::uint32_t j = order_[t];
        if (j == i) continue;
        const double d2 = dist2(target, positions_[j]);
        if (best.admissible(d2)) best.offer(d2, j);
      }
      continue;
    }
    const double delta = static_cast<double>(target[node.axis]) - node.split;
    const double away = delta * delta;
    const std::uint32_t left = node_id + 1; // left child is adjacent in build order
    const std::uint32_t near_child = delta < 0.0 ? left : node.right;
    const std::uint32_t far_child = delta < 0.0 ? node.right : left;
    ++top;
    stack[top] = far_child;
    plane_d2[top] = away;
    ++top;
    stack[top] = near_child;
    plane_d2[top] = bound;
  }

  out.clear();
  out.reserve(k_);
  for (const auto& [d2, j] : best.entries()) out.push_back(j);
}

std::vector<std::uint32_t> KnnIndex::all_neighbors(int threads) const {
  std::vector<std::uint32_t> table(positions_.size() * static_cast<std::size_t>(k_));
  parallel_for(positions_.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> row;
    for (std::size_t i = begin; i < end; ++i) {
      query(static_cast<std::uint32_t>(i), row);
      std::copy(row.begin(), row.end(), table.begin() + i * k_);
    }
  });
  return table;
}

KnnIndex build_knn_index(const PointCloud& cloud, std::uint32_t k) {
  return KnnIndex(cloud, k);
}

} // namespace ovseg3r
