#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msnn/common.hpp"
#include "msnn/tensor.hpp"

namespace msnn {

/// 2D landmark with estimator confidence. Coordinates are frame pixels and
/// may lie outside the frame.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
};

// ---------------------------------------------------------------------------
// Fixed 27-joint schema: 5 body points, 11 per hand (wrist + 2 per finger).
// The JSON Lines keypoint files and all graph topology pin this order.
// ---------------------------------------------------------------------------
namespace joints {

constexpr int kNose = 0;
constexpr int kNeck = 1;
constexpr int kRightShoulder = 2;
constexpr int kLeftShoulder = 3;
constexpr int kMidHip = 4;
constexpr int kLeftWrist = 5;    // left-hand block: 5..15
constexpr int kRightWrist = 16;  // right-hand block: 16..26
constexpr int kHandPoints = 11;
constexpr int kCount = 27;

inline std::string name(int j) {
  static const std::array<const char*, 5> body = {"nose", "neck", "right_shoulder", "left_shoulder", "mid_hip"};
  if (j < 5) return body[static_cast<std::size_t>(j)];
  const bool left = j < kRightWrist;
  const int base = left ? kLeftWrist : kRightWrist;
  const int off = j - base;
  const std::string side = left ? "left" : "right";
  if (off == 0) return side + "_wrist";
  static const std::array<const char*, 5> finger = {"thumb", "index", "middle", "ring", "pinky"};
  return side + "_" + finger[static_cast<std::size_t>((off - 1) / 2)] + ((off - 1) % 2 == 0 ? "_base" : "_tip");
}

/// Left/right swap used by the horizontal-mirror augmentation: body midline
/// joints stay, shoulders swap, hand blocks swap wholesale.
inline std::array<int, kCount> mirror_permutation() {
  std::array<int, kCount> p{};
  for (int i = 0; i < kCount; ++i) p[static_cast<std::size_t>(i)] = i;
  p[kRightShoulder] = kLeftShoulder;
  p[kLeftShoulder] = kRightShoulder;
  for (int i = 0; i < kHandPoints; ++i) {
    p[static_cast<std::size_t>(kLeftWrist + i)] = kRightWrist + i;
    p[static_cast<std::size_t>(kRightWrist + i)] = kLeftWrist + i;
  }
  return p;
}

}  // namespace joints

/// Per-frame 27-point tracks plus the frame geometry used for normalization.
struct SkeletonSequence {
  std::vector<std::array<Keypoint, joints::kCount>> frames;
  double frame_width = 0.0;
  double frame_height = 0.0;

  std::int64_t length() const { return static_cast<std::int64_t>(frames.size()); }
};

/// Horizontal mirror: x -> W - x plus the left/right joint permutation.
inline SkeletonSequence mirror_sequence(const SkeletonSequence& seq) {
  SkeletonSequence out = seq;
  const auto perm = joints::mirror_permutation();
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    for (int j = 0; j < joints::kCount; ++j) {
      Keypoint k = seq.frames[t][static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
      k.x = seq.frame_width - k.x;
      out.frames[t][static_cast<std::size_t>(j)] = k;
    }
  }
  return out;
}

/// Skeletal feature of a sequence: channel 0 = x, channel 1 = y, each
/// normalized to [-1,1] by the frame extents, shape [2, T, 27]. Low-confidence
/// points are carried forward from the previous frame; a joint that has not
/// yet been seen reads as the normalized origin (frame center).
inline Tensor build_feature(const SkeletonSequence& seq, double confidence_threshold = 0.1) {
  const std::int64_t t_len = seq.length();
  if (t_len == 0) throw InvalidArgument("build_feature: empty skeleton sequence");
  if (seq.frame_width <= 0.0 || seq.frame_height <= 0.0) {
    throw InvalidArgument("build_feature: frame extents must be positive");
  }
  Tensor out = Tensor::zeros({2, t_len, joints::kCount});
  std::array<double, joints::kCount> last_x{};
  std::array<double, joints::kCount> last_y{};
  last_x.fill(0.0);
  last_y.fill(0.0);
  for (std::int64_t t = 0; t < t_len; ++t) {
    for (int j = 0; j < joints::kCount; ++j) {
      const Keypoint& k = seq.frames[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
      if (k.confidence >= confidence_threshold) {
        last_x[static_cast<std::size_t>(j)] = 2.0 * k.x / seq.frame_width - 1.0;
        last_y[static_cast<std::size_t>(j)] = 2.0 * k.y / seq.frame_height - 1.0;
      }
      out.data()[t * joints::kCount + j] = last_x[static_cast<std::size_t>(j)];
      out.data()[(t_len + t) * joints::kCount + j] = last_y[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph topology.
// ---------------------------------------------------------------------------

/// Anatomy edges: body star on the neck, one shoulder->wrist attachment per
/// arm, wrist->finger chains (two points per finger).
inline std::vector<std::pair<int, int>> skeleton_edges() {
  std::vector<std::pair<int, int>> e = {
      {joints::kNose, joints::kNeck},
      {joints::kNeck, joints::kRightShoulder},
      {joints::kNeck, joints::kLeftShoulder},
      {joints::kNeck, joints::kMidHip},
      {joints::kRightShoulder, joints::kRightWrist},
      {joints::kLeftShoulder, joints::kLeftWrist},
  };
  for (int wrist : {joints::kLeftWrist, joints::kRightWrist}) {
    for (int f = 0; f < 5; ++f) {
      const int base = wrist + 1 + 2 * f;
      e.emplace_back(wrist, base);
      e.emplace_back(base, base + 1);
    }
  }
  return e;
}

struct SkeletonGraph {
  // 27x27 symmetric 0/1 adjacency including self-loops, row-major.
  std::vector<double> adjacency;
  // D^(-1/2) (A + I) D^(-1/2).
  std::vector<double> normalized;
  std::int64_t nodes = joints::kCount;

  double adj(int i, int j) const { return adjacency[static_cast<std::size_t>(i * nodes + j)]; }
  double norm(int i, int j) const { return normalized[static_cast<std::size_t>(i * nodes + j)]; }
};

/// Symmetric degree normalization of an arbitrary adjacency-with-loops.
inline std::vector<double> normalize_adjacency(const std::vector<double>& a, std::int64_t n) {
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::int64_t j = 0; j < n; ++j) deg += a[static_cast<std::size_t>(i * n + j)];
    inv_sqrt_deg[static_cast<std::size_t>(i)] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i * n + j)] =
          inv_sqrt_deg[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i * n + j)] * inv_sqrt_deg[static_cast<std::size_t>(j)];
  return out;
}

inline SkeletonGraph build_spatial_graph() {
  SkeletonGraph g;
  const std::int64_t n = joints::kCount;
  g.adjacency.assign(static_cast<std::size_t>(n * n), 0.0);
  for (const auto& [a, b] : skeleton_edges()) {
    g.adjacency[static_cast<std::size_t>(a * n + b)] = 1.0;
    g.adjacency[static_cast<std::size_t>(b * n + a)] = 1.0;
  }
  for (std::int64_t i = 0; i < n; ++i) g.adjacency[static_cast<std::size_t>(i * n + i)] = 1.0;
  g.normalized = normalize_adjacency(g.adjacency, n);
  return g;
}

/// Temporal edges (v,t)<->(v,t+1), nodes flattened as t * 27 + v. Realized
/// inside ST-GCN as convolution over the frame axis; exposed for inspection.
inline std::vector<std::pair<std::int64_t, std::int64_t>> temporal_edges(std::int64_t t_len) {
  if (t_len < 1) throw InvalidArgument("temporal_edges: frame count must be >= 1");
  std::vector<std::pair<std::int64_t, std::int64_t>> e;
  e.reserve(static_cast<std::size_t>((t_len - 1) * joints::kCount));
  for (std::int64_t t = 0; t + 1 < t_len; ++t)
    for (std::int64_t v = 0; v < joints::kCount; ++v) e.emplace_back(t * joints::kCount + v, (t + 1) * joints::kCount + v);
  return e;
}

}  // namespace msnn
