#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "msnn/common.hpp"
#include "msnn/image.hpp"
#include "msnn/skeleton.hpp"

namespace msnn {

/// Axis-aligned square region.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double side = 0.0;
};

/// Box-geometry constants. The defaults are the empirically determined values
/// of the hand/face box equations; the confidence threshold decides when a
/// keypoint counts as present.
struct BoxConstants {
  double hand_offset = 1.33;     // center = E + offset * (W - E)
  double hand_scale = 1.2;       // side = scale * max(|EW|, se_weight * |SE|)
  double hand_se_weight = 0.9;
  double face_scale = 1.5;       // side = face_scale * |RL|
  double confidence_threshold = 0.1;
};

namespace detail {

inline void require_present(const Keypoint& k, const char* role, double threshold) {
  if (!(k.confidence >= threshold)) throw MissingKeypointError(role, k.confidence);
}

}  // namespace detail

/// Hand box from the shoulder/elbow/wrist chain: the hand is assumed to lie
/// on the elbow's extension through the wrist.
inline BoundingBox hand_box(const Keypoint& s, const Keypoint& e, const Keypoint& w,
                            const BoxConstants& c = BoxConstants{}) {
  detail::require_present(s, "S", c.confidence_threshold);
  detail::require_present(e, "E", c.confidence_threshold);
  detail::require_present(w, "W", c.confidence_threshold);
  const double ewx = w.x - e.x, ewy = w.y - e.y;
  const double sex = e.x - s.x, sey = e.y - s.y;
  const double ew = std::hypot(ewx, ewy);
  const double se = std::hypot(sex, sey);
  BoundingBox box;
  box.cx = e.x + c.hand_offset * ewx;
  box.cy = e.y + c.hand_offset * ewy;
  box.side = c.hand_scale * std::max(ew, c.hand_se_weight * se);
  if (!(box.side > 0.0)) {
    throw DegenerateBoxError("hand box side is not positive (coincident S, E and W keypoints)");
  }
  return box;
}

/// Face box centered between the two ear points.
inline BoundingBox face_box(const Keypoint& r, const Keypoint& l, const BoxConstants& c = BoxConstants{}) {
  detail::require_present(r, "R", c.confidence_threshold);
  detail::require_present(l, "L", c.confidence_threshold);
  BoundingBox box;
  box.cx = r.x + 0.5 * (l.x - r.x);
  box.cy = r.y + 0.5 * (l.y - r.y);
  box.side = c.face_scale * std::hypot(l.x - r.x, l.y - r.y);
  if (!(box.side > 0.0)) throw DegenerateBoxError("face box side is not positive (coincident ear keypoints)");
  return box;
}

/// Crop the square box from the frame and resample it to out_size^2 with
/// bilinear interpolation; pixels outside the frame are zero. A box lying
/// entirely outside the frame yields an all-zero patch plus a warning.
inline Image crop_resize(const Image& frame, const BoundingBox& box, std::int64_t out_size = 224,
                         std::vector<std::string>* warnings = nullptr) {
  if (out_size <= 0) throw InvalidArgument("crop_resize: out_size must be positive");
  if (!(box.side > 0.0)) throw DegenerateBoxError("crop_resize: box side must be positive");
  const double left = box.cx - box.side / 2.0;
  const double top = box.cy - box.side / 2.0;
  if (warnings && (left >= static_cast<double>(frame.width) || top >= static_cast<double>(frame.height) ||
                   left + box.side <= 0.0 || top + box.side <= 0.0)) {
    warnings->push_back("crop box entirely outside frame (center " + std::to_string(box.cx) + "," +
                        std::to_string(box.cy) + ", side " + std::to_string(box.side) + ")");
  }
  Image out(out_size, out_size, frame.channels);
  const double step = box.side / static_cast<double>(out_size);
  for (std::int64_t c = 0; c < frame.channels; ++c)
    for (std::int64_t y = 0; y < out_size; ++y) {
      const double src_y = top + (static_cast<double>(y) + 0.5) * step - 0.5;
      for (std::int64_t x = 0; x < out_size; ++x) {
        const double src_x = left + (static_cast<double>(x) + 0.5) * step - 0.5;
        out.at(c, y, x) = sample_bilinear(frame, c, src_x, src_y);
      }
    }
  return out;
}

/// Which 27-schema joints stand in for the S/E/W and R/L roles. The schema
/// carries no elbow or ear points, so each arm chain is neck -> shoulder ->
/// wrist and the face pair is nose/neck.
struct RegionJointMap {
  int left_s = joints::kNeck;
  int left_e = joints::kLeftShoulder;
  int left_w = joints::kLeftWrist;
  int right_s = joints::kNeck;
  int right_e = joints::kRightShoulder;
  int right_w = joints::kRightWrist;
  int face_r = joints::kNose;
  int face_l = joints::kNeck;
};

struct LocalStreams {
  std::vector<Image> left_hand;
  std::vector<Image> right_hand;
  std::vector<Image> face;
  std::vector<std::string> warnings;
};

namespace detail {

// Missing-keypoint frames reuse the nearest valid box: the most recent one,
// or the first subsequent one for frames before any detection.
inline void fill_box_gaps(std::vector<std::optional<BoundingBox>>& boxes, const char* region,
                          std::vector<std::string>& warnings) {
  std::optional<BoundingBox> last;
  for (auto& b : boxes) {
    if (b) last = b;
    else if (last) b = last;
  }
  std::optional<BoundingBox> next;
  for (auto it = boxes.rbegin(); it != boxes.rend(); ++it) {
    if (*it) next = *it;
    else if (next) *it = next;
  }
  if (!boxes.empty() && !boxes.front()) {
    warnings.push_back(std::string(region) + " region never valid; emitting all-zero patches");
  }
}

}  // namespace detail

/// Per-frame hand and face patches for the local image stream. Frame t uses
/// keypoints of frame t; regions with no valid keypoints fall back as
/// documented in fill_box_gaps.
inline LocalStreams extract_local_streams(const std::vector<Image>& frames, const SkeletonSequence& skeleton,
                                          std::int64_t out_size = 224, const BoxConstants& consts = BoxConstants{},
                                          const RegionJointMap& map = RegionJointMap{}) {
  if (static_cast<std::int64_t>(frames.size()) != skeleton.length()) {
    throw InvalidArgument("extract_local_streams: " + std::to_string(frames.size()) + " frames vs " +
                          std::to_string(skeleton.length()) + " skeleton frames");
  }
  const std::size_t n = frames.size();
  LocalStreams out;
  std::vector<std::optional<BoundingBox>> left(n), right(n), face(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& f = skeleton.frames[t];
    auto kp = [&](int j) { return f[static_cast<std::size_t>(j)]; };
    try {
      left[t] = hand_box(kp(map.left_s), kp(map.left_e), kp(map.left_w), consts);
    } catch (const InvalidArgument&) {
    }
    try {
      right[t] = hand_box(kp(map.right_s), kp(map.right_e), kp(map.right_w), consts);
    } catch (const InvalidArgument&) {
    }
    try {
      face[t] = face_box(kp(map.face_r), kp(map.face_l), consts);
    } catch (const InvalidArgument&) {
    }
  }
  detail::fill_box_gaps(left, "left hand", out.warnings);
  detail::fill_box_gaps(right, "right hand", out.warnings);
  detail::fill_box_gaps(face, "face", out.warnings);
  out.left_hand.reserve(n);
  out.right_hand.reserve(n);
  out.face.reserve(n);
  const std::int64_t channels = n ? frames[0].channels : 3;
  for (std::size_t t = 0; t < n; ++t) {
    auto patch = [&](const std::optional<BoundingBox>& b) {
      if (!b) return Image(out_size, out_size, channels);
      return crop_resize(frames[t], *b, out_size, &out.warnings);
    };
    out.left_hand.push_back(patch(left[t]));
    out.right_hand.push_back(patch(right[t]));
    out.face.push_back(patch(face[t]));
  }
  return out;
}

}  // namespace msnn
