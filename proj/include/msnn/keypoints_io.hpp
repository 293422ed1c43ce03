#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "msnn/common.hpp"
#include "msnn/skeleton.hpp"

namespace msnn {

// Keypoint files are JSON Lines, one record per frame:
//   {"frame": t, "points": [[x, y, confidence] x 27]}
// in the joint order fixed by the skeleton schema.

inline SkeletonSequence read_keypoints_jsonl(const std::string& path, double frame_width, double frame_height) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open keypoint file: " + path);
  SkeletonSequence seq;
  seq.frame_width = frame_width;
  seq.frame_height = frame_height;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON in keypoint file ") + path + ": " + e.what(), row);
    }
    if (!j.contains("frame") || !j.contains("points")) throw ParseError("keypoint record missing 'frame' or 'points' in " + path, row);
    if (j["frame"].get<std::int64_t>() != static_cast<std::int64_t>(seq.frames.size())) {
      throw ParseError("keypoint frames out of order in " + path, row);
    }
    const auto& pts = j["points"];
    if (!pts.is_array() || pts.size() != joints::kCount) {
      throw ParseError("expected " + std::to_string(joints::kCount) + " points in " + path, row);
    }
    std::array<Keypoint, joints::kCount> frame{};
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      if (!p.is_array() || p.size() != 3) throw ParseError("point " + std::to_string(i) + " must be [x,y,confidence]", row);
      frame[i] = Keypoint{p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    }
    seq.frames.push_back(frame);
  }
  return seq;
}

inline void write_keypoints_jsonl(const std::string& path, const SkeletonSequence& seq) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open keypoint file for writing: " + path);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& k : seq.frames[t]) points.push_back({k.x, k.y, k.confidence});
    nlohmann::json rec;
    rec["frame"] = t;
    rec["points"] = points;
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("short write to keypoint file: " + path);
}

}  // namespace msnn
