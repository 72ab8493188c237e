#pragma once

#include <cstdint>
#include <vector>

#include <opencv2/core.hpp>

#include "agentrt/image.hpp"
#include "agentrt/scene.hpp"

namespace agentrt {

/// Procedural frame generator: a moving gradient keyed by (seed, seq), with
/// an optional stamped UI template region. Same (seed, seq) yields
/// bit-identical frame bytes.
class SimEnv {
 public:
  explicit SimEnv(std::uint64_t seed = 0, int width = kFrameWidth,
                  int height = kFrameHeight)
      : seed_(seed), width_(width), height_(height) {}

  /// 64x64 checkerboard-on-ring pattern used as the stamped UI marker.
  static cv::Mat ui_template() {
    cv::Mat t(64, 64, CV_8UC1);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        int dx = x - 32, dy = y - 32;
        bool ring = dx * dx + dy * dy > 400 && dx * dx + dy * dy < 900;
        bool check = ((x / 8) + (y / 8)) % 2 == 0;
        t.at<std::uint8_t>(y, x) = ring ? 255 : (check ? 200 : 30);
      }
    }
    return t;
  }

  static constexpr int kUiCornerX = 16;
  static constexpr int kUiCornerY = 16;

  cv::Mat render(std::uint64_t seq, bool with_ui = false) const {
    cv::Mat frame(height_, width_, CV_8UC3);
    std::uint64_t phase = seed_ * 7919 + seq * 131;
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        auto& px = frame.at<cv::Vec3b>(y, x);
        px[0] = static_cast<std::uint8_t>((x + phase) & 0xFF);
        px[1] = static_cast<std::uint8_t>((y + 2 * phase) & 0xFF);
        px[2] = static_cast<std::uint8_t>((x + y + 3 * phase) & 0xFF);
      }
    }
    if (with_ui) {
      cv::Mat t = ui_template();
      cv::Mat color;
      cv::cvtColor(t, color, cv::COLOR_GRAY2BGR);
      color.copyTo(frame(cv::Rect(kUiCornerX, kUiCornerY, t.cols, t.rows)));
    }
    return frame;
  }

  std::vector<std::uint8_t> frame_jpeg(std::uint64_t seq,
                                       bool with_ui = false) const {
    return encode_jpeg(render(seq, with_ui));
  }

  std::vector<UiTemplate> templates() const {
    return {{ui_template(), kUiCornerX, kUiCornerY}};
  }

 private:
  std::uint64_t seed_;
  int width_;
  int height_;
};

}  // namespace agentrt
