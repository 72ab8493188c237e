#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace agentrt {

inline constexpr int kFrameWidth = 1280;
inline constexpr int kFrameHeight = 720;
inline constexpr int kJpegQuality = 85;

struct ImageSize {
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Reads width/height from JPEG SOF markers without a full decode.
inline std::optional<ImageSize> jpeg_dimensions(
    const std::vector<std::uint8_t>& jpeg) {
  if (jpeg.size() < 4 || jpeg[0] != 0xFF || jpeg[1] != 0xD8) return std::nullopt;
  std::size_t i = 2;
  while (i + 4 <= jpeg.size()) {
    if (jpeg[i] != 0xFF) return std::nullopt;
    std::uint8_t marker = jpeg[i + 1];
    if (marker == 0xD8 || (marker >= 0xD0 && marker <= 0xD7) || marker == 0x01) {
      i += 2;
      continue;
    }
    std::size_t len = (static_cast<std::size_t>(jpeg[i + 2]) << 8) | jpeg[i + 3];
    // SOF0..SOF15 except DHT(C4)/JPG(C8)/DAC(CC) carry the frame header.
    if (marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
        marker != 0xCC) {
      if (i + 9 > jpeg.size()) return std::nullopt;
      int height = (jpeg[i + 5] << 8) | jpeg[i + 6];
      int width = (jpeg[i + 7] << 8) | jpeg[i + 8];
      return ImageSize{width, height};
    }
    i += 2 + len;
  }
  return std::nullopt;
}

inline std::vector<std::uint8_t> encode_jpeg(const cv::Mat& image,
                                             int quality = kJpegQuality) {
  std::vector<std::uint8_t> out;
  cv::imencode(".jpg", image, out, {cv::IMWRITE_JPEG_QUALITY, quality});
  return out;
}

inline cv::Mat decode_jpeg(const std::vector<std::uint8_t>& jpeg) {
  return cv::imdecode(jpeg, cv::IMREAD_COLOR);
}

}  // namespace agentrt
