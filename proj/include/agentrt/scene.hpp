#pragma once

#include <cstdint>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "agentrt/image.hpp"
#include "agentrt/pipeline.hpp"

namespace agentrt {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A UI template and the fixed corner position where it appears on screen.
struct UiTemplate {
  cv::Mat image;  // grayscale
  int x = 0;
  int y = 0;
};

/// Normalized cross-correlation of a template against its reference corner.
inline double template_score(const cv::Mat& gray_frame, const UiTemplate& t) {
  if (t.x < 0 || t.y < 0 || t.x + t.image.cols > gray_frame.cols ||
      t.y + t.image.rows > gray_frame.rows) {
    return 0.0;
  }
  cv::Mat roi = gray_frame(cv::Rect(t.x, t.y, t.image.cols, t.image.rows));
  cv::Mat result;
  cv::matchTemplate(roi, t.image, result, cv::TM_CCOEFF_NORMED);
  return result.at<float>(0, 0);
}

/// GUI when any template's correlation at its corner reaches the threshold.
inline Scene classify_scene(const std::vector<std::uint8_t>& jpeg,
                            const std::vector<UiTemplate>& templates,
                            double threshold = 0.8) {
  cv::Mat frame = decode_jpeg(jpeg);
  if (frame.empty()) throw DecodeError("frame is not decodable");
  cv::Mat gray;
  cv::cvtColor(frame, gray, cv::COLOR_BGR2GRAY);
  for (const UiTemplate& t : templates) {
    if (template_score(gray, t) >= threshold) return Scene::Gui;
  }
  return Scene::Overworld;
}

}  // namespace agentrt
