// SPDX-License-Identifier: Apache-2.0

#include "saccade/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "saccade/checkpoint.hpp"

namespace saccade {

bool read_image(const std::string& path, ImageU8& out) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) return false;
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  out.w = rgb.cols;
  out.h = rgb.rows;
  out.rgb.assign(rgb.data, rgb.data + static_cast<std::size_t>(rgb.total()) * 3);
  return true;
}

void write_png(const std::string& path, const ImageU8& img) {
  check(img.w > 0 && img.h > 0 &&
            img.rgb.size() == static_cast<std::size_t>(img.w) * img.h * 3,
        "write_png: malformed image");
  cv::Mat rgb(img.h, img.w, CV_8UC3, const_cast<std::uint8_t*>(img.rgb.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path, bgr)) throw std::runtime_error("write_png: cannot write " + path);
}

ImageU8 resize_image(const ImageU8& in, int w, int h) {
  check(w > 0 && h > 0, "resize_image: bad target size");
  cv::Mat src(in.h, in.w, CV_8UC3, const_cast<std::uint8_t*>(in.rgb.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
  ImageU8 out;
  out.w = w;
  out.h = h;
  out.rgb.assign(dst.data, dst.data + static_cast<std::size_t>(dst.total()) * 3);
  return out;
}

std::vector<std::uint8_t> planar_from_interleaved(const ImageU8& img) {
  const std::size_t plane = static_cast<std::size_t>(img.w) * img.h;
  std::vector<std::uint8_t> out(plane * 3);
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(c) * plane + p] = img.rgb[p * 3 + c];
  return out;
}

ImageU8 tensor_to_u8(const Tensor& img, int batch_index) {
  check(img.rank() == 4 && img.dim(1) == 3, "tensor_to_u8: expects [B,3,H,W]");
  const int H = img.dim(2), W = img.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const float* base = img.data() + static_cast<std::size_t>(batch_index) * 3 * plane;
  ImageU8 out;
  out.w = W;
  out.h = H;
  out.rgb.resize(plane * 3);
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp(base[static_cast<std::size_t>(c) * plane + p], 0.0f, 1.0f);
      out.rgb[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  return out;
}

void write_f32_image(const std::string& path, const Tensor& img) {
  save_checkpoint(path, {{"image", img}});
}

Tensor read_f32_image(const std::string& path) {
  auto params = load_checkpoint(path);
  check(params.size() == 1 && params[0].first == "image", "read_f32_image: not an image sidecar");
  return params[0].second;
}

}  // namespace saccade
