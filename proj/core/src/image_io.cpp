// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "styledraw/io.hpp"

namespace styledraw {

void export_png(const RasterImage& img, const std::string& path) {
  const Tensor& px = img.pixels;
  if (px.rank() != 3 || px.dim(0) != img.height || px.dim(1) != img.width ||
      px.dim(2) != 3)
    throw std::invalid_argument("png export: image must be [H, W, 3]");
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      auto& out = bgr.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(px.at(y, x, c), 0.0, 1.0);
        out[2 - c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  if (!cv::imwrite(path, bgr))
    throw std::runtime_error("png export: write failed for " + path);
}

RasterImage load_image(const std::string& path) {
  const cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty())
    throw std::runtime_error("image load: cannot read " + path);
  RasterImage img{Tensor::zeros({bgr.rows, bgr.cols, 3}), bgr.rows, bgr.cols};
  for (int y = 0; y < bgr.rows; ++y)
    for (int x = 0; x < bgr.cols; ++x) {
      const auto& in = bgr.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c)
        img.pixels.at(y, x, c) = in[2 - c] / 255.0;
    }
  return img;
}

RasterImage load_style_image(const std::string& path, int resolution) {
  if (resolution < 1)
    throw std::invalid_argument("style image: resolution must be >= 1");
  const cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty())
    throw std::runtime_error("style image: cannot read " + path);
  const int side = std::min(bgr.rows, bgr.cols);
  const cv::Rect crop((bgr.cols - side) / 2, (bgr.rows - side) / 2, side,
                      side);
  cv::Mat square = bgr(crop);
  cv::Mat resized;
  cv::resize(square, resized, cv::Size(resolution, resolution), 0.0, 0.0,
             cv::INTER_AREA);
  RasterImage img{Tensor::zeros({resolution, resolution, 3}), resolution,
                  resolution};
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      const auto& in = resized.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c)
        img.pixels.at(y, x, c) = in[2 - c] / 255.0;
    }
  return img;
}

void write_loss_csv(const std::vector<LossReport>& history,
                    const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("loss csv: cannot open " + path);
  f << "iteration,content,style,total,lambda\n";
  char buf[256];
  for (const auto& rep : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n",
                  rep.iteration, rep.content_loss, rep.style_loss,
                  rep.total_loss, rep.style_weight_effective);
    f << buf;
  }
  if (!f) throw std::runtime_error("loss csv: write failed for " + path);
}

}  // namespace styledraw
