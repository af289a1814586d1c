// Copyright 2026 FaceTalk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <string>

namespace facetalk::img {

// Planar RGB image, values in [0, 1]. data is 3 x (width*height) with the
// spatial index y*width + x, matching the conv2d layout in nn.
struct ImageRGB {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd data;

  static ImageRGB zeros(int width, int height) {
    return {width, height, Eigen::MatrixXd::Zero(3, width * height)};
  }
  double& at(int channel, int x, int y) { return data(channel, y * width + x); }
  double at(int channel, int x, int y) const { return data(channel, y * width + x); }
  bool same_shape(const ImageRGB& o) const { return width == o.width && height == o.height; }
};

void write_png(const std::string& path, const ImageRGB& image);
ImageRGB read_png(const std::string& path);

ImageRGB resize_bilinear(const ImageRGB& image, int new_width, int new_height);

}  // namespace facetalk::img
