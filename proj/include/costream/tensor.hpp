/* Copyright 2026 The costream Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef COSTREAM_TENSOR_HPP_
#define COSTREAM_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace costream {

// All recoverable failures in the library are reported with this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FrameShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  friend bool operator==(const FrameShape&, const FrameShape&) = default;
};

std::string to_string(const FrameShape& s);

// One time slice of a stream, laid out (C, H, W) row-major.
class FrameTensor {
 public:
  FrameTensor() = default;
  explicit FrameTensor(FrameShape shape, float fill = 0.0f);
  FrameTensor(FrameShape shape, std::vector<float> data);

  const FrameShape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  float* channel(int c) { return data_.data() + c * shape_.plane(); }
  const float* channel(int c) const { return data_.data() + c * shape_.plane(); }

  float& at(int c, int h, int w) { return data_[index(c, h, w)]; }
  float at(int c, int h, int w) const { return data_[index(c, h, w)]; }

  void fill(float v);

  friend bool operator==(const FrameTensor&, const FrameTensor&) = default;

 private:
  std::size_t index(int c, int h, int w) const {
    return (static_cast<std::size_t>(c) * shape_.height + h) * shape_.width + w;
  }

  FrameShape shape_;
  std::vector<float> data_;
};

// A fixed-length volume laid out (C, T, H, W) row-major.
class ClipTensor {
 public:
  ClipTensor() = default;
  ClipTensor(int channels, int time, int height, int width, float fill = 0.0f);
  ClipTensor(int channels, int time, int height, int width, std::vector<float> data);

  int channels() const { return channels_; }
  int time() const { return time_; }
  int height() const { return height_; }
  int width() const { return width_; }
  FrameShape frame_shape() const { return {channels_, height_, width_}; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t channel_stride() const { return time_ * plane(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  float& at(int c, int t, int h, int w) { return data_[index(c, t, h, w)]; }
  float at(int c, int t, int h, int w) const { return data_[index(c, t, h, w)]; }

  // Pointer to the (h, w) plane of channel c at time t.
  float* plane_ptr(int c, int t) { return data_.data() + index(c, t, 0, 0); }
  const float* plane_ptr(int c, int t) const { return data_.data() + index(c, t, 0, 0); }

  FrameTensor frame(int t) const;
  void set_frame(int t, const FrameTensor& frame);

  friend bool operator==(const ClipTensor&, const ClipTensor&) = default;

 private:
  std::size_t index(int c, int t, int h, int w) const {
    return ((static_cast<std::size_t>(c) * time_ + t) * height_ + h) * width_ + w;
  }

  int channels_ = 0;
  int time_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

// Hyperparameters of one axis of a convolution or pooling window.
struct DimSpec {
  int kernel = 1;
  int stride = 1;
  int dilation = 1;
  int padding = 0;

  // Frames/pixels spanned by the dilated kernel, minus one.
  int span() const { return dilation * (kernel - 1); }
  void validate(const char* axis) const;
  friend bool operator==(const DimSpec&, const DimSpec&) = default;
};

// floor((m + 2p - d(k-1) - 1) / s) + 1; throws when the result is below one.
int output_size(int m, const DimSpec& dim);

// Same formula with independent leading and trailing padding.
int output_size(int m, const DimSpec& dim, int pad_front, int pad_back);

ClipTensor clip_from_frames(std::span<const FrameTensor> frames);
std::vector<FrameTensor> split_frames(const ClipTensor& clip);

}  // namespace costream

#endif  // COSTREAM_TENSOR_HPP_
