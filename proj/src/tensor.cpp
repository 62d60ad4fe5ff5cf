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

#include "costream/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace costream {

std::string to_string(const FrameShape& s) {
  std::ostringstream os;
  os << "(" << s.channels << ", " << s.height << ", " << s.width << ")";
  return os.str();
}

namespace {

void check_dims(std::initializer_list<int> dims) {
  for (int d : dims) {
    if (d < 1) throw Error("tensor dimensions must be >= 1");
  }
}

}  // namespace

FrameTensor::FrameTensor(FrameShape shape, float fill) : shape_(shape) {
  check_dims({shape.channels, shape.height, shape.width});
  data_.assign(shape.numel(), fill);
}

FrameTensor::FrameTensor(FrameShape shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  check_dims({shape.channels, shape.height, shape.width});
  if (data_.size() != shape.numel()) {
    throw Error("frame data length " + std::to_string(data_.size()) +
                " does not match shape " + to_string(shape));
  }
}

void FrameTensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

ClipTensor::ClipTensor(int channels, int time, int height, int width, float fill)
    : channels_(channels), time_(time), height_(height), width_(width) {
  check_dims({channels, time, height, width});
  data_.assign(static_cast<std::size_t>(channels) * time * height * width, fill);
}

ClipTensor::ClipTensor(int channels, int time, int height, int width,
                       std::vector<float> data)
    : channels_(channels), time_(time), height_(height), width_(width),
      data_(std::move(data)) {
  check_dims({channels, time, height, width});
  if (data_.size() != static_cast<std::size_t>(channels) * time * height * width) {
    throw Error("clip data length does not match shape");
  }
}

FrameTensor ClipTensor::frame(int t) const {
  if (t < 0 || t >= time_) throw Error("frame index out of range");
  FrameTensor out(frame_shape());
  for (int c = 0; c < channels_; ++c) {
    std::copy_n(plane_ptr(c, t), plane(), out.channel(c));
  }
  return out;
}

void ClipTensor::set_frame(int t, const FrameTensor& frame) {
  if (t < 0 || t >= time_) throw Error("frame index out of range");
  if (frame.shape() != frame_shape()) {
    throw Error("frame shape " + to_string(frame.shape()) + " does not match clip " +
                to_string(frame_shape()));
  }
  for (int c = 0; c < channels_; ++c) {
    std::copy_n(frame.channel(c), plane(), plane_ptr(c, t));
  }
}

void DimSpec::validate(const char* axis) const {
  if (kernel < 1 || stride < 1 || dilation < 1 || padding < 0) {
    throw Error(std::string("invalid ") + axis +
                " window: kernel, stride and dilation must be >= 1, padding >= 0");
  }
}

int output_size(int m, const DimSpec& dim) {
  return output_size(m, dim, dim.padding, dim.padding);
}

int output_size(int m, const DimSpec& dim, int pad_front, int pad_back) {
  dim.validate("window");
  if (m < 1) throw Error("input extent must be >= 1");
  const int numer = m + pad_front + pad_back - dim.span() - 1;
  if (numer < 0) {
    throw Error("kernel extent " + std::to_string(dim.span() + 1) +
                " exceeds padded input extent " +
                std::to_string(m + pad_front + pad_back));
  }
  return numer / dim.stride + 1;
}

ClipTensor clip_from_frames(std::span<const FrameTensor> frames) {
  if (frames.empty()) throw Error("cannot assemble a clip from zero frames");
  const FrameShape s = frames.front().shape();
  ClipTensor clip(s.channels, static_cast<int>(frames.size()), s.height, s.width);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].shape() != s) {
      throw Error("frame " + std::to_string(t) + " has shape " +
                  to_string(frames[t].shape()) + ", expected " + to_string(s));
    }
    clip.set_frame(static_cast<int>(t), frames[t]);
  }
  return clip;
}

std::vector<FrameTensor> split_frames(const ClipTensor& clip) {
  std::vector<FrameTensor> frames;
  frames.reserve(clip.time());
  for (int t = 0; t < clip.time(); ++t) frames.push_back(clip.frame(t));
  return frames;
}

}  // namespace costream
