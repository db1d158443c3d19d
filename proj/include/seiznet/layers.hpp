#pragma once

#include <cstddef>
#include <vector>

#include "seiznet/tensor.hpp"

namespace seiznet {

// 2D convolution applied frame-wise over a (T, H, W, C) stack: the time axis
// is batch-like through the CNN, mixing across time happens only later in the
// 1D conv and the recurrent layers. Cross-correlation, stride 1, zero "same"
// padding.
struct Conv2DLayer {
  Tensor kernels;  // [k_h, k_w, in_c, out_c]
  Tensor bias;     // [out_c]

  static Conv2DLayer zeros(std::size_t k_h, std::size_t k_w, std::size_t in_c,
                           std::size_t out_c);
  std::size_t in_channels() const { return kernels.extent(2); }
  std::size_t out_channels() const { return kernels.extent(3); }
};

Tensor conv2d_forward(const Tensor& x, const Conv2DLayer& layer);

struct Conv2DGrads {
  Tensor d_input;
  Tensor d_kernels;
  Tensor d_bias;
};

Conv2DGrads conv2d_backward(const Tensor& x, const Conv2DLayer& layer,
                            const Tensor& d_out);

// Non-overlapping max pooling with floor semantics: a trailing odd row or
// column is dropped. Ties route to the lowest linear index.
struct MaxPool2DResult {
  Tensor output;                   // [T, H/ph, W/pw, C]
  std::vector<std::size_t> argmax;  // flat input index per output element
};

MaxPool2DResult maxpool2d(const Tensor& x, std::size_t pool_h = 2,
                          std::size_t pool_w = 2);
Tensor maxpool2d_backward(const MaxPool2DResult& pooled,
                          const std::vector<std::size_t>& input_shape,
                          const Tensor& d_out);

// (T, H, W, C) -> (T, H*W*C), row-major per frame.
Tensor flatten_time(const Tensor& x);
Tensor unflatten_time(const Tensor& x, const std::vector<std::size_t>& shape);

// 1D convolution over the time axis of a (T, C) sequence, same padding,
// stride 1.
struct Conv1DLayer {
  Tensor kernels;  // [k, in_c, out_c]
  Tensor bias;     // [out_c]

  static Conv1DLayer zeros(std::size_t k, std::size_t in_c, std::size_t out_c);
  std::size_t in_channels() const { return kernels.extent(1); }
  std::size_t out_channels() const { return kernels.extent(2); }
};

Tensor conv1d_forward(const Tensor& x, const Conv1DLayer& layer);

struct Conv1DGrads {
  Tensor d_input;
  Tensor d_kernels;
  Tensor d_bias;
};

Conv1DGrads conv1d_backward(const Tensor& x, const Conv1DLayer& layer,
                            const Tensor& d_out);

struct MaxPool1DResult {
  Tensor output;                   // [T/size, C]
  std::vector<std::size_t> argmax;
};

MaxPool1DResult maxpool1d(const Tensor& x, std::size_t size);
Tensor maxpool1d_backward(const MaxPool1DResult& pooled,
                          const std::vector<std::size_t>& input_shape,
                          const Tensor& d_out);

// Dense layer with independent sigmoid outputs (seizure, background); not
// softmax-normalized.
struct DenseSigmoidHead {
  Tensor weights;  // [out, in]
  Tensor bias;     // [out]

  static DenseSigmoidHead zeros(std::size_t out, std::size_t in);
};

struct HeadCache {
  Tensor input;
  Tensor pre;  // pre-sigmoid activations
  Tensor out;
};

Tensor head_forward(const DenseSigmoidHead& head, const Tensor& x,
                    HeadCache* cache = nullptr);

struct HeadGrads {
  Tensor d_input;
  Tensor d_weights;
  Tensor d_bias;
};

HeadGrads head_backward(const DenseSigmoidHead& head, const HeadCache& cache,
                        const Tensor& d_out);

}  // namespace seiznet
