#include "seiznet/layers.hpp"

namespace seiznet {

Conv2DLayer Conv2DLayer::zeros(std::size_t k_h, std::size_t k_w,
                               std::size_t in_c, std::size_t out_c) {
  return Conv2DLayer{Tensor({k_h, k_w, in_c, out_c}), Tensor({out_c})};
}

Tensor conv2d_forward(const Tensor& x, const Conv2DLayer& layer) {
  if (x.rank() != 4) {
    throw DimError("conv2d expects (T,H,W,C) input, got " + shape_str(x.shape()));
  }
  const std::size_t T = x.extent(0), H = x.extent(1), W = x.extent(2),
                    C = x.extent(3);
  const std::size_t kh = layer.kernels.extent(0), kw = layer.kernels.extent(1),
                    in_c = layer.kernels.extent(2),
                    out_c = layer.kernels.extent(3);
  if (C != in_c) {
    throw DimError("conv2d channel mismatch: input " + shape_str(x.shape()) +
                   " vs kernels " + shape_str(layer.kernels.shape()));
  }
  const std::ptrdiff_t pad_h = static_cast<std::ptrdiff_t>(kh - 1) / 2;
  const std::ptrdiff_t pad_w = static_cast<std::ptrdiff_t>(kw - 1) / 2;

  Tensor y({T, H, W, out_c});
  const double* px = x.data();
  const double* pk = layer.kernels.data();
  double* py = y.data();
  for (std::size_t t = 0; t < T; ++t) {
    const double* frame = px + t * H * W * C;
    double* out_frame = py + t * H * W * out_c;
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        double* cell = out_frame + (i * W + j) * out_c;
        for (std::size_t oc = 0; oc < out_c; ++oc) cell[oc] = layer.bias[oc];
        for (std::size_t di = 0; di < kh; ++di) {
          const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i + di) - pad_h;
          if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t dj = 0; dj < kw; ++dj) {
            const std::ptrdiff_t sj =
                static_cast<std::ptrdiff_t>(j + dj) - pad_w;
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
            const double* src = frame + (si * W + sj) * C;
            const double* krn = pk + (di * kw + dj) * C * out_c;
            for (std::size_t ic = 0; ic < C; ++ic) {
              const double v = src[ic];
              if (v == 0.0) continue;
              const double* kr = krn + ic * out_c;
              for (std::size_t oc = 0; oc < out_c; ++oc) cell[oc] += v * kr[oc];
            }
          }
        }
      }
    }
  }
  return y;
}

Conv2DGrads conv2d_backward(const Tensor& x, const Conv2DLayer& layer,
                            const Tensor& d_out) {
  const std::size_t T = x.extent(0), H = x.extent(1), W = x.extent(2),
                    C = x.extent(3);
  const std::size_t kh = layer.kernels.extent(0), kw = layer.kernels.extent(1),
                    out_c = layer.kernels.extent(3);
  const std::ptrdiff_t pad_h = static_cast<std::ptrdiff_t>(kh - 1) / 2;
  const std::ptrdiff_t pad_w = static_cast<std::ptrdiff_t>(kw - 1) / 2;
  if (d_out.shape() != std::vector<std::size_t>{T, H, W, out_c}) {
    throw DimError("conv2d backward grad shape " + shape_str(d_out.shape()) +
                   " does not match output");
  }

  Conv2DGrads g{Tensor(x.shape()), Tensor(layer.kernels.shape()),
                Tensor(layer.bias.shape())};
  const double* px = x.data();
  const double* pk = layer.kernels.data();
  const double* pd = d_out.data();
  double* gdx = g.d_input.data();
  double* gdk = g.d_kernels.data();
  for (std::size_t t = 0; t < T; ++t) {
    const double* frame = px + t * H * W * C;
    const double* dframe = pd + t * H * W * out_c;
    double* dx_frame = gdx + t * H * W * C;
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        const double* dcell = dframe + (i * W + j) * out_c;
        for (std::size_t oc = 0; oc < out_c; ++oc) g.d_bias[oc] += dcell[oc];
        for (std::size_t di = 0; di < kh; ++di) {
          const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i + di) - pad_h;
          if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t dj = 0; dj < kw; ++dj) {
            const std::ptrdiff_t sj =
                static_cast<std::ptrdiff_t>(j + dj) - pad_w;
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
            const double* src = frame + (si * W + sj) * C;
            double* dx_cell = dx_frame + (si * W + sj) * C;
            const double* krn = pk + (di * kw + dj) * C * out_c;
            double* dkrn = gdk + (di * kw + dj) * C * out_c;
            for (std::size_t ic = 0; ic < C; ++ic) {
              const double v = src[ic];
              const double* kr = krn + ic * out_c;
              double* dkr = dkrn + ic * out_c;
              double acc = 0.0;
              for (std::size_t oc = 0; oc < out_c; ++oc) {
                const double d = dcell[oc];
                dkr[oc] += v * d;
                acc += kr[oc] * d;
              }
              dx_cell[ic] += acc;
            }
          }
        }
      }
    }
  }
  return g;
}

MaxPool2DResult maxpool2d(const Tensor& x, std::size_t pool_h,
                          std::size_t pool_w) {
  const std::size_t T = x.extent(0), H = x.extent(1), W = x.extent(2),
                    C = x.extent(3);
  if (H < pool_h || W < pool_w) {
    throw DimError("maxpool2d input " + shape_str(x.shape()) +
                   " smaller than pool " + std::to_string(pool_h) + "x" +
                   std::to_string(pool_w));
  }
  const std::size_t OH = H / pool_h, OW = W / pool_w;
  MaxPool2DResult r{Tensor({T, OH, OW, C}), {}};
  r.argmax.resize(r.output.size());
  const double* px = x.data();
  double* py = r.output.data();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t oi = 0; oi < OH; ++oi) {
      for (std::size_t oj = 0; oj < OW; ++oj) {
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t best = ((t * H + oi * pool_h) * W + oj * pool_w) * C + c;
          double best_v = px[best];
          for (std::size_t di = 0; di < pool_h; ++di) {
            for (std::size_t dj = 0; dj < pool_w; ++dj) {
              const std::size_t idx =
                  ((t * H + oi * pool_h + di) * W + oj * pool_w + dj) * C + c;
              if (px[idx] > best_v) {
                best_v = px[idx];
                best = idx;
              }
            }
          }
          const std::size_t out_idx = ((t * OH + oi) * OW + oj) * C + c;
          py[out_idx] = best_v;
          r.argmax[out_idx] = best;
        }
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const MaxPool2DResult& pooled,
                          const std::vector<std::size_t>& input_shape,
                          const Tensor& d_out) {
  if (!d_out.same_shape(pooled.output)) {
    throw DimError("maxpool2d backward grad shape " + shape_str(d_out.shape()) +
                   " does not match pooled output");
  }
  Tensor dx(input_shape);
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    dx[pooled.argmax[i]] += d_out[i];
  }
  return dx;
}

Tensor flatten_time(const Tensor& x) {
  const std::size_t T = x.extent(0);
  return x.reshaped({T, x.size() / T});
}

Tensor unflatten_time(const Tensor& x, const std::vector<std::size_t>& shape) {
  return x.reshaped(shape);
}

Conv1DLayer Conv1DLayer::zeros(std::size_t k, std::size_t in_c,
                               std::size_t out_c) {
  return Conv1DLayer{Tensor({k, in_c, out_c}), Tensor({out_c})};
}

Tensor conv1d_forward(const Tensor& x, const Conv1DLayer& layer) {
  if (x.rank() != 2) {
    throw DimError("conv1d expects (T,C) input, got " + shape_str(x.shape()));
  }
  const std::size_t T = x.extent(0), C = x.extent(1);
  const std::size_t k = layer.kernels.extent(0),
                    in_c = layer.kernels.extent(1),
                    out_c = layer.kernels.extent(2);
  if (C != in_c) {
    throw DimError("conv1d channel mismatch: input " + shape_str(x.shape()) +
                   " vs kernels " + shape_str(layer.kernels.shape()));
  }
  if (T < k) {
    throw DimError("conv1d input length " + std::to_string(T) +
                   " shorter than kernel " + std::to_string(k));
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k - 1) / 2;

  Tensor y({T, out_c});
  const double* px = x.data();
  const double* pk = layer.kernels.data();
  double* py = y.data();
  for (std::size_t t = 0; t < T; ++t) {
    double* cell = py + t * out_c;
    for (std::size_t oc = 0; oc < out_c; ++oc) cell[oc] = layer.bias[oc];
    for (std::size_t dt = 0; dt < k; ++dt) {
      const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t + dt) - pad;
      if (st < 0 || st >= static_cast<std::ptrdiff_t>(T)) continue;
      const double* src = px + st * C;
      const double* krn = pk + dt * C * out_c;
      for (std::size_t ic = 0; ic < C; ++ic) {
        const double v = src[ic];
        if (v == 0.0) continue;
        const double* kr = krn + ic * out_c;
        for (std::size_t oc = 0; oc < out_c; ++oc) cell[oc] += v * kr[oc];
      }
    }
  }
  return y;
}

Conv1DGrads conv1d_backward(const Tensor& x, const Conv1DLayer& layer,
                            const Tensor& d_out) {
  const std::size_t T = x.extent(0), C = x.extent(1);
  const std::size_t k = layer.kernels.extent(0),
                    out_c = layer.kernels.extent(2);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k - 1) / 2;
  if (d_out.shape() != std::vector<std::size_t>{T, out_c}) {
    throw DimError("conv1d backward grad shape " + shape_str(d_out.shape()) +
                   " does not match output");
  }

  Conv1DGrads g{Tensor(x.shape()), Tensor(layer.kernels.shape()),
                Tensor(layer.bias.shape())};
  const double* px = x.data();
  const double* pk = layer.kernels.data();
  const double* pd = d_out.data();
  for (std::size_t t = 0; t < T; ++t) {
    const double* dcell = pd + t * out_c;
    for (std::size_t oc = 0; oc < out_c; ++oc) g.d_bias[oc] += dcell[oc];
    for (std::size_t dt = 0; dt < k; ++dt) {
      const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t + dt) - pad;
      if (st < 0 || st >= static_cast<std::ptrdiff_t>(T)) continue;
      const double* src = px + st * C;
      double* dx_cell = g.d_input.data() + st * C;
      const double* krn = pk + dt * C * out_c;
      double* dkrn = g.d_kernels.data() + dt * C * out_c;
      for (std::size_t ic = 0; ic < C; ++ic) {
        const double v = src[ic];
        const double* kr = krn + ic * out_c;
        double* dkr = dkrn + ic * out_c;
        double acc = 0.0;
        for (std::size_t oc = 0; oc < out_c; ++oc) {
          const double d = dcell[oc];
          dkr[oc] += v * d;
          acc += kr[oc] * d;
        }
        dx_cell[ic] += acc;
      }
    }
  }
  return g;
}

MaxPool1DResult maxpool1d(const Tensor& x, std::size_t size) {
  const std::size_t T = x.extent(0), C = x.extent(1);
  if (T < size) {
    throw DimError("maxpool1d input length " + std::to_string(T) +
                   " shorter than pool " + std::to_string(size));
  }
  const std::size_t OT = T / size;
  MaxPool1DResult r{Tensor({OT, C}), {}};
  r.argmax.resize(r.output.size());
  const double* px = x.data();
  double* py = r.output.data();
  for (std::size_t ot = 0; ot < OT; ++ot) {
    for (std::size_t c = 0; c < C; ++c) {
      std::size_t best = (ot * size) * C + c;
      double best_v = px[best];
      for (std::size_t dt = 1; dt < size; ++dt) {
        const std::size_t idx = (ot * size + dt) * C + c;
        if (px[idx] > best_v) {
          best_v = px[idx];
          best = idx;
        }
      }
      py[ot * C + c] = best_v;
      r.argmax[ot * C + c] = best;
    }
  }
  return r;
}

Tensor maxpool1d_backward(const MaxPool1DResult& pooled,
                          const std::vector<std::size_t>& input_shape,
                          const Tensor& d_out) {
  if (!d_out.same_shape(pooled.output)) {
    throw DimError("maxpool1d backward grad shape " + shape_str(d_out.shape()) +
                   " does not match pooled output");
  }
  Tensor dx(input_shape);
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    dx[pooled.argmax[i]] += d_out[i];
  }
  return dx;
}

DenseSigmoidHead DenseSigmoidHead::zeros(std::size_t out, std::size_t in) {
  return DenseSigmoidHead{Tensor({out, in}), Tensor({out})};
}

Tensor head_forward(const DenseSigmoidHead& head, const Tensor& x,
                    HeadCache* cache) {
  const std::size_t out = head.weights.extent(0), in = head.weights.extent(1);
  if (x.size() != in) {
    throw DimError("head input size " + std::to_string(x.size()) +
                   " does not match weights " + shape_str(head.weights.shape()));
  }
  Tensor pre({out});
  for (std::size_t o = 0; o < out; ++o) {
    double acc = head.bias[o];
    const double* wrow = head.weights.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
    pre[o] = acc;
  }
  Tensor y = activate(Activation::sigmoid, pre);
  if (cache) {
    cache->input = x;
    cache->pre = pre;
    cache->out = y;
  }
  return y;
}

HeadGrads head_backward(const DenseSigmoidHead& head, const HeadCache& cache,
                        const Tensor& d_out) {
  const std::size_t out = head.weights.extent(0), in = head.weights.extent(1);
  HeadGrads g{Tensor({in}), Tensor({out, in}), Tensor({out})};
  for (std::size_t o = 0; o < out; ++o) {
    const double s = cache.out[o];
    const double d_pre = d_out[o] * s * (1.0 - s);
    g.d_bias[o] = d_pre;
    const double* wrow = head.weights.data() + o * in;
    double* dwrow = g.d_weights.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      dwrow[i] = d_pre * cache.input[i];
      g.d_input[i] += d_pre * wrow[i];
    }
  }
  return g;
}

}  // namespace seiznet
