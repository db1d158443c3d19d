#include "seiznet/network.hpp"

#include <sstream>

#include "seiznet/error.hpp"

namespace seiznet {

std::string ShapeChain::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < after_conv.size(); ++i) {
    const Frame& c = after_conv[i];
    const Frame& p = after_pool[i];
    out << "(" << c.t << "," << c.h << "," << c.w << "," << c.c << ")->pool->("
        << p.t << "," << p.h << "," << p.w << "," << p.c << ")->";
  }
  out << "(" << flat_frames << "," << flat_width << ")->(" << conv1d_frames
      << "," << conv1d_width << ")->(" << pooled_frames << "," << pooled_width
      << ")->head[" << head_input << "]";
  return out.str();
}

ShapeChain validate_network_config(const NetworkConfig& cfg) {
  if (cfg.input_frames < 1 || cfg.input_height < 1 || cfg.input_width < 1 ||
      cfg.input_channels < 1) {
    throw DimError("network input extents must be >= 1");
  }
  if (cfg.conv_channels.empty()) {
    throw DimError("network needs at least one 2D conv stage");
  }
  if (cfg.conv2d_kernel < 1 || cfg.conv2d_kernel % 2 == 0) {
    throw DimError("2D conv kernel must be odd and >= 1 for same padding");
  }
  if (cfg.pool_h < 1 || cfg.pool_w < 1 || cfg.pool1d_size < 1) {
    throw DimError("pool sizes must be >= 1");
  }
  if (cfg.rnn_hidden.empty()) {
    throw DimError("network needs at least one recurrent layer");
  }

  ShapeChain chain;
  std::size_t t = cfg.input_frames, h = cfg.input_height, w = cfg.input_width;
  std::size_t c = cfg.input_channels;
  for (std::size_t out_c : cfg.conv_channels) {
    if (out_c < 1) throw DimError("conv channel count must be >= 1");
    chain.after_conv.push_back({t, h, w, out_c});
    if (h < cfg.pool_h || w < cfg.pool_w) {
      throw DimError("2D pool " + std::to_string(cfg.pool_h) + "x" +
                     std::to_string(cfg.pool_w) + " does not fit frame " +
                     std::to_string(h) + "x" + std::to_string(w));
    }
    h /= cfg.pool_h;
    w /= cfg.pool_w;
    c = out_c;
    chain.after_pool.push_back({t, h, w, c});
  }

  chain.flat_frames = t;
  chain.flat_width = h * w * c;

  if (cfg.conv1d_kernel < 1 || cfg.conv1d_kernel % 2 == 0) {
    throw DimError("1D conv kernel must be odd and >= 1 for same padding");
  }
  if (t < cfg.conv1d_kernel) {
    throw DimError("1D conv kernel " + std::to_string(cfg.conv1d_kernel) +
                   " longer than " + std::to_string(t) + " frames");
  }
  if (cfg.conv1d_channels < 1) {
    throw DimError("1D conv channel count must be >= 1");
  }
  chain.conv1d_frames = t;
  chain.conv1d_width = cfg.conv1d_channels;

  if (t < cfg.pool1d_size) {
    throw DimError("1D pool " + std::to_string(cfg.pool1d_size) +
                   " does not fit " + std::to_string(t) + " frames");
  }
  chain.pooled_frames = t / cfg.pool1d_size;
  chain.pooled_width = cfg.conv1d_channels;

  for (std::size_t n : cfg.rnn_hidden) {
    if (n < 1) throw DimError("rnn hidden size must be >= 1");
  }
  chain.head_input = cfg.bidirectional ? 2 * cfg.rnn_hidden.back()
                                       : cfg.rnn_hidden.back();
  return chain;
}

Network::Network(NetworkConfig cfg)
    : cfg_(std::move(cfg)), chain_(validate_network_config(cfg_)) {
  std::size_t in_c = cfg_.input_channels;
  for (std::size_t out_c : cfg_.conv_channels) {
    conv2d_.push_back(
        Conv2DLayer::zeros(cfg_.conv2d_kernel, cfg_.conv2d_kernel, in_c, out_c));
    in_c = out_c;
  }
  conv1d_ = Conv1DLayer::zeros(cfg_.conv1d_kernel, chain_.flat_width,
                               cfg_.conv1d_channels);
  rnn_ = RnnStack(cfg_.rnn_kind, cfg_.conv1d_channels, cfg_.rnn_hidden,
                  cfg_.bidirectional);
  head_ = DenseSigmoidHead::zeros(2, chain_.head_input);
}

namespace {

void collect_lstm(const std::string& prefix, LstmParams& p,
                  std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back(prefix + ".U_i", &p.U_i);
  out.emplace_back(prefix + ".U_f", &p.U_f);
  out.emplace_back(prefix + ".U_c", &p.U_c);
  out.emplace_back(prefix + ".U_o", &p.U_o);
  out.emplace_back(prefix + ".W_i", &p.W_i);
  out.emplace_back(prefix + ".W_f", &p.W_f);
  out.emplace_back(prefix + ".W_c", &p.W_c);
  out.emplace_back(prefix + ".W_o", &p.W_o);
  out.emplace_back(prefix + ".p_i", &p.p_i);
  out.emplace_back(prefix + ".p_f", &p.p_f);
  out.emplace_back(prefix + ".p_o", &p.p_o);
  out.emplace_back(prefix + ".b_i", &p.b_i);
  out.emplace_back(prefix + ".b_f", &p.b_f);
  out.emplace_back(prefix + ".b_c", &p.b_c);
  out.emplace_back(prefix + ".b_o", &p.b_o);
}

void collect_gru(const std::string& prefix, GruParams& p,
                 std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back(prefix + ".U_r", &p.U_r);
  out.emplace_back(prefix + ".U_z", &p.U_z);
  out.emplace_back(prefix + ".U_s", &p.U_s);
  out.emplace_back(prefix + ".W_r", &p.W_r);
  out.emplace_back(prefix + ".W_z", &p.W_z);
  out.emplace_back(prefix + ".W_s", &p.W_s);
  out.emplace_back(prefix + ".b_r", &p.b_r);
  out.emplace_back(prefix + ".b_z", &p.b_z);
  out.emplace_back(prefix + ".b_s", &p.b_s);
}

void collect_recurrent(const std::string& prefix, RecurrentLayer& layer,
                       std::vector<std::pair<std::string, Tensor*>>& out) {
  if (layer.kind == RnnKind::lstm) {
    collect_lstm(prefix, layer.lstm, out);
  } else {
    collect_gru(prefix, layer.gru, out);
  }
}

bool is_weight_matrix(const std::string& name) {
  // Kernels and 2-D weight matrices get the init scheme; biases and
  // peepholes stay zero.
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  return leaf == "kernels" || leaf == "weights" || leaf[0] == 'U' ||
         leaf[0] == 'W';
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> Network::parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < conv2d_.size(); ++i) {
    const std::string prefix = "conv2d" + std::to_string(i);
    out.emplace_back(prefix + ".kernels", &conv2d_[i].kernels);
    out.emplace_back(prefix + ".bias", &conv2d_[i].bias);
  }
  out.emplace_back("conv1d.kernels", &conv1d_.kernels);
  out.emplace_back("conv1d.bias", &conv1d_.bias);
  for (std::size_t l = 0; l < rnn_.layers().size(); ++l) {
    RnnStackLayer& layer = rnn_.layers()[l];
    const std::string prefix = "rnn" + std::to_string(l);
    collect_recurrent(prefix + ".fwd", layer.fwd, out);
    if (layer.bidirectional) collect_recurrent(prefix + ".bwd", layer.bwd, out);
  }
  out.emplace_back("head.weights", &head_.weights);
  out.emplace_back("head.bias", &head_.bias);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Network::parameters() const {
  auto mutable_params = const_cast<Network*>(this)->parameters();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_params.size());
  for (auto& [name, tensor] : mutable_params) out.emplace_back(name, tensor);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, tensor] : parameters()) total += tensor->size();
  return total;
}

std::vector<const Tensor*> Network::regularized_params() const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < conv2d_.size() && i < 2; ++i) {
    out.push_back(&conv2d_[i].kernels);
  }
  return out;
}

void Network::initialize(const InitSpec& spec) {
  auto params = parameters();
  for (std::size_t idx = 0; idx < params.size(); ++idx) {
    auto& [name, tensor] = params[idx];
    if (!is_weight_matrix(name)) {
      tensor->fill(0.0);
      continue;
    }
    std::size_t fan_in = 1, fan_out = 1;
    const auto& shape = tensor->shape();
    if (shape.size() == 4) {
      // conv2d kernels [kh, kw, in, out]
      fan_in = shape[0] * shape[1] * shape[2];
      fan_out = shape[0] * shape[1] * shape[3];
    } else if (shape.size() == 3) {
      // conv1d kernels [k, in, out]
      fan_in = shape[0] * shape[1];
      fan_out = shape[0] * shape[2];
    } else {
      // dense / recurrent [out, in]
      fan_in = shape[1];
      fan_out = shape[0];
    }
    Tensor drawn;
    if (shape.size() >= 3) {
      // Conv kernels are drawn via the standard 2D flattening
      // ((k*...*in) x out) and reshaped back.
      const std::size_t lead = tensor->size() / shape.back();
      drawn = init_tensor({lead, shape.back()}, fan_in, fan_out, spec, idx);
    } else {
      drawn = init_tensor(shape, fan_in, fan_out, spec, idx);
    }
    *tensor = drawn.reshaped(shape);
  }
}

Tensor Network::forward(const Tensor& window, Mode mode, const RegSpec& reg,
                        Rng* rng, ForwardCache* cache) const {
  if (window.rank() != 4 ||
      window.shape() != std::vector<std::size_t>{cfg_.input_frames,
                                                 cfg_.input_height,
                                                 cfg_.input_width,
                                                 cfg_.input_channels}) {
    throw DimError("network input " + shape_str(window.shape()) +
                   " does not match configured chain " + chain_.to_string());
  }
  const bool want_dropout = reg.kind == RegKind::dropout && mode == Mode::train;
  const bool want_noise =
      reg.kind == RegKind::gaussian_noise && mode == Mode::train;
  if ((want_dropout || want_noise) && rng == nullptr) {
    throw ConfigError("train-mode dropout/noise needs an rng stream");
  }
  if (cache) cache->conv_stages.assign(conv2d_.size(), {});

  Tensor x = window;
  for (std::size_t i = 0; i < conv2d_.size(); ++i) {
    ForwardCache::ConvStage* stage = cache ? &cache->conv_stages[i] : nullptr;
    if (stage) stage->input = x;
    Tensor pre = conv2d_forward(x, conv2d_[i]);
    Tensor act = activate(Activation::elu, pre);
    MaxPool2DResult pooled = maxpool2d(act, cfg_.pool_h, cfg_.pool_w);
    x = pooled.output;
    if (stage) {
      stage->pre = std::move(pre);
      stage->elu = std::move(act);
    }
    // Regularization noise applies after the first two conv+pool stages.
    if (i < 2) {
      if (want_dropout) {
        DropoutResult dr = dropout(x, reg.p_drop, mode, *rng);
        x = dr.y;
        if (stage) stage->dropout_mask = std::move(dr.mask);
      } else if (want_noise) {
        x = gaussian_noise(x, reg.noise_stddev, mode, *rng);
      }
    }
    if (stage) stage->pool = std::move(pooled);
  }

  Tensor flat = flatten_time(x);
  if (cache) cache->conv1d_input = flat;
  Tensor pre1d = conv1d_forward(flat, conv1d_);
  Tensor act1d = activate(Activation::elu, pre1d);
  MaxPool1DResult pooled1d = maxpool1d(act1d, cfg_.pool1d_size);
  Tensor seq = pooled1d.output;
  if (cache) {
    cache->conv1d_pre = std::move(pre1d);
    cache->conv1d_elu = act1d;
    cache->pool1d = std::move(pooled1d);
  }

  Tensor feature = rnn_.forward(seq, cache ? &cache->rnn : nullptr);
  return head_forward(head_, feature, cache ? &cache->head : nullptr);
}

Tensor Network::predict(const Tensor& window) const {
  return forward(window, Mode::eval, RegSpec{}, nullptr, nullptr);
}

GradList Network::backward(const ForwardCache& cache, const Tensor& d_pred,
                           const RegSpec& reg) const {
  GradList grads;

  HeadGrads hg = head_backward(head_, cache.head, d_pred);

  RnnStack::Grads rg = rnn_.backward(cache.rnn, hg.d_input);

  Tensor d_act1d = maxpool1d_backward(cache.pool1d, cache.conv1d_elu.shape(),
                                      rg.d_inputs);
  Tensor elu_grad1d = activate_grad(Activation::elu, cache.conv1d_pre);
  Tensor d_pre1d = ew(EwOp::mul, d_act1d, elu_grad1d);
  Conv1DGrads cg1d = conv1d_backward(cache.conv1d_input, conv1d_, d_pre1d);

  Tensor d_stage = unflatten_time(
      cg1d.d_input, cache.conv_stages.back().pool.output.shape());

  std::vector<Conv2DGrads> conv_grads(conv2d_.size());
  for (std::size_t i = conv2d_.size(); i-- > 0;) {
    const ForwardCache::ConvStage& stage = cache.conv_stages[i];
    if (i < 2) {
      if (reg.kind == RegKind::dropout && stage.dropout_mask.size() > 0) {
        d_stage = dropout_backward(d_stage, stage.dropout_mask, reg.p_drop);
      }
      // Gaussian noise backward is the identity.
    }
    Tensor d_act =
        maxpool2d_backward(stage.pool, stage.elu.shape(), d_stage);
    Tensor elu_grad = activate_grad(Activation::elu, stage.pre);
    Tensor d_pre = ew(EwOp::mul, d_act, elu_grad);
    conv_grads[i] = conv2d_backward(stage.input, conv2d_[i], d_pre);
    if (i > 0) d_stage = conv_grads[i].d_input;
  }

  // Emit in the same order as parameters().
  for (std::size_t i = 0; i < conv2d_.size(); ++i) {
    const std::string prefix = "conv2d" + std::to_string(i);
    grads.emplace_back(prefix + ".kernels", std::move(conv_grads[i].d_kernels));
    grads.emplace_back(prefix + ".bias", std::move(conv_grads[i].d_bias));
  }
  grads.emplace_back("conv1d.kernels", std::move(cg1d.d_kernels));
  grads.emplace_back("conv1d.bias", std::move(cg1d.d_bias));
  for (std::size_t l = 0; l < rg.d_layers.size(); ++l) {
    RnnStackLayer& dl = rg.d_layers[l];
    const std::string prefix = "rnn" + std::to_string(l);
    std::vector<std::pair<std::string, Tensor*>> named;
    collect_recurrent(prefix + ".fwd", dl.fwd, named);
    if (dl.bidirectional) collect_recurrent(prefix + ".bwd", dl.bwd, named);
    for (auto& [name, tensor] : named) grads.emplace_back(name, *tensor);
  }
  grads.emplace_back("head.weights", std::move(hg.d_weights));
  grads.emplace_back("head.bias", std::move(hg.d_bias));
  return grads;
}

}  // namespace seiznet
