#include "seiznet/recurrent.hpp"

#include <cmath>

#include "seiznet/error.hpp"

namespace seiznet {

RnnKind rnn_kind_from_name(const std::string& name) {
  if (name == "lstm") return RnnKind::lstm;
  if (name == "gru") return RnnKind::gru;
  throw ConfigError("unknown rnn kind '" + name + "' (expected lstm or gru)");
}

std::string rnn_kind_name(RnnKind kind) {
  return kind == RnnKind::lstm ? "lstm" : "gru";
}

LstmParams LstmParams::zeros(std::size_t n, std::size_t m) {
  LstmParams p;
  p.U_i = Tensor({n, m});
  p.U_f = Tensor({n, m});
  p.U_c = Tensor({n, m});
  p.U_o = Tensor({n, m});
  p.W_i = Tensor({n, n});
  p.W_f = Tensor({n, n});
  p.W_c = Tensor({n, n});
  p.W_o = Tensor({n, n});
  p.p_i = Tensor({n});
  p.p_f = Tensor({n});
  p.p_o = Tensor({n});
  p.b_i = Tensor({n});
  p.b_f = Tensor({n});
  p.b_c = Tensor({n});
  p.b_o = Tensor({n});
  return p;
}

std::size_t LstmParams::count() const {
  return U_i.size() + U_f.size() + U_c.size() + U_o.size() + W_i.size() +
         W_f.size() + W_c.size() + W_o.size() + p_i.size() + p_f.size() +
         p_o.size() + b_i.size() + b_f.size() + b_c.size() + b_o.size();
}

GruParams GruParams::zeros(std::size_t n, std::size_t m) {
  GruParams p;
  p.U_r = Tensor({n, m});
  p.U_z = Tensor({n, m});
  p.U_s = Tensor({n, m});
  p.W_r = Tensor({n, n});
  p.W_z = Tensor({n, n});
  p.W_s = Tensor({n, n});
  p.b_r = Tensor({n});
  p.b_z = Tensor({n});
  p.b_s = Tensor({n});
  return p;
}

std::size_t GruParams::count() const {
  return U_r.size() + U_z.size() + U_s.size() + W_r.size() + W_z.size() +
         W_s.size() + b_r.size() + b_z.size() + b_s.size();
}

namespace {

// y += M * v for M [n,m], v [m].
void add_matvec(Tensor& y, const Tensor& M, const Tensor& v) {
  const std::size_t n = M.extent(0), m = M.extent(1);
  const double* pm = M.data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* row = pm + i * m;
    for (std::size_t j = 0; j < m; ++j) acc += row[j] * v[j];
    y[i] += acc;
  }
}

// y += M^T * v for M [n,m], v [n]; y has size m.
void add_matvec_t(Tensor& y, const Tensor& M, const Tensor& v) {
  const std::size_t n = M.extent(0), m = M.extent(1);
  const double* pm = M.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* row = pm + i * m;
    for (std::size_t j = 0; j < m; ++j) y[j] += row[j] * vi;
  }
}

// M += a * b^T (outer product) for a [n], b [m].
void add_outer(Tensor& M, const Tensor& a, const Tensor& b) {
  const std::size_t n = a.size(), m = b.size();
  double* pm = M.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    double* row = pm + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] += ai * b[j];
  }
}

void check_step_dims(std::size_t n, std::size_t m, const Tensor& x,
                     const Tensor& s_prev) {
  if (x.size() != m) {
    throw DimError("rnn step input size " + std::to_string(x.size()) +
                   " does not match cell input size " + std::to_string(m));
  }
  if (s_prev.size() != n) {
    throw DimError("rnn step state size " + std::to_string(s_prev.size()) +
                   " does not match hidden size " + std::to_string(n));
  }
}

}  // namespace

CellState lstm_step(const Tensor& x, const CellState& prev,
                    const LstmParams& p, LstmStepCache* cache) {
  const std::size_t n = p.hidden_size(), m = p.input_size();
  check_step_dims(n, m, x, prev.s);

  Tensor a_i = p.b_i, a_f = p.b_f, a_c = p.b_c;
  add_matvec(a_i, p.U_i, x);
  add_matvec(a_i, p.W_i, prev.s);
  add_matvec(a_f, p.U_f, x);
  add_matvec(a_f, p.W_f, prev.s);
  add_matvec(a_c, p.U_c, x);
  add_matvec(a_c, p.W_c, prev.s);
  for (std::size_t k = 0; k < n; ++k) {
    a_i[k] += p.p_i[k] * prev.c[k];
    a_f[k] += p.p_f[k] * prev.c[k];
  }

  Tensor i({n}), f({n}), g({n}), c({n});
  for (std::size_t k = 0; k < n; ++k) {
    i[k] = sigmoid(a_i[k]);
    f[k] = sigmoid(a_f[k]);
    g[k] = std::tanh(a_c[k]);
    c[k] = f[k] * prev.c[k] + i[k] * g[k];
  }

  Tensor a_o = p.b_o;
  add_matvec(a_o, p.U_o, x);
  add_matvec(a_o, p.W_o, prev.s);
  Tensor o({n}), tanh_c({n}), s({n});
  for (std::size_t k = 0; k < n; ++k) {
    a_o[k] += p.p_o[k] * c[k];
    o[k] = sigmoid(a_o[k]);
    tanh_c[k] = std::tanh(c[k]);
    s[k] = o[k] * tanh_c[k];
  }

  if (cache) {
    cache->x = x;
    cache->s_prev = prev.s;
    cache->c_prev = prev.c;
    cache->i = i;
    cache->f = f;
    cache->g = g;
    cache->o = o;
    cache->c = c;
    cache->tanh_c = tanh_c;
  }
  return CellState{s, c};
}

Tensor gru_step(const Tensor& x, const Tensor& s_prev, const GruParams& p,
                GruStepCache* cache) {
  const std::size_t n = p.hidden_size(), m = p.input_size();
  check_step_dims(n, m, x, s_prev);

  Tensor a_r = p.b_r, a_z = p.b_z;
  add_matvec(a_r, p.U_r, x);
  add_matvec(a_r, p.W_r, s_prev);
  add_matvec(a_z, p.U_z, x);
  add_matvec(a_z, p.W_z, s_prev);

  Tensor wr({n});
  add_matvec(wr, p.W_s, s_prev);

  Tensor r({n}), z({n}), h({n}), s({n});
  Tensor a_h = p.b_s;
  add_matvec(a_h, p.U_s, x);
  for (std::size_t k = 0; k < n; ++k) {
    r[k] = sigmoid(a_r[k]);
    z[k] = sigmoid(a_z[k]);
    h[k] = std::tanh(a_h[k] + r[k] * wr[k]);
    s[k] = z[k] * s_prev[k] + (1.0 - z[k]) * h[k];
  }

  if (cache) {
    cache->x = x;
    cache->s_prev = s_prev;
    cache->r = r;
    cache->z = z;
    cache->wr = wr;
    cache->h = h;
  }
  return s;
}

RecurrentLayer RecurrentLayer::zeros(RnnKind kind, std::size_t n,
                                     std::size_t m) {
  RecurrentLayer layer;
  layer.kind = kind;
  if (kind == RnnKind::lstm) {
    layer.lstm = LstmParams::zeros(n, m);
  } else {
    layer.gru = GruParams::zeros(n, m);
  }
  return layer;
}

std::size_t RecurrentLayer::hidden_size() const {
  return kind == RnnKind::lstm ? lstm.hidden_size() : gru.hidden_size();
}

std::size_t RecurrentLayer::input_size() const {
  return kind == RnnKind::lstm ? lstm.input_size() : gru.input_size();
}

std::size_t RecurrentLayer::count() const {
  return kind == RnnKind::lstm ? lstm.count() : gru.count();
}

namespace {

Tensor row(const Tensor& xs, std::size_t t) {
  const std::size_t m = xs.extent(1);
  Tensor r({m});
  const double* p = xs.data() + t * m;
  for (std::size_t j = 0; j < m; ++j) r[j] = p[j];
  return r;
}

void set_row(Tensor& xs, std::size_t t, const Tensor& r) {
  const std::size_t m = xs.extent(1);
  double* p = xs.data() + t * m;
  for (std::size_t j = 0; j < m; ++j) p[j] = r[j];
}

}  // namespace

Tensor run_sequence(const Tensor& xs, const RecurrentLayer& layer,
                    Direction direction, SequenceCache* cache) {
  if (xs.rank() != 2 || xs.extent(0) == 0) {
    throw DimError("run_sequence expects a non-empty (T,m) sequence, got " +
                   shape_str(xs.shape()));
  }
  const std::size_t T = xs.extent(0);
  const std::size_t n = layer.hidden_size();
  if (cache) {
    cache->direction = direction;
    cache->lstm_steps.clear();
    cache->gru_steps.clear();
  }

  Tensor out({T, n});
  CellState state = CellState::zeros(n);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t =
        direction == Direction::forward ? step : T - 1 - step;
    const Tensor x_t = row(xs, t);
    if (layer.kind == RnnKind::lstm) {
      LstmStepCache sc;
      state = lstm_step(x_t, state, layer.lstm, cache ? &sc : nullptr);
      if (cache) cache->lstm_steps.push_back(std::move(sc));
    } else {
      GruStepCache sc;
      state.s = gru_step(x_t, state.s, layer.gru, cache ? &sc : nullptr);
      if (cache) cache->gru_steps.push_back(std::move(sc));
    }
    set_row(out, t, state.s);
  }
  return out;
}

namespace {

SequenceGrads bptt_lstm(const RecurrentLayer& layer, const SequenceCache& cache,
                        const Tensor& d_outputs) {
  const LstmParams& p = layer.lstm;
  const std::size_t T = cache.lstm_steps.size();
  const std::size_t n = p.hidden_size(), m = p.input_size();
  SequenceGrads g;
  g.d_inputs = Tensor({T, m});
  g.d_params = RecurrentLayer::zeros(RnnKind::lstm, n, m);
  LstmParams& dp = g.d_params.lstm;

  Tensor ds({n}), dc({n});
  for (std::size_t step = T; step-- > 0;) {
    const LstmStepCache& sc = cache.lstm_steps[step];
    const std::size_t t =
        cache.direction == Direction::forward ? step : T - 1 - step;
    // Upstream grad for this step's output plus recurrent carry.
    for (std::size_t k = 0; k < n; ++k) ds[k] += d_outputs[t * n + k];

    Tensor da_i({n}), da_f({n}), da_c({n}), da_o({n});
    for (std::size_t k = 0; k < n; ++k) {
      const double d_o = ds[k] * sc.tanh_c[k];
      da_o[k] = d_o * sc.o[k] * (1.0 - sc.o[k]);
      dc[k] += ds[k] * sc.o[k] * (1.0 - sc.tanh_c[k] * sc.tanh_c[k]);
      dc[k] += da_o[k] * p.p_o[k];  // output peephole reads c_t
      const double d_i = dc[k] * sc.g[k];
      const double d_f = dc[k] * sc.c_prev[k];
      const double d_g = dc[k] * sc.i[k];
      da_i[k] = d_i * sc.i[k] * (1.0 - sc.i[k]);
      da_f[k] = d_f * sc.f[k] * (1.0 - sc.f[k]);
      da_c[k] = d_g * (1.0 - sc.g[k] * sc.g[k]);
    }

    add_outer(dp.U_i, da_i, sc.x);
    add_outer(dp.U_f, da_f, sc.x);
    add_outer(dp.U_c, da_c, sc.x);
    add_outer(dp.U_o, da_o, sc.x);
    add_outer(dp.W_i, da_i, sc.s_prev);
    add_outer(dp.W_f, da_f, sc.s_prev);
    add_outer(dp.W_c, da_c, sc.s_prev);
    add_outer(dp.W_o, da_o, sc.s_prev);
    for (std::size_t k = 0; k < n; ++k) {
      dp.p_i[k] += da_i[k] * sc.c_prev[k];
      dp.p_f[k] += da_f[k] * sc.c_prev[k];
      dp.p_o[k] += da_o[k] * sc.c[k];
      dp.b_i[k] += da_i[k];
      dp.b_f[k] += da_f[k];
      dp.b_c[k] += da_c[k];
      dp.b_o[k] += da_o[k];
    }

    Tensor dx({m});
    add_matvec_t(dx, p.U_i, da_i);
    add_matvec_t(dx, p.U_f, da_f);
    add_matvec_t(dx, p.U_c, da_c);
    add_matvec_t(dx, p.U_o, da_o);
    set_row(g.d_inputs, t, dx);

    Tensor ds_prev({n});
    add_matvec_t(ds_prev, p.W_i, da_i);
    add_matvec_t(ds_prev, p.W_f, da_f);
    add_matvec_t(ds_prev, p.W_c, da_c);
    add_matvec_t(ds_prev, p.W_o, da_o);
    for (std::size_t k = 0; k < n; ++k) {
      const double dc_prev =
          dc[k] * sc.f[k] + da_i[k] * p.p_i[k] + da_f[k] * p.p_f[k];
      dc[k] = dc_prev;
      ds[k] = ds_prev[k];
    }
  }
  return g;
}

SequenceGrads bptt_gru(const RecurrentLayer& layer, const SequenceCache& cache,
                       const Tensor& d_outputs) {
  const GruParams& p = layer.gru;
  const std::size_t T = cache.gru_steps.size();
  const std::size_t n = p.hidden_size(), m = p.input_size();
  SequenceGrads g;
  g.d_inputs = Tensor({T, m});
  g.d_params = RecurrentLayer::zeros(RnnKind::gru, n, m);
  GruParams& dp = g.d_params.gru;

  Tensor ds({n});
  for (std::size_t step = T; step-- > 0;) {
    const GruStepCache& sc = cache.gru_steps[step];
    const std::size_t t =
        cache.direction == Direction::forward ? step : T - 1 - step;
    for (std::size_t k = 0; k < n; ++k) ds[k] += d_outputs[t * n + k];

    Tensor da_r({n}), da_z({n}), da_h({n}), da_h_r({n});
    for (std::size_t k = 0; k < n; ++k) {
      const double d_z = ds[k] * (sc.s_prev[k] - sc.h[k]);
      const double d_h = ds[k] * (1.0 - sc.z[k]);
      da_z[k] = d_z * sc.z[k] * (1.0 - sc.z[k]);
      da_h[k] = d_h * (1.0 - sc.h[k] * sc.h[k]);
      const double d_r = da_h[k] * sc.wr[k];
      da_r[k] = d_r * sc.r[k] * (1.0 - sc.r[k]);
      da_h_r[k] = da_h[k] * sc.r[k];  // grad into W_s * s_prev
    }

    add_outer(dp.U_r, da_r, sc.x);
    add_outer(dp.U_z, da_z, sc.x);
    add_outer(dp.U_s, da_h, sc.x);
    add_outer(dp.W_r, da_r, sc.s_prev);
    add_outer(dp.W_z, da_z, sc.s_prev);
    add_outer(dp.W_s, da_h_r, sc.s_prev);
    for (std::size_t k = 0; k < n; ++k) {
      dp.b_r[k] += da_r[k];
      dp.b_z[k] += da_z[k];
      dp.b_s[k] += da_h[k];
    }

    Tensor dx({m});
    add_matvec_t(dx, p.U_r, da_r);
    add_matvec_t(dx, p.U_z, da_z);
    add_matvec_t(dx, p.U_s, da_h);
    set_row(g.d_inputs, t, dx);

    Tensor ds_prev({n});
    add_matvec_t(ds_prev, p.W_r, da_r);
    add_matvec_t(ds_prev, p.W_z, da_z);
    add_matvec_t(ds_prev, p.W_s, da_h_r);
    for (std::size_t k = 0; k < n; ++k) {
      ds[k] = ds_prev[k] + ds[k] * sc.z[k];
    }
  }
  return g;
}

}  // namespace

SequenceGrads bptt(const RecurrentLayer& layer, const SequenceCache& cache,
                   const Tensor& d_outputs) {
  const std::size_t T = layer.kind == RnnKind::lstm ? cache.lstm_steps.size()
                                                    : cache.gru_steps.size();
  if (T == 0) {
    throw DimError("bptt requires a cache from a completed forward pass");
  }
  if (d_outputs.shape() !=
      std::vector<std::size_t>{T, layer.hidden_size()}) {
    throw DimError("bptt upstream grad shape " + shape_str(d_outputs.shape()) +
                   " does not match cached sequence");
  }
  return layer.kind == RnnKind::lstm ? bptt_lstm(layer, cache, d_outputs)
                                     : bptt_gru(layer, cache, d_outputs);
}

RnnStack::RnnStack(RnnKind kind, std::size_t input_size,
                   const std::vector<std::size_t>& hidden_sizes,
                   bool bidirectional) {
  std::size_t m = input_size;
  for (std::size_t n : hidden_sizes) {
    RnnStackLayer layer;
    layer.bidirectional = bidirectional;
    layer.fwd = RecurrentLayer::zeros(kind, n, m);
    if (bidirectional) layer.bwd = RecurrentLayer::zeros(kind, n, m);
    layers_.push_back(std::move(layer));
    m = bidirectional ? 2 * n : n;
  }
}

std::size_t RnnStack::output_size() const {
  const RnnStackLayer& last = layers_.back();
  return last.bidirectional ? 2 * last.fwd.hidden_size()
                            : last.fwd.hidden_size();
}

std::size_t RnnStack::count() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    total += layer.fwd.count();
    if (layer.bidirectional) total += layer.bwd.count();
  }
  return total;
}

Tensor RnnStack::forward(const Tensor& xs, RnnStackCache* cache) const {
  if (cache) {
    cache->layers.assign(layers_.size(), {});
    cache->steps = xs.extent(0);
  }
  Tensor seq = xs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const RnnStackLayer& layer = layers_[l];
    RnnStackLayerCache* lc = cache ? &cache->layers[l] : nullptr;
    Tensor out_fwd = run_sequence(seq, layer.fwd, Direction::forward,
                                  lc ? &lc->fwd : nullptr);
    if (!layer.bidirectional) {
      if (lc) lc->out_fwd = out_fwd;
      seq = std::move(out_fwd);
      continue;
    }
    Tensor out_bwd = run_sequence(seq, layer.bwd, Direction::backward,
                                  lc ? &lc->bwd : nullptr);
    const std::size_t T = out_fwd.extent(0), n = out_fwd.extent(1);
    Tensor concat({T, 2 * n});
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < n; ++k) {
        concat[t * 2 * n + k] = out_fwd[t * n + k];
        concat[t * 2 * n + n + k] = out_bwd[t * n + k];
      }
    }
    if (lc) {
      lc->out_fwd = std::move(out_fwd);
      lc->out_bwd = std::move(out_bwd);
    }
    seq = std::move(concat);
  }

  // Final feature: each direction's fully-integrated last state. The forward
  // scan ends at the last frame; the backward scan ends at the first.
  const RnnStackLayer& last = layers_.back();
  const std::size_t T = seq.extent(0);
  const std::size_t n = last.fwd.hidden_size();
  if (!last.bidirectional) {
    Tensor final({n});
    for (std::size_t k = 0; k < n; ++k) final[k] = seq[(T - 1) * n + k];
    return final;
  }
  Tensor final({2 * n});
  for (std::size_t k = 0; k < n; ++k) {
    final[k] = seq[(T - 1) * 2 * n + k];      // fwd output at t = T-1
    final[n + k] = seq[0 * 2 * n + n + k];    // bwd output at t = 0
  }
  return final;
}

RnnStack::Grads RnnStack::backward(const RnnStackCache& cache,
                                   const Tensor& d_final) const {
  const std::size_t T = cache.steps;
  Grads g;
  g.d_layers.reserve(layers_.size());
  for (const auto& layer : layers_) {
    RnnStackLayer dl;
    dl.bidirectional = layer.bidirectional;
    dl.fwd = RecurrentLayer::zeros(layer.fwd.kind, layer.fwd.hidden_size(),
                                   layer.fwd.input_size());
    if (layer.bidirectional) {
      dl.bwd = RecurrentLayer::zeros(layer.bwd.kind, layer.bwd.hidden_size(),
                                     layer.bwd.input_size());
    }
    g.d_layers.push_back(std::move(dl));
  }

  // Per-direction upstream grads for the top layer: the readout touches only
  // the forward scan's last step and the backward scan's first (in original
  // time order).
  const RnnStackLayer& last = layers_.back();
  const std::size_t n_last = last.fwd.hidden_size();
  Tensor d_fwd({T, n_last});
  Tensor d_bwd({T, n_last});
  for (std::size_t k = 0; k < n_last; ++k) {
    d_fwd[(T - 1) * n_last + k] = d_final[k];
    if (last.bidirectional) d_bwd[0 * n_last + k] = d_final[n_last + k];
  }

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const RnnStackLayer& layer = layers_[l];
    const RnnStackLayerCache& lc = cache.layers[l];
    SequenceGrads gf = bptt(layer.fwd, lc.fwd, d_fwd);
    g.d_layers[l].fwd = std::move(gf.d_params);
    Tensor d_seq = std::move(gf.d_inputs);
    if (layer.bidirectional) {
      SequenceGrads gb = bptt(layer.bwd, lc.bwd, d_bwd);
      g.d_layers[l].bwd = std::move(gb.d_params);
      for (std::size_t i = 0; i < d_seq.size(); ++i) d_seq[i] += gb.d_inputs[i];
    }
    if (l == 0) {
      g.d_inputs = std::move(d_seq);
      break;
    }
    // Split the concatenated per-step grads into the directions of the layer
    // below.
    const RnnStackLayer& below = layers_[l - 1];
    const std::size_t n = below.fwd.hidden_size();
    d_fwd = Tensor({T, n});
    d_bwd = Tensor({T, n});
    if (below.bidirectional) {
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < n; ++k) {
          d_fwd[t * n + k] = d_seq[t * 2 * n + k];
          d_bwd[t * n + k] = d_seq[t * 2 * n + n + k];
        }
      }
    } else {
      d_fwd = d_seq;
    }
  }
  return g;
}

}  // namespace seiznet
