#pragma once

// Independent reference implementations used as test oracles. Everything here
// is written as plain scalar loops against the published recurrences and
// definitions, deliberately sharing no code with the library internals.

#include <cmath>
#include <vector>

#include "seiznet/recurrent.hpp"
#include "seiznet/scoring.hpp"

namespace seiznet::oracles {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Peephole LSTM:
//   i = sig(U_i x + W_i s_prev + p_i . c_prev + b_i)
//   f = sig(U_f x + W_f s_prev + p_f . c_prev + b_f)
//   c = f . c_prev + i . tanh(U_c x + W_c s_prev + b_c)
//   o = sig(U_o x + W_o s_prev + p_o . c + b_o)
//   s = o . tanh(c)
inline void lstm_scalar_step(const LstmParams& p, const std::vector<double>& x,
                             const std::vector<double>& s_prev,
                             const std::vector<double>& c_prev,
                             std::vector<double>& s, std::vector<double>& c) {
  const std::size_t n = p.hidden_size(), m = p.input_size();
  s.assign(n, 0.0);
  c.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double ai = p.b_i[k], af = p.b_f[k], ac = p.b_c[k];
    for (std::size_t j = 0; j < m; ++j) {
      ai += p.U_i.at({k, j}) * x[j];
      af += p.U_f.at({k, j}) * x[j];
      ac += p.U_c.at({k, j}) * x[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      ai += p.W_i.at({k, j}) * s_prev[j];
      af += p.W_f.at({k, j}) * s_prev[j];
      ac += p.W_c.at({k, j}) * s_prev[j];
    }
    ai += p.p_i[k] * c_prev[k];
    af += p.p_f[k] * c_prev[k];
    c[k] = sig(af) * c_prev[k] + sig(ai) * std::tanh(ac);
  }
  for (std::size_t k = 0; k < n; ++k) {
    double ao = p.b_o[k];
    for (std::size_t j = 0; j < m; ++j) ao += p.U_o.at({k, j}) * x[j];
    for (std::size_t j = 0; j < n; ++j) ao += p.W_o.at({k, j}) * s_prev[j];
    ao += p.p_o[k] * c[k];
    s[k] = sig(ao) * std::tanh(c[k]);
  }
}

// GRU:
//   r = sig(U_r x + W_r s_prev + b_r)
//   z = sig(U_z x + W_z s_prev + b_z)
//   h = tanh(U_s x + r . (W_s s_prev) + b_s)
//   s = z . s_prev + (1 - z) . h
inline void gru_scalar_step(const GruParams& p, const std::vector<double>& x,
                            const std::vector<double>& s_prev,
                            std::vector<double>& s) {
  const std::size_t n = p.hidden_size(), m = p.input_size();
  s.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double ar = p.b_r[k], az = p.b_z[k], ah = p.b_s[k], ws = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      ar += p.U_r.at({k, j}) * x[j];
      az += p.U_z.at({k, j}) * x[j];
      ah += p.U_s.at({k, j}) * x[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      ar += p.W_r.at({k, j}) * s_prev[j];
      az += p.W_z.at({k, j}) * s_prev[j];
      ws += p.W_s.at({k, j}) * s_prev[j];
    }
    const double h = std::tanh(ah + sig(ar) * ws);
    s[k] = sig(az) * s_prev[k] + (1.0 - sig(az)) * h;
  }
}

// Per-epoch comparator: label every epoch midpoint by a linear scan.
inline ScoreReport epoch_comparator(const EventList& ref,
                                    const EventList& hyp) {
  const std::size_t n = ref.n_epochs();
  auto label_of = [](const EventList& list, double t) {
    for (const Event& e : list.events) {
      if (t >= e.start_s && t < e.stop_s) return e.label;
    }
    return Label::bckg;
  };
  ScoreReport r;
  r.total_duration_s = ref.total_duration_s;
  bool prev_fp = false;
  for (std::size_t k = 0; k < n; ++k) {
    const double mid = static_cast<double>(k) + 0.5;
    const bool rs = label_of(ref, mid) == Label::seiz;
    const bool hs = label_of(hyp, mid) == Label::seiz;
    if (rs && hs) {
      ++r.tp;
    } else if (!rs && !hs) {
      ++r.tn;
    } else if (!rs && hs) {
      ++r.fp;
      if (!prev_fp) ++r.fp_event_runs;
    } else {
      ++r.fn;
    }
    prev_fp = !rs && hs;
  }
  return r;
}

// O(n^2) any-overlap checker.
inline OverlapScore overlap_comparator(const EventList& ref,
                                       const EventList& hyp) {
  OverlapScore score;
  std::vector<const Event*> hyp_seiz;
  for (const Event& e : hyp.events) {
    if (e.label == Label::seiz) hyp_seiz.push_back(&e);
  }
  score.hyp_seizures = hyp_seiz.size();
  std::vector<bool> used(hyp_seiz.size(), false);
  for (const Event& r : ref.events) {
    if (r.label != Label::seiz) continue;
    ++score.ref_seizures;
    bool hit = false;
    for (std::size_t j = 0; j < hyp_seiz.size(); ++j) {
      const double lo = std::max(r.start_s, hyp_seiz[j]->start_s);
      const double hi = std::min(r.stop_s, hyp_seiz[j]->stop_s);
      if (hi - lo > 0.0) {
        hit = true;
        used[j] = true;
      }
    }
    hit ? ++score.hits : ++score.misses;
  }
  for (std::size_t j = 0; j < used.size(); ++j) {
    if (!used[j]) ++score.false_alarms;
  }
  return score;
}

}  // namespace seiznet::oracles
