#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dropfam/model/dropout.hpp"
#include "dropfam/numeric/log_ops.hpp"
#include "dropfam/numeric/rng.hpp"
#include "dropfam/numeric/tensor.hpp"

namespace dropfam {

// Single-layer LSTM language model. Gate pre-activations are
//   a_t = b + (s_in(t) * x_t) W_x + (s_hid(t) * h_{t-1}) W_h
// with gate blocks [input, forget, output, candidate] of width H each, so a
// dropped input or hidden unit removes one row of W_x or W_h across all gates.
struct LstmParams {
  std::size_t vocab = 0;
  std::size_t embed = 0;
  std::size_t hidden = 0;
  bool tied = false;  // output projection reuses the embedding (embed == hidden)

  Tensor embedding;  // vocab x embed
  Tensor w_x;        // embed x 4H
  Tensor w_h;        // hidden x 4H
  Tensor b;          // 4H
  Tensor w_out;      // hidden x vocab, empty when tied
  Tensor b_out;      // vocab

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("embedding", self.embedding);
    f("w_x", self.w_x);
    f("w_h", self.w_h);
    f("b", self.b);
    if (!self.tied) f("w_out", self.w_out);
    f("b_out", self.b_out);
  }
  template <class F>
  void for_each_tensor(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_tensor(F&& f) const { visit(*this, f); }

  std::size_t classes() const { return vocab; }

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

inline LstmParams zero_lstm(std::size_t vocab, std::size_t embed, std::size_t hidden, bool tied) {
  if (vocab == 0 || embed == 0 || hidden == 0) throw ConfigError("lstm sizes must be positive");
  if (tied && embed != hidden) throw ConfigError("tied lstm needs embed == hidden");
  LstmParams p;
  p.vocab = vocab;
  p.embed = embed;
  p.hidden = hidden;
  p.tied = tied;
  p.embedding = Tensor({vocab, embed});
  p.w_x = Tensor({embed, 4 * hidden});
  p.w_h = Tensor({hidden, 4 * hidden});
  p.b = Tensor({4 * hidden});
  if (!tied) p.w_out = Tensor({hidden, vocab});
  p.b_out = Tensor({vocab});
  return p;
}

inline LstmParams init_lstm(std::size_t vocab, std::size_t embed, std::size_t hidden, bool tied,
                            const SplitSeed& seed) {
  LstmParams p = zero_lstm(vocab, embed, hidden, tied);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  RandomStream e = seed.child(0).stream();
  for (double& v : p.embedding.values()) v = e.uniform(-0.1, 0.1);
  RandomStream wx = seed.child(1).stream();
  for (double& v : p.w_x.values()) v = wx.uniform(-k, k);
  RandomStream wh = seed.child(2).stream();
  for (double& v : p.w_h.values()) v = wh.uniform(-k, k);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) p.b[j] = 1.0;  // forget gate
  if (!tied) {
    RandomStream wo = seed.child(3).stream();
    for (double& v : p.w_out.values()) v = wo.uniform(-k, k);
  }
  return p;
}

inline SiteLayouts site_layout(const LstmParams& p) {
  return {{"input", p.embed}, {"hidden", p.hidden}};
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmStep {
  std::vector<double> ux, uh;          // row-scaled input and previous hidden state
  std::vector<double> i, f, o, g;      // gate activations
  std::vector<double> c_prev, c, h;
};

inline void check_lstm_inputs(const LstmParams& p, std::span<const int> tokens,
                              const RowScales& scales) {
  if (tokens.empty()) throw ContractError("lstm: sequence must contain at least one token");
  for (int t : tokens)
    if (t < 0 || static_cast<std::size_t>(t) >= p.vocab)
      throw InputError("lstm: token id " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(p.vocab));
  if (scales.size() != 2 || scales[0].rows != p.embed || scales[1].rows != p.hidden)
    throw ContractError("lstm: row scales do not match the model's dropout sites");
  for (const auto& s : scales)
    if (s.steps != 1 && s.steps < tokens.size())
      throw ContractError("lstm: per-step scales are shorter than the sequence");
}

inline std::vector<LstmStep> lstm_run(const LstmParams& p, std::span<const int> tokens,
                                      const RowScales& scales, Tensor* logits) {
  const std::size_t H = p.hidden, D = p.embed, G = 4 * H, V = p.vocab;
  std::vector<LstmStep> steps(tokens.size());
  std::vector<double> h(H, 0.0), c(H, 0.0), a(G);
  if (logits) *logits = Tensor({tokens.size(), V});
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    LstmStep& st = steps[t];
    const auto x = p.embedding.row(static_cast<std::size_t>(tokens[t]));
    st.ux.resize(D);
    st.uh.resize(H);
    for (std::size_t r = 0; r < D; ++r) st.ux[r] = scales[0].at(t, r) * x[r];
    for (std::size_t r = 0; r < H; ++r) st.uh[r] = scales[1].at(t, r) * h[r];

    std::copy(p.b.values().begin(), p.b.values().end(), a.begin());
    for (std::size_t r = 0; r < D; ++r) {
      const double u = st.ux[r];
      if (u == 0.0) continue;
      const double* w = p.w_x.row(r).data();
      for (std::size_t j = 0; j < G; ++j) a[j] += u * w[j];
    }
    for (std::size_t r = 0; r < H; ++r) {
      const double u = st.uh[r];
      if (u == 0.0) continue;
      const double* w = p.w_h.row(r).data();
      for (std::size_t j = 0; j < G; ++j) a[j] += u * w[j];
    }
    st.i.resize(H);
    st.f.resize(H);
    st.o.resize(H);
    st.g.resize(H);
    st.c_prev = c;
    for (std::size_t j = 0; j < H; ++j) {
      st.i[j] = sigmoid(a[j]);
      st.f[j] = sigmoid(a[H + j]);
      st.o[j] = sigmoid(a[2 * H + j]);
      st.g[j] = std::tanh(a[3 * H + j]);
      c[j] = st.f[j] * c[j] + st.i[j] * st.g[j];
      h[j] = st.o[j] * std::tanh(c[j]);
    }
    st.c = c;
    st.h = h;
    if (logits) {
      auto z = logits->row(t);
      for (std::size_t v = 0; v < V; ++v) z[v] = p.b_out[v];
      if (p.tied) {
        for (std::size_t v = 0; v < V; ++v) {
          const auto e = p.embedding.row(v);
          double s = 0.0;
          for (std::size_t j = 0; j < H; ++j) s += h[j] * e[j];
          z[v] += s;
        }
      } else {
        for (std::size_t j = 0; j < H; ++j) {
          const double hj = h[j];
          const double* w = p.w_out.row(j).data();
          for (std::size_t v = 0; v < V; ++v) z[v] += hj * w[v];
        }
      }
    }
  }
  return steps;
}

}  // namespace detail

// Logits (tokens.size() x vocab); row t predicts the token after tokens[t].
inline Tensor lstm_forward(const LstmParams& p, std::span<const int> tokens,
                           const RowScales& scales) {
  detail::check_lstm_inputs(p, tokens, scales);
  Tensor logits;
  detail::lstm_run(p, tokens, scales, &logits);
  return logits;
}

// Full backpropagation through time for one sequence. inputs[t] predicts
// targets[t]. Adds gradients of the summed nll into grad and returns it.
inline double lstm_accumulate_gradient(const LstmParams& p, std::span<const int> inputs,
                                       std::span<const int> targets, const RowScales& scales,
                                       LstmParams& grad) {
  detail::check_lstm_inputs(p, inputs, scales);
  if (targets.size() != inputs.size()) throw ContractError("lstm: targets/inputs length mismatch");
  for (int t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= p.vocab) throw InputError("lstm: target out of vocabulary");

  const std::size_t H = p.hidden, D = p.embed, G = 4 * H, V = p.vocab;
  Tensor logits;
  const auto steps = detail::lstm_run(p, inputs, scales, &logits);

  double nll = 0.0;
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dh(H), da(G), dlogit(V);
  for (std::size_t t = steps.size(); t-- > 0;) {
    const detail::LstmStep& st = steps[t];
    const auto z = logits.row(t);
    const auto lp = log_softmax(z, 1.0);
    const auto y = static_cast<std::size_t>(targets[t]);
    nll -= lp[y];
    for (std::size_t v = 0; v < V; ++v) dlogit[v] = std::exp(lp[v]);
    dlogit[y] -= 1.0;

    for (std::size_t v = 0; v < V; ++v) grad.b_out[v] += dlogit[v];
    dh = dh_next;
    if (p.tied) {
      for (std::size_t v = 0; v < V; ++v) {
        const auto e = p.embedding.row(v);
        auto ge = grad.embedding.row(v);
        for (std::size_t j = 0; j < H; ++j) {
          ge[j] += dlogit[v] * st.h[j];
          dh[j] += dlogit[v] * e[j];
        }
      }
    } else {
      for (std::size_t j = 0; j < H; ++j) {
        const double* w = p.w_out.row(j).data();
        double* gw = grad.w_out.row(j).data();
        double s = 0.0;
        for (std::size_t v = 0; v < V; ++v) {
          gw[v] += st.h[j] * dlogit[v];
          s += w[v] * dlogit[v];
        }
        dh[j] += s;
      }
    }

    for (std::size_t j = 0; j < H; ++j) {
      const double tc = std::tanh(st.c[j]);
      const double d_o = dh[j] * tc;
      const double dc = dh[j] * st.o[j] * (1.0 - tc * tc) + dc_next[j];
      const double d_i = dc * st.g[j];
      const double d_g = dc * st.i[j];
      const double d_f = dc * st.c_prev[j];
      dc_next[j] = dc * st.f[j];
      da[j] = d_i * st.i[j] * (1.0 - st.i[j]);
      da[H + j] = d_f * st.f[j] * (1.0 - st.f[j]);
      da[2 * H + j] = d_o * st.o[j] * (1.0 - st.o[j]);
      da[3 * H + j] = d_g * (1.0 - st.g[j] * st.g[j]);
    }
    for (std::size_t j = 0; j < G; ++j) grad.b[j] += da[j];

    auto ge = grad.embedding.row(static_cast<std::size_t>(inputs[t]));
    for (std::size_t r = 0; r < D; ++r) {
      const double* w = p.w_x.row(r).data();
      double* gw = grad.w_x.row(r).data();
      const double u = st.ux[r];
      double s = 0.0;
      for (std::size_t j = 0; j < G; ++j) {
        gw[j] += u * da[j];
        s += w[j] * da[j];
      }
      ge[r] += scales[0].at(t, r) * s;
    }
    for (std::size_t r = 0; r < H; ++r) {
      const double* w = p.w_h.row(r).data();
      double* gw = grad.w_h.row(r).data();
      const double u = st.uh[r];
      double s = 0.0;
      for (std::size_t j = 0; j < G; ++j) {
        gw[j] += u * da[j];
        s += w[j] * da[j];
      }
      dh_next[r] = scales[1].at(t, r) * s;
    }
  }
  return nll;
}

}  // namespace dropfam
