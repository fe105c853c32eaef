#pragma once
// U-net-like fully convolutional encoder-decoder with skip connections and
// exact reverse-mode gradients, built directly on the conv kernels — no
// external learning framework.
//
// Encoder stage: [conv3x3, (norm), relu] x2, then 2x2 max pool. The decoder
// mirrors the encoder with nearest-neighbour 2x upsampling and concatenates
// the stored encoder features at the deepest `skip_levels` stages. A final
// 3x3 conv + sigmoid produces the one-channel prediction.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucigrid/conv.hpp"
#include "hallucigrid/rng.hpp"
#include "hallucigrid/tensor.hpp"

namespace hg {

struct NetConfig {
  int in_channels = 1;
  int depth = 4;          // number of pooling stages
  int base_channels = 16; // doubled at each stage
  int skip_levels = 3;    // skip connections at the deepest N stages
  bool norm = true;

  void validate() const {
    if (in_channels < 1) throw ConfigError("NetConfig: in_channels must be >= 1");
    if (depth < 1 || depth > 8) throw ConfigError("NetConfig: depth must be in [1,8]");
    if (base_channels < 1) throw ConfigError("NetConfig: base_channels must be >= 1");
    if (skip_levels < 0 || skip_levels > depth)
      throw ConfigError("NetConfig: skip_levels must be in [0, depth]");
  }
  int stage_channels(int stage) const { return base_channels << stage; }
  bool operator==(const NetConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const NetConfig& c) {
  j = nlohmann::json{{"in_channels", c.in_channels},
                     {"depth", c.depth},
                     {"base_channels", c.base_channels},
                     {"skip_levels", c.skip_levels},
                     {"norm", c.norm}};
}
inline void from_json(const nlohmann::json& j, NetConfig& c) {
  c.in_channels = j.value("in_channels", 1);
  c.depth = j.value("depth", 4);
  c.base_channels = j.value("base_channels", 16);
  c.skip_levels = j.value("skip_levels", 3);
  c.norm = j.value("norm", true);
}

enum class Mode { Train, Eval };

enum class OpKind : uint8_t { Conv, Norm, Relu, Pool, Upsample, Concat, Sigmoid };

struct OpDesc {
  OpKind kind;
  int in_ch = 0;
  int out_ch = 0;
  size_t w_off = 0;      // conv weights (out*in*9) / norm gamma (out)
  size_t b_off = 0;      // conv bias (out) / norm beta (out)
  size_t s_off = 0;      // norm running mean offset in state (variance follows)
  int concat_src = -1;   // op index whose output is appended by a Concat
  std::string name;
};

template <typename T>
struct Tape {
  Mode mode = Mode::Eval;
  Tensor4<T> input;
  std::vector<Tensor4<T>> acts;                 // output of each op
  std::vector<std::vector<uint8_t>> pool_argmax;  // per op (empty unless pool)
  std::vector<std::vector<T>> norm_mean;          // per op, per channel (train stats)
  std::vector<std::vector<T>> norm_istd;
  size_t param_count = 0;

  const Tensor4<T>& prediction() const { return acts.back(); }
  // logits feeding the final sigmoid
  const Tensor4<T>& logits() const { return acts[acts.size() - 2]; }
};

template <typename T>
class Network {
 public:
  explicit Network(const NetConfig& config) : cfg_(config) {
    cfg_.validate();
    build();
  }

  const NetConfig& config() const { return cfg_; }
  const std::vector<OpDesc>& ops() const { return ops_; }
  size_t param_count() const { return param_count_; }
  size_t state_count() const { return state_count_; }

  // Uniform fan-in init for conv kernels, zero biases, identity norm. A pure
  // function of the seed.
  std::vector<T> init_params(uint64_t seed) const {
    std::vector<T> p(param_count_);
    Rng rng(Rng::derive_seed(seed, "net-init"));
    for (const OpDesc& op : ops_) {
      if (op.kind == OpKind::Conv) {
        const double a = std::sqrt(1.0 / (static_cast<double>(op.in_ch) * 9.0));
        const size_t n = static_cast<size_t>(op.out_ch) * op.in_ch * 9;
        for (size_t i = 0; i < n; ++i) p[op.w_off + i] = static_cast<T>(rng.uniform(-a, a));
        for (int i = 0; i < op.out_ch; ++i) p[op.b_off + i] = T(0);
      } else if (op.kind == OpKind::Norm) {
        for (int i = 0; i < op.out_ch; ++i) {
          p[op.w_off + i] = T(1);
          p[op.b_off + i] = T(0);
        }
      }
    }
    return p;
  }

  std::vector<T> init_state() const {
    std::vector<T> s(state_count_, T(0));
    for (const OpDesc& op : ops_)
      if (op.kind == OpKind::Norm)
        for (int i = 0; i < op.out_ch; ++i) s[op.s_off + op.out_ch + i] = T(1);  // variance
    return s;
  }

  // Fully randomized parameters (biases included) for gradient checks: keeps
  // every pre-activation away from the relu kink and pool ties, where finite
  // differences are ill-defined.
  std::vector<T> random_params(uint64_t seed) const {
    std::vector<T> p(param_count_);
    Rng rng(Rng::derive_seed(seed, "net-random"));
    for (const OpDesc& op : ops_) {
      if (op.kind == OpKind::Conv) {
        const double a = std::sqrt(1.0 / (static_cast<double>(op.in_ch) * 9.0));
        const size_t n = static_cast<size_t>(op.out_ch) * op.in_ch * 9;
        for (size_t i = 0; i < n; ++i) p[op.w_off + i] = static_cast<T>(rng.uniform(-a, a));
        for (int i = 0; i < op.out_ch; ++i)
          p[op.b_off + i] = static_cast<T>(rng.uniform(-0.1, 0.1));
      } else if (op.kind == OpKind::Norm) {
        for (int i = 0; i < op.out_ch; ++i) {
          p[op.w_off + i] = static_cast<T>(1.0 + rng.uniform(-0.2, 0.2));
          p[op.b_off + i] = static_cast<T>(rng.uniform(-0.2, 0.2));
        }
      }
    }
    return p;
  }

  std::string param_name(size_t flat) const {
    for (const OpDesc& op : ops_) {
      if (op.kind != OpKind::Conv && op.kind != OpKind::Norm) continue;
      const size_t wn = op.kind == OpKind::Conv ? static_cast<size_t>(op.out_ch) * op.in_ch * 9
                                                : static_cast<size_t>(op.out_ch);
      if (flat >= op.w_off && flat < op.w_off + wn)
        return op.name + (op.kind == OpKind::Conv ? ".weight[" : ".gamma[") +
               std::to_string(flat - op.w_off) + "]";
      if (flat >= op.b_off && flat < op.b_off + op.out_ch)
        return op.name + (op.kind == OpKind::Conv ? ".bias[" : ".beta[") +
               std::to_string(flat - op.b_off) + "]";
    }
    return "param[" + std::to_string(flat) + "]";
  }

  // ---------------------------------------------------------------------
  // forward
  // ---------------------------------------------------------------------
  const Tensor4<T>& forward(std::span<const T> params, std::vector<T>& state,
                            const Tensor4<T>& input, Mode mode, Tape<T>& tape) const {
    if (params.size() != param_count_) throw DataError("forward: parameter count mismatch");
    if (state.size() != state_count_) throw DataError("forward: state count mismatch");
    if (input.c != cfg_.in_channels)
      throw DataError("forward: input has " + std::to_string(input.c) + " channels, expected " +
                      std::to_string(cfg_.in_channels));
    const int div = 1 << cfg_.depth;
    if (input.h % div != 0 || input.w % div != 0 || input.h / div < 1 || input.w / div < 1)
      throw DataError("forward: spatial dims " + std::to_string(input.h) + "x" +
                      std::to_string(input.w) + " not divisible by 2^depth");

    tape.mode = mode;
    tape.input = input;
    tape.param_count = param_count_;
    tape.acts.assign(ops_.size(), {});
    tape.pool_argmax.assign(ops_.size(), {});
    tape.norm_mean.assign(ops_.size(), {});
    tape.norm_istd.assign(ops_.size(), {});

    for (size_t i = 0; i < ops_.size(); ++i) {
      const Tensor4<T>& x = i == 0 ? input : tape.acts[i - 1];
      run_forward(i, params, state, x, mode, tape);
    }
    return tape.acts.back();
  }

  // ---------------------------------------------------------------------
  // backward from d(loss)/d(prediction)
  // ---------------------------------------------------------------------
  void backward(const Tape<T>& tape, std::span<const T> params, const Tensor4<T>& dpred,
                std::span<T> grads) const {
    if (!dpred.same_shape(tape.prediction()))
      throw DataError("backward: gradient shape " + dpred.shape_str() +
                      " does not match prediction " + tape.prediction().shape_str());
    backward_impl(tape, params, dpred, ops_.size() - 1, grads);
  }

  // Backward from d(loss)/d(logits): skips the sigmoid op. Loss heads that
  // fuse sigmoid+BCE stay finite even when the float sigmoid saturates.
  void backward_from_logits(const Tape<T>& tape, std::span<const T> params,
                            const Tensor4<T>& dlogits, std::span<T> grads) const {
    if (!dlogits.same_shape(tape.logits()))
      throw DataError("backward_from_logits: gradient shape mismatch");
    backward_impl(tape, params, dlogits, ops_.size() - 2, grads);
  }

 private:
  void backward_impl(const Tape<T>& tape, std::span<const T> params, const Tensor4<T>& dtop,
                     size_t top, std::span<T> grads) const {
    if (tape.acts.size() != ops_.size() || tape.param_count != param_count_)
      throw DataError("backward: tape does not match this network");
    if (grads.size() != param_count_) throw DataError("backward: grads buffer size mismatch");

    std::vector<Tensor4<T>> dacts(ops_.size());
    for (size_t i = 0; i < ops_.size(); ++i) {
      const auto& a = tape.acts[i];
      dacts[i] = Tensor4<T>(a.n, a.c, a.h, a.w, T(0));
    }
    Tensor4<T> dinput(tape.input.n, tape.input.c, tape.input.h, tape.input.w, T(0));
    for (size_t j = 0; j < dtop.size(); ++j) dacts[top].v[j] += dtop.v[j];

    for (size_t ii = top + 1; ii-- > 0;) {
      const Tensor4<T>& x = ii == 0 ? tape.input : tape.acts[ii - 1];
      Tensor4<T>& dx = ii == 0 ? dinput : dacts[ii - 1];
      run_backward(ii, params, x, dx, dacts, tape, grads);
    }
  }

  void build() {
    ops_.clear();
    param_count_ = 0;
    state_count_ = 0;
    encoder_feature_op_.assign(cfg_.depth, -1);

    int ch = cfg_.in_channels;
    for (int s = 0; s < cfg_.depth; ++s) {
      const int c = cfg_.stage_channels(s);
      add_conv(ch, c, "enc" + std::to_string(s) + ".conv1");
      add_norm_relu(c, "enc" + std::to_string(s));
      add_conv(c, c, "enc" + std::to_string(s) + ".conv2");
      add_norm_relu(c, "enc" + std::to_string(s), 2);
      encoder_feature_op_[s] = static_cast<int>(ops_.size()) - 1;
      add_simple(OpKind::Pool, c, "enc" + std::to_string(s) + ".pool");
      ch = c;
    }
    for (int u = cfg_.depth - 1; u >= 0; --u) {
      add_simple(OpKind::Upsample, ch, "dec" + std::to_string(u) + ".up");
      if (u >= cfg_.depth - cfg_.skip_levels) {
        OpDesc op;
        op.kind = OpKind::Concat;
        op.in_ch = ch;
        op.concat_src = encoder_feature_op_[u];
        op.out_ch = ch + cfg_.stage_channels(u);
        op.name = "dec" + std::to_string(u) + ".skip";
        ops_.push_back(op);
        ch = op.out_ch;
      }
      const int c = cfg_.stage_channels(u);
      add_conv(ch, c, "dec" + std::to_string(u) + ".conv1");
      add_norm_relu(c, "dec" + std::to_string(u));
      add_conv(c, c, "dec" + std::to_string(u) + ".conv2");
      add_norm_relu(c, "dec" + std::to_string(u), 2);
      ch = c;
    }
    add_conv(ch, 1, "final.conv");
    add_simple(OpKind::Sigmoid, 1, "final.sigmoid");
  }

  void add_conv(int ci, int co, const std::string& name) {
    OpDesc op;
    op.kind = OpKind::Conv;
    op.in_ch = ci;
    op.out_ch = co;
    op.w_off = param_count_;
    param_count_ += static_cast<size_t>(co) * ci * 9;
    op.b_off = param_count_;
    param_count_ += co;
    op.name = name;
    ops_.push_back(op);
  }

  void add_norm_relu(int c, const std::string& stage, int which = 1) {
    if (cfg_.norm) {
      OpDesc op;
      op.kind = OpKind::Norm;
      op.in_ch = c;
      op.out_ch = c;
      op.w_off = param_count_;   // gamma
      param_count_ += c;
      op.b_off = param_count_;   // beta
      param_count_ += c;
      op.s_off = state_count_;   // running mean, then running variance
      state_count_ += 2 * static_cast<size_t>(c);
      op.name = stage + ".norm" + std::to_string(which);
      ops_.push_back(op);
    }
    add_simple(OpKind::Relu, c, stage + ".relu" + std::to_string(which));
  }

  void add_simple(OpKind kind, int c, const std::string& name) {
    OpDesc op;
    op.kind = kind;
    op.in_ch = c;
    op.out_ch = c;
    op.name = name;
    ops_.push_back(op);
  }

  // -- forward ops --------------------------------------------------------

  void run_forward(size_t i, std::span<const T> params, std::vector<T>& state,
                   const Tensor4<T>& x, Mode mode, Tape<T>& tape) const {
    const OpDesc& op = ops_[i];
    switch (op.kind) {
      case OpKind::Conv: {
        Tensor4<T> y(x.n, op.out_ch, x.h, x.w);
        for (int ni = 0; ni < x.n; ++ni)
          conv::conv3x3<T>(x.plane(ni, 0), op.in_ch, x.h, x.w, params.data() + op.w_off,
                           params.data() + op.b_off, y.plane(ni, 0), op.out_ch);
        tape.acts[i] = std::move(y);
        break;
      }
      case OpKind::Norm: {
        tape.acts[i] = norm_forward(op, params, state, x, mode, tape.norm_mean[i],
                                    tape.norm_istd[i]);
        break;
      }
      case OpKind::Relu: {
        Tensor4<T> y = x;
        for (T& v : y.v) v = v > T(0) ? v : T(0);
        tape.acts[i] = std::move(y);
        break;
      }
      case OpKind::Pool: {
        if (x.h % 2 != 0 || x.w % 2 != 0) throw DataError("pool: odd spatial dims");
        Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2);
        auto& arg = tape.pool_argmax[i];
        arg.resize(y.size());
        size_t o = 0;
        for (int ni = 0; ni < x.n; ++ni)
          for (int ci = 0; ci < x.c; ++ci) {
            const T* xp = x.plane(ni, ci);
            T* yp = y.plane(ni, ci);
            for (int yy = 0; yy < y.h; ++yy)
              for (int xx = 0; xx < y.w; ++xx, ++o) {
                const T* cell = xp + static_cast<size_t>(2 * yy) * x.w + 2 * xx;
                // row-major scan; first occurrence wins ties
                T best = cell[0];
                uint8_t bi = 0;
                if (cell[1] > best) { best = cell[1]; bi = 1; }
                if (cell[x.w] > best) { best = cell[x.w]; bi = 2; }
                if (cell[x.w + 1] > best) { best = cell[x.w + 1]; bi = 3; }
                yp[static_cast<size_t>(yy) * y.w + xx] = best;
                arg[o] = bi;
              }
          }
        tape.acts[i] = std::move(y);
        break;
      }
      case OpKind::Upsample: {
        Tensor4<T> y(x.n, x.c, x.h * 2, x.w * 2);
        for (int ni = 0; ni < x.n; ++ni)
          for (int ci = 0; ci < x.c; ++ci) {
            const T* xp = x.plane(ni, ci);
            T* yp = y.plane(ni, ci);
            for (int yy = 0; yy < y.h; ++yy) {
              const T* src = xp + static_cast<size_t>(yy / 2) * x.w;
              T* dst = yp + static_cast<size_t>(yy) * y.w;
              for (int xx = 0; xx < y.w; ++xx) dst[xx] = src[xx / 2];
            }
          }
        tape.acts[i] = std::move(y);
        break;
      }
      case OpKind::Concat: {
        const Tensor4<T>& skip = tape.acts[op.concat_src];
        if (skip.h != x.h || skip.w != x.w)
          throw DataError("concat: resolution mismatch " + skip.shape_str() + " vs " +
                          x.shape_str());
        Tensor4<T> y(x.n, x.c + skip.c, x.h, x.w);
        for (int ni = 0; ni < x.n; ++ni) {
          std::copy(x.plane(ni, 0), x.plane(ni, 0) + x.plane_size() * x.c, y.plane(ni, 0));
          std::copy(skip.plane(ni, 0), skip.plane(ni, 0) + skip.plane_size() * skip.c,
                    y.plane(ni, x.c));
        }
        tape.acts[i] = std::move(y);
        break;
      }
      case OpKind::Sigmoid: {
        Tensor4<T> y = x;
        for (T& v : y.v) v = T(1) / (T(1) + std::exp(-v));
        tape.acts[i] = std::move(y);
        break;
      }
    }
  }

  Tensor4<T> norm_forward(const OpDesc& op, std::span<const T> params, std::vector<T>& state,
                          const Tensor4<T>& x, Mode mode, std::vector<T>& out_mean,
                          std::vector<T>& out_istd) const {
    constexpr double kEps = 1e-5;
    constexpr double kMomentum = 0.1;
    const int C = op.out_ch;
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    out_mean.resize(C);
    out_istd.resize(C);
    const size_t plane = x.plane_size();
    const double m = static_cast<double>(x.n) * plane;
    for (int ci = 0; ci < C; ++ci) {
      double mean, istd;
      if (mode == Mode::Train) {
        double sum = 0.0, sq = 0.0;
        for (int ni = 0; ni < x.n; ++ni) {
          const T* xp = x.plane(ni, ci);
          for (size_t j = 0; j < plane; ++j) {
            sum += xp[j];
            sq += static_cast<double>(xp[j]) * xp[j];
          }
        }
        mean = sum / m;
        const double var = std::max(0.0, sq / m - mean * mean);
        istd = 1.0 / std::sqrt(var + kEps);
        const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
        T& rm = state[op.s_off + ci];
        T& rv = state[op.s_off + C + ci];
        rm = static_cast<T>((1.0 - kMomentum) * rm + kMomentum * mean);
        rv = static_cast<T>((1.0 - kMomentum) * rv + kMomentum * unbiased);
      } else {
        mean = state[op.s_off + ci];
        istd = 1.0 / std::sqrt(static_cast<double>(state[op.s_off + C + ci]) + kEps);
      }
      out_mean[ci] = static_cast<T>(mean);
      out_istd[ci] = static_cast<T>(istd);
      const T g = params[op.w_off + ci], b = params[op.b_off + ci];
      const T scale = static_cast<T>(g * istd);
      const T shift = static_cast<T>(b - g * istd * mean);
      for (int ni = 0; ni < x.n; ++ni) {
        const T* xp = x.plane(ni, ci);
        T* yp = y.plane(ni, ci);
        for (size_t j = 0; j < plane; ++j) yp[j] = scale * xp[j] + shift;
      }
    }
    return y;
  }

  // -- backward ops -------------------------------------------------------

  void run_backward(size_t i, std::span<const T> params, const Tensor4<T>& x, Tensor4<T>& dx,
                    std::vector<Tensor4<T>>& dacts, const Tape<T>& tape,
                    std::span<T> grads) const {
    const OpDesc& op = ops_[i];
    const Tensor4<T>& dy = dacts[i];
    switch (op.kind) {
      case OpKind::Conv: {
        std::vector<T> scratch;
        for (int ni = 0; ni < x.n; ++ni)
          conv::conv3x3_backward_input<T>(dy.plane(ni, 0), op.out_ch, x.h, x.w,
                                          params.data() + op.w_off, dx.plane(ni, 0), op.in_ch,
                                          scratch);
        for (int ni = 0; ni < x.n; ++ni)
          conv::conv3x3_backward_weights<T>(x.plane(ni, 0), op.in_ch, dy.plane(ni, 0),
                                            op.out_ch, x.h, x.w, grads.data() + op.w_off,
                                            grads.data() + op.b_off, scratch);
        break;
      }
      case OpKind::Norm:
        norm_backward(op, params, x, dy, dx, tape.norm_mean[i], tape.norm_istd[i], tape.mode,
                      grads);
        break;
      case OpKind::Relu: {
        for (size_t j = 0; j < dy.size(); ++j)
          if (x.v[j] > T(0)) dx.v[j] += dy.v[j];
        break;
      }
      case OpKind::Pool: {
        const auto& arg = tape.pool_argmax[i];
        size_t o = 0;
        const Tensor4<T>& y = tape.acts[i];
        for (int ni = 0; ni < x.n; ++ni)
          for (int ci = 0; ci < x.c; ++ci) {
            T* dxp = dx.plane(ni, ci);
            const T* dyp = dy.plane(ni, ci);
            for (int yy = 0; yy < y.h; ++yy)
              for (int xx = 0; xx < y.w; ++xx, ++o) {
                const uint8_t a = arg[o];
                const size_t base =
                    static_cast<size_t>(2 * yy + (a >> 1)) * x.w + 2 * xx + (a & 1);
                dxp[base] += dyp[static_cast<size_t>(yy) * y.w + xx];
              }
          }
        break;
      }
      case OpKind::Upsample: {
        const Tensor4<T>& y = tape.acts[i];
        for (int ni = 0; ni < x.n; ++ni)
          for (int ci = 0; ci < x.c; ++ci) {
            T* dxp = dx.plane(ni, ci);
            const T* dyp = dy.plane(ni, ci);
            for (int yy = 0; yy < y.h; ++yy) {
              T* dst = dxp + static_cast<size_t>(yy / 2) * x.w;
              const T* src = dyp + static_cast<size_t>(yy) * y.w;
              for (int xx = 0; xx < y.w; ++xx) dst[xx / 2] += src[xx];
            }
          }
        break;
      }
      case OpKind::Concat: {
        Tensor4<T>& dskip = dacts[op.concat_src];
        for (int ni = 0; ni < x.n; ++ni) {
          const T* dyp = dy.plane(ni, 0);
          T* dxp = dx.plane(ni, 0);
          for (size_t j = 0; j < x.plane_size() * x.c; ++j) dxp[j] += dyp[j];
          const T* dys = dy.plane(ni, x.c);
          T* dsp = dskip.plane(ni, 0);
          for (size_t j = 0; j < dskip.plane_size() * dskip.c; ++j) dsp[j] += dys[j];
        }
        break;
      }
      case OpKind::Sigmoid: {
        const Tensor4<T>& y = tape.acts[i];
        for (size_t j = 0; j < dy.size(); ++j) dx.v[j] += dy.v[j] * y.v[j] * (T(1) - y.v[j]);
        break;
      }
    }
  }

  void norm_backward(const OpDesc& op, std::span<const T> params, const Tensor4<T>& x,
                     const Tensor4<T>& dy, Tensor4<T>& dx, const std::vector<T>& mean,
                     const std::vector<T>& istd, Mode mode, std::span<T> grads) const {
    const int C = op.out_ch;
    const size_t plane = x.plane_size();
    const double m = static_cast<double>(x.n) * plane;
    for (int ci = 0; ci < C; ++ci) {
      const double mu = mean[ci], is = istd[ci];
      const double g = params[op.w_off + ci];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int ni = 0; ni < x.n; ++ni) {
        const T* xp = x.plane(ni, ci);
        const T* dyp = dy.plane(ni, ci);
        for (size_t j = 0; j < plane; ++j) {
          sum_dy += dyp[j];
          sum_dy_xhat += static_cast<double>(dyp[j]) * ((xp[j] - mu) * is);
        }
      }
      grads[op.b_off + ci] += static_cast<T>(sum_dy);
      grads[op.w_off + ci] += static_cast<T>(sum_dy_xhat);
      if (mode == Mode::Train) {
        const double k = g * is / m;
        for (int ni = 0; ni < x.n; ++ni) {
          const T* xp = x.plane(ni, ci);
          const T* dyp = dy.plane(ni, ci);
          T* dxp = dx.plane(ni, ci);
          for (size_t j = 0; j < plane; ++j) {
            const double xhat = (xp[j] - mu) * is;
            dxp[j] += static_cast<T>(k * (m * dyp[j] - sum_dy - xhat * sum_dy_xhat));
          }
        }
      } else {
        const double k = g * is;
        for (int ni = 0; ni < x.n; ++ni) {
          const T* dyp = dy.plane(ni, ci);
          T* dxp = dx.plane(ni, ci);
          for (size_t j = 0; j < plane; ++j) dxp[j] += static_cast<T>(k * dyp[j]);
        }
      }
    }
  }

  NetConfig cfg_;
  std::vector<OpDesc> ops_;
  std::vector<int> encoder_feature_op_;
  size_t param_count_ = 0;
  size_t state_count_ = 0;
};

// Convenience wrapper matching the one-shot calling convention.
template <typename T>
std::pair<Tensor4<T>, Tape<T>> forward(std::span<const T> params, const NetConfig& config,
                                       std::vector<T>& state, const Tensor4<T>& input,
                                       Mode mode) {
  Network<T> net(config);
  Tape<T> tape;
  Tensor4<T> pred = net.forward(params, state, input, mode, tape);
  return {std::move(pred), std::move(tape)};
}

}  // namespace hg
