// Minimal CNN engine: 3x(conv3x3 -> relu -> maxpool2x2) over one input
// channel, flatten, optional metadata concatenation, 3 dense layers,
// softmax, sparse categorical cross-entropy, and bias-corrected Adam.
//
// Templated on scalar so training runs in float while gradient checks run
// in double. Convolution is im2col + GEMM; all iteration orders are fixed,
// making every result reproducible bit-for-bit for a given seed.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "mrseq/common.hpp"

namespace mrseq::nn {

enum class Mode : std::uint32_t { ImageOnly = 0, Fusion = 1 };

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Maps = std::vector<Mat<S>>;  // feature maps, one H x W matrix per channel

struct CnnConfig {
  int image_size = 64;  // must be divisible by 8 (three 2x2 pools)
  std::array<int, 3> conv_channels{8, 16, 32};
  std::array<int, 2> dense_widths{128, 64};
  int n_classes = 4;
  int metadata_dim = 10;
  Mode mode = Mode::Fusion;

  int pooled_size() const { return image_size / 8; }
  int flatten_dim() const { return conv_channels[2] * pooled_size() * pooled_size(); }
  int dense_input_dim() const {
    return flatten_dim() + (mode == Mode::Fusion ? metadata_dim : 0);
  }
  bool operator==(const CnnConfig&) const = default;
};

// Small 8x8-input configuration for finite-difference checks: every
// parameter can be perturbed at negligible cost.
inline CnnConfig tiny_config(Mode mode) {
  CnnConfig c;
  c.image_size = 8;
  c.conv_channels = {2, 3, 4};
  c.dense_widths = {8, 6};
  c.mode = mode;
  return c;
}

template <class S>
struct FusionCnn {
  CnnConfig config;
  std::uint64_t seed = 0;
  std::array<Mat<S>, 3> conv_w;  // (C_out) x (C_in*9)
  std::array<Mat<S>, 3> conv_b;  // C_out x 1
  std::array<Mat<S>, 3> dense_w;
  std::array<Mat<S>, 3> dense_b;

  // Fixed parameter order used by Adam, serialization, and gradient checks.
  std::vector<Mat<S>*> params() {
    return {&conv_w[0], &conv_b[0], &conv_w[1], &conv_b[1], &conv_w[2], &conv_b[2],
            &dense_w[0], &dense_b[0], &dense_w[1], &dense_b[1], &dense_w[2], &dense_b[2]};
  }
  std::vector<const Mat<S>*> params() const {
    return {&conv_w[0], &conv_b[0], &conv_w[1], &conv_b[1], &conv_w[2], &conv_b[2],
            &dense_w[0], &dense_b[0], &dense_w[1], &dense_b[1], &dense_w[2], &dense_b[2]};
  }
  static std::vector<std::string> param_names() {
    return {"conv1_w", "conv1_b", "conv2_w", "conv2_b", "conv3_w", "conv3_b",
            "dense1_w", "dense1_b", "dense2_w", "dense2_b", "dense3_w", "dense3_b"};
  }
};

// He-uniform weights (limit sqrt(6/fan_in)), zero biases, one RNG stream in
// parameter order so layouts never perturb each other's draws.
template <class S>
FusionCnn<S> make_model(const CnnConfig& config, std::uint64_t seed) {
  FusionCnn<S> model;
  model.config = config;
  model.seed = seed;
  SeededRng rng(SeededRng::derive(seed, 0x6d6f64656c));  // "model" stream

  auto he = [&](Mat<S>& w, int rows, int cols, int fan_in) {
    w.resize(rows, cols);
    double limit = std::sqrt(6.0 / fan_in);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = static_cast<S>(rng.uniform(-limit, limit));
  };

  int c_in = 1;
  for (int i = 0; i < 3; ++i) {
    int c_out = config.conv_channels[static_cast<std::size_t>(i)];
    he(model.conv_w[static_cast<std::size_t>(i)], c_out, c_in * 9, c_in * 9);
    model.conv_b[static_cast<std::size_t>(i)] = Mat<S>::Zero(c_out, 1);
    c_in = c_out;
  }
  std::array<int, 3> dense_out{config.dense_widths[0], config.dense_widths[1], config.n_classes};
  int in_dim = config.dense_input_dim();
  for (int i = 0; i < 3; ++i) {
    he(model.dense_w[static_cast<std::size_t>(i)], dense_out[static_cast<std::size_t>(i)], in_dim,
       in_dim);
    model.dense_b[static_cast<std::size_t>(i)] =
        Mat<S>::Zero(dense_out[static_cast<std::size_t>(i)], 1);
    in_dim = dense_out[static_cast<std::size_t>(i)];
  }
  return model;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

// Patch matrix for 3x3 kernels, stride 1, zero pad 1: row ch*9 + ky*3 + kx,
// column y*W + x.
template <class S>
Mat<S> im2col3x3(const Maps<S>& in) {
  const int channels = static_cast<int>(in.size());
  const int h = static_cast<int>(in[0].rows());
  const int w = static_cast<int>(in[0].cols());
  Mat<S> m = Mat<S>::Zero(channels * 9, h * w);
  for (int ch = 0; ch < channels; ++ch) {
    const Mat<S>& src = in[static_cast<std::size_t>(ch)];
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        int row = ch * 9 + ky * 3 + kx;
        for (int y = 0; y < h; ++y) {
          int iy = y + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int x = 0; x < w; ++x) {
            int ix = x + kx - 1;
            if (ix < 0 || ix >= w) continue;
            m(row, y * w + x) = src(iy, ix);
          }
        }
      }
  }
  return m;
}

// Adjoint of im2col3x3: scatters patch-matrix gradients back to image grads.
template <class S>
Maps<S> col2im3x3(const Mat<S>& m, int channels, int h, int w) {
  Maps<S> out(static_cast<std::size_t>(channels), Mat<S>::Zero(h, w));
  for (int ch = 0; ch < channels; ++ch) {
    Mat<S>& dst = out[static_cast<std::size_t>(ch)];
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        int row = ch * 9 + ky * 3 + kx;
        for (int y = 0; y < h; ++y) {
          int iy = y + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int x = 0; x < w; ++x) {
            int ix = x + kx - 1;
            if (ix < 0 || ix >= w) continue;
            dst(iy, ix) += m(row, y * w + x);
          }
        }
      }
  }
  return out;
}

template <class S>
struct PoolResult {
  Maps<S> out;
  // Flattened input index (y*W + x) of the max per output cell; ties go to
  // the first maximum in row-major window order.
  std::vector<Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> argmax;
};

template <class S>
PoolResult<S> maxpool2x2(const Maps<S>& in) {
  PoolResult<S> res;
  for (const Mat<S>& src : in) {
    const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
    const int oh = h / 2, ow = w / 2;
    Mat<S> out(oh, ow);
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> amax(oh, ow);
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        S best{};
        int best_idx = -1;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            int y = oy * 2 + dy, x = ox * 2 + dx;
            S v = src(y, x);
            if (best_idx < 0 || v > best) {
              best = v;
              best_idx = y * w + x;
            }
          }
        out(oy, ox) = best;
        amax(oy, ox) = best_idx;
      }
    res.out.push_back(std::move(out));
    res.argmax.push_back(std::move(amax));
  }
  return res;
}

template <class S>
struct ForwardCache {
  CnnConfig config;  // checked by backward against the model
  Maps<S> input;     // single input channel
  std::array<Mat<S>, 3> im2col;
  std::array<Maps<S>, 3> conv_pre;  // before relu
  std::array<Maps<S>, 3> relu_out;
  std::array<PoolResult<S>, 3> pool;
  Vec<S> dense_in;  // flatten (+ metadata in fusion mode)
  std::array<Vec<S>, 3> dense_pre;
  std::array<Vec<S>, 2> dense_act;
  Vec<S> probs;
};

template <class S>
Vec<S> softmax(const Vec<S>& logits) {
  S m = logits.maxCoeff();
  Vec<S> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

template <class S>
ForwardCache<S> forward(const FusionCnn<S>& model, const Mat<S>& image,
                        const std::optional<Vec<S>>& metadata) {
  const CnnConfig& cfg = model.config;
  const bool want_meta = cfg.mode == Mode::Fusion;
  if (want_meta != metadata.has_value())
    throw ModeMismatch(want_meta ? "fusion model requires metadata"
                                 : "image-only model takes no metadata");
  if (want_meta && metadata->size() != cfg.metadata_dim)
    throw ModeMismatch("metadata vector has length " + std::to_string(metadata->size()) +
                       ", expected " + std::to_string(cfg.metadata_dim));
  if (image.rows() != cfg.image_size || image.cols() != cfg.image_size)
    throw ShapeMismatch("input image must be " + std::to_string(cfg.image_size) + "x" +
                        std::to_string(cfg.image_size));

  ForwardCache<S> cache;
  cache.config = cfg;
  cache.input = {image};

  Maps<S> cur = cache.input;
  for (std::size_t i = 0; i < 3; ++i) {
    const int h = static_cast<int>(cur[0].rows()), w = static_cast<int>(cur[0].cols());
    cache.im2col[i] = im2col3x3(cur);
    Mat<S> z = model.conv_w[i] * cache.im2col[i];  // C_out x (H*W)
    const int c_out = static_cast<int>(z.rows());
    Maps<S> pre, act;
    for (int ch = 0; ch < c_out; ++ch) {
      Mat<S> map(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) map(y, x) = z(ch, y * w + x) + model.conv_b[i](ch, 0);
      pre.push_back(map);
      act.push_back(map.cwiseMax(S(0)));
    }
    cache.conv_pre[i] = std::move(pre);
    cache.relu_out[i] = act;
    cache.pool[i] = maxpool2x2(act);
    cur = cache.pool[i].out;
  }

  // Flatten channel-major, then append metadata.
  Vec<S> flat(cfg.dense_input_dim());
  Eigen::Index k = 0;
  for (const Mat<S>& map : cur)
    for (Eigen::Index y = 0; y < map.rows(); ++y)
      for (Eigen::Index x = 0; x < map.cols(); ++x) flat[k++] = map(y, x);
  if (want_meta)
    for (Eigen::Index i = 0; i < metadata->size(); ++i) flat[k++] = (*metadata)[i];
  cache.dense_in = flat;

  Vec<S> x = flat;
  for (std::size_t i = 0; i < 3; ++i) {
    Vec<S> z = model.dense_w[i] * x + model.dense_b[i].col(0);
    cache.dense_pre[i] = z;
    if (i < 2) {
      x = z.cwiseMax(S(0));
      cache.dense_act[i] = x;
    } else {
      cache.probs = softmax(z);
    }
  }
  return cache;
}

template <class S>
double loss_scce(const Vec<S>& probs, int label) {
  if (label < 0 || label >= probs.size())
    throw BadLabel("label " + std::to_string(label) + " outside class range");
  double p = static_cast<double>(probs[label]);
  return -std::log(std::max(p, 1e-12));
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

template <class S>
struct Gradients {
  std::array<Mat<S>, 3> conv_w, conv_b, dense_w, dense_b;

  std::vector<Mat<S>*> params() {
    return {&conv_w[0], &conv_b[0], &conv_w[1], &conv_b[1], &conv_w[2], &conv_b[2],
            &dense_w[0], &dense_b[0], &dense_w[1], &dense_b[1], &dense_w[2], &dense_b[2]};
  }
  std::vector<const Mat<S>*> params() const {
    return {&conv_w[0], &conv_b[0], &conv_w[1], &conv_b[1], &conv_w[2], &conv_b[2],
            &dense_w[0], &dense_b[0], &dense_w[1], &dense_b[1], &dense_w[2], &dense_b[2]};
  }

  static Gradients zero_like(const FusionCnn<S>& model) {
    Gradients g;
    auto src = model.params();
    auto dst = g.params();
    for (std::size_t i = 0; i < src.size(); ++i)
      *dst[i] = Mat<S>::Zero(src[i]->rows(), src[i]->cols());
    return g;
  }

  void add_scaled(const Gradients& other, S scale) {
    auto dst = params();
    auto src = other.params();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] += *src[i] * scale;
  }
};

template <class S>
Gradients<S> backward(const FusionCnn<S>& model, const ForwardCache<S>& cache, int label) {
  if (!(cache.config == model.config))
    throw CacheMismatch("forward cache built for a different configuration");
  if (label < 0 || label >= model.config.n_classes)
    throw BadLabel("label " + std::to_string(label) + " outside class range");

  Gradients<S> g = Gradients<S>::zero_like(model);

  // Softmax + cross-entropy: dL/dz = p - onehot.
  Vec<S> dz = cache.probs;
  dz[label] -= S(1);

  for (int i = 2; i >= 0; --i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    const Vec<S>& input = i == 0 ? cache.dense_in : cache.dense_act[ui - 1];
    g.dense_w[ui] = dz * input.transpose();
    g.dense_b[ui] = dz;
    if (i > 0) {
      Vec<S> dx = model.dense_w[ui].transpose() * dz;
      const Vec<S>& pre = cache.dense_pre[ui - 1];
      dz = dx.cwiseProduct((pre.array() > S(0)).template cast<S>().matrix());
    } else {
      Vec<S> dflat = model.dense_w[0].transpose() * dz;
      // Gradient flows only into the image slots; metadata is an input.
      const int flat_dim = model.config.flatten_dim();
      const int s = model.config.pooled_size();
      Maps<S> dcur(static_cast<std::size_t>(model.config.conv_channels[2]), Mat<S>::Zero(s, s));
      Eigen::Index k = 0;
      for (Mat<S>& map : dcur)
        for (int y = 0; y < s; ++y)
          for (int x = 0; x < s; ++x) map(y, x) = dflat[k++];
      (void)flat_dim;

      for (int c = 2; c >= 0; --c) {
        const std::size_t uc = static_cast<std::size_t>(c);
        const Maps<S>& relu_maps = cache.relu_out[uc];
        const int h = static_cast<int>(relu_maps[0].rows());
        const int w = static_cast<int>(relu_maps[0].cols());

        // Max-pool backward: each output gradient routes to its argmax.
        Maps<S> drelu(relu_maps.size(), Mat<S>::Zero(h, w));
        for (std::size_t ch = 0; ch < relu_maps.size(); ++ch) {
          const auto& amax = cache.pool[uc].argmax[ch];
          for (Eigen::Index oy = 0; oy < amax.rows(); ++oy)
            for (Eigen::Index ox = 0; ox < amax.cols(); ++ox) {
              int idx = amax(oy, ox);
              drelu[ch](idx / w, idx % w) += dcur[ch](oy, ox);
            }
        }

        // ReLU backward, then conv backward through the patch matrix.
        const int c_out = static_cast<int>(relu_maps.size());
        Mat<S> dout(c_out, h * w);
        for (int ch = 0; ch < c_out; ++ch) {
          const Mat<S>& pre = cache.conv_pre[uc][static_cast<std::size_t>(ch)];
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              dout(ch, y * w + x) =
                  pre(y, x) > S(0) ? drelu[static_cast<std::size_t>(ch)](y, x) : S(0);
        }
        g.conv_w[uc] = dout * cache.im2col[uc].transpose();
        g.conv_b[uc] = dout.rowwise().sum();
        if (c > 0) {
          Mat<S> dm = model.conv_w[uc].transpose() * dout;
          const int c_in = model.config.conv_channels[static_cast<std::size_t>(c - 1)];
          dcur = col2im3x3(dm, c_in, h, w);
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <class S>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Mat<S>> m, v;

  static AdamState zero_like(const FusionCnn<S>& model) {
    AdamState st;
    for (const Mat<S>* p : model.params()) {
      st.m.push_back(Mat<S>::Zero(p->rows(), p->cols()));
      st.v.push_back(Mat<S>::Zero(p->rows(), p->cols()));
    }
    return st;
  }
};

template <class S>
void adam_step(std::vector<Mat<S>*> params, const std::vector<const Mat<S>*>& grads,
               AdamState<S>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeMismatch("parameter/gradient/state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols() ||
        params[i]->rows() != state.m[i].rows() || params[i]->cols() != state.m[i].cols())
      throw ShapeMismatch("parameter buffer " + std::to_string(i) + " shape differs");

  state.step += 1;
  const S b1 = static_cast<S>(state.beta1), b2 = static_cast<S>(state.beta2);
  const S c1 = static_cast<S>(1.0 - std::pow(state.beta1, static_cast<double>(state.step)));
  const S c2 = static_cast<S>(1.0 - std::pow(state.beta2, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (S(1) - b1) * (*grads[i]);
    state.v[i] = b2 * state.v[i] + (S(1) - b2) * grads[i]->cwiseProduct(*grads[i]);
    Mat<S> mhat = state.m[i] / c1;
    Mat<S> vhat = state.v[i] / c2;
    params[i]->array() -=
        static_cast<S>(state.lr) * mhat.array() / (vhat.array().sqrt() + static_cast<S>(state.eps));
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

template <class S>
struct TrainExample {
  Mat<S> image;
  Vec<S> metadata;  // ignored in image-only mode
  int label = 0;
};

template <class S>
std::optional<Vec<S>> metadata_arg(const FusionCnn<S>& model, const TrainExample<S>& ex) {
  if (model.config.mode == Mode::Fusion) return ex.metadata;
  return std::nullopt;
}

// One pass over the data in a seeded shuffle order, averaging gradients per
// batch and taking one Adam step per batch. Returns the mean training loss.
template <class S>
double train_one_epoch(FusionCnn<S>& model, AdamState<S>& adam,
                       const std::vector<TrainExample<S>>& data, int batch_size, SeededRng& rng) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Gradients<S> acc = Gradients<S>::zero_like(model);
    for (std::size_t k = start; k < end; ++k) {
      const TrainExample<S>& ex = data[order[k]];
      ForwardCache<S> cache = forward(model, ex.image, metadata_arg(model, ex));
      loss_sum += loss_scce(cache.probs, ex.label);
      acc.add_scaled(backward(model, cache, ex.label), S(1));
    }
    S inv = S(1) / static_cast<S>(end - start);
    auto gp = acc.params();
    for (Mat<S>* g : gp) *g *= inv;
    std::vector<const Mat<S>*> gview(gp.begin(), gp.end());
    adam_step(model.params(), gview, adam);
  }
  return data.empty() ? 0.0 : loss_sum / static_cast<double>(data.size());
}

template <class S>
Vec<S> predict(const FusionCnn<S>& model, const Mat<S>& image,
               const std::optional<Vec<S>>& metadata) {
  return forward(model, image, metadata).probs;
}

template <class S>
double mean_loss(const FusionCnn<S>& model, const std::vector<TrainExample<S>>& data) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& ex : data)
    sum += loss_scce(forward(model, ex.image, metadata_arg(model, ex)).probs, ex.label);
  return sum / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Model file: "MRSQMODL", version, mode, seed, architecture, scaler JSON,
// then named parameter buffers as little-endian f32 (see docs/model_format.md).
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[8] = {'M', 'R', 'S', 'Q', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

template <class S>
std::vector<std::uint8_t> save_model_bytes(const FusionCnn<S>& model,
                                           const std::string& scaler_json) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kModelMagic, kModelMagic + 8);
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(model.config.mode));
  put_u64(out, model.seed);
  put_u32(out, static_cast<std::uint32_t>(model.config.n_classes));
  put_u32(out, static_cast<std::uint32_t>(model.config.metadata_dim));
  put_u32(out, static_cast<std::uint32_t>(model.config.image_size));
  for (int c : model.config.conv_channels) put_u32(out, static_cast<std::uint32_t>(c));
  for (int d : model.config.dense_widths) put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, static_cast<std::uint32_t>(scaler_json.size()));
  out.insert(out.end(), scaler_json.begin(), scaler_json.end());

  auto params = model.params();
  auto names = FusionCnn<S>::param_names();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    put_u32(out, static_cast<std::uint32_t>(names[i].size()));
    out.insert(out.end(), names[i].begin(), names[i].end());
    put_u32(out, static_cast<std::uint32_t>(params[i]->rows()));
    put_u32(out, static_cast<std::uint32_t>(params[i]->cols()));
    for (Eigen::Index r = 0; r < params[i]->rows(); ++r)
      for (Eigen::Index c = 0; c < params[i]->cols(); ++c)
        put_f32(out, static_cast<float>((*params[i])(r, c)));
  }
  return out;
}

namespace detail {
class ModelReader {
 public:
  explicit ModelReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(buf_[pos_]) | (buf_[pos_ + 1] << 8) |
                      (static_cast<std::uint32_t>(buf_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(buf_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() {
    std::uint32_t bits = u32();
    float f;
    static_assert(sizeof(f) == 4);
    std::memcpy(&f, &bits, 4);
    return f;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw MalformedFile("truncated model file");
  }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline FusionCnn<float> load_model_bytes(const std::vector<std::uint8_t>& bytes,
                                         std::string* scaler_json) {
  detail::ModelReader r(bytes);
  if (r.str(8) != std::string(kModelMagic, 8)) throw MalformedFile("bad model magic");
  if (r.u32() != kModelVersion) throw MalformedFile("unsupported model version");

  CnnConfig cfg;
  std::uint32_t mode = r.u32();
  if (mode > 1) throw MalformedFile("bad model mode");
  cfg.mode = static_cast<Mode>(mode);
  std::uint64_t seed = r.u64();
  cfg.n_classes = static_cast<int>(r.u32());
  cfg.metadata_dim = static_cast<int>(r.u32());
  cfg.image_size = static_cast<int>(r.u32());
  for (int i = 0; i < 3; ++i) cfg.conv_channels[static_cast<std::size_t>(i)] = static_cast<int>(r.u32());
  for (int i = 0; i < 2; ++i) cfg.dense_widths[static_cast<std::size_t>(i)] = static_cast<int>(r.u32());
  std::string scaler = r.str(r.u32());
  if (scaler_json) *scaler_json = scaler;

  FusionCnn<float> model;
  model.config = cfg;
  model.seed = seed;
  std::uint32_t n_params = r.u32();
  auto params = model.params();
  auto names = FusionCnn<float>::param_names();
  if (n_params != params.size()) throw MalformedFile("unexpected parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::string name = r.str(r.u32());
    if (name != names[i]) throw MalformedFile("unexpected parameter name " + name);
    int rows = static_cast<int>(r.u32());
    int cols = static_cast<int>(r.u32());
    params[i]->resize(rows, cols);
    for (int rr = 0; rr < rows; ++rr)
      for (int cc = 0; cc < cols; ++cc) (*params[i])(rr, cc) = r.f32();
  }
  return model;
}

template <class S>
void save_model(const std::string& path, const FusionCnn<S>& model,
                const std::string& scaler_json) {
  auto bytes = save_model_bytes(model, scaler_json);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline FusionCnn<float> load_model(const std::string& path, std::string* scaler_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_model_bytes(bytes, scaler_json);
}

}  // namespace mrseq::nn
