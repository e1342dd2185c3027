// Copyright 2026 The otprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "otprune/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otprune/errors.hpp"

namespace otprune {

namespace {

std::vector<double> to_double(const std::vector<float>& v) {
  return {v.begin(), v.end()};
}

std::vector<float> to_float(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [](double x) { return static_cast<float>(x); });
  return out;
}

struct ConvGeom {
  int in_c, in_h, in_w, out_h, out_w, kh, kw, stride, pad;
  std::size_t k() const { return static_cast<std::size_t>(in_c) * kh * kw; }
  std::size_t p() const { return static_cast<std::size_t>(out_h) * out_w; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

void im2col(const double* x, const ConvGeom& g, double* col) {
  const std::size_t P = g.p();
  for (int c = 0; c < g.in_c; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        double* row = col + ((static_cast<std::size_t>(c) * g.kh + ki) * g.kw + kj) * P;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          double* dst = row + static_cast<std::size_t>(oh) * g.out_w;
          if (ih < 0 || ih >= g.in_h) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(ih) * g.in_w;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            dst[ow] = (iw >= 0 && iw < g.in_w) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeom& g, double* dx) {
  const std::size_t P = g.p();
  for (int c = 0; c < g.in_c; ++c) {
    double* plane = dx + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        const double* row =
            col + ((static_cast<std::size_t>(c) * g.kh + ki) * g.kw + kj) * P;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.in_h) continue;
          const double* src = row + static_cast<std::size_t>(oh) * g.out_w;
          double* dst = plane + static_cast<std::size_t>(ih) * g.in_w;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.in_w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Executor::Executor(const NetworkGraph& graph)
    : input_shape_(graph.input_shape()) {
  require_valid(graph);
  shapes_ = graph.infer_shapes();
  order_ = *graph.topological_order();
  const auto producers = graph.producer_indices();
  input_ = graph.input_index();
  output_ = graph.output_index();

  nodes_.resize(graph.size());
  names_.resize(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& n = graph.node(i);
    NodeRt& rt = nodes_[i];
    rt.kind = n.kind;
    rt.inputs = producers[i];
    names_[i] = n.name;
    auto add_param = [&](ParamRole role, const std::vector<float>& v) {
      params_.push_back({n.name, role, to_double(v),
                         std::vector<double>(v.size(), 0.0)});
      return static_cast<int>(params_.size() - 1);
    };
    if (const auto* c = std::get_if<Conv2DParams>(&n.params)) {
      rt.weight = add_param(ParamRole::ConvWeight, c->weight);
      if (!c->bias.empty()) rt.bias = add_param(ParamRole::ConvBias, c->bias);
      rt.out_channels = c->out_channels;
      rt.kernel_h = c->kernel_h;
      rt.kernel_w = c->kernel_w;
      rt.stride = c->stride;
      rt.padding = c->padding;
    } else if (const auto* l = std::get_if<LinearParams>(&n.params)) {
      rt.weight = add_param(ParamRole::LinearWeight, l->weight);
      if (!l->bias.empty()) rt.bias = add_param(ParamRole::LinearBias, l->bias);
      rt.out_channels = l->out_features;
    } else if (const auto* b = std::get_if<BatchNormParams>(&n.params)) {
      rt.weight = add_param(ParamRole::BnGamma, b->gamma);
      rt.bias = add_param(ParamRole::BnBeta, b->beta);
      BnState st;
      st.running_mean = to_double(b->running_mean);
      st.running_var = to_double(b->running_var);
      st.eps = b->eps;
      bn_.push_back(std::move(st));
      rt.bn = static_cast<int>(bn_.size() - 1);
    } else if (const auto* p = std::get_if<PoolParams>(&n.params)) {
      rt.kernel_h = rt.kernel_w = p->kernel;
      rt.stride = p->stride;
    } else if (const auto* s = std::get_if<ChannelSelectParams>(&n.params)) {
      for (std::size_t c = 0; c < s->mask.size(); ++c) {
        if (s->mask[c]) rt.select.push_back(static_cast<int>(c));
      }
    }
  }

  needs_grad_.assign(graph.size(), false);
  for (std::size_t i : order_) {
    bool need = nodes_[i].weight >= 0;
    for (std::size_t p : nodes_[i].inputs) need = need || needs_grad_[p];
    needs_grad_[i] = need;
  }
  act_.resize(graph.size());
  grad_.resize(graph.size());
}

void Executor::resize(int batch) {
  if (batch == batch_) return;
  batch_ = batch;
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    const std::size_t sz = static_cast<std::size_t>(batch) * shapes_[i].numel();
    act_[i].assign(sz, 0.0);
    grad_[i].assign(needs_grad_[i] ? sz : 0, 0.0);
    if (nodes_[i].kind == LayerKind::MaxPool) nodes_[i].argmax.assign(sz, 0);
    if (nodes_[i].bn >= 0) bn_[nodes_[i].bn].xhat.assign(sz, 0.0);
  }
}

std::span<const double> Executor::forward(std::span<const double> input,
                                          int batch,
                                          const ForwardOptions& opts) {
  if (batch < 1) throw ShapeError("batch must be >= 1");
  if (input.size() != static_cast<std::size_t>(batch) * input_shape_.numel()) {
    throw ShapeError("input has " + std::to_string(input.size()) +
                     " values, expected " +
                     std::to_string(static_cast<std::size_t>(batch) *
                                    input_shape_.numel()));
  }
  resize(batch);
  std::copy(input.begin(), input.end(), act_[input_].begin());
  for (std::size_t i : order_) {
    if (i != input_) forward_node(i, opts);
  }
  return act_[output_];
}

void Executor::forward_node(std::size_t i, const ForwardOptions& opts) {
  NodeRt& rt = nodes_[i];
  const Shape& os = shapes_[i];
  auto& y = act_[i];
  const int N = batch_;
  switch (rt.kind) {
    case LayerKind::Input:
      break;
    case LayerKind::Output:
    case LayerKind::ReLU: {
      const auto& x = act_[rt.inputs[0]];
      if (rt.kind == LayerKind::ReLU) {
        for (std::size_t j = 0; j < y.size(); ++j) y[j] = x[j] > 0.0 ? x[j] : 0.0;
      } else {
        std::copy(x.begin(), x.end(), y.begin());
      }
      break;
    }
    case LayerKind::Conv2D: {
      const Shape& is = shapes_[rt.inputs[0]];
      const ConvGeom g{is.channels, is.height, is.width, os.height, os.width,
                       rt.kernel_h, rt.kernel_w, rt.stride, rt.padding};
      const std::size_t K = g.k(), P = g.p();
      const auto& W = params_[rt.weight].value;
      const double* B = rt.bias >= 0 ? params_[rt.bias].value.data() : nullptr;
      if (!g.pointwise()) col_.resize(K * P);
      for (int n = 0; n < N; ++n) {
        const double* x = act_[rt.inputs[0]].data() + n * is.numel();
        double* out = y.data() + n * os.numel();
        const double* col = x;
        if (!g.pointwise()) {
          im2col(x, g, col_.data());
          col = col_.data();
        }
        for (int oc = 0; oc < rt.out_channels; ++oc) {
          double* row = out + oc * P;
          std::fill(row, row + P, B ? B[oc] : 0.0);
          const double* w = W.data() + oc * K;
          for (std::size_t k = 0; k < K; ++k) {
            const double wk = w[k];
            const double* crow = col + k * P;
            for (std::size_t p = 0; p < P; ++p) row[p] += wk * crow[p];
          }
        }
      }
      break;
    }
    case LayerKind::Linear: {
      const std::size_t in = shapes_[rt.inputs[0]].numel();
      const std::size_t out = rt.out_channels;
      const auto& W = params_[rt.weight].value;
      const double* B = rt.bias >= 0 ? params_[rt.bias].value.data() : nullptr;
      for (int n = 0; n < N; ++n) {
        const double* x = act_[rt.inputs[0]].data() + n * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double* w = W.data() + o * in;
          double acc = B ? B[o] : 0.0;
          for (std::size_t k = 0; k < in; ++k) acc += w[k] * x[k];
          y[n * out + o] = acc;
        }
      }
      break;
    }
    case LayerKind::BatchNorm: {
      BnState& st = bn_[rt.bn];
      const auto& x = act_[rt.inputs[0]];
      const auto& gamma = params_[rt.weight].value;
      const auto& beta = params_[rt.bias].value;
      const int C = os.channels;
      const std::size_t HW = static_cast<std::size_t>(os.height) * os.width;
      const double M = static_cast<double>(N) * HW;
      st.invstd.assign(C, 0.0);
      st.last_mode = opts.bn_mode;
      for (int c = 0; c < C; ++c) {
        double mean, var;
        if (opts.bn_mode == BnMode::Training) {
          double s = 0.0;
          for (int n = 0; n < N; ++n) {
            const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * HW;
            for (std::size_t j = 0; j < HW; ++j) s += p[j];
          }
          mean = s / M;
          double ss = 0.0;
          for (int n = 0; n < N; ++n) {
            const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * HW;
            for (std::size_t j = 0; j < HW; ++j) ss += (p[j] - mean) * (p[j] - mean);
          }
          var = ss / M;
          if (opts.update_running_stats) {
            const double unbiased = M > 1 ? ss / (M - 1) : var;
            st.running_mean[c] = (1 - opts.bn_momentum) * st.running_mean[c] +
                                 opts.bn_momentum * mean;
            st.running_var[c] = (1 - opts.bn_momentum) * st.running_var[c] +
                                opts.bn_momentum * unbiased;
          }
        } else {
          mean = st.running_mean[c];
          var = st.running_var[c];
        }
        const double inv = 1.0 / std::sqrt(var + st.eps);
        st.invstd[c] = inv;
        for (int n = 0; n < N; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * C + c) * HW;
          for (std::size_t j = 0; j < HW; ++j) {
            const double xh = (x[off + j] - mean) * inv;
            st.xhat[off + j] = xh;
            y[off + j] = gamma[c] * xh + beta[c];
          }
        }
      }
      break;
    }
    case LayerKind::MaxPool:
    case LayerKind::AvgPool: {
      const Shape& is = shapes_[rt.inputs[0]];
      const auto& x = act_[rt.inputs[0]];
      const int k = rt.kernel_h;
      const double inv_area = 1.0 / (k * k);
      for (int n = 0; n < N; ++n) {
        for (int c = 0; c < os.channels; ++c) {
          const std::size_t ip =
              (static_cast<std::size_t>(n) * is.channels + c) * is.height * is.width;
          const std::size_t op =
              (static_cast<std::size_t>(n) * os.channels + c) * os.height * os.width;
          for (int oh = 0; oh < os.height; ++oh) {
            for (int ow = 0; ow < os.width; ++ow) {
              const std::size_t o = op + static_cast<std::size_t>(oh) * os.width + ow;
              double best = -std::numeric_limits<double>::infinity();
              std::int32_t best_at = 0;
              double sum = 0.0;
              for (int ki = 0; ki < k; ++ki) {
                for (int kj = 0; kj < k; ++kj) {
                  const int at = (oh * rt.stride + ki) * is.width + ow * rt.stride + kj;
                  const double v = x[ip + at];
                  sum += v;
                  if (v > best) {
                    best = v;
                    best_at = at;
                  }
                }
              }
              if (rt.kind == LayerKind::MaxPool) {
                y[o] = best;
                rt.argmax[o] = best_at;
              } else {
                y[o] = sum * inv_area;
              }
            }
          }
        }
      }
      break;
    }
    case LayerKind::GlobalAvgPool: {
      const Shape& is = shapes_[rt.inputs[0]];
      const auto& x = act_[rt.inputs[0]];
      const std::size_t HW = static_cast<std::size_t>(is.height) * is.width;
      for (std::size_t nc = 0; nc < y.size(); ++nc) {
        double s = 0.0;
        for (std::size_t j = 0; j < HW; ++j) s += x[nc * HW + j];
        y[nc] = s / static_cast<double>(HW);
      }
      break;
    }
    case LayerKind::Add: {
      std::fill(y.begin(), y.end(), 0.0);
      for (std::size_t in : rt.inputs) {
        const auto& x = act_[in];
        for (std::size_t j = 0; j < y.size(); ++j) y[j] += x[j];
      }
      break;
    }
    case LayerKind::Concat: {
      const std::size_t out_sample = os.numel();
      std::size_t offset = 0;
      for (std::size_t in : rt.inputs) {
        const std::size_t in_sample = shapes_[in].numel();
        for (int n = 0; n < N; ++n) {
          std::copy_n(act_[in].data() + n * in_sample, in_sample,
                      y.data() + n * out_sample + offset);
        }
        offset += in_sample;
      }
      break;
    }
    case LayerKind::ChannelSelect: {
      const Shape& is = shapes_[rt.inputs[0]];
      const std::size_t HW = static_cast<std::size_t>(is.height) * is.width;
      const auto& x = act_[rt.inputs[0]];
      for (int n = 0; n < N; ++n) {
        for (std::size_t j = 0; j < rt.select.size(); ++j) {
          std::copy_n(x.data() + (static_cast<std::size_t>(n) * is.channels + rt.select[j]) * HW,
                      HW, y.data() + (static_cast<std::size_t>(n) * os.channels + j) * HW);
        }
      }
      break;
    }
  }
}

void Executor::backward(std::span<const double> grad_output) {
  if (batch_ == 0) throw Error("backward called before forward");
  if (grad_output.size() != act_[output_].size()) {
    throw ShapeError("gradient size does not match network output");
  }
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
  for (auto& g : grad_) std::fill(g.begin(), g.end(), 0.0);
  if (!needs_grad_[output_]) return;
  std::copy(grad_output.begin(), grad_output.end(), grad_[output_].begin());
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if (*it != input_ && needs_grad_[*it]) backward_node(*it);
  }
}

void Executor::backward_node(std::size_t i) {
  NodeRt& rt = nodes_[i];
  const Shape& os = shapes_[i];
  const auto& dy = grad_[i];
  const int N = batch_;
  auto want = [&](std::size_t in) { return needs_grad_[in]; };
  switch (rt.kind) {
    case LayerKind::Input:
      break;
    case LayerKind::Output: {
      const std::size_t in = rt.inputs[0];
      if (want(in)) {
        for (std::size_t j = 0; j < dy.size(); ++j) grad_[in][j] += dy[j];
      }
      break;
    }
    case LayerKind::ReLU: {
      const std::size_t in = rt.inputs[0];
      if (!want(in)) break;
      const auto& x = act_[in];
      for (std::size_t j = 0; j < dy.size(); ++j) {
        if (x[j] > 0.0) grad_[in][j] += dy[j];
      }
      break;
    }
    case LayerKind::Conv2D: {
      const std::size_t in = rt.inputs[0];
      const Shape& is = shapes_[in];
      const ConvGeom g{is.channels, is.height, is.width, os.height, os.width,
                       rt.kernel_h, rt.kernel_w, rt.stride, rt.padding};
      const std::size_t K = g.k(), P = g.p();
      const auto& W = params_[rt.weight].value;
      auto& dW = params_[rt.weight].grad;
      double* dB = rt.bias >= 0 ? params_[rt.bias].grad.data() : nullptr;
      const bool dx_needed = want(in);
      if (!g.pointwise()) {
        col_.resize(K * P);
        if (dx_needed) dcol_.resize(K * P);
      }
      for (int n = 0; n < N; ++n) {
        const double* x = act_[in].data() + n * is.numel();
        const double* d = dy.data() + n * os.numel();
        const double* col = x;
        if (!g.pointwise()) {
          im2col(x, g, col_.data());
          col = col_.data();
        }
        for (int oc = 0; oc < rt.out_channels; ++oc) {
          const double* drow = d + oc * P;
          if (dB) {
            double s = 0.0;
            for (std::size_t p = 0; p < P; ++p) s += drow[p];
            dB[oc] += s;
          }
          double* dw = dW.data() + oc * K;
          for (std::size_t k = 0; k < K; ++k) {
            const double* crow = col + k * P;
            double s = 0.0;
            for (std::size_t p = 0; p < P; ++p) s += drow[p] * crow[p];
            dw[k] += s;
          }
        }
        if (!dx_needed) continue;
        double* dx = grad_[in].data() + n * is.numel();
        double* dcol = g.pointwise() ? dx : dcol_.data();
        if (!g.pointwise()) std::fill(dcol_.begin(), dcol_.end(), 0.0);
        for (int oc = 0; oc < rt.out_channels; ++oc) {
          const double* drow = d + oc * P;
          const double* w = W.data() + oc * K;
          for (std::size_t k = 0; k < K; ++k) {
            const double wk = w[k];
            double* dc = dcol + k * P;
            for (std::size_t p = 0; p < P; ++p) dc[p] += wk * drow[p];
          }
        }
        if (!g.pointwise()) col2im_add(dcol_.data(), g, dx);
      }
      break;
    }
    case LayerKind::Linear: {
      const std::size_t in = rt.inputs[0];
      const std::size_t nin = shapes_[in].numel();
      const std::size_t nout = rt.out_channels;
      const auto& W = params_[rt.weight].value;
      auto& dW = params_[rt.weight].grad;
      double* dB = rt.bias >= 0 ? params_[rt.bias].grad.data() : nullptr;
      for (int n = 0; n < N; ++n) {
        const double* x = act_[in].data() + n * nin;
        const double* d = dy.data() + n * nout;
        for (std::size_t o = 0; o < nout; ++o) {
          if (dB) dB[o] += d[o];
          double* dw = dW.data() + o * nin;
          for (std::size_t k = 0; k < nin; ++k) dw[k] += d[o] * x[k];
        }
        if (want(in)) {
          double* dx = grad_[in].data() + n * nin;
          for (std::size_t o = 0; o < nout; ++o) {
            const double* w = W.data() + o * nin;
            for (std::size_t k = 0; k < nin; ++k) dx[k] += w[k] * d[o];
          }
        }
      }
      break;
    }
    case LayerKind::BatchNorm: {
      const std::size_t in = rt.inputs[0];
      BnState& st = bn_[rt.bn];
      const auto& gamma = params_[rt.weight].value;
      auto& dgamma = params_[rt.weight].grad;
      auto& dbeta = params_[rt.bias].grad;
      const int C = os.channels;
      const std::size_t HW = static_cast<std::size_t>(os.height) * os.width;
      const double M = static_cast<double>(N) * HW;
      for (int c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < N; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * C + c) * HW;
          for (std::size_t j = 0; j < HW; ++j) {
            sum_dy += dy[off + j];
            sum_dy_xhat += dy[off + j] * st.xhat[off + j];
          }
        }
        dgamma[c] += sum_dy_xhat;
        dbeta[c] += sum_dy;
        if (!want(in)) continue;
        const double scale = gamma[c] * st.invstd[c];
        for (int n = 0; n < N; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * C + c) * HW;
          for (std::size_t j = 0; j < HW; ++j) {
            if (st.last_mode == BnMode::Training) {
              grad_[in][off + j] +=
                  scale / M *
                  (M * dy[off + j] - sum_dy - st.xhat[off + j] * sum_dy_xhat);
            } else {
              grad_[in][off + j] += scale * dy[off + j];
            }
          }
        }
      }
      break;
    }
    case LayerKind::MaxPool:
    case LayerKind::AvgPool: {
      const std::size_t in = rt.inputs[0];
      if (!want(in)) break;
      const Shape& is = shapes_[in];
      const int k = rt.kernel_h;
      const double inv_area = 1.0 / (k * k);
      for (int n = 0; n < N; ++n) {
        for (int c = 0; c < os.channels; ++c) {
          const std::size_t ip =
              (static_cast<std::size_t>(n) * is.channels + c) * is.height * is.width;
          const std::size_t op =
              (static_cast<std::size_t>(n) * os.channels + c) * os.height * os.width;
          for (int oh = 0; oh < os.height; ++oh) {
            for (int ow = 0; ow < os.width; ++ow) {
              const std::size_t o = op + static_cast<std::size_t>(oh) * os.width + ow;
              if (rt.kind == LayerKind::MaxPool) {
                grad_[in][ip + rt.argmax[o]] += dy[o];
                continue;
              }
              for (int ki = 0; ki < k; ++ki) {
                for (int kj = 0; kj < k; ++kj) {
                  const int at = (oh * rt.stride + ki) * is.width + ow * rt.stride + kj;
                  grad_[in][ip + at] += dy[o] * inv_area;
                }
              }
            }
          }
        }
      }
      break;
    }
    case LayerKind::GlobalAvgPool: {
      const std::size_t in = rt.inputs[0];
      if (!want(in)) break;
      const Shape& is = shapes_[in];
      const std::size_t HW = static_cast<std::size_t>(is.height) * is.width;
      const double inv = 1.0 / static_cast<double>(HW);
      for (std::size_t nc = 0; nc < dy.size(); ++nc) {
        for (std::size_t j = 0; j < HW; ++j) grad_[in][nc * HW + j] += dy[nc] * inv;
      }
      break;
    }
    case LayerKind::Add: {
      for (std::size_t in : rt.inputs) {
        if (!want(in)) continue;
        for (std::size_t j = 0; j < dy.size(); ++j) grad_[in][j] += dy[j];
      }
      break;
    }
    case LayerKind::Concat: {
      const std::size_t out_sample = os.numel();
      std::size_t offset = 0;
      for (std::size_t in : rt.inputs) {
        const std::size_t in_sample = shapes_[in].numel();
        if (want(in)) {
          for (int n = 0; n < N; ++n) {
            const double* src = dy.data() + n * out_sample + offset;
            double* dst = grad_[in].data() + n * in_sample;
            for (std::size_t j = 0; j < in_sample; ++j) dst[j] += src[j];
          }
        }
        offset += in_sample;
      }
      break;
    }
    case LayerKind::ChannelSelect: {
      const std::size_t in = rt.inputs[0];
      if (!want(in)) break;
      const Shape& is = shapes_[in];
      const std::size_t HW = static_cast<std::size_t>(is.height) * is.width;
      for (int n = 0; n < N; ++n) {
        for (std::size_t j = 0; j < rt.select.size(); ++j) {
          const double* src = dy.data() + (static_cast<std::size_t>(n) * os.channels + j) * HW;
          double* dst = grad_[in].data() +
                        (static_cast<std::size_t>(n) * is.channels + rt.select[j]) * HW;
          for (std::size_t s = 0; s < HW; ++s) dst[s] += src[s];
        }
      }
      break;
    }
  }
}

std::uint64_t Executor::branch_signature() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  for (std::size_t i : order_) {
    const auto& rt = nodes_[i];
    if (rt.kind == LayerKind::ReLU) {
      for (double v : act_[rt.inputs[0]]) mix(v > 0.0);
    } else if (rt.kind == LayerKind::MaxPool) {
      for (auto a : rt.argmax) mix(static_cast<std::uint64_t>(a));
    }
  }
  return h;
}

std::vector<std::pair<std::string, std::vector<double>>> Executor::gammas()
    const {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (std::size_t i : order_) {
    if (nodes_[i].kind == LayerKind::BatchNorm) {
      out.emplace_back(names_[i], params_[nodes_[i].weight].value);
    }
  }
  return out;
}

void Executor::write_back(NetworkGraph& graph) const {
  if (graph.size() != nodes_.size()) {
    throw GraphError("write_back: graph structure differs from executor");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = graph.node(i);
    if (n.name != names_[i] || n.kind != nodes_[i].kind) {
      throw GraphError("write_back: node " + n.name + " does not match");
    }
    const NodeRt& rt = nodes_[i];
    if (auto* c = std::get_if<Conv2DParams>(&n.params)) {
      c->weight = to_float(params_[rt.weight].value);
      if (rt.bias >= 0) c->bias = to_float(params_[rt.bias].value);
    } else if (auto* l = std::get_if<LinearParams>(&n.params)) {
      l->weight = to_float(params_[rt.weight].value);
      if (rt.bias >= 0) l->bias = to_float(params_[rt.bias].value);
    } else if (auto* b = std::get_if<BatchNormParams>(&n.params)) {
      b->gamma = to_float(params_[rt.weight].value);
      b->beta = to_float(params_[rt.bias].value);
      b->running_mean = to_float(bn_[rt.bn].running_mean);
      b->running_var = to_float(bn_[rt.bn].running_var);
    }
  }
}

double compute_loss(LossKind kind, std::span<const double> logits,
                    std::span<const int> labels, int num_classes,
                    std::vector<double>* grad) {
  const std::size_t N = labels.size();
  if (logits.size() != N * static_cast<std::size_t>(num_classes)) {
    throw ShapeError("logits/labels size mismatch");
  }
  if (grad) grad->assign(logits.size(), 0.0);
  double total = 0.0;
  const double invN = 1.0 / static_cast<double>(N);
  for (std::size_t n = 0; n < N; ++n) {
    const double* z = logits.data() + n * num_classes;
    const int label = labels[n];
    if (label < 0 || label >= num_classes) throw ShapeError("label out of range");
    if (kind == LossKind::CrossEntropy) {
      const double zmax = *std::max_element(z, z + num_classes);
      double se = 0.0;
      for (int k = 0; k < num_classes; ++k) se += std::exp(z[k] - zmax);
      const double lse = zmax + std::log(se);
      total += lse - z[label];
      if (grad) {
        for (int k = 0; k < num_classes; ++k) {
          (*grad)[n * num_classes + k] =
              (std::exp(z[k] - lse) - (k == label ? 1.0 : 0.0)) * invN;
        }
      }
    } else {
      for (int k = 0; k < num_classes; ++k) {
        const double r = z[k] - (k == label ? 1.0 : 0.0);
        total += 0.5 * r * r;
        if (grad) (*grad)[n * num_classes + k] = r * invN;
      }
    }
  }
  return total * invN;
}

Tensor forward(const NetworkGraph& graph, const Tensor& input) {
  if (!(input.shape == graph.input_shape())) {
    throw ShapeError("input shape mismatch: graph expects (" +
                     std::to_string(graph.input_shape().channels) + "," +
                     std::to_string(graph.input_shape().height) + "," +
                     std::to_string(graph.input_shape().width) + ")");
  }
  Executor ex(graph);
  auto out = ex.forward(input.data, input.batch);
  return Tensor{input.batch, ex.output_shape(), {out.begin(), out.end()}};
}

}  // namespace otprune
