#include "alignmix/model/layers.hpp"

#include <algorithm>
#include <cmath>

namespace alignmix::model {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Valid output range [lo, hi) along one axis for kernel offset k: positions o with
// 0 <= o * stride + k - pad < in_size.
inline void valid_range(int out_size, int in_size, int stride, int k, int pad, int& lo, int& hi) {
  const int shift = k - pad;
  lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  const int last = in_size - 1 - shift;  // need o * stride <= last
  hi = last < 0 ? 0 : std::min(out_size, last / stride + 1);
  if (lo > hi) lo = hi;
}

template <typename T>
Tensor3<T> conv_forward(const Conv2d& l, const Tensor3<T>& in, const ParamStore<T>& p) {
  if (in.channels != l.in_channels) throw dimension_error("Conv2d: channel mismatch");
  const int ho = l.out_size(in.height), wo = l.out_size(in.width);
  Tensor3<T> out(l.out_channels, ho, wo);
  const auto& w = p[l.weight].value;
  const auto& b = p[l.bias].value;
  const int k = l.kernel, s = l.stride;
  for (int o = 0; o < l.out_channels; ++o) {
    T* dst = out.data.data() + static_cast<std::size_t>(o) * ho * wo;
    std::fill(dst, dst + ho * wo, b[o]);
    for (int i = 0; i < l.in_channels; ++i) {
      const T* src = in.data.data() + static_cast<std::size_t>(i) * in.height * in.width;
      for (int ky = 0; ky < k; ++ky) {
        int y0, y1;
        valid_range(ho, in.height, s, ky, l.padding, y0, y1);
        for (int kx = 0; kx < k; ++kx) {
          int x0, x1;
          valid_range(wo, in.width, s, kx, l.padding, x0, x1);
          const T wv = w[((static_cast<std::size_t>(o) * l.in_channels + i) * k + ky) * k + kx];
          for (int y = y0; y < y1; ++y) {
            const T* srow = src + static_cast<std::size_t>(y * s + ky - l.padding) * in.width;
            T* drow = dst + static_cast<std::size_t>(y) * wo;
            const int dx = kx - l.padding;
            for (int x = x0; x < x1; ++x) drow[x] += wv * srow[x * s + dx];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor3<T> conv_backward(const Conv2d& l, const Tensor3<T>& in, const Tensor3<T>& g, const ParamStore<T>& p,
                         Gradients<T>* grads) {
  const int ho = g.height, wo = g.width;
  Tensor3<T> gin(in.channels, in.height, in.width);
  const auto& w = p[l.weight].value;
  const int k = l.kernel, s = l.stride;
  T* gw = grads ? (*grads)[l.weight].data() : nullptr;
  for (int o = 0; o < l.out_channels; ++o) {
    const T* go = g.data.data() + static_cast<std::size_t>(o) * ho * wo;
    if (grads) {
      T acc{0};
      for (int q = 0; q < ho * wo; ++q) acc += go[q];
      (*grads)[l.bias][o] += acc;
    }
    for (int i = 0; i < l.in_channels; ++i) {
      const T* src = in.data.data() + static_cast<std::size_t>(i) * in.height * in.width;
      T* gsrc = gin.data.data() + static_cast<std::size_t>(i) * in.height * in.width;
      for (int ky = 0; ky < k; ++ky) {
        int y0, y1;
        valid_range(ho, in.height, s, ky, l.padding, y0, y1);
        for (int kx = 0; kx < k; ++kx) {
          int x0, x1;
          valid_range(wo, in.width, s, kx, l.padding, x0, x1);
          const std::size_t widx = ((static_cast<std::size_t>(o) * l.in_channels + i) * k + ky) * k + kx;
          const T wv = w[widx];
          T acc{0};
          for (int y = y0; y < y1; ++y) {
            const std::size_t off = static_cast<std::size_t>(y * s + ky - l.padding) * in.width;
            const T* srow = src + off;
            T* grow = gsrc + off;
            const T* gorow = go + static_cast<std::size_t>(y) * wo;
            const int dx = kx - l.padding;
            for (int x = x0; x < x1; ++x) {
              grow[x * s + dx] += wv * gorow[x];
              acc += gorow[x] * srow[x * s + dx];
            }
          }
          if (gw) gw[widx] += acc;
        }
      }
    }
  }
  return gin;
}

template <typename T>
Tensor3<T> convt_forward(const ConvTranspose2d& l, const Tensor3<T>& in, const ParamStore<T>& p) {
  if (in.channels != l.in_channels) throw dimension_error("ConvTranspose2d: channel mismatch");
  const int ho = l.out_size(in.height), wo = l.out_size(in.width);
  Tensor3<T> out(l.out_channels, ho, wo);
  const auto& w = p[l.weight].value;
  const auto& b = p[l.bias].value;
  const int k = l.kernel, s = l.stride;
  for (int o = 0; o < l.out_channels; ++o) {
    T* dst = out.data.data() + static_cast<std::size_t>(o) * ho * wo;
    std::fill(dst, dst + ho * wo, b[o]);
  }
  // Input pixel (y, x) feeds output (y * s + ky - pad, x * s + kx - pad): the same
  // index relation as Conv2d with the roles of input and output exchanged.
  for (int i = 0; i < l.in_channels; ++i) {
    const T* src = in.data.data() + static_cast<std::size_t>(i) * in.height * in.width;
    for (int o = 0; o < l.out_channels; ++o) {
      T* dst = out.data.data() + static_cast<std::size_t>(o) * ho * wo;
      for (int ky = 0; ky < k; ++ky) {
        int y0, y1;
        valid_range(in.height, ho, s, ky, l.padding, y0, y1);
        for (int kx = 0; kx < k; ++kx) {
          int x0, x1;
          valid_range(in.width, wo, s, kx, l.padding, x0, x1);
          const T wv = w[((static_cast<std::size_t>(i) * l.out_channels + o) * k + ky) * k + kx];
          for (int y = y0; y < y1; ++y) {
            T* drow = dst + static_cast<std::size_t>(y * s + ky - l.padding) * wo;
            const T* srow = src + static_cast<std::size_t>(y) * in.width;
            const int dx = kx - l.padding;
            for (int x = x0; x < x1; ++x) drow[x * s + dx] += wv * srow[x];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor3<T> convt_backward(const ConvTranspose2d& l, const Tensor3<T>& in, const Tensor3<T>& g,
                          const ParamStore<T>& p, Gradients<T>* grads) {
  const int ho = g.height, wo = g.width;
  Tensor3<T> gin(in.channels, in.height, in.width);
  const auto& w = p[l.weight].value;
  const int k = l.kernel, s = l.stride;
  T* gw = grads ? (*grads)[l.weight].data() : nullptr;
  if (grads) {
    for (int o = 0; o < l.out_channels; ++o) {
      const T* go = g.data.data() + static_cast<std::size_t>(o) * ho * wo;
      T acc{0};
      for (int q = 0; q < ho * wo; ++q) acc += go[q];
      (*grads)[l.bias][o] += acc;
    }
  }
  for (int i = 0; i < l.in_channels; ++i) {
    const T* src = in.data.data() + static_cast<std::size_t>(i) * in.height * in.width;
    T* gsrc = gin.data.data() + static_cast<std::size_t>(i) * in.height * in.width;
    for (int o = 0; o < l.out_channels; ++o) {
      const T* go = g.data.data() + static_cast<std::size_t>(o) * ho * wo;
      for (int ky = 0; ky < k; ++ky) {
        int y0, y1;
        valid_range(in.height, ho, s, ky, l.padding, y0, y1);
        for (int kx = 0; kx < k; ++kx) {
          int x0, x1;
          valid_range(in.width, wo, s, kx, l.padding, x0, x1);
          const std::size_t widx = ((static_cast<std::size_t>(i) * l.out_channels + o) * k + ky) * k + kx;
          const T wv = w[widx];
          T acc{0};
          for (int y = y0; y < y1; ++y) {
            const T* gorow = go + static_cast<std::size_t>(y * s + ky - l.padding) * wo;
            const T* srow = src + static_cast<std::size_t>(y) * in.width;
            T* grow = gsrc + static_cast<std::size_t>(y) * in.width;
            const int dx = kx - l.padding;
            for (int x = x0; x < x1; ++x) {
              grow[x] += wv * gorow[x * s + dx];
              acc += srow[x] * gorow[x * s + dx];
            }
          }
          if (gw) gw[widx] += acc;
        }
      }
    }
  }
  return gin;
}

template <typename T>
Tensor3<T> linear_forward(const Linear& l, const Tensor3<T>& in, const ParamStore<T>& p) {
  if (static_cast<int>(in.size()) != l.in_features) throw dimension_error("Linear: input size mismatch");
  Tensor3<T> out(l.out_features, 1, 1);
  const auto& w = p[l.weight].value;
  const auto& b = p[l.bias].value;
  for (int o = 0; o < l.out_features; ++o) {
    const T* row = w.data() + static_cast<std::size_t>(o) * l.in_features;
    T acc = b[o];
    for (int i = 0; i < l.in_features; ++i) acc += row[i] * in.data[i];
    out.data[o] = acc;
  }
  return out;
}

template <typename T>
Tensor3<T> linear_backward(const Linear& l, const Tensor3<T>& in, const Tensor3<T>& g, const ParamStore<T>& p,
                           Gradients<T>* grads) {
  Tensor3<T> gin(in.channels, in.height, in.width);
  const auto& w = p[l.weight].value;
  for (int o = 0; o < l.out_features; ++o) {
    const T go = g.data[o];
    const T* row = w.data() + static_cast<std::size_t>(o) * l.in_features;
    for (int i = 0; i < l.in_features; ++i) gin.data[i] += row[i] * go;
    if (grads) {
      T* gw = (*grads)[l.weight].data() + static_cast<std::size_t>(o) * l.in_features;
      for (int i = 0; i < l.in_features; ++i) gw[i] += go * in.data[i];
      (*grads)[l.bias][o] += go;
    }
  }
  return gin;
}

template <typename T>
Tensor3<T> avgpool_forward(const Tensor3<T>& in) {
  if (in.height % 2 != 0 || in.width % 2 != 0) throw dimension_error("AvgPool2: odd spatial size");
  Tensor3<T> out(in.channels, in.height / 2, in.width / 2);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        out.at(c, y, x) = (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) + in.at(c, 2 * y + 1, 2 * x) +
                           in.at(c, 2 * y + 1, 2 * x + 1)) *
                          T(0.25);
  return out;
}

template <typename T>
Tensor3<T> avgpool_backward(const Tensor3<T>& in, const Tensor3<T>& g) {
  Tensor3<T> gin(in.channels, in.height, in.width);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) gin.at(c, y, x) = g.at(c, y / 2, x / 2) * T(0.25);
  return gin;
}

}  // namespace

template <typename T>
Tensor3<T> layer_forward(const Layer& layer, const Tensor3<T>& in, const ParamStore<T>& params) {
  return std::visit(
      overloaded{
          [&](const Conv2d& l) { return conv_forward(l, in, params); },
          [&](const ConvTranspose2d& l) { return convt_forward(l, in, params); },
          [&](const Linear& l) { return linear_forward(l, in, params); },
          [&](const Reshape& l) { return Tensor3<T>(l.channels, l.height, l.width, in.data); },
          [&](const Relu&) {
            Tensor3<T> out = in;
            for (T& v : out.data) v = v > T{0} ? v : T{0};
            return out;
          },
          [&](const Sigmoid&) {
            Tensor3<T> out = in;
            for (T& v : out.data) v = T{1} / (T{1} + std::exp(-v));
            return out;
          },
          [&](const AvgPool2&) { return avgpool_forward(in); },
      },
      layer);
}

template <typename T>
Tensor3<T> layer_backward(const Layer& layer, const Tensor3<T>& in, const Tensor3<T>& out, const Tensor3<T>& g,
                          const ParamStore<T>& params, Gradients<T>* grads) {
  return std::visit(
      overloaded{
          [&](const Conv2d& l) { return conv_backward(l, in, g, params, grads); },
          [&](const ConvTranspose2d& l) { return convt_backward(l, in, g, params, grads); },
          [&](const Linear& l) { return linear_backward(l, in, g, params, grads); },
          [&](const Reshape&) { return Tensor3<T>(in.channels, in.height, in.width, g.data); },
          [&](const Relu&) {
            Tensor3<T> gin = g;
            for (std::size_t k = 0; k < gin.size(); ++k)
              if (!(in.data[k] > T{0})) gin.data[k] = T{0};
            return gin;
          },
          [&](const Sigmoid&) {
            Tensor3<T> gin = g;
            for (std::size_t k = 0; k < gin.size(); ++k) gin.data[k] *= out.data[k] * (T{1} - out.data[k]);
            return gin;
          },
          [&](const AvgPool2&) { return avgpool_backward(in, g); },
      },
      layer);
}

template <typename T>
Tensor3<T> Sequential::forward(const Tensor3<T>& in, const ParamStore<T>& params, Trace<T>* trace) const {
  if (trace) {
    trace->clear();
    trace->reserve(layers_.size() + 1);
    trace->push_back(in);
  }
  Tensor3<T> cur = in;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cur = layer_forward(layers_[i], cur, params);
    if (!all_finite<T>(cur.data)) throw numeric_error("non-finite activation in layer " + names_[i]);
    if (trace) trace->push_back(cur);
  }
  return cur;
}

template <typename T>
Tensor3<T> Sequential::backward(const Trace<T>& trace, const Tensor3<T>& grad_out, const ParamStore<T>& params,
                                Gradients<T>* grads) const {
  if (trace.size() != layers_.size() + 1) throw dimension_error("Sequential::backward: trace does not match");
  Tensor3<T> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layer_backward(layers_[i], trace[i], trace[i + 1], g, params, grads);
  return g;
}

#define ALIGNMIX_LAYERS_INSTANTIATE(T)                                                                        \
  template Tensor3<T> layer_forward<T>(const Layer&, const Tensor3<T>&, const ParamStore<T>&);              \
  template Tensor3<T> layer_backward<T>(const Layer&, const Tensor3<T>&, const Tensor3<T>&, const Tensor3<T>&, \
                                        const ParamStore<T>&, Gradients<T>*);                                 \
  template Tensor3<T> Sequential::forward<T>(const Tensor3<T>&, const ParamStore<T>&, Trace<T>*) const;      \
  template Tensor3<T> Sequential::backward<T>(const Trace<T>&, const Tensor3<T>&, const ParamStore<T>&,      \
                                              Gradients<T>*) const;

ALIGNMIX_LAYERS_INSTANTIATE(float)
ALIGNMIX_LAYERS_INSTANTIATE(double)

#undef ALIGNMIX_LAYERS_INSTANTIATE

}  // namespace alignmix::model
