#include "uird/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "uird/error.hpp"

namespace uird::nn {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::Shape, std::string(op) + ": shape " + to_string(a.shape()) + " vs " +
                               to_string(b.shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    fail(ErrorKind::Shape, std::string(op) + ": expected rank " + std::to_string(rank) +
                               ", got " + to_string(a.shape()));
  }
}

// Elementwise unary op with derivative expressed through input and output.
template <typename F, typename D>
Var unary(Var a, F f, D df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia, df](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i], y[i]);
  });
}

// Half-open range of output positions t for which t*stride + tap - padding
// falls inside [0, target_len), further clipped to t < t_len.
std::pair<std::size_t, std::size_t> tap_range(std::size_t tap, std::size_t stride,
                                              std::size_t padding, std::size_t target_len,
                                              std::size_t t_len) {
  // t*stride >= padding - tap
  std::size_t lo = 0;
  if (padding > tap) lo = (padding - tap + stride - 1) / stride;
  // t*stride <= target_len - 1 + padding - tap
  if (target_len + padding < tap + 1) return {0, 0};
  std::size_t hi = (target_len - 1 + padding - tap) / stride + 1;
  hi = std::min(hi, t_len);
  if (lo >= hi) return {0, 0};
  return {lo, hi};
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t id : {ia, ib}) {
      if (!t.requires_grad(id)) continue;
      Tensor& gx = t.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gx = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& va = t.value(ia);
    const Tensor& vb = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * vb[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gx = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * va[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var leaky_relu(Var a, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) fail(ErrorKind::Validation, "leaky_relu slope must be in (0, 1)");
  return unary(
      a, [slope](double x) { return x >= 0.0 ? x : slope * x; },
      [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log_clamped(Var a, double floor) {
  return unary(
      a, [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor({1}, s), {a}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad(ia);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var reshape(Var a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var detach(Var a) { return a.tape().constant(a.value()); }

Var dense(Var x, Var weight, Var bias) {
  require_rank(x, 2, "dense");
  require_rank(weight, 2, "dense");
  const std::size_t n = x.shape()[0], in = x.shape()[1], out = weight.shape()[0];
  if (weight.shape()[1] != in) {
    fail(ErrorKind::Shape, "dense: input " + to_string(x.shape()) + " vs weight " +
                               to_string(weight.shape()));
  }
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().size() != out) fail(ErrorKind::Shape, "dense: bias size");

  Tensor y({n, out});
  const double* xv = x.value().ptr();
  const double* wv = weight.value().ptr();
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = xv + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = wv + o * in;
      double acc = has_bias ? bias.value()[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      y[r * out + o] = acc;
    }
  }

  const std::size_t ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : 0;
  auto fn = [ix, iw, ib, has_bias, n, in, out](Tape& t, std::size_t self) {
    const double* g = t.grad(self).ptr();
    const double* xv = t.value(ix).ptr();
    const double* wv = t.value(iw).ptr();
    if (t.requires_grad(ix)) {
      double* gx = t.grad(ix).ptr();
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g[r * out + o];
          if (go == 0.0) continue;
          const double* wr = wv + o * in;
          double* gxr = gx + r * in;
          for (std::size_t i = 0; i < in; ++i) gxr[i] += go * wr[i];
        }
      }
    }
    if (t.requires_grad(iw)) {
      double* gw = t.grad(iw).ptr();
      for (std::size_t r = 0; r < n; ++r) {
        const double* xr = xv + r * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g[r * out + o];
          if (go == 0.0) continue;
          double* gwr = gw + o * in;
          for (std::size_t i = 0; i < in; ++i) gwr[i] += go * xr[i];
        }
      }
    }
    if (has_bias && t.requires_grad(ib)) {
      double* gb = t.grad(ib).ptr();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < out; ++o) gb[o] += g[r * out + o];
    }
  };
  if (has_bias) return x.tape().record(std::move(y), {x, weight, bias}, fn);
  return x.tape().record(std::move(y), {x, weight}, fn);
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding) {
  if (kernel == 0 || stride == 0) fail(ErrorKind::Shape, "conv1d: kernel and stride must be positive");
  if (length + 2 * padding < kernel) {
    fail(ErrorKind::Shape, "conv1d: non-positive output length for L=" + std::to_string(length) +
                               " k=" + std::to_string(kernel));
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

std::size_t tconv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                  std::size_t padding) {
  if (kernel == 0 || stride == 0 || length == 0) {
    fail(ErrorKind::Shape, "tconv1d: kernel, stride and length must be positive");
  }
  const std::size_t full = (length - 1) * stride + kernel;
  if (full <= 2 * padding) {
    fail(ErrorKind::Shape, "tconv1d: non-positive output length for L=" + std::to_string(length));
  }
  return full - 2 * padding;
}

Var conv1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  require_rank(x, 3, "conv1d");
  require_rank(weight, 3, "conv1d");
  const std::size_t n = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const std::size_t cout = weight.shape()[0], k = weight.shape()[2];
  if (weight.shape()[1] != cin) {
    fail(ErrorKind::Shape, "conv1d: input " + to_string(x.shape()) + " vs weight " +
                               to_string(weight.shape()));
  }
  const std::size_t lout = conv1d_output_length(len, k, stride, padding);
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().size() != cout) fail(ErrorKind::Shape, "conv1d: bias size");

  Tensor y({n, cout, lout});
  const double* xv = x.value().ptr();
  const double* wv = weight.value().ptr();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* yo = y.ptr() + (b * cout + co) * lout;
      const double bv = has_bias ? bias.value()[co] : 0.0;
      for (std::size_t t = 0; t < lout; ++t) yo[t] = bv;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xi = xv + (b * cin + ci) * len;
        const double* wk = wv + (co * cin + ci) * k;
        for (std::size_t tap = 0; tap < k; ++tap) {
          const double w = wk[tap];
          auto [t0, t1] = tap_range(tap, stride, padding, len, lout);
          std::size_t idx = t0 * stride + tap - padding;
          for (std::size_t t = t0; t < t1; ++t, idx += stride) yo[t] += w * xi[idx];
        }
      }
    }
  }

  const std::size_t ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : 0;
  auto fn = [=](Tape& tp, std::size_t self) {
    const double* g = tp.grad(self).ptr();
    const double* xv = tp.value(ix).ptr();
    const double* wv = tp.value(iw).ptr();
    const bool gx_on = tp.requires_grad(ix), gw_on = tp.requires_grad(iw);
    double* gx = gx_on ? tp.grad(ix).ptr() : nullptr;
    double* gw = gw_on ? tp.grad(iw).ptr() : nullptr;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t co = 0; co < cout; ++co) {
        const double* go = g + (b * cout + co) * lout;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const std::size_t xoff = (b * cin + ci) * len;
          const std::size_t woff = (co * cin + ci) * k;
          for (std::size_t tap = 0; tap < k; ++tap) {
            auto [t0, t1] = tap_range(tap, stride, padding, len, lout);
            if (t0 >= t1) continue;
            const std::size_t base = xoff + t0 * stride + tap - padding;
            if (gx) {
              const double w = wv[woff + tap];
              std::size_t idx = base;
              for (std::size_t t = t0; t < t1; ++t, idx += stride) gx[idx] += w * go[t];
            }
            if (gw) {
              double acc = 0.0;
              std::size_t idx = base;
              for (std::size_t t = t0; t < t1; ++t, idx += stride) acc += go[t] * xv[idx];
              gw[woff + tap] += acc;
            }
          }
        }
      }
    }
    if (has_bias && tp.requires_grad(ib)) {
      double* gb = tp.grad(ib).ptr();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t co = 0; co < cout; ++co) {
          const double* go = g + (b * cout + co) * lout;
          double acc = 0.0;
          for (std::size_t t = 0; t < lout; ++t) acc += go[t];
          gb[co] += acc;
        }
    }
  };
  if (has_bias) return x.tape().record(std::move(y), {x, weight, bias}, fn);
  return x.tape().record(std::move(y), {x, weight}, fn);
}

Var tconv1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  require_rank(x, 3, "tconv1d");
  require_rank(weight, 3, "tconv1d");
  const std::size_t n = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const std::size_t cout = weight.shape()[1], k = weight.shape()[2];
  if (weight.shape()[0] != cin) {
    fail(ErrorKind::Shape, "tconv1d: input " + to_string(x.shape()) + " vs weight " +
                               to_string(weight.shape()));
  }
  const std::size_t lout = tconv1d_output_length(len, k, stride, padding);
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().size() != cout) fail(ErrorKind::Shape, "tconv1d: bias size");

  Tensor y({n, cout, lout});
  const double* xv = x.value().ptr();
  const double* wv = weight.value().ptr();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* yo = y.ptr() + (b * cout + co) * lout;
      const double bv = has_bias ? bias.value()[co] : 0.0;
      for (std::size_t j = 0; j < lout; ++j) yo[j] = bv;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xi = xv + (b * cin + ci) * len;
        const double* wk = wv + (ci * cout + co) * k;
        for (std::size_t tap = 0; tap < k; ++tap) {
          const double w = wk[tap];
          auto [t0, t1] = tap_range(tap, stride, padding, lout, len);
          std::size_t idx = t0 * stride + tap - padding;
          for (std::size_t t = t0; t < t1; ++t, idx += stride) yo[idx] += w * xi[t];
        }
      }
    }
  }

  const std::size_t ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : 0;
  auto fn = [=](Tape& tp, std::size_t self) {
    const double* g = tp.grad(self).ptr();
    const double* xv = tp.value(ix).ptr();
    const double* wv = tp.value(iw).ptr();
    double* gx = tp.requires_grad(ix) ? tp.grad(ix).ptr() : nullptr;
    double* gw = tp.requires_grad(iw) ? tp.grad(iw).ptr() : nullptr;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t co = 0; co < cout; ++co) {
        const double* go = g + (b * cout + co) * lout;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const std::size_t xoff = (b * cin + ci) * len;
          const std::size_t woff = (ci * cout + co) * k;
          for (std::size_t tap = 0; tap < k; ++tap) {
            auto [t0, t1] = tap_range(tap, stride, padding, lout, len);
            if (t0 >= t1) continue;
            const std::size_t base = t0 * stride + tap - padding;
            if (gx) {
              const double w = wv[woff + tap];
              double* gxi = gx + xoff;
              std::size_t idx = base;
              for (std::size_t t = t0; t < t1; ++t, idx += stride) gxi[t] += w * go[idx];
            }
            if (gw) {
              const double* xi = xv + xoff;
              double acc = 0.0;
              std::size_t idx = base;
              for (std::size_t t = t0; t < t1; ++t, idx += stride) acc += xi[t] * go[idx];
              gw[woff + tap] += acc;
            }
          }
        }
      }
    }
    if (has_bias && tp.requires_grad(ib)) {
      double* gb = tp.grad(ib).ptr();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t co = 0; co < cout; ++co) {
          const double* go = g + (b * cout + co) * lout;
          double acc = 0.0;
          for (std::size_t j = 0; j < lout; ++j) acc += go[j];
          gb[co] += acc;
        }
    }
  };
  if (has_bias) return x.tape().record(std::move(y), {x, weight, bias}, fn);
  return x.tape().record(std::move(y), {x, weight}, fn);
}

Var batchnorm(Var x, Var gamma, Var beta, const BatchNormBuffers& buffers, bool training) {
  const Shape& s = x.shape();
  if (s.size() != 2 && s.size() != 3) fail(ErrorKind::Shape, "batchnorm: expected (N, C[, L])");
  const std::size_t n = s[0], c = s[1], len = s.size() == 3 ? s[2] : 1;
  if (gamma.value().size() != c || beta.value().size() != c) {
    fail(ErrorKind::Shape, "batchnorm: gamma/beta size must equal channel count");
  }
  const double eps = buffers.eps;
  const double count = static_cast<double>(n * len);
  const double* xv = x.value().ptr();

  std::vector<double> mu(c, 0.0), var(c, 0.0);
  if (training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = xv + (b * c + ch) * len;
        for (std::size_t l = 0; l < len; ++l) acc += p[l];
      }
      mu[ch] = acc / count;
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = xv + (b * c + ch) * len;
        for (std::size_t l = 0; l < len; ++l) {
          const double d = p[l] - mu[ch];
          sq += d * d;
        }
      }
      var[ch] = sq / count;
    }
    if (buffers.running_mean && buffers.running_var) {
      const double m = buffers.momentum;
      const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        (*buffers.running_mean)[ch] = m * (*buffers.running_mean)[ch] + (1.0 - m) * mu[ch];
        (*buffers.running_var)[ch] = m * (*buffers.running_var)[ch] + (1.0 - m) * var[ch] * unbias;
      }
    }
  } else {
    if (!buffers.running_mean || !buffers.running_var) {
      fail(ErrorKind::Runtime, "batchnorm: eval mode needs running statistics");
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = (*buffers.running_mean)[ch];
      var[ch] = (*buffers.running_var)[ch];
    }
  }

  std::vector<double> sd(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    sd[ch] = std::sqrt(var[ch] + eps);
    inv_std[ch] = 1.0 / sd[ch];
  }

  Tensor y(s);
  Tensor xhat(s);
  const double* gv = gamma.value().ptr();
  const double* bv = beta.value().ptr();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * len;
      for (std::size_t l = 0; l < len; ++l) {
        const double h = (xv[off + l] - mu[ch]) / sd[ch];
        xhat[off + l] = h;
        y[off + l] = gv[ch] * h + bv[ch];
      }
    }

  const std::size_t ix = x.id(), ig = gamma.id(), ibt = beta.id();
  return x.tape().record(
      std::move(y), {x, gamma, beta},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
        const double* g = tp.grad(self).ptr();
        const double* gv = tp.value(ig).ptr();
        std::vector<double> sum_g(c, 0.0), sum_gh(c, 0.0);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * len;
            for (std::size_t l = 0; l < len; ++l) {
              sum_g[ch] += g[off + l];
              sum_gh[ch] += g[off + l] * xhat[off + l];
            }
          }
        if (tp.requires_grad(ig)) {
          Tensor& gg = tp.grad(ig);
          for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_gh[ch];
        }
        if (tp.requires_grad(ibt)) {
          Tensor& gb = tp.grad(ibt);
          for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
        }
        if (tp.requires_grad(ix)) {
          double* gx = tp.grad(ix).ptr();
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t ch = 0; ch < c; ++ch) {
              const std::size_t off = (b * c + ch) * len;
              const double k = gv[ch] * inv_std[ch];
              if (training) {
                const double mg = sum_g[ch] / count, mgh = sum_gh[ch] / count;
                for (std::size_t l = 0; l < len; ++l)
                  gx[off + l] += k * (g[off + l] - mg - xhat[off + l] * mgh);
              } else {
                for (std::size_t l = 0; l < len; ++l) gx[off + l] += k * g[off + l];
              }
            }
        }
      });
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::Shape, "cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

Var cosine_similarity(Var z, Var m) {
  require_rank(z, 2, "cosine_similarity");
  require_rank(m, 2, "cosine_similarity");
  const std::size_t n = z.shape()[0], d = z.shape()[1], k = m.shape()[0];
  if (m.shape()[1] != d) fail(ErrorKind::Shape, "cosine_similarity: latent width mismatch");
  const double* zv = z.value().ptr();
  const double* mv = m.value().ptr();

  std::vector<double> zn(n), mn(k);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += zv[r * d + j] * zv[r * d + j];
    zn[r] = std::sqrt(s);
  }
  for (std::size_t r = 0; r < k; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += mv[r * d + j] * mv[r * d + j];
    mn[r] = std::sqrt(s);
  }
  Tensor y({n, k});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t q = 0; q < k; ++q) {
      if (zn[r] == 0.0 || mn[q] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += zv[r * d + j] * mv[q * d + j];
      y[r * k + q] = dot / (zn[r] * mn[q]);
    }

  const std::size_t iz = z.id(), im = m.id();
  return z.tape().record(
      std::move(y), {z, m},
      [=, zn = std::move(zn), mn = std::move(mn)](Tape& tp, std::size_t self) {
        const double* g = tp.grad(self).ptr();
        const double* c = tp.value(self).ptr();
        const double* zv = tp.value(iz).ptr();
        const double* mv = tp.value(im).ptr();
        double* gz = tp.requires_grad(iz) ? tp.grad(iz).ptr() : nullptr;
        double* gm = tp.requires_grad(im) ? tp.grad(im).ptr() : nullptr;
        for (std::size_t r = 0; r < n; ++r) {
          if (zn[r] == 0.0) continue;
          for (std::size_t q = 0; q < k; ++q) {
            if (mn[q] == 0.0) continue;
            const double gc = g[r * k + q];
            if (gc == 0.0) continue;
            const double cc = c[r * k + q];
            const double inv = 1.0 / (zn[r] * mn[q]);
            if (gz) {
              const double a = gc * inv, bcoef = gc * cc / (zn[r] * zn[r]);
              for (std::size_t j = 0; j < d; ++j)
                gz[r * d + j] += a * mv[q * d + j] - bcoef * zv[r * d + j];
            }
            if (gm) {
              const double a = gc * inv, bcoef = gc * cc / (mn[q] * mn[q]);
              for (std::size_t j = 0; j < d; ++j)
                gm[q * d + j] += a * zv[r * d + j] - bcoef * mv[q * d + j];
            }
          }
        }
      });
}

Var softmax_rows(Var a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t n = a.shape()[0], k = a.shape()[1];
  const double* av = a.value().ptr();
  Tensor y({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    double mx = av[r * k];
    for (std::size_t q = 1; q < k; ++q) mx = std::max(mx, av[r * k + q]);
    double s = 0.0;
    for (std::size_t q = 0; q < k; ++q) {
      y[r * k + q] = std::exp(av[r * k + q] - mx);
      s += y[r * k + q];
    }
    for (std::size_t q = 0; q < k; ++q) y[r * k + q] /= s;
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [=](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const double* g = tp.grad(self).ptr();
    const double* p = tp.value(self).ptr();
    double* ga = tp.grad(ia).ptr();
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t q = 0; q < k; ++q) dot += g[r * k + q] * p[r * k + q];
      for (std::size_t q = 0; q < k; ++q) ga[r * k + q] += p[r * k + q] * (g[r * k + q] - dot);
    }
  });
}

Var matmul(Var a, Var b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t n = a.shape()[0], k = a.shape()[1], d = b.shape()[1];
  if (b.shape()[0] != k) {
    fail(ErrorKind::Shape, "matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const double* av = a.value().ptr();
  const double* bv = b.value().ptr();
  Tensor y({n, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t q = 0; q < k; ++q) {
      const double w = av[r * k + q];
      for (std::size_t j = 0; j < d; ++j) y[r * d + j] += w * bv[q * d + j];
    }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [=](Tape& tp, std::size_t self) {
    const double* g = tp.grad(self).ptr();
    const double* av = tp.value(ia).ptr();
    const double* bv = tp.value(ib).ptr();
    if (tp.requires_grad(ia)) {
      double* ga = tp.grad(ia).ptr();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t q = 0; q < k; ++q) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j) acc += g[r * d + j] * bv[q * d + j];
          ga[r * k + q] += acc;
        }
    }
    if (tp.requires_grad(ib)) {
      double* gb = tp.grad(ib).ptr();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t q = 0; q < k; ++q) {
          const double w = av[r * k + q];
          for (std::size_t j = 0; j < d; ++j) gb[q * d + j] += w * g[r * d + j];
        }
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets, Tensor* probabilities) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.shape()[0], c = logits.shape()[1];
  if (targets.size() != n) fail(ErrorKind::Shape, "softmax_cross_entropy: target count mismatch");
  const double* lv = logits.value().ptr();
  Tensor p({n, c});
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int target = targets[r];
    if (target < 0 || static_cast<std::size_t>(target) >= c) {
      fail(ErrorKind::Validation, "softmax_cross_entropy: target " + std::to_string(target) +
                                      " outside [0, " + std::to_string(c) + ")");
    }
    double mx = lv[r * c];
    for (std::size_t q = 1; q < c; ++q) mx = std::max(mx, lv[r * c + q]);
    double s = 0.0;
    for (std::size_t q = 0; q < c; ++q) s += std::exp(lv[r * c + q] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t q = 0; q < c; ++q) p[r * c + q] = std::exp(lv[r * c + q] - lse);
    loss += lse - lv[r * c + static_cast<std::size_t>(target)];
  }
  loss /= static_cast<double>(n);
  if (probabilities) *probabilities = p;

  std::vector<int> tg(targets.begin(), targets.end());
  const std::size_t il = logits.id();
  return logits.tape().record(
      Tensor({1}, loss), {logits},
      [=, p = std::move(p), tg = std::move(tg)](Tape& tp, std::size_t self) {
        if (!tp.requires_grad(il)) return;
        const double g = tp.grad(self)[0] / static_cast<double>(n);
        double* gl = tp.grad(il).ptr();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t q = 0; q < c; ++q) {
            const double onehot = static_cast<int>(q) == tg[r] ? 1.0 : 0.0;
            gl[r * c + q] += g * (p[r * c + q] - onehot);
          }
      });
}

}  // namespace uird::nn
