#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "edit/errors.hpp"
#include "edit/tensor.hpp"

namespace edit::ad {

using edit::Tensor;

/// Handle into a Tape. Cheap to copy; only valid for the tape it came from.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Pad { zero, reflect };

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace detail {

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int reflect_index(int q, int extent) {
  if (q < 0) q = -q;
  if (q >= extent) q = 2 * extent - 2 - q;
  return q;
}

inline Tensor pad2d(const Tensor& x, int pad, Pad mode) {
  if (pad == 0) return x;
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(mode == Pad::zero || (pad <= h - 1 && pad <= w - 1), ErrorKind::shape,
          "reflection pad larger than spatial extent");
  Tensor out({n, c, h + 2 * pad, w + 2 * pad});
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic)
      for (int y = 0; y < h + 2 * pad; ++y) {
        int sy = y - pad;
        if (mode == Pad::reflect) sy = reflect_index(sy, h);
        if (sy < 0 || sy >= h) continue;  // zero pad rows stay zero
        for (int xx = 0; xx < w + 2 * pad; ++xx) {
          int sx = xx - pad;
          if (mode == Pad::reflect) sx = reflect_index(sx, w);
          if (sx < 0 || sx >= w) continue;
          out.at4(in, ic, y, xx) = x.at4(in, ic, sy, sx);
        }
      }
  return out;
}

/// Scatter gradients of the padded map back onto the unpadded one.
inline void unpad2d_accumulate(const Tensor& gp, int pad, Pad mode, Tensor& gx) {
  const int n = gx.dim(0), c = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
  if (pad == 0) {
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gp.data[i];
    return;
  }
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic)
      for (int y = 0; y < h + 2 * pad; ++y) {
        int sy = y - pad;
        if (mode == Pad::reflect) sy = reflect_index(sy, h);
        if (sy < 0 || sy >= h) continue;
        for (int xx = 0; xx < w + 2 * pad; ++xx) {
          int sx = xx - pad;
          if (mode == Pad::reflect) sx = reflect_index(sx, w);
          if (sx < 0 || sx >= w) continue;
          gx.at4(in, ic, sy, sx) += gp.at4(in, ic, y, xx);
        }
      }
}

/// Unfold one padded sample into a [C*k*k, Ho*Wo] matrix (row-major).
inline void im2col(const Tensor& xp, int sample, int k, int stride, int ho,
                   int wo, double* cols) {
  const int c = xp.dim(1), hp = xp.dim(2), wp = xp.dim(3);
  const int64_t spatial = static_cast<int64_t>(ho) * wo;
  const double* base =
      xp.data.data() + static_cast<int64_t>(sample) * c * hp * wp;
  for (int ic = 0; ic < c; ++ic)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row =
            cols + ((static_cast<int64_t>(ic) * k + ky) * k + kx) * spatial;
        const double* src = base + (static_cast<int64_t>(ic) * hp + ky) * wp + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const double* line = src + static_cast<int64_t>(oy) * stride * wp;
          for (int ox = 0; ox < wo; ++ox)
            row[static_cast<int64_t>(oy) * wo + ox] = line[ox * stride];
        }
      }
}

/// Fold a [C*k*k, Ho*Wo] gradient matrix back onto the padded sample.
inline void col2im_accumulate(const double* cols, int sample, int k, int stride,
                              int ho, int wo, Tensor& gxp) {
  const int c = gxp.dim(1), hp = gxp.dim(2), wp = gxp.dim(3);
  const int64_t spatial = static_cast<int64_t>(ho) * wo;
  double* base = gxp.data.data() + static_cast<int64_t>(sample) * c * hp * wp;
  for (int ic = 0; ic < c; ++ic)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* row =
            cols + ((static_cast<int64_t>(ic) * k + ky) * k + kx) * spatial;
        double* dst = base + (static_cast<int64_t>(ic) * hp + ky) * wp + kx;
        for (int oy = 0; oy < ho; ++oy) {
          double* line = dst + static_cast<int64_t>(oy) * stride * wp;
          for (int ox = 0; ox < wo; ++ox)
            line[ox * stride] += row[static_cast<int64_t>(oy) * wo + ox];
        }
      }
}

}  // namespace detail

/// Reverse-mode tape. Every op records the values it needs for an exact
/// analytic backward pass; `backward(loss)` walks nodes in reverse creation
/// order, which is a valid topological order by construction.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily on first accumulation
    bool needs = false;
    std::function<void(Tape&, int)> backprop;  // empty for leaves
    std::vector<Tensor> aux;                   // saved forward intermediates
  };

  Var leaf(Tensor value, bool requires_grad = false) {
    return push(std::move(value), requires_grad, nullptr);
  }

  const Tensor& val(Var v) const { return node(v).value; }

  bool needs_grad(Var v) const { return node(v).needs; }

  /// Gradient of a node; zero-shaped if nothing flowed into it.
  const Tensor& grad(Var v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
  }

  size_t size() const { return nodes_.size(); }

  void backward(Var loss) {
    Node& ln = node(loss);
    require(ln.value.numel() == 1, ErrorKind::shape,
            "backward requires a scalar loss");
    require(ln.needs, ErrorKind::domain,
            "loss does not depend on any differentiable leaf");
    ensure_grad(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (!n.needs || !n.backprop || n.grad.empty()) continue;
      n.backprop(*this, id);
    }
  }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.same_shape(tb), ErrorKind::shape, "add: shape mismatch");
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = ta.data[i] + tb.data[i];
    int ia = a.id, ib = b.id;
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [ia, ib](Tape& t, int self) {
                  const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                  t.accumulate(ia, g);
                  t.accumulate(ib, g);
                });
  }

  Var sub(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.same_shape(tb), ErrorKind::shape, "sub: shape mismatch");
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = ta.data[i] - tb.data[i];
    int ia = a.id, ib = b.id;
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [ia, ib](Tape& t, int self) {
                  const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                  t.accumulate(ia, g);
                  if (t.wants(ib)) {
                    Tensor& gb = t.ensure_grad(ib);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      gb.data[i] -= g.data[i];
                  }
                });
  }

  Var mul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.same_shape(tb), ErrorKind::shape, "mul: shape mismatch");
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = ta.data[i] * tb.data[i];
    int ia = a.id, ib = b.id;
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [ia, ib](Tape& t, int self) {
                  const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                  if (t.wants(ia)) {
                    Tensor& ga = t.ensure_grad(ia);
                    const Tensor& vb = t.nodes_[static_cast<size_t>(ib)].value;
                    for (size_t i = 0; i < g.data.size(); ++i)
                      ga.data[i] += g.data[i] * vb.data[i];
                  }
                  if (t.wants(ib)) {
                    Tensor& gb = t.ensure_grad(ib);
                    const Tensor& va = t.nodes_[static_cast<size_t>(ia)].value;
                    for (size_t i = 0; i < g.data.size(); ++i)
                      gb.data[i] += g.data[i] * va.data[i];
                  }
                });
  }

  Var scale(Var a, double k) {
    const Tensor& ta = val(a);
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = ta.data[i] * k;
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia, k](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      Tensor& ga = t.ensure_grad(ia);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * k;
    });
  }

  Var square(Var a) {
    const Tensor& ta = val(a);
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = ta.data[i] * ta.data[i];
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      const Tensor& va = t.nodes_[static_cast<size_t>(ia)].value;
      Tensor& ga = t.ensure_grad(ia);
      for (size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += 2.0 * va.data[i] * g.data[i];
    });
  }

  Var abs_op(Var a) {
    const Tensor& ta = val(a);
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = std::fabs(ta.data[i]);
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      const Tensor& va = t.nodes_[static_cast<size_t>(ia)].value;
      Tensor& ga = t.ensure_grad(ia);
      for (size_t i = 0; i < g.data.size(); ++i) {
        double s = va.data[i] > 0.0 ? 1.0 : (va.data[i] < 0.0 ? -1.0 : 0.0);
        ga.data[i] += s * g.data[i];
      }
    });
  }

  // ---- activations ----

  Var relu(Var a) {
    const Tensor& ta = val(a);
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = ta.data[i] > 0.0 ? ta.data[i] : 0.0;
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      const Tensor& va = t.nodes_[static_cast<size_t>(ia)].value;
      Tensor& ga = t.ensure_grad(ia);
      for (size_t i = 0; i < g.data.size(); ++i)
        if (va.data[i] > 0.0) ga.data[i] += g.data[i];
    });
  }

  Var leaky_relu(Var a, double slope) {
    const Tensor& ta = val(a);
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = ta.data[i] > 0.0 ? ta.data[i] : slope * ta.data[i];
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia, slope](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      const Tensor& va = t.nodes_[static_cast<size_t>(ia)].value;
      Tensor& ga = t.ensure_grad(ia);
      for (size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += (va.data[i] > 0.0 ? 1.0 : slope) * g.data[i];
    });
  }

  Var tanh_op(Var a) {
    const Tensor& ta = val(a);
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = std::tanh(ta.data[i]);
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Node& n = t.nodes_[static_cast<size_t>(self)];
      Tensor& ga = t.ensure_grad(ia);
      for (size_t i = 0; i < n.grad.data.size(); ++i) {
        double y = n.value.data[i];
        ga.data[i] += (1.0 - y * y) * n.grad.data[i];
      }
    });
  }

  // ---- structure ----

  Var reshape(Var a, std::vector<int> shape) {
    const Tensor& ta = val(a);
    require(Tensor::numel_of(shape) == ta.numel(), ErrorKind::shape,
            "reshape: element count mismatch");
    Tensor out(std::move(shape), ta.data);
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      Tensor& ga = t.ensure_grad(ia);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    });
  }

  Var slice_flat(Var a, int64_t offset, int64_t len) {
    const Tensor& ta = val(a);
    require(offset >= 0 && offset + len <= ta.numel(), ErrorKind::shape,
            "slice_flat: out of range");
    Tensor out({static_cast<int>(len)});
    std::copy(ta.data.begin() + offset, ta.data.begin() + offset + len,
              out.data.begin());
    int ia = a.id;
    return push(std::move(out), needs_grad(a),
                [ia, offset](Tape& t, int self) {
                  if (!t.wants(ia)) return;
                  const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                  Tensor& ga = t.ensure_grad(ia);
                  for (size_t i = 0; i < g.data.size(); ++i)
                    ga.data[static_cast<size_t>(offset) + i] += g.data[i];
                });
  }

  /// Concatenate 1-D vectors.
  Var concat_flat(const std::vector<Var>& parts) {
    require(!parts.empty(), ErrorKind::shape, "concat_flat: empty list");
    int64_t total = 0;
    bool any_req = false;
    for (Var p : parts) {
      total += val(p).numel();
      any_req = any_req || needs_grad(p);
    }
    Tensor out({static_cast<int>(total)});
    int64_t off = 0;
    std::vector<std::pair<int, int64_t>> spans;  // (id, offset)
    for (Var p : parts) {
      const Tensor& tp = val(p);
      std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + off);
      spans.emplace_back(p.id, off);
      off += tp.numel();
    }
    return push(std::move(out), any_req, [spans](Tape& t, int self) {
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      for (auto [id, offset] : spans) {
        if (!t.wants(id)) continue;
        Tensor& gp = t.ensure_grad(id);
        for (size_t i = 0; i < gp.data.size(); ++i)
          gp.data[i] += g.data[static_cast<size_t>(offset) + i];
      }
    });
  }

  /// Append constant per-sample columns to a [N, F] matrix (e.g. a one-hot).
  Var concat_cols_const(Var a, const std::vector<double>& extra) {
    const Tensor& ta = val(a);
    require(ta.ndim() == 2, ErrorKind::shape, "concat_cols_const: want [N,F]");
    const int n = ta.dim(0), f = ta.dim(1), e = static_cast<int>(extra.size());
    Tensor out({n, f + e});
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < f; ++j)
        out[static_cast<int64_t>(i) * (f + e) + j] =
            ta[static_cast<int64_t>(i) * f + j];
      for (int j = 0; j < e; ++j)
        out[static_cast<int64_t>(i) * (f + e) + f + j] = extra[static_cast<size_t>(j)];
    }
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia, f, e](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      Tensor& ga = t.ensure_grad(ia);
      const int n = ga.dim(0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j)
          ga.data[static_cast<size_t>(i) * f + j] +=
              g.data[static_cast<size_t>(i) * (f + e) + j];
    });
  }

  /// Append constant feature planes to a [N, C, H, W] tensor; each entry of
  /// `planes` becomes one constant channel.
  Var concat_planes_const(Var a, const std::vector<double>& planes) {
    const Tensor& ta = val(a);
    require(ta.ndim() == 4, ErrorKind::shape, "concat_planes_const: want NCHW");
    const int n = ta.dim(0), c = ta.dim(1), h = ta.dim(2), w = ta.dim(3);
    const int e = static_cast<int>(planes.size());
    Tensor out({n, c + e, h, w});
    for (int in = 0; in < n; ++in) {
      for (int ic = 0; ic < c; ++ic)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            out.at4(in, ic, y, x) = ta.at4(in, ic, y, x);
      for (int ie = 0; ie < e; ++ie)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            out.at4(in, c + ie, y, x) = planes[static_cast<size_t>(ie)];
    }
    int ia = a.id;
    return push(std::move(out), needs_grad(a), [ia, c](Tape& t, int self) {
      if (!t.wants(ia)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      Tensor& ga = t.ensure_grad(ia);
      const int n = ga.dim(0), h = ga.dim(2), w = ga.dim(3);
      for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              ga.at4(in, ic, y, x) += g.at4(in, ic, y, x);
    });
  }

  // ---- reductions ----

  Var sum_all(Var a) {
    const Tensor& ta = val(a);
    double s = 0.0;
    for (double v : ta.data) s += v;
    int ia = a.id;
    return push(Tensor::scalar(s), needs_grad(a), [ia](Tape& t, int self) {
      if (!t.wants(ia)) return;
      double g = t.nodes_[static_cast<size_t>(self)].grad[0];
      Tensor& ga = t.ensure_grad(ia);
      for (double& v : ga.data) v += g;
    });
  }

  Var mean_all(Var a) {
    const Tensor& ta = val(a);
    double s = 0.0;
    for (double v : ta.data) s += v;
    const double inv = 1.0 / static_cast<double>(ta.numel());
    int ia = a.id;
    return push(Tensor::scalar(s * inv), needs_grad(a),
                [ia, inv](Tape& t, int self) {
                  if (!t.wants(ia)) return;
                  double g = t.nodes_[static_cast<size_t>(self)].grad[0] * inv;
                  Tensor& ga = t.ensure_grad(ia);
                  for (double& v : ga.data) v += g;
                });
  }

  Var add_many(const std::vector<Var>& xs) {
    require(!xs.empty(), ErrorKind::shape, "add_many: empty list");
    Var acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
  }

  // ---- spatial ----

  /// 2-d convolution with square kernel. x [N,Ci,H,W], w [Co,Ci,k,k], b [Co].
  Var conv2d(Var x, Var w, Var b, int stride, int pad, Pad mode) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    const Tensor& tb = val(b);
    require(tx.ndim() == 4 && tw.ndim() == 4, ErrorKind::shape,
            "conv2d: want NCHW input and OIkk kernel");
    require(tx.dim(1) == tw.dim(1), ErrorKind::shape,
            "conv2d: channel mismatch between input and kernel");
    require(tw.dim(2) == tw.dim(3), ErrorKind::shape, "conv2d: square kernels only");
    const int n = tx.dim(0), ci = tx.dim(1), h = tx.dim(2), wdt = tx.dim(3);
    const int co = tw.dim(0), k = tw.dim(2);
    require(tb.numel() == co, ErrorKind::shape, "conv2d: bias size mismatch");
    const int ho = detail::conv_out_dim(h, k, stride, pad);
    const int wo = detail::conv_out_dim(wdt, k, stride, pad);
    require(ho >= 1 && wo >= 1, ErrorKind::shape,
            "conv2d: input too small for kernel/stride");

    Tensor xp = detail::pad2d(tx, pad, mode);
    const int ckk = ci * k * k;
    const int64_t spatial = static_cast<int64_t>(ho) * wo;
    Tensor cols({n, ckk, static_cast<int>(spatial)});
    Tensor out({n, co, ho, wo});
    CMapMat wm(tw.data.data(), co, ckk);
    for (int in = 0; in < n; ++in) {
      double* colp = cols.data.data() + static_cast<int64_t>(in) * ckk * spatial;
      detail::im2col(xp, in, k, stride, ho, wo, colp);
      CMapMat cm(colp, ckk, spatial);
      MapMat om(out.data.data() + static_cast<int64_t>(in) * co * spatial, co,
                spatial);
      om.noalias() = wm * cm;
      for (int oc = 0; oc < co; ++oc)
        om.row(oc).array() += tb[oc];
    }

    int ix = x.id, iw = w.id, ib = b.id;
    bool req = needs_grad(x) || needs_grad(w) || needs_grad(b);
    auto bw = [ix, iw, ib, stride, pad, mode, n, ci, co, k, ho, wo, h,
               wdt](Tape& t, int self) {
      Node& node = t.nodes_[static_cast<size_t>(self)];
      const Tensor& g = node.grad;
      const Tensor& cols = node.aux[0];
      const int ckk = ci * k * k;
      const int64_t spatial = static_cast<int64_t>(ho) * wo;
      if (t.wants(ib)) {
        Tensor& gb = t.ensure_grad(ib);
        for (int in = 0; in < n; ++in)
          for (int oc = 0; oc < co; ++oc) {
            const double* gp =
                g.data.data() + (static_cast<int64_t>(in) * co + oc) * spatial;
            double s = 0.0;
            for (int64_t i = 0; i < spatial; ++i) s += gp[i];
            gb[oc] += s;
          }
      }
      if (t.wants(iw)) {
        Tensor& gw = t.ensure_grad(iw);
        MapMat gwm(gw.data.data(), co, ckk);
        for (int in = 0; in < n; ++in) {
          CMapMat gm(g.data.data() + static_cast<int64_t>(in) * co * spatial, co,
                     spatial);
          CMapMat cm(cols.data.data() + static_cast<int64_t>(in) * ckk * spatial,
                     ckk, spatial);
          gwm.noalias() += gm * cm.transpose();
        }
      }
      if (t.wants(ix)) {
        const Tensor& tw = t.nodes_[static_cast<size_t>(iw)].value;
        CMapMat wm(tw.data.data(), co, ckk);
        Tensor gxp({n, ci, h + 2 * pad, wdt + 2 * pad});
        RowMat gcols(ckk, spatial);
        for (int in = 0; in < n; ++in) {
          CMapMat gm(g.data.data() + static_cast<int64_t>(in) * co * spatial, co,
                     spatial);
          gcols.noalias() = wm.transpose() * gm;
          detail::col2im_accumulate(gcols.data(), in, k, stride, ho, wo, gxp);
        }
        Tensor& gx = t.ensure_grad(ix);
        detail::unpad2d_accumulate(gxp, pad, mode, gx);
      }
    };
    std::vector<Tensor> aux;
    aux.push_back(std::move(cols));
    return push(std::move(out), req, std::move(bw), std::move(aux));
  }

  /// Per-sample per-channel normalization with affine terms. Statistics use
  /// population variance; eps is added inside the square root.
  Var instance_norm(Var x, Var scale, Var shift, double eps = 1e-5) {
    const Tensor& tx = val(x);
    require(tx.ndim() == 4, ErrorKind::shape, "instance_norm: want NCHW");
    const int n = tx.dim(0), c = tx.dim(1), h = tx.dim(2), w = tx.dim(3);
    const Tensor& ts = val(scale);
    const Tensor& tf = val(shift);
    require(ts.numel() == c && tf.numel() == c, ErrorKind::shape,
            "instance_norm: affine size mismatch");
    const int64_t m = static_cast<int64_t>(h) * w;
    Tensor xhat({n, c, h, w});
    Tensor inv_std({n, c});
    Tensor out({n, c, h, w});
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic) {
        const double* xs =
            tx.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
        double mean = 0.0;
        for (int64_t i = 0; i < m; ++i) mean += xs[i];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t i = 0; i < m; ++i) {
          double d = xs[i] - mean;
          var += d * d;
        }
        var /= static_cast<double>(m);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<int64_t>(in) * c + ic] = is;
        double* xh = xhat.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
        double* op = out.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
        const double g = ts[ic], bta = tf[ic];
        for (int64_t i = 0; i < m; ++i) {
          xh[i] = (xs[i] - mean) * is;
          op[i] = xh[i] * g + bta;
        }
      }

    int ix = x.id, is_ = scale.id, if_ = shift.id;
    bool req = needs_grad(x) || needs_grad(scale) || needs_grad(shift);
    auto bw = [ix, is_, if_, n, c, m](Tape& t, int self) {
      Node& node = t.nodes_[static_cast<size_t>(self)];
      const Tensor& g = node.grad;
      const Tensor& xhat = node.aux[0];
      const Tensor& inv_std = node.aux[1];
      const Tensor& ts = t.nodes_[static_cast<size_t>(is_)].value;
      if (t.wants(is_) || t.wants(if_)) {
        for (int ic = 0; ic < c; ++ic) {
          double gs = 0.0, gf = 0.0;
          for (int in = 0; in < n; ++in) {
            const double* gp =
                g.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
            const double* xh =
                xhat.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
            for (int64_t i = 0; i < m; ++i) {
              gs += gp[i] * xh[i];
              gf += gp[i];
            }
          }
          if (t.wants(is_)) t.ensure_grad(is_)[ic] += gs;
          if (t.wants(if_)) t.ensure_grad(if_)[ic] += gf;
        }
      }
      if (t.wants(ix)) {
        Tensor& gx = t.ensure_grad(ix);
        const double invm = 1.0 / static_cast<double>(m);
        for (int in = 0; in < n; ++in)
          for (int ic = 0; ic < c; ++ic) {
            const double* gp =
                g.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
            const double* xh =
                xhat.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
            double* gxp =
                gx.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
            const double gamma = ts[ic];
            const double is = inv_std[static_cast<int64_t>(in) * c + ic];
            double sum_g = 0.0, sum_gx = 0.0;
            for (int64_t i = 0; i < m; ++i) {
              sum_g += gp[i];
              sum_gx += gp[i] * xh[i];
            }
            sum_g *= invm;
            sum_gx *= invm;
            for (int64_t i = 0; i < m; ++i)
              gxp[i] += gamma * is * (gp[i] - sum_g - xh[i] * sum_gx);
          }
      }
    };
    std::vector<Tensor> aux;
    aux.push_back(std::move(xhat));
    aux.push_back(std::move(inv_std));
    return push(std::move(out), req, std::move(bw), std::move(aux));
  }

  Var upsample_nearest2(Var x) {
    const Tensor& tx = val(x);
    require(tx.ndim() == 4, ErrorKind::shape, "upsample: want NCHW");
    const int n = tx.dim(0), c = tx.dim(1), h = tx.dim(2), w = tx.dim(3);
    Tensor out({n, c, 2 * h, 2 * w});
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) {
            double v = tx.at4(in, ic, y, xx);
            out.at4(in, ic, 2 * y, 2 * xx) = v;
            out.at4(in, ic, 2 * y, 2 * xx + 1) = v;
            out.at4(in, ic, 2 * y + 1, 2 * xx) = v;
            out.at4(in, ic, 2 * y + 1, 2 * xx + 1) = v;
          }
    int ix = x.id;
    return push(std::move(out), needs_grad(x), [ix](Tape& t, int self) {
      if (!t.wants(ix)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      Tensor& gx = t.ensure_grad(ix);
      const int n = gx.dim(0), c = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
      for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic)
          for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
              gx.at4(in, ic, y, xx) += g.at4(in, ic, 2 * y, 2 * xx) +
                                       g.at4(in, ic, 2 * y, 2 * xx + 1) +
                                       g.at4(in, ic, 2 * y + 1, 2 * xx) +
                                       g.at4(in, ic, 2 * y + 1, 2 * xx + 1);
    });
  }

  Var global_avg_pool(Var x) {
    const Tensor& tx = val(x);
    require(tx.ndim() == 4, ErrorKind::shape, "global_avg_pool: want NCHW");
    const int n = tx.dim(0), c = tx.dim(1);
    const int64_t m = static_cast<int64_t>(tx.dim(2)) * tx.dim(3);
    Tensor out({n, c});
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic) {
        const double* p = tx.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
        double s = 0.0;
        for (int64_t i = 0; i < m; ++i) s += p[i];
        out[static_cast<int64_t>(in) * c + ic] = s / static_cast<double>(m);
      }
    int ix = x.id;
    return push(std::move(out), needs_grad(x), [ix, m](Tape& t, int self) {
      if (!t.wants(ix)) return;
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      Tensor& gx = t.ensure_grad(ix);
      const int n = gx.dim(0), c = gx.dim(1);
      const double invm = 1.0 / static_cast<double>(m);
      for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic) {
          double gv = g[static_cast<int64_t>(in) * c + ic] * invm;
          double* p = gx.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
          for (int64_t i = 0; i < m; ++i) p[i] += gv;
        }
    });
  }

  /// Fully connected layer: x [N,F], w [O,F], b [O] -> [N,O].
  Var linear(Var x, Var w, Var b) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    const Tensor& tb = val(b);
    require(tx.ndim() == 2 && tw.ndim() == 2, ErrorKind::shape,
            "linear: want [N,F] x [O,F]");
    require(tx.dim(1) == tw.dim(1), ErrorKind::shape,
            "linear: feature dim mismatch");
    const int n = tx.dim(0), f = tx.dim(1), o = tw.dim(0);
    require(tb.numel() == o, ErrorKind::shape, "linear: bias size mismatch");
    Tensor out({n, o});
    CMapMat xm(tx.data.data(), n, f);
    CMapMat wm(tw.data.data(), o, f);
    MapMat om(out.data.data(), n, o);
    om.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < o; ++j) out[static_cast<int64_t>(i) * o + j] += tb[j];
    int ix = x.id, iw = w.id, ib = b.id;
    bool req = needs_grad(x) || needs_grad(w) || needs_grad(b);
    return push(std::move(out), req, [ix, iw, ib, n, f, o](Tape& t, int self) {
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      CMapMat gm(g.data.data(), n, o);
      if (t.wants(ib)) {
        Tensor& gb = t.ensure_grad(ib);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < o; ++j)
            gb[j] += g[static_cast<int64_t>(i) * o + j];
      }
      if (t.wants(iw)) {
        const Tensor& tx = t.nodes_[static_cast<size_t>(ix)].value;
        CMapMat xm(tx.data.data(), n, f);
        Tensor& gw = t.ensure_grad(iw);
        MapMat gwm(gw.data.data(), o, f);
        gwm.noalias() += gm.transpose() * xm;
      }
      if (t.wants(ix)) {
        const Tensor& tw = t.nodes_[static_cast<size_t>(iw)].value;
        CMapMat wm(tw.data.data(), o, f);
        Tensor& gx = t.ensure_grad(ix);
        MapMat gxm(gx.data.data(), n, f);
        gxm.noalias() += gm * wm;
      }
    });
  }

  // ---- statistics ----

  /// Spatial mean per sample and channel: [N,C,H,W] -> [N,C].
  Var channel_mean(Var x) { return global_avg_pool(x); }

  /// Spatial population standard deviation per sample and channel.
  Var channel_std(Var x) {
    const Tensor& tx = val(x);
    require(tx.ndim() == 4, ErrorKind::shape, "channel_std: want NCHW");
    const int n = tx.dim(0), c = tx.dim(1);
    const int64_t m = static_cast<int64_t>(tx.dim(2)) * tx.dim(3);
    Tensor out({n, c});
    Tensor means({n, c});
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic) {
        const double* p = tx.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
        double mean = 0.0;
        for (int64_t i = 0; i < m; ++i) mean += p[i];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t i = 0; i < m; ++i) {
          double d = p[i] - mean;
          var += d * d;
        }
        var /= static_cast<double>(m);
        means[static_cast<int64_t>(in) * c + ic] = mean;
        out[static_cast<int64_t>(in) * c + ic] = std::sqrt(var);
      }
    int ix = x.id;
    std::vector<Tensor> aux;
    aux.push_back(std::move(means));
    return push(std::move(out), needs_grad(x),
                [ix, m](Tape& t, int self) {
                  if (!t.wants(ix)) return;
                  Node& node = t.nodes_[static_cast<size_t>(self)];
                  const Tensor& g = node.grad;
                  const Tensor& sig = node.value;
                  const Tensor& means = node.aux[0];
                  const Tensor& tx = t.nodes_[static_cast<size_t>(ix)].value;
                  Tensor& gx = t.ensure_grad(ix);
                  const int n = tx.dim(0), c = tx.dim(1);
                  for (int in = 0; in < n; ++in)
                    for (int ic = 0; ic < c; ++ic) {
                      int64_t nc = static_cast<int64_t>(in) * c + ic;
                      double s = sig[nc];
                      if (s < 1e-12) continue;
                      double coef = g[nc] / (s * static_cast<double>(m));
                      const double* p = tx.data.data() + nc * m;
                      double* gp = gx.data.data() + nc * m;
                      double mean = means[nc];
                      for (int64_t i = 0; i < m; ++i)
                        gp[i] += coef * (p[i] - mean);
                    }
                },
                std::move(aux));
  }

  // ---- adversarial-loss reductions ----
  // Probabilities are clamped to [kProbEps, 1 - kProbEps] before the log, so
  // the losses stay finite for arbitrarily extreme logits. Clamped entries
  // get zero gradient.

  static constexpr double kProbEps = 1e-7;

  /// mean(log sigmoid(l)) over all entries -> scalar.
  Var mean_log_sigmoid(Var logits) {
    const Tensor& tl = val(logits);
    const double inv = 1.0 / static_cast<double>(tl.numel());
    double s = 0.0;
    for (double l : tl.data) {
      double p = std::clamp(1.0 / (1.0 + std::exp(-l)), kProbEps, 1.0 - kProbEps);
      s += std::log(p);
    }
    int il = logits.id;
    return push(Tensor::scalar(s * inv), needs_grad(logits),
                [il, inv](Tape& t, int self) {
                  if (!t.wants(il)) return;
                  double g = t.nodes_[static_cast<size_t>(self)].grad[0] * inv;
                  const Tensor& tl = t.nodes_[static_cast<size_t>(il)].value;
                  Tensor& gl = t.ensure_grad(il);
                  for (size_t i = 0; i < tl.data.size(); ++i) {
                    double p = 1.0 / (1.0 + std::exp(-tl.data[i]));
                    if (p <= kProbEps || p >= 1.0 - kProbEps) continue;
                    gl.data[i] += g * (1.0 - p);
                  }
                });
  }

  /// mean(log(1 - sigmoid(l))) over all entries -> scalar.
  Var mean_log_one_minus_sigmoid(Var logits) {
    const Tensor& tl = val(logits);
    const double inv = 1.0 / static_cast<double>(tl.numel());
    double s = 0.0;
    for (double l : tl.data) {
      double q =
          std::clamp(1.0 - 1.0 / (1.0 + std::exp(-l)), kProbEps, 1.0 - kProbEps);
      s += std::log(q);
    }
    int il = logits.id;
    return push(Tensor::scalar(s * inv), needs_grad(logits),
                [il, inv](Tape& t, int self) {
                  if (!t.wants(il)) return;
                  double g = t.nodes_[static_cast<size_t>(self)].grad[0] * inv;
                  const Tensor& tl = t.nodes_[static_cast<size_t>(il)].value;
                  Tensor& gl = t.ensure_grad(il);
                  for (size_t i = 0; i < tl.data.size(); ++i) {
                    double p = 1.0 / (1.0 + std::exp(-tl.data[i]));
                    double q = 1.0 - p;
                    if (q <= kProbEps || q >= 1.0 - kProbEps) continue;
                    gl.data[i] -= g * p;
                  }
                });
  }

 private:
  Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<size_t>(v.id)]; }

  bool wants(int id) { return nodes_[static_cast<size_t>(id)].needs; }

  Tensor& ensure_grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
  }

  void accumulate(int id, const Tensor& g) {
    if (!wants(id)) return;
    Tensor& t = ensure_grad(id);
    for (size_t i = 0; i < g.data.size(); ++i) t.data[i] += g.data[i];
  }

  Var push(Tensor value, bool req, std::function<void(Tape&, int)> bw,
           std::vector<Tensor> aux = {}) {
    Node n;
    n.value = std::move(value);
    n.needs = req;
    n.backprop = std::move(bw);
    n.aux = std::move(aux);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::deque<Node> nodes_;
};

}  // namespace edit::ad
