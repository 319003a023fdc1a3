// SPDX-License-Identifier: Apache-2.0
#include "styledraw/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace styledraw::ad {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_init = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad_init) {
      grad = Tensor::zeros(value.shape());
      grad_init = true;
    }
    return grad;
  }
};

}  // namespace detail

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Var Var::leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

const Tensor& Var::value() const {
  if (!node_) throw std::logic_error("autodiff: empty Var");
  return node_->value;
}

Tensor Var::grad_or_zero() const {
  if (!node_) throw std::logic_error("autodiff: empty Var");
  if (node_->grad_init) return node_->grad;
  return Tensor::zeros(node_->value.shape());
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

void Var::backward() const {
  if (!node_) throw std::logic_error("autodiff: empty Var");
  if (node_->value.size() != 1) throw std::logic_error("autodiff: backward root must be scalar");

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS over nodes that require a gradient.
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (node_->requires_grad) stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->grad_init && n->backward_fn) n->backward_fn(n->grad);
  }
}

Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(const Tensor& out_grad)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents) {
    if (!p.valid()) throw std::logic_error("autodiff: empty parent Var");
    n->parents.push_back(p.node());
    n->requires_grad = n->requires_grad || p.node()->requires_grad;
  }
  if (n->requires_grad) n->backward_fn = std::move(backward);
  return Var(std::move(n));
}

bool var_needs_grad(const Var& v) { return v.requires_grad(); }

Tensor& var_grad_buffer(const Var& v) { return v.node()->ensure_grad(); }

// ---- elementwise ----

static void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string("autodiff: shape mismatch in ") + op);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (var_needs_grad(a)) {
      Tensor& ga = var_grad_buffer(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (var_needs_grad(b)) {
      Tensor& gb = var_grad_buffer(b);
      for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (var_needs_grad(a)) {
      Tensor& ga = var_grad_buffer(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (var_needs_grad(b)) {
      Tensor& gb = var_grad_buffer(b);
      for (std::int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (var_needs_grad(a)) {
      Tensor& ga = var_grad_buffer(a);
      const auto& bv2 = b.value();
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (var_needs_grad(b)) {
      Tensor& gb = var_grad_buffer(b);
      const auto& av = a.value();
      for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return make_op(std::move(out), {a}, [a, s](const Tensor& g) {
    Tensor& ga = var_grad_buffer(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += s;
  return make_op(std::move(out), {a}, [a](const Tensor& g) {
    Tensor& ga = var_grad_buffer(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  const auto& av = a.value();
  for (std::int64_t i = 0; i < av.size(); ++i) s += av[i];
  return make_op(Tensor::scalar(s), {a}, [a](const Tensor& g) {
    Tensor& ga = var_grad_buffer(a);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.value().size());
  return scale(sum(a), inv);
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] = 0.0;
  return make_op(std::move(out), {a}, [a](const Tensor& g) {
    Tensor& ga = var_grad_buffer(a);
    const auto& av = a.value();
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) ga[i] += g[i];
  });
}

// ---- linear algebra ----

Var matmul(const Var& a, const Var& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw std::invalid_argument("autodiff: matmul shape mismatch");
  const int n = av.dim(0), k = av.dim(1), m = bv.dim(1);
  Tensor out({n, m});
  MapMat(out.data(), n, m) = CMapMat(av.data(), n, k) * CMapMat(bv.data(), k, m);
  return make_op(std::move(out), {a, b}, [a, b, n, k, m](const Tensor& g) {
    CMapMat G(g.data(), n, m);
    if (var_needs_grad(a)) {
      Tensor& ga = var_grad_buffer(a);
      MapMat(ga.data(), n, k) += G * CMapMat(b.value().data(), k, m).transpose();
    }
    if (var_needs_grad(b)) {
      Tensor& gb = var_grad_buffer(b);
      MapMat(gb.data(), k, m) += CMapMat(a.value().data(), n, k).transpose() * G;
    }
  });
}

Var l2_normalize_rows(const Var& a, double eps) {
  const auto& av = a.value();
  const int rows = av.rank() == 1 ? 1 : av.dim(0);
  const int d = av.rank() == 1 ? av.dim(0) : av.dim(1);
  if (av.rank() > 2) throw std::invalid_argument("autodiff: l2_normalize_rows wants rank <= 2");
  Tensor out = av;
  std::vector<double> scales(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (int j = 0; j < d; ++j) ss += av[r * static_cast<std::int64_t>(d) + j] * av[r * static_cast<std::int64_t>(d) + j];
    const double nrm = std::sqrt(ss);
    const double s = nrm > eps ? nrm : eps;
    scales[static_cast<std::size_t>(r)] = s;
    for (int j = 0; j < d; ++j) out[r * static_cast<std::int64_t>(d) + j] /= s;
  }
  Tensor kept = out;
  return make_op(std::move(out), {a}, [a, kept, scales, rows, d](const Tensor& g) {
    Tensor& ga = var_grad_buffer(a);
    for (int r = 0; r < rows; ++r) {
      const std::int64_t base = r * static_cast<std::int64_t>(d);
      double gdotx = 0.0;
      for (int j = 0; j < d; ++j) gdotx += g[base + j] * kept[base + j];
      const double inv = 1.0 / scales[static_cast<std::size_t>(r)];
      for (int j = 0; j < d; ++j) ga[base + j] += (g[base + j] - gdotx * kept[base + j]) * inv;
    }
  });
}

Var unit_cosine_distance(const Var& a, const Var& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() != bv.size()) throw std::invalid_argument("autodiff: cosine dim mismatch");
  double dotv = 0.0;
  for (std::int64_t i = 0; i < av.size(); ++i) dotv += av[i] * bv[i];
  const bool interior = dotv > -1.0 && dotv < 1.0;
  const double c = clamp(dotv, -1.0, 1.0);
  return make_op(Tensor::scalar(1.0 - c), {a, b}, [a, b, interior](const Tensor& g) {
    if (!interior) return;
    if (var_needs_grad(a)) {
      Tensor& ga = var_grad_buffer(a);
      const auto& bv2 = b.value();
      for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] -= g[0] * bv2[i];
    }
    if (var_needs_grad(b)) {
      Tensor& gb = var_grad_buffer(b);
      const auto& av2 = a.value();
      for (std::int64_t i = 0; i < gb.size(); ++i) gb[i] -= g[0] * av2[i];
    }
  });
}

// ---- convolution and pooling ----

static Tensor im2col_3x3(const Tensor& img) {
  const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
  Tensor cols({H * W, 9 * C});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double* row = cols.data() + (static_cast<std::int64_t>(y) * W + x) * 9 * C;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          double* dst = row + (ky * 3 + kx) * C;
          if (sy < 0 || sy >= H || sx < 0 || sx >= W) {
            for (int c = 0; c < C; ++c) dst[c] = 0.0;
          } else {
            const double* src = img.data() + (static_cast<std::int64_t>(sy) * W + sx) * C;
            for (int c = 0; c < C; ++c) dst[c] = src[c];
          }
        }
      }
    }
  return cols;
}

Var conv2d_3x3(const Var& img, const Var& weight, const Var& bias) {
  const auto& iv = img.value();
  const auto& wv = weight.value();
  const auto& bv = bias.value();
  if (iv.rank() != 3 || wv.rank() != 4 || wv.dim(0) != 3 || wv.dim(1) != 3 ||
      wv.dim(2) != iv.dim(2) || bv.size() != wv.dim(3))
    throw std::invalid_argument("autodiff: conv2d_3x3 shape mismatch");
  const int H = iv.dim(0), W = iv.dim(1), Cin = iv.dim(2), Cout = wv.dim(3);

  Tensor cols = im2col_3x3(iv);
  Tensor out({H, W, Cout});
  MapMat(out.data(), H * W, Cout) =
      CMapMat(cols.data(), H * W, 9 * Cin) * CMapMat(wv.data(), 9 * Cin, Cout);
  for (int p = 0; p < H * W; ++p)
    for (int c = 0; c < Cout; ++c) out[static_cast<std::int64_t>(p) * Cout + c] += bv[c];

  return make_op(std::move(out), {img, weight, bias},
                 [img, weight, bias, H, W, Cin, Cout](const Tensor& g) {
    CMapMat G(g.data(), H * W, Cout);
    if (var_needs_grad(weight)) {
      Tensor cols = im2col_3x3(img.value());
      Tensor& gw = var_grad_buffer(weight);
      MapMat(gw.data(), 9 * Cin, Cout) +=
          CMapMat(cols.data(), H * W, 9 * Cin).transpose() * G;
    }
    if (var_needs_grad(bias)) {
      Tensor& gb = var_grad_buffer(bias);
      for (int p = 0; p < H * W; ++p)
        for (int c = 0; c < Cout; ++c) gb[c] += g[static_cast<std::int64_t>(p) * Cout + c];
    }
    if (var_needs_grad(img)) {
      Tensor dcols({H * W, 9 * Cin});
      MapMat(dcols.data(), H * W, 9 * Cin) =
          G * CMapMat(weight.value().data(), 9 * Cin, Cout).transpose();
      Tensor& gi = var_grad_buffer(img);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double* row = dcols.data() + (static_cast<std::int64_t>(y) * W + x) * 9 * Cin;
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= H) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = x + kx - 1;
              if (sx < 0 || sx >= W) continue;
              double* dst = gi.data() + (static_cast<std::int64_t>(sy) * W + sx) * Cin;
              const double* src = row + (ky * 3 + kx) * Cin;
              for (int c = 0; c < Cin; ++c) dst[c] += src[c];
            }
          }
        }
    }
  });
}

Var maxpool2(const Var& img) {
  const auto& iv = img.value();
  if (iv.rank() != 3 || iv.dim(0) % 2 || iv.dim(1) % 2)
    throw std::invalid_argument("autodiff: maxpool2 wants even HxW");
  const int H = iv.dim(0), W = iv.dim(1), C = iv.dim(2);
  const int oh = H / 2, ow = W / 2;
  Tensor out({oh, ow, C});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(oh) * ow * C);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int c = 0; c < C; ++c) {
        double best = -1e300;
        std::int64_t best_idx = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::int64_t idx =
                (static_cast<std::int64_t>(2 * y + dy) * W + (2 * x + dx)) * C + c;
            if (iv[idx] > best) {
              best = iv[idx];
              best_idx = idx;
            }
          }
        const std::int64_t o = (static_cast<std::int64_t>(y) * ow + x) * C + c;
        out[o] = best;
        (*argmax)[static_cast<std::size_t>(o)] = best_idx;
      }
  return make_op(std::move(out), {img}, [img, argmax](const Tensor& g) {
    Tensor& gi = var_grad_buffer(img);
    for (std::int64_t o = 0; o < g.size(); ++o) gi[(*argmax)[static_cast<std::size_t>(o)]] += g[o];
  });
}

Var avgpool2(const Var& img) {
  const auto& iv = img.value();
  if (iv.rank() != 3 || iv.dim(0) % 2 || iv.dim(1) % 2)
    throw std::invalid_argument("autodiff: avgpool2 wants even HxW");
  return avgpool_blocks(img, 2);
}

Var avgpool_blocks(const Var& img, int block) {
  const auto& iv = img.value();
  if (iv.rank() != 3 || iv.dim(0) % block || iv.dim(1) % block || block < 1)
    throw std::invalid_argument("autodiff: avgpool_blocks indivisible");
  const int H = iv.dim(0), W = iv.dim(1), C = iv.dim(2);
  const int oh = H / block, ow = W / block;
  const double inv = 1.0 / (static_cast<double>(block) * block);
  Tensor out({oh, ow, C});
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int dy = 0; dy < block; ++dy)
          for (int dx = 0; dx < block; ++dx)
            s += iv.at(y * block + dy, x * block + dx, c);
        out.at(y, x, c) = s * inv;
      }
  return make_op(std::move(out), {img}, [img, block, inv, C](const Tensor& g) {
    Tensor& gi = var_grad_buffer(img);
    for (int y = 0; y < g.dim(0); ++y)
      for (int x = 0; x < g.dim(1); ++x)
        for (int c = 0; c < C; ++c) {
          const double gv = g.at(y, x, c) * inv;
          for (int dy = 0; dy < block; ++dy)
            for (int dx = 0; dx < block; ++dx)
              gi.at(y * block + dy, x * block + dx, c) += gv;
        }
  });
}

// ---- sampling ----

void bilinear_taps(int H, int W, double px, double py, int idx[4], double w[4]) {
  const double fx = px - 0.5;
  const double fy = py - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double tx = fx - x0f;
  const double ty = fy - y0f;
  const int x0 = static_cast<int>(x0f);
  const int y0 = static_cast<int>(y0f);
  auto cx = [W](int x) { return x < 0 ? 0 : (x >= W ? W - 1 : x); };
  auto cy = [H](int y) { return y < 0 ? 0 : (y >= H ? H - 1 : y); };
  const int xa = cx(x0), xb = cx(x0 + 1), ya = cy(y0), yb = cy(y0 + 1);
  idx[0] = ya * W + xa;
  idx[1] = ya * W + xb;
  idx[2] = yb * W + xa;
  idx[3] = yb * W + xb;
  w[0] = (1.0 - tx) * (1.0 - ty);
  w[1] = tx * (1.0 - ty);
  w[2] = (1.0 - tx) * ty;
  w[3] = tx * ty;
}

Var resample_projective(const Var& img, const Mat3& out_to_src, int oh, int ow) {
  const auto& iv = img.value();
  if (iv.rank() != 3) throw std::invalid_argument("autodiff: resample wants HWC");
  const int H = iv.dim(0), W = iv.dim(1), C = iv.dim(2);
  Tensor out({oh, ow, C});
  // Taps are recomputed in backward from the same map; keep it cheap.
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const Vec2 src = out_to_src.apply({(x + 0.5) / ow, (y + 0.5) / oh});
      int idx[4];
      double w[4];
      bilinear_taps(H, W, src.x * W, src.y * H, idx, w);
      for (int c = 0; c < C; ++c) {
        double v = 0.0;
        for (int t = 0; t < 4; ++t) v += w[t] * iv[static_cast<std::int64_t>(idx[t]) * C + c];
        out.at(y, x, c) = v;
      }
    }
  return make_op(std::move(out), {img}, [img, out_to_src, oh, ow, H, W, C](const Tensor& g) {
    Tensor& gi = var_grad_buffer(img);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const Vec2 src = out_to_src.apply({(x + 0.5) / ow, (y + 0.5) / oh});
        int idx[4];
        double w[4];
        bilinear_taps(H, W, src.x * W, src.y * H, idx, w);
        for (int c = 0; c < C; ++c) {
          const double gv = g.at(y, x, c);
          for (int t = 0; t < 4; ++t) gi[static_cast<std::int64_t>(idx[t]) * C + c] += w[t] * gv;
        }
      }
  });
}

Var sample_bilinear(const Var& img, const std::vector<Vec2>& coords) {
  const auto& iv = img.value();
  if (iv.rank() != 3) throw std::invalid_argument("autodiff: sample wants HWC");
  const int H = iv.dim(0), W = iv.dim(1), C = iv.dim(2);
  for (const auto& c : coords)
    if (!(c.x >= 0.0 && c.x <= 1.0 && c.y >= 0.0 && c.y <= 1.0))
      throw std::invalid_argument("autodiff: sample coordinate outside [0,1]^2");
  const int N = static_cast<int>(coords.size());
  Tensor out({N, C});
  for (int i = 0; i < N; ++i) {
    int idx[4];
    double w[4];
    bilinear_taps(H, W, coords[static_cast<std::size_t>(i)].x * W,
                  coords[static_cast<std::size_t>(i)].y * H, idx, w);
    for (int c = 0; c < C; ++c) {
      double v = 0.0;
      for (int t = 0; t < 4; ++t) v += w[t] * iv[static_cast<std::int64_t>(idx[t]) * C + c];
      out.at(i, c) = v;
    }
  }
  auto coords_copy = std::make_shared<std::vector<Vec2>>(coords);
  return make_op(std::move(out), {img}, [img, coords_copy, H, W, C](const Tensor& g) {
    Tensor& gi = var_grad_buffer(img);
    for (std::size_t i = 0; i < coords_copy->size(); ++i) {
      int idx[4];
      double w[4];
      bilinear_taps(H, W, (*coords_copy)[i].x * W, (*coords_copy)[i].y * H, idx, w);
      for (int c = 0; c < C; ++c) {
        const double gv = g.at(static_cast<int>(i), c);
        for (int t = 0; t < 4; ++t) gi[static_cast<std::int64_t>(idx[t]) * C + c] += w[t] * gv;
      }
    }
  });
}

Var gather_pixels(const Var& img, const std::vector<std::pair<int, int>>& yx) {
  const auto& iv = img.value();
  if (iv.rank() != 3) throw std::invalid_argument("autodiff: gather wants HWC");
  const int H = iv.dim(0), W = iv.dim(1), C = iv.dim(2);
  for (const auto& [y, x] : yx)
    if (y < 0 || y >= H || x < 0 || x >= W)
      throw std::invalid_argument("autodiff: gather index out of range");
  const int N = static_cast<int>(yx.size());
  Tensor out({N, C});
  for (int i = 0; i < N; ++i) {
    const auto& [y, x] = yx[static_cast<std::size_t>(i)];
    for (int c = 0; c < C; ++c) out.at(i, c) = iv.at(y, x, c);
  }
  auto idx = std::make_shared<std::vector<std::pair<int, int>>>(yx);
  return make_op(std::move(out), {img}, [img, idx, C](const Tensor& g) {
    Tensor& gi = var_grad_buffer(img);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const auto& [y, x] = (*idx)[i];
      for (int c = 0; c < C; ++c) gi.at(y, x, c) += g.at(static_cast<int>(i), c);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("autodiff: concat of nothing");
  const int N = parts[0].value().dim(0);
  int total = 0;
  for (const auto& p : parts) {
    if (p.value().rank() != 2 || p.value().dim(0) != N)
      throw std::invalid_argument("autodiff: concat row mismatch");
    total += p.value().dim(1);
  }
  Tensor out({N, total});
  int off = 0;
  for (const auto& p : parts) {
    const int d = p.value().dim(1);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < d; ++j) out.at(i, off + j) = p.value().at(i, j);
    off += d;
  }
  auto parts_copy = std::make_shared<std::vector<Var>>(parts);
  return make_op(std::move(out), {parts.begin(), parts.end()},
                 [parts_copy, N](const Tensor& g) {
    int off = 0;
    for (const auto& p : *parts_copy) {
      const int d = p.value().dim(1);
      if (var_needs_grad(p)) {
        Tensor& gp = var_grad_buffer(p);
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < d; ++j) gp.at(i, j) += g.at(i, off + j);
      }
      off += d;
    }
  });
}

Var reshape(const Var& a, const std::vector<int>& dims) {
  Tensor out(dims, a.value().vec());
  return make_op(std::move(out), {a}, [a](const Tensor& g) {
    Tensor& ga = var_grad_buffer(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

}  // namespace styledraw::ad
