// SPDX-License-Identifier: Apache-2.0
#include "styledraw/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "styledraw/rng.hpp"

namespace styledraw {
namespace {

constexpr double kNormEps = 1e-12;
constexpr std::uint64_t kFeatureCoordTag = 0xfeedc0a7ull;
constexpr std::uint64_t kPaletteTag = 0x9a1e77e0ull;

enum class Metric { kCosine, kEuclidean };

void check_rows(const Tensor& t, const char* who) {
  if (t.rank() != 2 || t.dim(0) < 1 || t.dim(1) < 1)
    throw std::invalid_argument(std::string(who) +
                                ": want a non-empty [N, d] matrix");
}

double pair_cost(const Tensor& A, int i, const Tensor& B, int j, int d,
                 Metric m) {
  if (m == Metric::kEuclidean) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
      const double diff = A.at(i, k) - B.at(j, k);
      s += diff * diff;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int k = 0; k < d; ++k) {
    const double av = A.at(i, k), bv = B.at(j, k);
    dot += av * bv;
    na += av * av;
    nb += bv * bv;
  }
  const double denom = std::max(std::sqrt(na) * std::sqrt(nb), kNormEps);
  const double s = clamp(dot / denom, -1.0, 1.0);
  return 1.0 - s;
}

// Accumulates w * d(cost)/d(row) into the rows' gradient buffers.
void pair_cost_grad(const Tensor& A, int i, const Tensor& B, int j, int d,
                    Metric m, double w, Tensor* gA, Tensor* gB) {
  if (m == Metric::kEuclidean) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
      const double diff = A.at(i, k) - B.at(j, k);
      s += diff * diff;
    }
    const double c = std::sqrt(s);
    if (c < kNormEps) return;
    for (int k = 0; k < d; ++k) {
      const double u = (A.at(i, k) - B.at(j, k)) / c;
      if (gA) gA->at(i, k) += w * u;
      if (gB) gB->at(j, k) -= w * u;
    }
    return;
  }
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (int k = 0; k < d; ++k) {
    const double av = A.at(i, k), bv = B.at(j, k);
    dot += av * bv;
    na2 += av * av;
    nb2 += bv * bv;
  }
  const double na = std::sqrt(na2), nb = std::sqrt(nb2);
  if (na < kNormEps || nb < kNormEps) return;
  const double s = dot / (na * nb);
  if (s <= -1.0 || s >= 1.0) return;
  for (int k = 0; k < d; ++k) {
    const double ah = A.at(i, k) / na, bh = B.at(j, k) / nb;
    if (gA) gA->at(i, k) += w * (-(bh - s * ah) / na);
    if (gB) gB->at(j, k) += w * (-(ah - s * bh) / nb);
  }
}

ad::Var remd_op(const ad::Var& a, const ad::Var& b, Metric m,
                const char* who) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_rows(A, who);
  check_rows(B, who);
  if (A.dim(1) != B.dim(1))
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  const int N = A.dim(0), M = B.dim(0), d = A.dim(1);

  std::vector<double> row_min(static_cast<std::size_t>(N),
                              std::numeric_limits<double>::infinity());
  std::vector<double> col_min(static_cast<std::size_t>(M),
                              std::numeric_limits<double>::infinity());
  std::vector<int> row_arg(static_cast<std::size_t>(N), 0);
  std::vector<int> col_arg(static_cast<std::size_t>(M), 0);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < M; ++j) {
      const double c = pair_cost(A, i, B, j, d, m);
      if (c < row_min[static_cast<std::size_t>(i)]) {
        row_min[static_cast<std::size_t>(i)] = c;
        row_arg[static_cast<std::size_t>(i)] = j;
      }
      if (c < col_min[static_cast<std::size_t>(j)]) {
        col_min[static_cast<std::size_t>(j)] = c;
        col_arg[static_cast<std::size_t>(j)] = i;
      }
    }
  double ra = 0.0, rb = 0.0;
  for (double v : row_min) ra += v;
  for (double v : col_min) rb += v;
  ra /= N;
  rb /= M;
  const bool row_branch = ra >= rb;

  return ad::make_op(
      Tensor::scalar(row_branch ? ra : rb), {a, b},
      [a, b, row_arg, col_arg, row_branch, N, M, d, m](const Tensor& g) {
        const double gv = g[0];
        Tensor* gA = ad::var_needs_grad(a) ? &ad::var_grad_buffer(a) : nullptr;
        Tensor* gB = ad::var_needs_grad(b) ? &ad::var_grad_buffer(b) : nullptr;
        if (!gA && !gB) return;
        if (row_branch) {
          for (int i = 0; i < N; ++i)
            pair_cost_grad(a.value(), i, b.value(),
                           row_arg[static_cast<std::size_t>(i)], d, m, gv / N,
                           gA, gB);
        } else {
          for (int j = 0; j < M; ++j)
            pair_cost_grad(a.value(), col_arg[static_cast<std::size_t>(j)],
                           b.value(), j, d, m, gv / M, gA, gB);
        }
      });
}

// Moments in a canonical row order so the result is bitwise invariant under
// row permutation. Tied (identical) rows sum identically in any order.
struct MomentSide {
  std::vector<double> mu;   // [d]
  std::vector<double> cov;  // [d*d], empty when N < 2
};

MomentSide moment_side(const Tensor& X) {
  const int N = X.dim(0), d = X.dim(1);
  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int p, int q) {
    for (int k = 0; k < d; ++k) {
      const double xp = X.at(p, k), xq = X.at(q, k);
      if (xp != xq) return xp < xq;
    }
    return false;
  });

  MomentSide s;
  s.mu.assign(static_cast<std::size_t>(d), 0.0);
  for (int i : order)
    for (int k = 0; k < d; ++k) s.mu[static_cast<std::size_t>(k)] += X.at(i, k);
  for (double& v : s.mu) v /= N;

  if (N >= 2) {
    s.cov.assign(static_cast<std::size_t>(d) * d, 0.0);
    std::vector<double> dx(static_cast<std::size_t>(d));
    for (int i : order) {
      for (int k = 0; k < d; ++k)
        dx[static_cast<std::size_t>(k)] = X.at(i, k) - s.mu[static_cast<std::size_t>(k)];
      for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k)
          s.cov[static_cast<std::size_t>(j) * d + k] +=
              dx[static_cast<std::size_t>(j)] * dx[static_cast<std::size_t>(k)];
    }
    for (int j = 0; j < d; ++j)
      for (int k = j; k < d; ++k) {
        s.cov[static_cast<std::size_t>(j) * d + k] /= (N - 1);
        s.cov[static_cast<std::size_t>(k) * d + j] =
            s.cov[static_cast<std::size_t>(j) * d + k];
      }
  }
  return s;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

ad::Var moment_matching_var(const ad::Var& a, const ad::Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_rows(A, "moment matching");
  check_rows(B, "moment matching");
  if (A.dim(1) != B.dim(1))
    throw std::invalid_argument("moment matching: dimension mismatch");
  if (!A.all_finite() || !B.all_finite())
    throw std::invalid_argument("moment matching: non-finite features");
  const int N = A.dim(0), M = B.dim(0), d = A.dim(1);

  const MomentSide sa = moment_side(A);
  const MomentSide sb = moment_side(B);
  const bool with_cov = N >= 2 && M >= 2;

  double loss = 0.0;
  for (int j = 0; j < d; ++j)
    loss += std::fabs(sa.mu[static_cast<std::size_t>(j)] -
                      sb.mu[static_cast<std::size_t>(j)]) / d;
  if (with_cov)
    for (std::size_t t = 0; t < sa.cov.size(); ++t)
      loss += std::fabs(sa.cov[t] - sb.cov[t]) / (double(d) * d);

  return ad::make_op(
      Tensor::scalar(loss), {a, b},
      [a, b, sa, sb, with_cov, N, M, d](const Tensor& g) {
        const double gv = g[0];
        const auto side_grad = [&](const ad::Var& v, const MomentSide& mine,
                                   const MomentSide& other, int rows,
                                   double sgn) {
          if (!ad::var_needs_grad(v)) return;
          Tensor& gt = ad::var_grad_buffer(v);
          const Tensor& X = v.value();
          for (int p = 0; p < rows; ++p)
            for (int q = 0; q < d; ++q) {
              double acc = sgn *
                           sign_of(mine.mu[static_cast<std::size_t>(q)] -
                                   other.mu[static_cast<std::size_t>(q)]) /
                           (double(d) * rows);
              if (with_cov) {
                double c = 0.0;
                for (int k = 0; k < d; ++k)
                  c += sign_of(mine.cov[static_cast<std::size_t>(q) * d + k] -
                               other.cov[static_cast<std::size_t>(q) * d + k]) *
                       (X.at(p, k) - mine.mu[static_cast<std::size_t>(k)]);
                acc += sgn * 2.0 * c / (double(d) * d * (rows - 1));
              }
              gt.at(p, q) += gv * acc;
            }
        };
        side_grad(a, sa, sb, N, 1.0);
        side_grad(b, sb, sa, M, -1.0);
      });
}

ad::Var relaxed_emd_var(const ad::Var& a, const ad::Var& b) {
  return remd_op(a, b, Metric::kCosine, "relaxed emd");
}

ad::Var relaxed_emd_euclidean_var(const ad::Var& a, const ad::Var& b) {
  return remd_op(a, b, Metric::kEuclidean, "relaxed emd");
}

static void check_unit(const std::vector<double>& v, const char* who) {
  if (v.empty())
    throw std::invalid_argument(std::string(who) + ": empty embedding");
  double n = 0.0;
  for (double x : v) n += x * x;
  if (std::fabs(std::sqrt(n) - 1.0) > 1e-4)
    throw std::invalid_argument(std::string(who) + ": input is not unit-norm");
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size())
    throw std::invalid_argument("cosine distance: dimension mismatch");
  check_unit(a.values, "cosine distance");
  check_unit(b.values, "cosine distance");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    dot += a.values[i] * b.values[i];
  return 1.0 - clamp(dot, -1.0, 1.0);
}

ad::Var content_loss_var(const ad::Var& render, const ad::Var& text_emb,
                         const AugmentationConfig& cfg,
                         const TextImageEncoder& encoder, std::uint64_t seed) {
  if (cfg.num_views < 1)
    throw std::invalid_argument("content loss: needs at least one view");
  if (text_emb.value().rank() != 1 || text_emb.value().dim(0) != encoder.dim())
    throw std::invalid_argument("content loss: text embedding dim mismatch");
  AugmentationConfig at_res = cfg;
  at_res.out_resolution = encoder.input_resolution();
  const auto views = augment_batch_var(render, at_res, seed);
  ad::Var acc;
  for (std::size_t i = 0; i < views.size(); ++i) {
    auto dist = ad::unit_cosine_distance(encoder.embed_image_var(views[i]),
                                         text_emb);
    acc = i == 0 ? dist : ad::add(acc, dist);
  }
  return ad::scale(acc, 1.0 / static_cast<double>(views.size()));
}

double content_loss(const RasterImage& render, const EmbeddingVector& text,
                    const AugmentationConfig& cfg,
                    const TextImageEncoder& encoder, std::uint64_t seed) {
  check_unit(text.values, "content loss");
  const auto text_var = ad::Var::constant(
      Tensor({static_cast<int>(text.values.size())}, text.values));
  return content_loss_var(ad::Var::constant(render.pixels), text_var, cfg,
                          encoder, seed)
      .value()
      .scalar_value();
}

double relaxed_emd(const FeatureStack& a, const FeatureStack& b) {
  return relaxed_emd_var(ad::Var::constant(a.samples),
                         ad::Var::constant(b.samples))
      .value()
      .scalar_value();
}

double moment_matching_loss(const FeatureStack& a, const FeatureStack& b) {
  return moment_matching_var(ad::Var::constant(a.samples),
                             ad::Var::constant(b.samples))
      .value()
      .scalar_value();
}

std::vector<Vec2> sample_feature_coords(int n, std::uint64_t seed) {
  if (n < 1)
    throw std::invalid_argument("objective: n_samples must be >= 1");
  Rng rng(mix_seed(seed, kFeatureCoordTag));
  std::vector<Vec2> coords(static_cast<std::size_t>(n));
  for (auto& c : coords) {
    c.x = rng.uniform();
    c.y = rng.uniform();
  }
  return coords;
}

std::vector<int> default_feature_layers(const FeatureExtractor& extractor) {
  std::vector<int> layers;
  for (int i = 0; i < std::min(3, extractor.layer_count()); ++i)
    layers.push_back(i);
  return layers;
}

namespace {

std::vector<std::pair<int, int>> sample_pixel_coords(int n, int h, int w,
                                                     std::uint64_t seed) {
  Rng rng(mix_seed(seed, kPaletteTag));
  std::vector<std::pair<int, int>> yx(static_cast<std::size_t>(n));
  for (auto& p : yx) {
    p.first = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(h)));
    p.second = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(w)));
  }
  return yx;
}

Tensor gather_rows_plain(const Tensor& px,
                         const std::vector<std::pair<int, int>>& yx) {
  Tensor out({static_cast<int>(yx.size()), 3});
  for (std::size_t i = 0; i < yx.size(); ++i)
    for (int c = 0; c < 3; ++c)
      out.at(static_cast<int>(i), c) = px.at(yx[i].first, yx[i].second, c);
  return out;
}

}  // namespace

ad::Var palette_loss_var(const ad::Var& render, const RasterImage& style,
                         int n_samples, std::uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("palette loss: n_samples must be >= 1");
  const Tensor& rv = render.value();
  if (rv.rank() != 3 || rv.dim(2) != 3)
    throw std::invalid_argument("palette loss: render must be [H, W, 3]");
  const auto yx_r = sample_pixel_coords(n_samples, rv.dim(0), rv.dim(1), seed);
  const auto yx_s =
      sample_pixel_coords(n_samples, style.height, style.width, seed);
  const auto a = ad::gather_pixels(render, yx_r);
  const auto b = ad::Var::constant(gather_rows_plain(style.pixels, yx_s));
  return remd_op(a, b, Metric::kEuclidean, "palette loss");
}

double palette_loss(const RasterImage& render, const RasterImage& style,
                    int n_samples, std::uint64_t seed) {
  return palette_loss_var(ad::Var::constant(render.pixels), style, n_samples,
                          seed)
      .value()
      .scalar_value();
}

ad::Var style_loss_var(const ad::Var& render, const RasterImage& style,
                       const FeatureExtractor& extractor, int n_samples,
                       std::uint64_t seed, const StyleLossWeights& weights) {
  if (weights.remd < 0.0 || weights.moments < 0.0 || weights.palette < 0.0)
    throw std::invalid_argument("style loss: weights must be >= 0");
  const int res = extractor.input_resolution();
  const Tensor& rv = render.value();
  if (rv.rank() != 3 || rv.dim(2) != 3)
    throw std::invalid_argument("style loss: render must be [H, W, 3]");

  auto render_at_res =
      rv.dim(0) == res && rv.dim(1) == res
          ? render
          : ad::resample_projective(render, Mat3::identity(), res, res);
  const Tensor style_px =
      style.height == res && style.width == res
          ? style.pixels
          : ad::resample_projective(ad::Var::constant(style.pixels),
                                    Mat3::identity(), res, res)
                .value();
  const RasterImage style_at_res{style_px, res, res};

  const auto coords = sample_feature_coords(n_samples, seed);
  const auto layers = default_feature_layers(extractor);
  const auto a = extractor.extract_var(render_at_res, layers, coords);
  const auto b = ad::Var::constant(
      extractor.extract(style_at_res, layers, coords).samples);

  ad::Var acc = ad::Var::constant(Tensor::scalar(0.0));
  if (weights.remd > 0.0)
    acc = ad::add(acc, ad::scale(relaxed_emd_var(a, b), weights.remd));
  if (weights.moments > 0.0)
    acc = ad::add(acc, ad::scale(moment_matching_var(a, b), weights.moments));
  if (weights.palette > 0.0)
    acc = ad::add(acc, ad::scale(palette_loss_var(render, style, n_samples, seed),
                                 weights.palette));
  return acc;
}

double style_loss(const RasterImage& render, const RasterImage& style,
                  const FeatureExtractor& extractor, int n_samples,
                  std::uint64_t seed, const StyleLossWeights& weights) {
  return style_loss_var(ad::Var::constant(render.pixels), style, extractor,
                        n_samples, seed, weights)
      .value()
      .scalar_value();
}

double total_loss(double content, double style, double lambda_eff) {
  if (!(lambda_eff >= 0.0) || !std::isfinite(lambda_eff))
    throw std::invalid_argument("total loss: lambda_eff must be >= 0");
  return content + lambda_eff * style;
}

namespace {

// Pairwise cosine distances with an exact-zero diagonal, plus row sums.
struct SelfSim {
  std::vector<double> dist;
  std::vector<double> row_sum;
};

SelfSim self_sim_matrix(const Tensor& X) {
  const int n = X.dim(0), d = X.dim(1);
  SelfSim s;
  s.dist.assign(static_cast<std::size_t>(n) * n, 0.0);
  s.row_sum.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = pair_cost(X, i, X, j, d, Metric::kCosine);
      s.dist[static_cast<std::size_t>(i) * n + j] = c;
      s.row_sum[static_cast<std::size_t>(i)] += c;
    }
  return s;
}

double self_sim_entry(const SelfSim& s, int n, int i, int j) {
  return s.dist[static_cast<std::size_t>(i) * n + j] /
         std::max(s.row_sum[static_cast<std::size_t>(i)], kNormEps);
}

}  // namespace

ad::Var self_similarity_var(const ad::Var& cur, const Tensor& ref) {
  const Tensor& X = cur.value();
  check_rows(X, "self similarity");
  check_rows(ref, "self similarity");
  if (X.dim(0) != ref.dim(0) || X.dim(1) != ref.dim(1))
    throw std::invalid_argument("self similarity: shape mismatch");
  const int n = X.dim(0), d = X.dim(1);

  const SelfSim sc = self_sim_matrix(X);
  const SelfSim sr = self_sim_matrix(ref);
  double loss = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      loss +=
          std::fabs(self_sim_entry(sc, n, i, j) - self_sim_entry(sr, n, i, j));
  loss /= double(n) * n;

  // d(mean |W - W_ref|)/d(D_ij) has a direct term through W_ij and a row
  // term through the shared normalizer; both vanish when the raw row sum
  // sits below the epsilon floor.
  return ad::make_op(
      Tensor::scalar(loss), {cur}, [cur, sc, sr, n, d](const Tensor& g) {
        if (!ad::var_needs_grad(cur)) return;
        const double gv = g[0];
        const Tensor& X = cur.value();
        Tensor& gt = ad::var_grad_buffer(cur);
        for (int i = 0; i < n; ++i) {
          const double raw = sc.row_sum[static_cast<std::size_t>(i)];
          const double denom = std::max(raw, kNormEps);
          double row_acc = 0.0;
          for (int k = 0; k < n; ++k) {
            if (k == i) continue;
            row_acc += sign_of(self_sim_entry(sc, n, i, k) -
                               self_sim_entry(sr, n, i, k)) *
                       sc.dist[static_cast<std::size_t>(i) * n + k];
          }
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double dd = sign_of(self_sim_entry(sc, n, i, j) -
                                self_sim_entry(sr, n, i, j)) /
                        denom;
            if (raw > kNormEps) dd -= row_acc / (denom * denom);
            dd *= gv / (double(n) * n);
            if (dd != 0.0)
              pair_cost_grad(X, i, X, j, d, Metric::kCosine, dd, &gt, &gt);
          }
        }
      });
}

double self_similarity_loss(const Tensor& cur, const Tensor& ref) {
  return self_similarity_var(ad::Var::constant(cur), ref)
      .value()
      .scalar_value();
}

}  // namespace styledraw
