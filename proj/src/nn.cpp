#include "navgen/nn.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace navgen::nn {

Matrix linear_forward(const Linear& p, const Matrix& x) {
  Matrix y(x.rows(), p.weight.cols());
  y.noalias() = x * p.weight;
  y.rowwise() += p.bias.row(0);
  return y;
}

Matrix linear_backward(const Linear& p, const Matrix& x, const Matrix& dy, Linear& grad) {
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum();
  Matrix dx(dy.rows(), p.weight.rows());
  dx.noalias() = dy * p.weight.transpose();
  return dx;
}

Matrix layer_norm_forward(const LayerNorm& p, const Matrix& x, LayerNormCache& cache) {
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  cache.normalized.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / d;
    const RowVector centered = x.row(i).array() - mean;
    const double var = centered.squaredNorm() / d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[i] = inv;
    cache.normalized.row(i) = centered * inv;
  }
  Matrix y = cache.normalized.array().rowwise() * p.gain.row(0).array();
  y.rowwise() += p.shift.row(0);
  return y;
}

Matrix layer_norm_backward(const LayerNorm& p, const LayerNormCache& cache, const Matrix& dy, LayerNorm& grad) {
  grad.gain += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  grad.shift += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * p.gain.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double sum = dxhat.row(i).sum();
    const double dot = dxhat.row(i).dot(cache.normalized.row(i));
    dx.row(i) = (cache.inv_std[i] / d) * (d * dxhat.row(i).array() - sum - cache.normalized.row(i).array() * dot).matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

Matrix attention_forward(const Matrix& qkv, const std::vector<Segment>& segments, int heads, bool causal,
                         AttentionCache& cache) {
  const Eigen::Index d = qkv.cols() / 3;
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.qkv = qkv;
  cache.context.setZero(qkv.rows(), d);
  cache.probs.clear();
  cache.probs.reserve(segments.size() * static_cast<std::size_t>(heads));
  for (const auto& seg : segments) {
    const Eigen::Index o = seg.offset;
    const Eigen::Index len = seg.length;
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv.block(o, h * dh, len, dh);
      const auto k = qkv.block(o, d + h * dh, len, dh);
      const auto v = qkv.block(o, 2 * d + h * dh, len, dh);
      Matrix scores(len, len);
      scores.noalias() = q * k.transpose();
      scores *= scale;
      for (Eigen::Index i = 0; i < len; ++i) {
        const Eigen::Index visible = causal ? i + 1 : len;
        auto row = scores.row(i);
        const double mx = row.head(visible).maxCoeff();
        double total = 0.0;
        for (Eigen::Index j = 0; j < visible; ++j) {
          row[j] = std::exp(row[j] - mx);
          total += row[j];
        }
        row.head(visible) /= total;
        if (visible < len) row.tail(len - visible).setZero();
      }
      cache.context.block(o, h * dh, len, dh).noalias() = scores * v;
      cache.probs.push_back(std::move(scores));
    }
  }
  return cache.context;
}

Matrix attention_backward(const AttentionCache& cache, const Matrix& d_context, const std::vector<Segment>& segments,
                          int heads) {
  const Matrix& qkv = cache.qkv;
  const Eigen::Index d = qkv.cols() / 3;
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dqkv = Matrix::Zero(qkv.rows(), qkv.cols());
  std::size_t idx = 0;
  for (const auto& seg : segments) {
    const Eigen::Index o = seg.offset;
    const Eigen::Index len = seg.length;
    for (int h = 0; h < heads; ++h, ++idx) {
      const Matrix& probs = cache.probs[idx];
      const auto q = qkv.block(o, h * dh, len, dh);
      const auto k = qkv.block(o, d + h * dh, len, dh);
      const auto v = qkv.block(o, 2 * d + h * dh, len, dh);
      const auto dout = d_context.block(o, h * dh, len, dh);
      dqkv.block(o, 2 * d + h * dh, len, dh).noalias() = probs.transpose() * dout;
      Matrix dprobs(len, len);
      dprobs.noalias() = dout * v.transpose();
      const Eigen::VectorXd row_dot = (dprobs.array() * probs.array()).rowwise().sum();
      Matrix dscores = probs.array() * (dprobs.colwise() - row_dot).array();
      dscores *= scale;
      dqkv.block(o, h * dh, len, dh).noalias() = dscores * k;
      dqkv.block(o, d + h * dh, len, dh).noalias() = dscores.transpose() * q;
    }
  }
  return dqkv;
}

Matrix block_forward(const TransformerBlock& p, const Matrix& x, const std::vector<Segment>& segments, int heads,
                     bool causal, BlockCache& c) {
  c.input = x;
  c.normed1 = layer_norm_forward(p.norm1, x, c.norm1);
  const Matrix qkv = linear_forward(p.qkv, c.normed1);
  attention_forward(qkv, segments, heads, causal, c.attention);
  c.mid = x + linear_forward(p.proj, c.attention.context);
  c.normed2 = layer_norm_forward(p.norm2, c.mid, c.norm2);
  c.pre_activation = linear_forward(p.up, c.normed2);
  c.activation = c.pre_activation.unaryExpr([](double v) { return gelu(v); });
  return c.mid + linear_forward(p.down, c.activation);
}

Matrix block_backward(const TransformerBlock& p, const BlockCache& c, const Matrix& dy,
                      const std::vector<Segment>& segments, int heads, TransformerBlock& g) {
  Matrix d_act = linear_backward(p.down, c.activation, dy, g.down);
  const Matrix d_pre = d_act.array() * c.pre_activation.unaryExpr([](double v) { return gelu_derivative(v); }).array();
  const Matrix d_normed2 = linear_backward(p.up, c.normed2, d_pre, g.up);
  Matrix d_mid = dy + layer_norm_backward(p.norm2, c.norm2, d_normed2, g.norm2);
  const Matrix d_context = linear_backward(p.proj, c.attention.context, d_mid, g.proj);
  const Matrix d_qkv = attention_backward(c.attention, d_context, segments, heads);
  const Matrix d_normed1 = linear_backward(p.qkv, c.normed1, d_qkv, g.qkv);
  return d_mid + layer_norm_backward(p.norm1, c.norm1, d_normed1, g.norm1);
}

Matrix stack_forward(const std::vector<TransformerBlock>& blocks, const Matrix& x, const std::vector<Segment>& segments,
                     int heads, bool causal, std::vector<BlockCache>& caches) {
  caches.resize(blocks.size());
  Matrix h = x;
  for (std::size_t i = 0; i < blocks.size(); ++i) h = block_forward(blocks[i], h, segments, heads, causal, caches[i]);
  return h;
}

Matrix stack_backward(const std::vector<TransformerBlock>& blocks, const std::vector<BlockCache>& caches,
                      const Matrix& dy, const std::vector<Segment>& segments, int heads,
                      std::vector<TransformerBlock>& grads) {
  Matrix d = dy;
  for (std::size_t i = blocks.size(); i-- > 0;) d = block_backward(blocks[i], caches[i], d, segments, heads, grads[i]);
  return d;
}

RowVector log_softmax(const RowVector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

}  // namespace navgen::nn
