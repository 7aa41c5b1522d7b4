#pragma once

#include "navgen/params.hpp"

#include <vector>

// Dense layers with explicit forward caches and hand-written backward passes.
// Rows are tokens; several independent sequences may be packed into one
// matrix and are separated by Segment ranges for attention.
namespace navgen::nn {

struct Segment {
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
};

Matrix linear_forward(const Linear& p, const Matrix& x);
// Accumulates weight/bias gradients into `grad`, returns dL/dx.
Matrix linear_backward(const Linear& p, const Matrix& x, const Matrix& dy, Linear& grad);

struct LayerNormCache {
  Matrix normalized;
  Eigen::VectorXd inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

Matrix layer_norm_forward(const LayerNorm& p, const Matrix& x, LayerNormCache& cache);
Matrix layer_norm_backward(const LayerNorm& p, const LayerNormCache& cache, const Matrix& dy, LayerNorm& grad);

double gelu(double x);
double gelu_derivative(double x);

struct AttentionCache {
  Matrix qkv;
  std::vector<Matrix> probs;  // segment-major, then head
  Matrix context;
};

// Multi-head scaled dot-product attention over packed rows of [q | k | v].
Matrix attention_forward(const Matrix& qkv, const std::vector<Segment>& segments, int heads, bool causal,
                         AttentionCache& cache);
Matrix attention_backward(const AttentionCache& cache, const Matrix& d_context, const std::vector<Segment>& segments,
                          int heads);

struct BlockCache {
  Matrix input;
  LayerNormCache norm1;
  Matrix normed1;
  AttentionCache attention;
  Matrix mid;
  LayerNormCache norm2;
  Matrix normed2;
  Matrix pre_activation;
  Matrix activation;
};

Matrix block_forward(const TransformerBlock& p, const Matrix& x, const std::vector<Segment>& segments, int heads,
                     bool causal, BlockCache& cache);
Matrix block_backward(const TransformerBlock& p, const BlockCache& cache, const Matrix& dy,
                      const std::vector<Segment>& segments, int heads, TransformerBlock& grad);

// Stack of blocks. Caches are resized to the number of blocks.
Matrix stack_forward(const std::vector<TransformerBlock>& blocks, const Matrix& x, const std::vector<Segment>& segments,
                     int heads, bool causal, std::vector<BlockCache>& caches);
Matrix stack_backward(const std::vector<TransformerBlock>& blocks, const std::vector<BlockCache>& caches,
                      const Matrix& dy, const std::vector<Segment>& segments, int heads,
                      std::vector<TransformerBlock>& grads);

// Numerically stable log-softmax of one row.
RowVector log_softmax(const RowVector& logits);

}  // namespace navgen::nn
