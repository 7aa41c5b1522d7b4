#pragma once

#include "navgen/nn.hpp"
#include "navgen/params.hpp"
#include "navgen/scene_encoder.hpp"
#include "navgen/stream.hpp"

#include <optional>
#include <vector>

namespace navgen {

// Logits for every position of the stream (size x V).
Matrix forward(const ModelParams& params, const TokenStream& stream);

// Mean token cross entropy over the target span; 0 for a stream without one.
double loss(const ModelParams& params, const TokenStream& stream);

struct StreamGradient {
  ModelParams params;  // same layout as the model, zero where untouched
  // dL/dslot for every slot element, keyed by stream position.
  std::vector<std::pair<std::size_t, RowVector>> slots;
};

StreamGradient grad(const ModelParams& params, const TokenStream& stream);

struct BatchResult {
  double loss = 0.0;                 // mean over streams with a target span
  std::vector<double> stream_losses;  // per stream, 0 when unsupervised
};

// Loss and gradient of the mean per-stream loss over a packed batch.
// Gradients are added into `grads`; slot gradients are routed into `cache`
// when given (call cache->backward afterwards) and dropped otherwise.
BatchResult batch_loss_and_grad(const ModelParams& params, const std::vector<TokenStream>& streams,
                                ModelParams& grads, SceneCache* cache = nullptr);

// Loss without gradients.
BatchResult batch_loss(const ModelParams& params, const std::vector<TokenStream>& streams);

struct DecodeOptions {
  enum class Mode { Greedy, Sample };
  Mode mode = Mode::Greedy;
  double temperature = 1.0;
  std::optional<std::vector<int>> allowed;
  int max_new = 1;
};

// Autoregressive generation after the prompt. With an allowed set, the first
// token is drawn from that set and later tokens from the set plus EOS.
// Generation stops at EOS (not included in the result) or max_new tokens.
std::vector<int> decode(const ModelParams& params, const TokenStream& prompt, const DecodeOptions& options,
                        Rng* rng = nullptr);

// Picks a token from one logit row under the masking/temperature rules.
int select_token(const RowVector& logits, const DecodeOptions& options, bool first, int eos, Rng* rng);

}  // namespace navgen
