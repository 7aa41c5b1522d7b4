#include "navgen/model.hpp"

#include "navgen/vocab.hpp"

#include <cmath>
#include <limits>

namespace navgen {

namespace {

const Vocabulary& vocab() { return Vocabulary::standard(); }

bool uses_id_table(const ModelParams& p, int token, int* row) {
  if (p.config.shared_id_embeddings) return false;
  if (auto v = vocab().marker_value(token)) {
    *row = *v;
    return true;
  }
  return false;
}

// Packed forward state for a batch of streams.
struct Run {
  std::vector<nn::Segment> segments;
  Matrix hidden;  // stack output, all rows
  std::vector<nn::BlockCache> caches;
  std::vector<Eigen::Index> rows;  // packed rows whose logits are needed
  nn::LayerNormCache final_cache;
  Matrix normed;  // rows x d
  Matrix logits;  // rows x V
};

void check_stream(const ModelParams& p, const TokenStream& s) {
  s.validate(p.config.d_model);
  if (static_cast<int>(s.size()) > p.config.max_len) {
    throw ShapeError("stream of length " + std::to_string(s.size()) + " exceeds max_len " +
                     std::to_string(p.config.max_len));
  }
  const int v = p.config.vocab_size;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.is_text(i) && (s.token(i) < 0 || s.token(i) >= v)) {
      throw VocabularyError("token id " + std::to_string(s.token(i)) + " outside the model vocabulary");
    }
  }
}

Matrix embed(const ModelParams& p, const std::vector<const TokenStream*>& streams, std::vector<nn::Segment>& segments) {
  Eigen::Index total = 0;
  for (const auto* s : streams) total += static_cast<Eigen::Index>(s->size());
  const auto& d = p.decoder;
  Matrix x(total, p.config.d_model);
  Eigen::Index off = 0;
  segments.clear();
  for (const auto* s : streams) {
    const auto n = static_cast<Eigen::Index>(s->size());
    segments.push_back(nn::Segment{off, n});
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      int id_row = 0;
      if (!s->is_text(k)) {
        x.row(off + i) = s->slot(k).vector;
      } else if (uses_id_table(p, s->token(k), &id_row)) {
        x.row(off + i) = d.id_embedding.row(id_row);
      } else {
        x.row(off + i) = d.token_embedding.row(s->token(k));
      }
      x.row(off + i) += d.position_embedding.row(i);
    }
    off += n;
  }
  return x;
}

Run run_forward(const ModelParams& p, const std::vector<const TokenStream*>& streams,
                std::vector<Eigen::Index> rows) {
  Run r;
  const Matrix x = embed(p, streams, r.segments);
  r.hidden = nn::stack_forward(p.decoder.blocks, x, r.segments, p.config.n_heads, true, r.caches);
  r.rows = std::move(rows);
  Matrix gathered(static_cast<Eigen::Index>(r.rows.size()), p.config.d_model);
  for (std::size_t i = 0; i < r.rows.size(); ++i) gathered.row(static_cast<Eigen::Index>(i)) = r.hidden.row(r.rows[i]);
  r.normed = nn::layer_norm_forward(p.decoder.final_norm, gathered, r.final_cache);
  if (p.config.tie_embeddings) {
    r.logits.noalias() = r.normed * p.decoder.token_embedding.transpose();
  } else {
    r.logits.noalias() = r.normed * p.decoder.output;
  }
  return r;
}

// Supervised rows of one stream: position p predicts token p + 1.
void target_rows(const TokenStream& s, Eigen::Index offset, std::vector<Eigen::Index>& rows, std::vector<int>& labels) {
  if (!s.target_span) return;
  for (std::size_t t = s.target_span->begin; t < s.target_span->end; ++t) {
    rows.push_back(offset + static_cast<Eigen::Index>(t) - 1);
    labels.push_back(s.token(t));
  }
}

BatchResult batch_impl(const ModelParams& p, const std::vector<TokenStream>& streams, ModelParams* grads,
                       SceneCache* cache, std::vector<std::pair<std::size_t, RowVector>>* slot_out) {
  BatchResult result;
  result.stream_losses.assign(streams.size(), 0.0);
  std::vector<const TokenStream*> ptrs;
  std::vector<Eigen::Index> rows;
  std::vector<int> labels;
  std::vector<std::size_t> owner;
  std::size_t supervised = 0;
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    check_stream(p, streams[i]);
    ptrs.push_back(&streams[i]);
    const std::size_t before = rows.size();
    target_rows(streams[i], off, rows, labels);
    owner.insert(owner.end(), rows.size() - before, i);
    if (rows.size() > before) ++supervised;
    off += static_cast<Eigen::Index>(streams[i].size());
  }
  if (supervised == 0) return result;

  Run r = run_forward(p, ptrs, rows);
  const Eigen::Index n = r.logits.rows();
  Matrix dlogits(grads ? n : 0, r.logits.cols());
  std::vector<double> counts(streams.size(), 0.0);
  for (std::size_t i = 0; i < owner.size(); ++i) counts[owner[i]] += 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowVector lp = nn::log_softmax(r.logits.row(i));
    const auto s = owner[static_cast<std::size_t>(i)];
    const double nll = -lp[labels[static_cast<std::size_t>(i)]];
    result.stream_losses[s] += nll / counts[s];
    if (grads) {
      const double scale = 1.0 / (counts[s] * static_cast<double>(supervised));
      dlogits.row(i) = lp.array().exp() * scale;
      dlogits(i, labels[static_cast<std::size_t>(i)]) -= scale;
    }
  }
  for (double l : result.stream_losses) result.loss += l;
  result.loss /= static_cast<double>(supervised);
  if (!grads) return result;

  auto& g = grads->decoder;
  Matrix dnormed;
  if (p.config.tie_embeddings) {
    dnormed.noalias() = dlogits * p.decoder.token_embedding;
    g.token_embedding.noalias() += dlogits.transpose() * r.normed;
  } else {
    dnormed.noalias() = dlogits * p.decoder.output.transpose();
    g.output.noalias() += r.normed.transpose() * dlogits;
  }
  const Matrix dgathered = nn::layer_norm_backward(p.decoder.final_norm, r.final_cache, dnormed, g.final_norm);
  Matrix dhidden = Matrix::Zero(r.hidden.rows(), r.hidden.cols());
  for (std::size_t i = 0; i < r.rows.size(); ++i) dhidden.row(r.rows[i]) += dgathered.row(static_cast<Eigen::Index>(i));
  const Matrix dx = nn::stack_backward(p.decoder.blocks, r.caches, dhidden, r.segments, p.config.n_heads, g.blocks);

  for (std::size_t si = 0; si < streams.size(); ++si) {
    const auto& s = streams[si];
    const Eigen::Index o = r.segments[si].offset;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const auto row = o + static_cast<Eigen::Index>(k);
      g.position_embedding.row(static_cast<Eigen::Index>(k)) += dx.row(row);
      int id_row = 0;
      if (!s.is_text(k)) {
        if (cache) cache->accumulate(s.slot(k).source, dx.row(row));
        if (slot_out) slot_out->emplace_back(k, dx.row(row));
      } else if (uses_id_table(p, s.token(k), &id_row)) {
        g.id_embedding.row(id_row) += dx.row(row);
      } else {
        g.token_embedding.row(s.token(k)) += dx.row(row);
      }
    }
  }
  return result;
}

}  // namespace

Matrix forward(const ModelParams& params, const TokenStream& stream) {
  check_stream(params, stream);
  std::vector<Eigen::Index> rows(stream.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
  return run_forward(params, {&stream}, std::move(rows)).logits;
}

double loss(const ModelParams& params, const TokenStream& stream) {
  return batch_impl(params, {stream}, nullptr, nullptr, nullptr).loss;
}

StreamGradient grad(const ModelParams& params, const TokenStream& stream) {
  StreamGradient out{params.zeros_like(), {}};
  batch_impl(params, {stream}, &out.params, nullptr, &out.slots);
  return out;
}

BatchResult batch_loss_and_grad(const ModelParams& params, const std::vector<TokenStream>& streams,
                                ModelParams& grads, SceneCache* cache) {
  return batch_impl(params, streams, &grads, cache, nullptr);
}

BatchResult batch_loss(const ModelParams& params, const std::vector<TokenStream>& streams) {
  return batch_impl(params, streams, nullptr, nullptr, nullptr);
}

int select_token(const RowVector& logits, const DecodeOptions& options, bool first, int eos, Rng* rng) {
  const auto v = static_cast<int>(logits.size());
  std::vector<int> admissible;
  if (options.allowed) {
    admissible = *options.allowed;
    if (!first) admissible.push_back(eos);
  } else {
    admissible.resize(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i) admissible[static_cast<std::size_t>(i)] = i;
  }
  for (int t : admissible) {
    if (t < 0 || t >= v) throw DecodeError("allowed token id " + std::to_string(t) + " outside the vocabulary");
  }
  if (options.mode == DecodeOptions::Mode::Greedy) {
    int best = -1;
    for (int t : admissible) {
      if (best < 0 || logits[t] > logits[best] || (logits[t] == logits[best] && t < best)) best = t;
    }
    return best;
  }
  if (!rng) throw DecodeError("sampling requires an rng");
  if (!(options.temperature > 0.0)) throw DecodeError("sampling temperature must be > 0");
  double mx = -std::numeric_limits<double>::infinity();
  for (int t : admissible) mx = std::max(mx, logits[t] / options.temperature);
  std::vector<double> weights(admissible.size());
  double total = 0.0;
  for (std::size_t i = 0; i < admissible.size(); ++i) {
    weights[i] = std::exp(logits[admissible[i]] / options.temperature - mx);
    total += weights[i];
  }
  std::uniform_real_distribution<double> unit(0.0, total);
  double u = unit(*rng);
  for (std::size_t i = 0; i < admissible.size(); ++i) {
    if (u < weights[i]) return admissible[i];
    u -= weights[i];
  }
  // Rounding fallthrough: last admissible token with nonzero weight.
  for (std::size_t i = admissible.size(); i-- > 0;) {
    if (weights[i] > 0.0) return admissible[i];
  }
  return admissible.back();
}

std::vector<int> decode(const ModelParams& params, const TokenStream& prompt, const DecodeOptions& options, Rng* rng) {
  if (options.max_new < 1) throw DecodeError("max_new must be >= 1");
  if (options.allowed && options.allowed->empty()) throw DecodeError("empty allowed token set");
  const int eos = vocab().eos();
  TokenStream s = prompt;
  s.target_span.reset();
  std::vector<int> out;
  for (int step = 0; step < options.max_new; ++step) {
    check_stream(params, s);
    const Eigen::Index last = static_cast<Eigen::Index>(s.size()) - 1;
    const Run r = run_forward(params, {&s}, {last});
    const int t = select_token(r.logits.row(0), options, step == 0, eos, rng);
    if (t == eos) break;
    out.push_back(t);
    s.elements.emplace_back(TextElement{t});
  }
  return out;
}

}  // namespace navgen
