#include "navgen/params.hpp"

#include "navgen/vocab.hpp"

namespace navgen {

int ModelConfig::resolved_vocab_size() const {
  return vocab_size > 0 ? vocab_size : Vocabulary::standard().size();
}

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (d_model < 1) problems.push_back("d_model must be >= 1");
  if (n_layers < 0) problems.push_back("n_layers must be >= 0");
  if (n_heads < 1 || d_model % n_heads != 0) problems.push_back("n_heads must divide d_model");
  if (fuse_heads < 1 || d_model % fuse_heads != 0) problems.push_back("fuse_heads must divide d_model");
  if (ff_mult < 1) problems.push_back("ff_mult must be >= 1");
  if (max_len < 1) problems.push_back("max_len must be >= 1");
  if (fuse_layers < 0) problems.push_back("fuse_layers must be >= 0");
  if (d_feat < 1) problems.push_back("d_feat must be >= 1");
  if (angle_freqs < 1) problems.push_back("angle_freqs must be >= 1");
  if (!(init_std > 0.0)) problems.push_back("init_std must be > 0");
  if (vocab_size < 0) problems.push_back("vocab_size must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Linear make_linear(Rng& rng, int in, int out, double stddev) {
  return Linear{gaussian(rng, in, out, stddev), Matrix::Zero(1, out)};
}

LayerNorm make_norm(int d) { return LayerNorm{Matrix::Ones(1, d), Matrix::Zero(1, d)}; }

TransformerBlock make_block(Rng& rng, int d, int ff, double stddev) {
  TransformerBlock b;
  b.norm1 = make_norm(d);
  b.qkv = make_linear(rng, d, 3 * d, stddev);
  b.proj = make_linear(rng, d, d, stddev);
  b.norm2 = make_norm(d);
  b.up = make_linear(rng, d, ff, stddev);
  b.down = make_linear(rng, ff, d, stddev);
  return b;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const int d = config.d_model;
  const int vocab = config.resolved_vocab_size();
  const double s = config.init_std;
  ModelParams p;
  p.config = config;
  p.config.vocab_size = vocab;

  auto& e = p.encoder;
  e.feature = make_linear(rng, config.d_feat, d, s);
  e.angle = gaussian(rng, config.angle_dim(), d, s);
  e.position = gaussian(rng, 3, d, s);
  for (int i = 0; i < config.fuse_layers; ++i) e.fusion.push_back(make_block(rng, d, config.ff_mult * d, s));
  e.object = make_linear(rng, config.d_feat, d, s);
  e.stop = gaussian(rng, 1, d, s);
  e.not_exist = gaussian(rng, 1, d, s);

  auto& dec = p.decoder;
  dec.token_embedding = gaussian(rng, vocab, d, s);
  if (!config.shared_id_embeddings) dec.id_embedding = gaussian(rng, Vocabulary::standard().max_marker() + 1, d, s);
  dec.position_embedding = gaussian(rng, config.max_len, d, s);
  for (int i = 0; i < config.n_layers; ++i) dec.blocks.push_back(make_block(rng, d, config.ff_mult * d, s));
  dec.final_norm = make_norm(d);
  if (!config.tie_embeddings) dec.output = gaussian(rng, d, vocab, s);
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for_each_tensor(z, [](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

}  // namespace navgen
