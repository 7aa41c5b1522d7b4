#include "navgen/trainer.hpp"

#include "navgen/config.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

namespace navgen {

std::string_view to_string(Stage stage) { return stage == Stage::Pretrain ? "pretrain" : "finetune"; }

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (pretrain_steps < 0 || finetune_steps < 0 || total_steps() <= 0) problems.push_back("train.steps must be > 0");
  if (batch_size < 1) problems.push_back("train.batch_size must be >= 1");
  if (!(lr > 0.0)) problems.push_back("train.lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) problems.push_back("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) problems.push_back("train.beta2 must be in [0, 1)");
  if (!(eps > 0.0)) problems.push_back("train.eps must be > 0");
  if (alternation_period < 1) problems.push_back("train.alternation_period must be >= 1");
  if (!(student_temperature > 0.0)) problems.push_back("train.student_temperature must be > 0");
  for (const auto& [kind, w] : weights) {
    if (!(w >= 0.0)) problems.push_back("train.weights." + std::string(to_string(kind)) + " must be >= 0");
  }
  if (!problems.empty()) {
    std::string msg = "invalid train config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

std::vector<double> mixing_weights(const Datasets& data, const std::map<TaskKind, double>& weights) {
  std::vector<double> out;
  for (TaskKind k : kAllKinds) {
    const auto it = data.episodes.find(k);
    const std::size_t n = it == data.episodes.end() ? 0 : it->second.size();
    double w = 0.0;
    if (weights.empty()) {
      w = k == TaskKind::Eqa ? 0.0 : static_cast<double>(n);
    } else if (auto wi = weights.find(k); wi != weights.end()) {
      w = wi->second;
    }
    if (w < 0.0 || !std::isfinite(w)) throw ConfigError("mixing weight for " + std::string(to_string(k)) + " is invalid");
    if (w > 0.0 && k == TaskKind::Eqa) throw ConfigError("EQA is evaluated by composition and cannot be trained");
    if (w > 0.0 && n == 0) throw ConfigError("mixing weight on " + std::string(to_string(k)) + " without episodes");
    out.push_back(w);
  }
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (!(total > 0.0)) throw ConfigError("all mixing weights are zero");
  for (double& w : out) w /= total;
  return out;
}

TaskKind sample_kind(const std::vector<double>& weights, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last = i;
    acc += weights[i];
    if (u < acc) return kAllKinds[i];
  }
  return kAllKinds[last];
}

Batch make_batch(const Datasets& data, const std::vector<double>& weights, Rng& rng, int batch_size,
                 RolloutMode mode, const ModelParams& params, SceneCache& cache, const AgentOptions& agent) {
  Batch batch;
  for (int b = 0; b < batch_size; ++b) {
    const TaskKind kind = sample_kind(weights, rng);
    const auto& pool = data.episodes.at(kind);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const Episode& ep = pool[pick(rng)];
    const World& world = data.world_of(ep);
    batch.kinds.push_back(kind);
    batch.episode_ids.push_back(ep.episode_id);
    switch (kind) {
      case TaskKind::Vln:
      case TaskKind::ObjLoc: {
        auto traj = rollout(world, ep, params, mode, rng, cache, agent);
        for (auto& s : traj.streams) batch.streams.push_back(std::move(s));
        break;
      }
      case TaskKind::Summ:
        batch.streams.push_back(summary_stream(world, ep, cache, ep.references.at(0)));
        break;
      case TaskKind::Qa:
        batch.streams.push_back(qa_stream(world, ep.instruction, ep.positions, cache, ep.qa_answer.value()));
        break;
      case TaskKind::Eqa:
        throw ConfigError("EQA is evaluated by composition and cannot be trained");
    }
  }
  return batch;
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg) {
  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto p = tensor_list(params);
  const auto g = tensor_list(grads);
  auto m = tensor_list(state.m);
  auto v = tensor_list(state.v);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& pm = *p[i].second;
    const auto& gm = *g[i].second;
    auto& mm = *m[i].second;
    auto& vm = *v[i].second;
    mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * gm;
    vm = cfg.beta2 * vm + (1.0 - cfg.beta2) * gm.cwiseProduct(gm);
    pm.array() -= cfg.lr * (mm.array() / c1) / ((vm.array() / c2).sqrt() + cfg.eps);
  }
}

double global_norm(const ModelParams& grads) {
  double sq = 0.0;
  for_each_tensor(grads, [&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

double clip_global_norm(ModelParams& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for_each_tensor(grads, [&](const std::string&, Matrix& m) { m *= scale; });
  }
  return norm;
}

TrainState initial_state(const ModelConfig& config, std::uint64_t init_seed) {
  Rng rng(init_seed);
  TrainState s;
  s.params = ModelParams::init(config, rng);
  s.adam = AdamState::zeros_like(s.params);
  return s;
}

namespace {

RolloutMode mode_for(const TrainConfig& cfg, int step) {
  if (step < cfg.pretrain_steps) return RolloutMode::Teacher;
  const int k = (step - cfg.pretrain_steps) / cfg.alternation_period;
  return k % 2 == 0 ? RolloutMode::Teacher : RolloutMode::Student;
}

std::string batch_hash(const Batch& batch) {
  std::string text;
  for (std::size_t i = 0; i < batch.episode_ids.size(); ++i) {
    text += std::string(to_string(batch.kinds[i])) + ":" + batch.episode_ids[i] + ";";
  }
  return sha256_hex(text).substr(0, 16);
}

}  // namespace

void train(const Datasets& data, const TrainConfig& cfg, std::uint64_t seed, TrainState& state,
           std::optional<int> stop_at, const TrainHooks& hooks) {
  cfg.validate();
  const auto weights = mixing_weights(data, cfg.weights);
  const int end = std::min(stop_at.value_or(cfg.total_steps()), cfg.total_steps());
  AgentOptions agent;
  agent.student_temperature = cfg.student_temperature;
  for (int step = state.next_step; step < end; ++step) {
    const Stage stage = step < cfg.pretrain_steps ? Stage::Pretrain : Stage::Finetune;
    const RolloutMode mode = mode_for(cfg, step);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(step)));
    SceneCache cache(state.params, true);
    const Batch batch = make_batch(data, weights, rng, cfg.batch_size, mode, state.params, cache, agent);
    if (hooks.on_batch) hooks.on_batch(batch, step);
    ModelParams grads = state.params.zeros_like();
    const BatchResult result = batch_loss_and_grad(state.params, batch.streams, grads, &cache);
    if (!std::isfinite(result.loss)) {
      throw NumericAbort("non-finite loss at step " + std::to_string(step) + " (batch " + batch_hash(batch) + ")");
    }
    cache.backward(grads);
    const double norm = clip_global_norm(grads, cfg.clip_norm);
    if (!std::isfinite(norm)) {
      throw NumericAbort("non-finite gradient at step " + std::to_string(step) + " (batch " + batch_hash(batch) + ")");
    }
    adam_step(state.params, grads, state.adam, cfg);
    const LossRecord rec{step, result.loss, stage, mode};
    state.losses.push_back(rec);
    state.next_step = step + 1;
    if (hooks.on_step) hooks.on_step(rec);
  }
}

double smoothed_head(const std::vector<LossRecord>& losses, std::size_t window) {
  const std::size_t n = std::min(window, losses.size());
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += losses[i].loss;
  return s / static_cast<double>(n);
}

double smoothed_tail(const std::vector<LossRecord>& losses, std::size_t window) {
  const std::size_t n = std::min(window, losses.size());
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = losses.size() - n; i < losses.size(); ++i) s += losses[i].loss;
  return s / static_cast<double>(n);
}

std::string loss_csv(const std::vector<LossRecord>& losses) {
  std::ostringstream out;
  out << "step,loss,stage,mode\n";
  out.precision(17);
  for (const auto& r : losses) out << r.step << ',' << r.loss << ',' << to_string(r.stage) << ',' << to_string(r.mode) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'N', 'V', 'G', 'N'};

template <class T>
void put(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void doubles(double* out, std::size_t n) {
    need(n * sizeof(double));
    std::memcpy(out, data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw FormatError("checkpoint record runs past the end of the file");
  }
  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 8;
};

void put_tensor(std::string& buf, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
  buf += name;
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.cols()));
  buf.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
}

std::uint32_t crc_of(const std::string& data, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(n)));
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState& adam,
                     const nlohmann::json& meta) {
  nlohmann::json full = meta;
  full["model"] = model_config_to_json(params.config);
  full["adam_step"] = adam.step;
  const std::string meta_text = full.dump();

  std::string buf(kMagic, 4);
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint64_t>(buf, meta_text.size());
  buf += meta_text;
  const auto p = tensor_list(params);
  const auto m = tensor_list(adam.m);
  const auto v = tensor_list(adam.v);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.size() * 3));
  for (const auto& [name, t] : p) put_tensor(buf, name, *t);
  for (const auto& [name, t] : m) put_tensor(buf, "adam.m." + name, *t);
  for (const auto& [name, t] : v) put_tensor(buf, "adam.v." + name, *t);
  put<std::uint32_t>(buf, crc_of(buf, buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw MagicError("not a checkpoint (bad magic): " + path);
  }
  if (data.size() < 8) throw ChecksumError("checkpoint truncated: " + path);
  std::uint32_t version = 0;
  std::memcpy(&version, data.data() + 4, 4);
  if (version != kCheckpointVersion) throw VersionError(kCheckpointVersion, version);
  if (data.size() < 12) throw ChecksumError("checkpoint truncated: " + path);
  std::uint32_t stored = 0;
  std::memcpy(&stored, data.data() + data.size() - 4, 4);
  if (stored != crc_of(data, data.size() - 4)) throw ChecksumError("checkpoint checksum mismatch: " + path);

  Reader r(data, data.size() - 4);
  const auto meta_len = r.get<std::uint64_t>();
  Checkpoint ck;
  try {
    ck.meta = nlohmann::json::parse(r.bytes(static_cast<std::size_t>(meta_len)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  Rng unused(0);
  ck.params = ModelParams::init(model_config_from_json(ck.meta.at("model")), unused);
  ck.adam = AdamState::zeros_like(ck.params);
  ck.adam.step = ck.meta.at("adam_step").get<long long>();

  std::map<std::string, Matrix*> slots;
  for (auto& [name, t] : tensor_list(ck.params)) slots[name] = t;
  for (auto& [name, t] : tensor_list(ck.adam.m)) slots["adam.m." + name] = t;
  for (auto& [name, t] : tensor_list(ck.adam.v)) slots["adam.v." + name] = t;
  const auto count = r.get<std::uint32_t>();
  if (count != slots.size()) throw FormatError("checkpoint tensor count does not match its model config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.bytes(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    auto it = slots.find(name);
    if (it == slots.end()) throw FormatError("unexpected tensor in checkpoint: " + name);
    Matrix& t = *it->second;
    if (static_cast<std::uint64_t>(t.rows()) != rows || static_cast<std::uint64_t>(t.cols()) != cols) {
      throw FormatError("tensor " + name + " has the wrong shape");
    }
    r.doubles(t.data(), static_cast<std::size_t>(t.size()));
    slots.erase(it);
  }
  if (!slots.empty()) throw FormatError("checkpoint is missing tensor " + slots.begin()->first);
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");
  return ck;
}

}  // namespace navgen
