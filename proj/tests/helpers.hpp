#pragma once

#include "navgen/episode.hpp"
#include "navgen/params.hpp"
#include "navgen/pipeline.hpp"
#include "navgen/vocab.hpp"
#include "navgen/world.hpp"

#include <cmath>
#include <vector>

namespace navgen::testing {

inline WorldConfig small_world_config(int n = 12) {
  WorldConfig c;
  c.num_viewpoints = n;
  c.n_views = 12;
  c.d_feat = 8;
  c.max_degree = 4;
  c.box = Vector3(12.0, 12.0, 2.0);
  return c;
}

inline ModelConfig small_model_config() {
  ModelConfig m;
  m.d_model = 16;
  m.n_layers = 2;
  m.n_heads = 2;
  m.fuse_layers = 1;
  m.fuse_heads = 2;
  m.d_feat = 8;
  m.angle_freqs = 2;
  m.max_len = 512;
  return m;
}

inline ModelParams small_params(std::uint64_t seed = 3, ModelConfig cfg = small_model_config()) {
  Rng rng(seed);
  return ModelParams::init(cfg, rng);
}

// Viewpoints at the given positions joined by the given edges; every slot gets
// landmark i % L so instructions stay in vocabulary.
inline World make_world(const std::vector<Vector3>& positions, const std::vector<std::pair<int, int>>& links,
                        int n_views = 12, int d_feat = 8) {
  WorldConfig cfg;
  cfg.num_viewpoints = static_cast<int>(positions.size());
  cfg.n_views = n_views;
  cfg.d_feat = d_feat;
  const auto& vocab = Vocabulary::standard();
  const auto& bank = FeatureBank::for_dimension(d_feat);
  const int ring = cfg.headings_per_ring();
  std::vector<Viewpoint> vps(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    auto& vp = vps[i];
    vp.id = static_cast<int>(i);
    vp.position = positions[i];
    vp.views.resize(static_cast<std::size_t>(n_views));
    for (int s = 0; s < n_views; ++s) {
      auto& slot = vp.views[static_cast<std::size_t>(s)];
      slot.heading = slot_heading(s, ring);
      slot.elevation = slot_elevation(s, ring);
      slot.landmark = static_cast<int>((i * 7 + static_cast<std::size_t>(s)) % vocab.landmarks().size());
      slot.feature = bank.landmark(*slot.landmark);
    }
  }
  std::vector<Edge> edges;
  for (auto [a, b] : links) edges.push_back(Edge{a, b, (positions[static_cast<std::size_t>(a)] - positions[static_cast<std::size_t>(b)]).norm()});
  return World(7, cfg, vocab.landmarks(), vocab.objects(), std::move(vps), std::move(edges));
}

// A - B - C along +x with unit edges.
inline World line_world() {
  return make_world({Vector3(0, 0, 0), Vector3(1, 0, 0), Vector3(2, 0, 0)}, {{0, 1}, {1, 2}});
}

// Dump of the first supervised stream of a fixed episode of `kind`; the
// committed goldens under tests/golden are these dumps.
inline std::string golden_dump(TaskKind kind) {
  const World w = generate_world(5, small_world_config(20));
  const ModelParams p = small_params(5);
  SceneCache cache(p, false);
  Rng rng(derive_seed(5, static_cast<std::uint64_t>(kind)));
  const Episode ep = synth_episode(kind, w, rng, TaskConfig{});
  return "# kind " + std::string(to_string(kind)) + "\n" + dump_stream(first_stream(w, ep, cache));
}

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace navgen::testing
