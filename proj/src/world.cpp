#include "navgen/world.hpp"

#include "navgen/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <queue>
#include <sstream>

namespace navgen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRingElevation = std::numbers::pi / 6.0;
constexpr std::uint64_t kFeatureBankSeed = 0x4e4156464541544bULL;

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(b)] = a;
    return true;
  }
};

Eigen::VectorXd gaussian_vector(Rng& rng, int dim, double stddev) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = stddev * normal(rng);
  return v;
}

}  // namespace

void WorldConfig::validate() const {
  std::vector<std::string> problems;
  if (num_viewpoints < 2) problems.push_back("num_viewpoints must be >= 2");
  if (n_views <= 0 || n_views % 3 != 0) problems.push_back("n_views must be a positive multiple of 3");
  if (d_feat < 4) problems.push_back("d_feat must be >= 4");
  if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise)) problems.push_back("feature_noise must be >= 0");
  if (k_nearest < 1) problems.push_back("k_nearest must be >= 1");
  if (max_degree < 1) problems.push_back("max_degree must be >= 1");
  if (n_views > 0 && max_degree > headings_per_ring()) {
    problems.push_back("max_degree exceeds the headings of one view ring (n_views / 3)");
  }
  if (!(box.array() > 0.0).all()) problems.push_back("box extents must be positive");
  if (min_objects < 0 || max_objects < min_objects) problems.push_back("object count range invalid");
  const auto& vocab = Vocabulary::standard();
  if (max_objects > static_cast<int>(vocab.objects().size())) problems.push_back("max_objects exceeds object vocabulary");
  if (extra_landmarks < 0) problems.push_back("extra_landmarks must be >= 0");
  if (max_degree + extra_landmarks > static_cast<int>(vocab.landmarks().size())) {
    problems.push_back("max_degree + extra_landmarks exceeds landmark vocabulary");
  }
  if (!problems.empty()) {
    std::string msg = "invalid world config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

double normalize_angle(double radians) {
  double a = std::fmod(radians, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

int ring_offset(int ring, int headings_per_ring) { return ring * headings_per_ring; }

double slot_heading(int slot, int headings_per_ring) {
  return kTwoPi * static_cast<double>(slot % headings_per_ring) / static_cast<double>(headings_per_ring);
}

double slot_elevation(int slot, int headings_per_ring) {
  return static_cast<double>(slot / headings_per_ring - 1) * kRingElevation;
}

std::vector<int> assign_heading_slots(const std::vector<double>& bearings, int headings_per_ring) {
  if (static_cast<int>(bearings.size()) > headings_per_ring) {
    throw ConfigError("more neighbors than heading slots in a ring");
  }
  const double step = kTwoPi / headings_per_ring;
  std::vector<bool> taken(static_cast<std::size_t>(headings_per_ring), false);
  std::vector<int> out;
  out.reserve(bearings.size());
  for (double b : bearings) {
    int slot = static_cast<int>(std::lround(normalize_angle(b) / step)) % headings_per_ring;
    while (taken[static_cast<std::size_t>(slot)]) slot = (slot + 1) % headings_per_ring;
    taken[static_cast<std::size_t>(slot)] = true;
    out.push_back(slot);
  }
  return out;
}

const FeatureBank& FeatureBank::for_dimension(int d_feat) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<FeatureBank>> banks;
  std::lock_guard lock(mutex);
  auto& slot = banks[d_feat];
  if (!slot) slot.reset(new FeatureBank(d_feat));
  return *slot;
}

FeatureBank::FeatureBank(int d_feat) {
  Rng rng(derive_seed(kFeatureBankSeed, static_cast<std::uint64_t>(d_feat)));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_feat));
  const auto& vocab = Vocabulary::standard();
  for (std::size_t i = 0; i < vocab.landmarks().size(); ++i) landmarks_.push_back(gaussian_vector(rng, d_feat, scale));
  for (std::size_t i = 0; i < vocab.objects().size(); ++i) objects_.push_back(gaussian_vector(rng, d_feat, scale));
}

World::World(std::uint64_t seed, WorldConfig config, std::vector<std::string> landmark_vocab,
             std::vector<std::string> object_vocab, std::vector<Viewpoint> viewpoints, std::vector<Edge> edges)
    : seed_(seed),
      config_(std::move(config)),
      landmark_vocab_(std::move(landmark_vocab)),
      object_vocab_(std::move(object_vocab)),
      viewpoints_(std::move(viewpoints)),
      edges_(std::move(edges)) {
  build_indices();
}

void World::check_id(int v) const {
  if (v < 0 || v >= size()) throw LookupError("unknown viewpoint id: " + std::to_string(v));
}

const Viewpoint& World::viewpoint(int id) const {
  check_id(id);
  return viewpoints_[static_cast<std::size_t>(id)];
}

void World::build_indices() {
  const int n = size();
  if (n < 2) throw ValidationError("world needs at least two viewpoints");
  const int ring = config_.headings_per_ring();
  for (int i = 0; i < n; ++i) {
    const auto& vp = viewpoints_[static_cast<std::size_t>(i)];
    if (vp.id != i) throw ValidationError("viewpoint ids must be contiguous from 0");
    if (static_cast<int>(vp.views.size()) != config_.n_views) throw ValidationError("viewpoint view-slot count mismatch");
    for (std::size_t o = 0; o < vp.objects.size(); ++o) {
      if (vp.objects[o].id != static_cast<int>(o) + 1) throw ValidationError("object ids must be contiguous from 1");
    }
  }

  neighbors_.assign(static_cast<std::size_t>(n), {});
  neighbor_lengths_.assign(static_cast<std::size_t>(n), {});
  for (const auto& e : edges_) {
    check_id(e.a);
    check_id(e.b);
    if (e.a == e.b) throw ValidationError("self-loop at viewpoint " + std::to_string(e.a));
    const double euclid = (viewpoints_[static_cast<std::size_t>(e.a)].position -
                           viewpoints_[static_cast<std::size_t>(e.b)].position)
                              .norm();
    if (!(e.length > 0.0) || std::abs(e.length - euclid) > 1e-9 * std::max(1.0, euclid)) {
      throw ValidationError("edge length disagrees with endpoint positions");
    }
    auto& na = neighbors_[static_cast<std::size_t>(e.a)];
    if (std::find(na.begin(), na.end(), e.b) != na.end()) throw ValidationError("duplicate edge");
    na.push_back(e.b);
    neighbors_[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (int v = 0; v < n; ++v) {
    auto& nb = neighbors_[static_cast<std::size_t>(v)];
    std::sort(nb.begin(), nb.end());
    if (static_cast<int>(nb.size()) > ring) throw ValidationError("viewpoint degree exceeds heading slots");
    auto& lens = neighbor_lengths_[static_cast<std::size_t>(v)];
    for (int u : nb) {
      lens.push_back((viewpoints_[static_cast<std::size_t>(v)].position -
                      viewpoints_[static_cast<std::size_t>(u)].position)
                         .norm());
    }
  }

  // Slot assignment and candidate ordering.
  candidates_.assign(static_cast<std::size_t>(n), {});
  for (int v = 0; v < n; ++v) {
    const auto& nb = neighbors_[static_cast<std::size_t>(v)];
    std::vector<double> bearings;
    for (int u : nb) bearings.push_back(bearing(v, u));
    const auto ring_slots = assign_heading_slots(bearings, ring);
    auto& cands = candidates_[static_cast<std::size_t>(v)];
    for (std::size_t i = 0; i < nb.size(); ++i) {
      cands.push_back(Candidate{0, nb[i], ring_offset(1, ring) + ring_slots[i]});
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) { return x.slot < y.slot; });
    for (std::size_t i = 0; i < cands.size(); ++i) cands[i].id = static_cast<int>(i) + 1;
  }

  // All-pairs geodesics by Dijkstra from every source.
  distances_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                    std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  for (int s = 0; s < n; ++s) {
    double* row = &distances_[static_cast<std::size_t>(s) * static_cast<std::size_t>(n)];
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    row[s] = 0.0;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
      auto [d, x] = pq.top();
      pq.pop();
      if (d > row[x]) continue;
      const auto& nb = neighbors_[static_cast<std::size_t>(x)];
      const auto& lens = neighbor_lengths_[static_cast<std::size_t>(x)];
      for (std::size_t i = 0; i < nb.size(); ++i) {
        const double nd = d + lens[i];
        if (nd < row[nb[i]]) {
          row[nb[i]] = nd;
          pq.emplace(nd, nb[i]);
        }
      }
    }
    for (int t = 0; t < n; ++t) {
      if (!std::isfinite(row[t])) throw ValidationError("world graph is not connected");
    }
  }
}

const std::vector<int>& World::neighbors(int v) const {
  check_id(v);
  return neighbors_[static_cast<std::size_t>(v)];
}

bool World::adjacent(int a, int b) const {
  const auto& nb = neighbors(a);
  check_id(b);
  return std::binary_search(nb.begin(), nb.end(), b);
}

double World::edge_length(int a, int b) const {
  const auto& nb = neighbors(a);
  check_id(b);
  auto it = std::lower_bound(nb.begin(), nb.end(), b);
  if (it == nb.end() || *it != b) {
    throw LookupError("viewpoints " + std::to_string(a) + " and " + std::to_string(b) + " are not adjacent");
  }
  return neighbor_lengths_[static_cast<std::size_t>(a)][static_cast<std::size_t>(it - nb.begin())];
}

double World::geodesic(int a, int b) const {
  check_id(a);
  check_id(b);
  return distances_[static_cast<std::size_t>(a) * static_cast<std::size_t>(size()) + static_cast<std::size_t>(b)];
}

std::vector<int> World::shortest_path(int a, int b) const {
  check_id(a);
  check_id(b);
  std::vector<int> path{a};
  int x = a;
  while (x != b) {
    const double remaining = geodesic(x, b);
    const double tol = 1e-9 * std::max(1.0, remaining);
    const auto& nb = neighbors_[static_cast<std::size_t>(x)];
    const auto& lens = neighbor_lengths_[static_cast<std::size_t>(x)];
    int next = -1;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (std::abs(lens[i] + geodesic(nb[i], b) - remaining) <= tol) {
        next = nb[i];  // neighbors are sorted, so the first hit is the smallest id
        break;
      }
    }
    if (next < 0) throw Error("shortest path reconstruction failed");
    path.push_back(next);
    x = next;
  }
  return path;
}

const std::vector<Candidate>& World::candidates(int v) const {
  check_id(v);
  return candidates_[static_cast<std::size_t>(v)];
}

int World::candidate_id(int v, int neighbor) const {
  for (const auto& c : candidates(v)) {
    if (c.neighbor == neighbor) return c.id;
  }
  throw LookupError("viewpoint " + std::to_string(neighbor) + " is not a candidate at " + std::to_string(v));
}

double World::bearing(int a, int b) const {
  const Vector3 d = viewpoint(b).position - viewpoint(a).position;
  return normalize_angle(std::atan2(d.x(), d.y()));
}

World generate_world(std::uint64_t seed, const WorldConfig& cfg) {
  cfg.validate();
  Rng rng(seed);
  const int n = cfg.num_viewpoints;
  const int ring = cfg.headings_per_ring();
  const auto& vocab = Vocabulary::standard();
  const auto& bank = FeatureBank::for_dimension(cfg.d_feat);

  std::vector<Viewpoint> vps(static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    auto& vp = vps[static_cast<std::size_t>(i)];
    vp.id = i;
    for (int k = 0; k < 3; ++k) vp.position[k] = cfg.box[k] * unit(rng);
  }
  // Coincident positions would produce zero-length edges.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      while ((vps[static_cast<std::size_t>(i)].position - vps[static_cast<std::size_t>(j)].position).norm() == 0.0) {
        vps[static_cast<std::size_t>(i)].position.x() += 1e-6;
      }
    }
  }
  auto dist = [&](int a, int b) {
    return (vps[static_cast<std::size_t>(a)].position - vps[static_cast<std::size_t>(b)].position).norm();
  };

  struct Pair {
    double d;
    int a, b;
  };
  std::vector<Pair> pairs;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) pairs.push_back({dist(a, b), a, b});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.d != y.d) return x.d < y.d;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });

  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<bool>> linked(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n), false));
  std::vector<Edge> edges;
  auto add_edge = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    linked[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
    linked[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
    ++degree[static_cast<std::size_t>(a)];
    ++degree[static_cast<std::size_t>(b)];
    edges.push_back(Edge{a, b, dist(a, b)});
  };
  auto has_room = [&](int v) { return degree[static_cast<std::size_t>(v)] < cfg.max_degree; };

  // Degree-capped minimum spanning tree guarantees connectivity.
  DisjointSet components(n);
  int merged = 0;
  for (const auto& p : pairs) {
    if (!has_room(p.a) || !has_room(p.b)) continue;
    if (components.unite(p.a, p.b)) {
      add_edge(p.a, p.b);
      if (++merged == n - 1) break;
    }
  }
  if (merged != n - 1) throw GenerationExhausted("could not connect world under the degree cap");

  // k-nearest-neighbor edges add short loops.
  for (int v = 0; v < n; ++v) {
    std::vector<int> order;
    for (int u = 0; u < n; ++u)
      if (u != v) order.push_back(u);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return dist(v, x) < dist(v, y); });
    for (int i = 0; i < std::min<int>(cfg.k_nearest, static_cast<int>(order.size())); ++i) {
      const int u = order[static_cast<std::size_t>(i)];
      if (linked[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)]) continue;
      if (has_room(v) && has_room(u)) add_edge(v, u);
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });

  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
  for (const auto& e : edges) {
    nbrs[static_cast<std::size_t>(e.a)].push_back(e.b);
    nbrs[static_cast<std::size_t>(e.b)].push_back(e.a);
  }

  const int num_landmarks = static_cast<int>(vocab.landmarks().size());
  const int num_categories = static_cast<int>(vocab.objects().size());
  std::uniform_int_distribution<int> object_count(cfg.min_objects, cfg.max_objects);
  for (int v = 0; v < n; ++v) {
    auto& vp = vps[static_cast<std::size_t>(v)];
    auto& nb = nbrs[static_cast<std::size_t>(v)];
    std::sort(nb.begin(), nb.end());
    vp.views.resize(static_cast<std::size_t>(cfg.n_views));
    for (int s = 0; s < cfg.n_views; ++s) {
      vp.views[static_cast<std::size_t>(s)].heading = slot_heading(s, ring);
      vp.views[static_cast<std::size_t>(s)].elevation = slot_elevation(s, ring);
    }

    // Distinct landmarks per viewpoint: every navigable slot gets one, plus a
    // few distractor slots.
    std::vector<int> landmark_pool(static_cast<std::size_t>(num_landmarks));
    std::iota(landmark_pool.begin(), landmark_pool.end(), 0);
    std::shuffle(landmark_pool.begin(), landmark_pool.end(), rng);
    std::size_t next_landmark = 0;

    std::vector<double> bearings;
    for (int u : nb) {
      const Vector3 d = vps[static_cast<std::size_t>(u)].position - vp.position;
      bearings.push_back(normalize_angle(std::atan2(d.x(), d.y())));
    }
    const auto ring_slots = assign_heading_slots(bearings, ring);
    std::vector<bool> used(static_cast<std::size_t>(cfg.n_views), false);
    for (int rs : ring_slots) {
      const int slot = ring_offset(1, ring) + rs;
      used[static_cast<std::size_t>(slot)] = true;
      vp.views[static_cast<std::size_t>(slot)].landmark = landmark_pool[next_landmark++];
    }
    std::vector<int> free_slots;
    for (int s = 0; s < cfg.n_views; ++s)
      if (!used[static_cast<std::size_t>(s)]) free_slots.push_back(s);
    std::shuffle(free_slots.begin(), free_slots.end(), rng);
    for (int i = 0; i < std::min<int>(cfg.extra_landmarks, static_cast<int>(free_slots.size())); ++i) {
      vp.views[static_cast<std::size_t>(free_slots[static_cast<std::size_t>(i)])].landmark = landmark_pool[next_landmark++];
    }
    for (auto& slot : vp.views) {
      slot.feature = gaussian_vector(rng, cfg.d_feat, cfg.feature_noise);
      if (slot.landmark) slot.feature += bank.landmark(*slot.landmark);
    }

    std::vector<int> categories(static_cast<std::size_t>(num_categories));
    std::iota(categories.begin(), categories.end(), 0);
    std::shuffle(categories.begin(), categories.end(), rng);
    const int count = object_count(rng);
    for (int o = 0; o < count; ++o) {
      SceneObject obj;
      obj.id = o + 1;
      obj.category = categories[static_cast<std::size_t>(o)];
      obj.feature = bank.object(obj.category) + gaussian_vector(rng, cfg.d_feat, cfg.feature_noise);
      vp.objects.push_back(std::move(obj));
    }
  }

  return World(seed, cfg, vocab.landmarks(), vocab.objects(), std::move(vps), std::move(edges));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr int kWorldVersion = 1;

nlohmann::ordered_json vector_json(const Eigen::VectorXd& v) {
  auto arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from(const nlohmann::json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

nlohmann::ordered_json world_to_json(const World& world) {
  const auto& c = world.config();
  nlohmann::ordered_json doc;
  doc["format"] = "navgen-world";
  doc["version"] = kWorldVersion;
  doc["seed"] = world.seed();
  doc["config"] = {{"num_viewpoints", c.num_viewpoints}, {"n_views", c.n_views},
                   {"d_feat", c.d_feat},                 {"feature_noise", c.feature_noise},
                   {"k_nearest", c.k_nearest},           {"max_degree", c.max_degree},
                   {"box", {c.box.x(), c.box.y(), c.box.z()}},
                   {"min_objects", c.min_objects},       {"max_objects", c.max_objects},
                   {"extra_landmarks", c.extra_landmarks}};
  doc["landmark_vocab"] = world.landmark_vocab();
  doc["object_vocab"] = world.object_vocab();
  auto nodes = nlohmann::ordered_json::array();
  auto objects = nlohmann::ordered_json::array();
  for (const auto& vp : world.viewpoints()) {
    nlohmann::ordered_json node;
    node["id"] = vp.id;
    node["position"] = {vp.position.x(), vp.position.y(), vp.position.z()};
    auto views = nlohmann::ordered_json::array();
    for (const auto& s : vp.views) {
      nlohmann::ordered_json view;
      view["heading"] = s.heading;
      view["elevation"] = s.elevation;
      view["landmark"] = s.landmark ? nlohmann::ordered_json(*s.landmark) : nlohmann::ordered_json(nullptr);
      view["feature"] = vector_json(s.feature);
      views.push_back(std::move(view));
    }
    node["views"] = std::move(views);
    nodes.push_back(std::move(node));
    for (const auto& o : vp.objects) {
      nlohmann::ordered_json obj;
      obj["viewpoint"] = vp.id;
      obj["id"] = o.id;
      obj["category"] = o.category;
      obj["feature"] = vector_json(o.feature);
      objects.push_back(std::move(obj));
    }
  }
  doc["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : world.edges()) edges.push_back({{"a", e.a}, {"b", e.b}, {"length", e.length}});
  doc["edges"] = std::move(edges);
  doc["objects"] = std::move(objects);
  return doc;
}

World world_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "navgen-world") throw FormatError("not a navgen-world document");
    const auto version = doc.at("version").get<std::uint32_t>();
    if (version != kWorldVersion) throw VersionError(kWorldVersion, version);
    WorldConfig c;
    const auto& jc = doc.at("config");
    c.num_viewpoints = jc.at("num_viewpoints").get<int>();
    c.n_views = jc.at("n_views").get<int>();
    c.d_feat = jc.at("d_feat").get<int>();
    c.feature_noise = jc.at("feature_noise").get<double>();
    c.k_nearest = jc.at("k_nearest").get<int>();
    c.max_degree = jc.at("max_degree").get<int>();
    const auto& box = jc.at("box");
    c.box = Vector3(box.at(0).get<double>(), box.at(1).get<double>(), box.at(2).get<double>());
    c.min_objects = jc.at("min_objects").get<int>();
    c.max_objects = jc.at("max_objects").get<int>();
    c.extra_landmarks = jc.at("extra_landmarks").get<int>();

    std::vector<Viewpoint> vps;
    for (const auto& node : doc.at("nodes")) {
      Viewpoint vp;
      vp.id = node.at("id").get<int>();
      const auto& pos = node.at("position");
      vp.position = Vector3(pos.at(0).get<double>(), pos.at(1).get<double>(), pos.at(2).get<double>());
      for (const auto& view : node.at("views")) {
        ViewSlot s;
        s.heading = view.at("heading").get<double>();
        s.elevation = view.at("elevation").get<double>();
        if (!view.at("landmark").is_null()) s.landmark = view.at("landmark").get<int>();
        s.feature = vector_from(view.at("feature"));
        vp.views.push_back(std::move(s));
      }
      vps.push_back(std::move(vp));
    }
    for (const auto& obj : doc.at("objects")) {
      const int v = obj.at("viewpoint").get<int>();
      if (v < 0 || v >= static_cast<int>(vps.size())) throw FormatError("object references unknown viewpoint");
      SceneObject o;
      o.id = obj.at("id").get<int>();
      o.category = obj.at("category").get<int>();
      o.feature = vector_from(obj.at("feature"));
      vps[static_cast<std::size_t>(v)].objects.push_back(std::move(o));
    }
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      edges.push_back(Edge{e.at("a").get<int>(), e.at("b").get<int>(), e.at("length").get<double>()});
    }
    return World(doc.at("seed").get<std::uint64_t>(), c, doc.at("landmark_vocab").get<std::vector<std::string>>(),
                 doc.at("object_vocab").get<std::vector<std::string>>(), std::move(vps), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed world document: ") + e.what());
  }
}

void write_world(const std::string& path, const World& world) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write world file: " + path);
  out << world_to_json(world).dump() << '\n';
  if (!out) throw IoError("failed writing world file: " + path);
}

World read_world(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read world file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed world file " + path + ": " + e.what());
  }
  return world_from_json(doc);
}

}  // namespace navgen
