#pragma once

#include "navgen/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace navgen {

struct WorldConfig {
  int num_viewpoints = 50;
  int n_views = 36;  // headings per ring = n_views / 3, three elevation rings
  int d_feat = 32;
  double feature_noise = 0.1;
  int k_nearest = 3;
  int max_degree = 6;
  Vector3 box{20.0, 20.0, 4.0};
  int min_objects = 0;
  int max_objects = 3;
  int extra_landmarks = 2;

  int headings_per_ring() const { return n_views / 3; }
  void validate() const;
};

struct ViewSlot {
  double heading = 0.0;
  double elevation = 0.0;
  std::optional<int> landmark;
  Eigen::VectorXd feature;
};

struct SceneObject {
  int id = 0;  // 1-based, local to the viewpoint
  int category = 0;
  Eigen::VectorXd feature;
};

struct Viewpoint {
  int id = 0;
  Vector3 position = Vector3::Zero();
  std::vector<ViewSlot> views;
  std::vector<SceneObject> objects;
};

struct Edge {
  int a = 0;
  int b = 0;
  double length = 0.0;
};

// One navigable option at a viewpoint; candidate 0 (stop) is implicit.
struct Candidate {
  int id = 0;
  int neighbor = 0;
  int slot = 0;
};

// Fixed landmark/object feature tables shared by every world of a given
// feature width, so semantics transfer across environments.
class FeatureBank {
 public:
  static const FeatureBank& for_dimension(int d_feat);
  const Eigen::VectorXd& landmark(int index) const { return landmarks_.at(static_cast<std::size_t>(index)); }
  const Eigen::VectorXd& object(int index) const { return objects_.at(static_cast<std::size_t>(index)); }

 private:
  explicit FeatureBank(int d_feat);
  std::vector<Eigen::VectorXd> landmarks_;
  std::vector<Eigen::VectorXd> objects_;
};

// Immutable navigation graph of viewpoints. All derived lookups (slot
// assignment, candidate order, all-pairs geodesics) are computed at
// construction.
class World {
 public:
  World(std::uint64_t seed, WorldConfig config, std::vector<std::string> landmark_vocab,
        std::vector<std::string> object_vocab, std::vector<Viewpoint> viewpoints, std::vector<Edge> edges);

  std::uint64_t seed() const { return seed_; }
  const WorldConfig& config() const { return config_; }
  int size() const { return static_cast<int>(viewpoints_.size()); }
  const std::vector<Viewpoint>& viewpoints() const { return viewpoints_; }
  const Viewpoint& viewpoint(int id) const;
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& landmark_vocab() const { return landmark_vocab_; }
  const std::vector<std::string>& object_vocab() const { return object_vocab_; }

  const std::vector<int>& neighbors(int v) const;
  bool adjacent(int a, int b) const;
  double edge_length(int a, int b) const;

  double geodesic(int a, int b) const;
  std::vector<int> shortest_path(int a, int b) const;
  const std::vector<Candidate>& candidates(int v) const;
  // Candidate id (1-based) leading from v to neighbor, or throws LookupError.
  int candidate_id(int v, int neighbor) const;

  // Compass bearing in the horizontal plane from a to b, in [0, 2pi).
  double bearing(int a, int b) const;

 private:
  void check_id(int v) const;
  void build_indices();

  std::uint64_t seed_;
  WorldConfig config_;
  std::vector<std::string> landmark_vocab_;
  std::vector<std::string> object_vocab_;
  std::vector<Viewpoint> viewpoints_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<double>> neighbor_lengths_;
  std::vector<std::vector<Candidate>> candidates_;
  std::vector<double> distances_;
};

World generate_world(std::uint64_t seed, const WorldConfig& cfg);

// Assigns each neighbor bearing to an elevation-0 slot: nearest heading,
// collisions pushed to the next free slot clockwise. Returns ring indices.
std::vector<int> assign_heading_slots(const std::vector<double>& bearings, int headings_per_ring);

double normalize_angle(double radians);
double slot_heading(int slot, int headings_per_ring);
double slot_elevation(int slot, int headings_per_ring);
int ring_offset(int ring, int headings_per_ring);

// "navgen-world" JSON document, version 1.
nlohmann::ordered_json world_to_json(const World& world);
World world_from_json(const nlohmann::json& doc);
void write_world(const std::string& path, const World& world);
World read_world(const std::string& path);

}  // namespace navgen
