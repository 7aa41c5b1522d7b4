#pragma once

#include "navgen/nn.hpp"
#include "navgen/params.hpp"
#include "navgen/stream.hpp"
#include "navgen/world.hpp"

#include <unordered_map>
#include <vector>

namespace navgen {

// sin/cos of heading and elevation at frequencies 1..freqs.
RowVector angle_features(double heading, double elevation, int freqs);

// Projects one raw view feature to d_model and adds angle and position
// encodings. Throws ShapeError on a feature of the wrong width.
RowVector embed_view(const ModelParams& params, const Eigen::VectorXd& feature, double heading, double elevation,
                     const Vector3& position);

Matrix embed_views(const ModelParams& params, const Viewpoint& viewpoint);

// Bidirectional self-attention fusion over the views of one viewpoint.
Matrix fuse_views(const ModelParams& params, const Matrix& per_view);

// (0, stop vector) followed by the fused vector of each neighbor's slot.
std::vector<ObservationEntry> encode_candidates(const World& world, int viewpoint, const ModelParams& params);

// (0, not-exist vector) followed by one projected vector per object.
std::vector<ObservationEntry> encode_objects(const std::vector<SceneObject>& objects, const ModelParams& params);

// Memoizes scene-encoder forward passes for one fixed parameter snapshot and
// routes slot gradients back into encoder parameters. Entries are kept in
// first-touch order so gradient accumulation is deterministic.
class SceneCache {
 public:
  explicit SceneCache(const ModelParams& params, bool keep_activations = true);

  const ModelParams& params() const { return params_; }

  const Matrix& fused(const World& world, int viewpoint);
  std::vector<ObservationEntry> candidates(const World& world, int viewpoint);
  std::vector<ObservationEntry> objects(const World& world, int viewpoint);
  SlotElement scene(const World& world, int viewpoint);

  void accumulate(const SlotSource& source, const RowVector& grad);
  // Adds all accumulated encoder gradients into `grads` and clears them.
  void backward(ModelParams& grads);

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    const World* world = nullptr;
    int viewpoint = -1;
    Matrix features;  // n_views x d_feat
    Matrix angles;    // n_views x angle_dim
    std::vector<nn::BlockCache> blocks;
    Matrix output;
    Matrix grad;  // empty until touched
  };
  struct KeyHash {
    std::size_t operator()(const std::pair<const World*, int>& k) const {
      return std::hash<const void*>()(k.first) ^ (std::hash<int>()(k.second) * 0x9e3779b97f4a7c15ULL);
    }
  };

  Entry& entry(const World& world, int viewpoint);

  const ModelParams& params_;
  bool keep_activations_;
  std::vector<Entry> entries_;
  std::unordered_map<std::pair<const World*, int>, std::size_t, KeyHash> index_;
  RowVector stop_grad_;
  RowVector not_exist_grad_;
  Linear object_grad_;
  bool object_touched_ = false;
};

}  // namespace navgen
