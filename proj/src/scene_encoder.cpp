#include "navgen/scene_encoder.hpp"

#include <cmath>

namespace navgen {

RowVector angle_features(double heading, double elevation, int freqs) {
  RowVector out(4 * freqs);
  for (int k = 1; k <= freqs; ++k) {
    out[2 * (k - 1)] = std::sin(k * heading);
    out[2 * (k - 1) + 1] = std::cos(k * heading);
    out[2 * freqs + 2 * (k - 1)] = std::sin(k * elevation);
    out[2 * freqs + 2 * (k - 1) + 1] = std::cos(k * elevation);
  }
  return out;
}

RowVector embed_view(const ModelParams& params, const Eigen::VectorXd& feature, double heading, double elevation,
                     const Vector3& position) {
  const auto& e = params.encoder;
  if (feature.size() != e.feature.weight.rows()) {
    throw ShapeError("view feature has width " + std::to_string(feature.size()) + ", expected " +
                     std::to_string(e.feature.weight.rows()));
  }
  RowVector out = feature.transpose() * e.feature.weight;
  out += e.feature.bias;
  out += angle_features(heading, elevation, params.config.angle_freqs) * e.angle;
  out += position.transpose() * e.position;
  return out;
}

namespace {

void view_inputs(const ModelParams& params, const Viewpoint& vp, Matrix& features, Matrix& angles) {
  const auto n = static_cast<Eigen::Index>(vp.views.size());
  const Eigen::Index d_feat = params.encoder.feature.weight.rows();
  features.resize(n, d_feat);
  angles.resize(n, params.config.angle_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& slot = vp.views[static_cast<std::size_t>(i)];
    if (slot.feature.size() != d_feat) {
      throw ShapeError("view feature has width " + std::to_string(slot.feature.size()) + ", expected " +
                       std::to_string(d_feat));
    }
    features.row(i) = slot.feature.transpose();
    angles.row(i) = angle_features(slot.heading, slot.elevation, params.config.angle_freqs);
  }
}

Matrix embed_from_inputs(const ModelParams& params, const Matrix& features, const Matrix& angles, const Vector3& pos) {
  const auto& e = params.encoder;
  Matrix x = nn::linear_forward(e.feature, features);
  x.noalias() += angles * e.angle;
  const RowVector p = pos.transpose() * e.position;
  x.rowwise() += p;
  return x;
}

std::vector<nn::Segment> single_segment(Eigen::Index rows) { return {nn::Segment{0, rows}}; }

}  // namespace

Matrix embed_views(const ModelParams& params, const Viewpoint& vp) {
  Matrix features, angles;
  view_inputs(params, vp, features, angles);
  return embed_from_inputs(params, features, angles, vp.position);
}

Matrix fuse_views(const ModelParams& params, const Matrix& per_view) {
  if (per_view.cols() != params.config.d_model || per_view.rows() == 0) {
    throw ShapeError("fuse_views expects a non-empty n x d_model input");
  }
  std::vector<nn::BlockCache> caches;
  return nn::stack_forward(params.encoder.fusion, per_view, single_segment(per_view.rows()), params.config.fuse_heads,
                           false, caches);
}

std::vector<ObservationEntry> encode_candidates(const World& world, int viewpoint, const ModelParams& params) {
  SceneCache cache(params, false);
  return cache.candidates(world, viewpoint);
}

std::vector<ObservationEntry> encode_objects(const std::vector<SceneObject>& objects, const ModelParams& params) {
  std::vector<ObservationEntry> out;
  out.push_back(ObservationEntry{0, SlotElement{SlotTag::Object, params.encoder.not_exist, {SlotSource::Kind::NotExist}}});
  for (const auto& obj : objects) {
    if (obj.feature.size() != params.encoder.object.weight.rows()) throw ShapeError("object feature width mismatch");
    RowVector v = obj.feature.transpose() * params.encoder.object.weight;
    v += params.encoder.object.bias;
    out.push_back(ObservationEntry{obj.id, SlotElement{SlotTag::Object, v, {SlotSource::Kind::External}}});
  }
  return out;
}

SceneCache::SceneCache(const ModelParams& params, bool keep_activations)
    : params_(params), keep_activations_(keep_activations) {}

SceneCache::Entry& SceneCache::entry(const World& world, int viewpoint) {
  const auto key = std::make_pair(&world, viewpoint);
  if (auto it = index_.find(key); it != index_.end()) return entries_[it->second];
  const auto& vp = world.viewpoint(viewpoint);
  Entry e;
  e.world = &world;
  e.viewpoint = viewpoint;
  view_inputs(params_, vp, e.features, e.angles);
  const Matrix x = embed_from_inputs(params_, e.features, e.angles, vp.position);
  std::vector<nn::BlockCache> caches;
  e.output = nn::stack_forward(params_.encoder.fusion, x, single_segment(x.rows()), params_.config.fuse_heads, false,
                               caches);
  if (keep_activations_) e.blocks = std::move(caches);
  index_.emplace(key, entries_.size());
  entries_.push_back(std::move(e));
  return entries_.back();
}

const Matrix& SceneCache::fused(const World& world, int viewpoint) { return entry(world, viewpoint).output; }

std::vector<ObservationEntry> SceneCache::candidates(const World& world, int viewpoint) {
  const Matrix& out = fused(world, viewpoint);
  std::vector<ObservationEntry> result;
  result.push_back(ObservationEntry{0, SlotElement{SlotTag::View, params_.encoder.stop, {SlotSource::Kind::Stop}}});
  for (const auto& c : world.candidates(viewpoint)) {
    SlotSource src{SlotSource::Kind::ViewSlot, &world, viewpoint, c.slot};
    result.push_back(ObservationEntry{c.id, SlotElement{SlotTag::View, out.row(c.slot), src}});
  }
  return result;
}

std::vector<ObservationEntry> SceneCache::objects(const World& world, int viewpoint) {
  const auto& vp = world.viewpoint(viewpoint);
  auto result = encode_objects(vp.objects, params_);
  for (std::size_t i = 1; i < result.size(); ++i) {
    result[i].slot.source = SlotSource{SlotSource::Kind::Object, &world, viewpoint, static_cast<int>(i) - 1};
  }
  return result;
}

SlotElement SceneCache::scene(const World& world, int viewpoint) {
  const Matrix& out = fused(world, viewpoint);
  RowVector pooled = out.colwise().mean();
  return SlotElement{SlotTag::Scene, pooled, {SlotSource::Kind::Scene, &world, viewpoint, -1}};
}

void SceneCache::accumulate(const SlotSource& source, const RowVector& grad) {
  const int d = params_.config.d_model;
  auto add_to = [&](RowVector& acc) {
    if (acc.size() == 0) acc = RowVector::Zero(d);
    acc += grad;
  };
  switch (source.kind) {
    case SlotSource::Kind::External:
      return;
    case SlotSource::Kind::Stop:
      add_to(stop_grad_);
      return;
    case SlotSource::Kind::NotExist:
      add_to(not_exist_grad_);
      return;
    case SlotSource::Kind::Object: {
      if (!object_touched_) {
        object_grad_.weight = Matrix::Zero(params_.encoder.object.weight.rows(), d);
        object_grad_.bias = Matrix::Zero(1, d);
        object_touched_ = true;
      }
      const auto& feature = source.world->viewpoint(source.viewpoint).objects[static_cast<std::size_t>(source.index)].feature;
      object_grad_.weight.noalias() += feature * grad;
      object_grad_.bias += grad;
      return;
    }
    case SlotSource::Kind::ViewSlot:
    case SlotSource::Kind::Scene: {
      auto it = index_.find(std::make_pair(source.world, source.viewpoint));
      if (it == index_.end()) throw Error("gradient routed to a viewpoint that was never encoded");
      Entry& e = entries_[it->second];
      if (e.grad.size() == 0) e.grad = Matrix::Zero(e.output.rows(), e.output.cols());
      if (source.kind == SlotSource::Kind::ViewSlot) {
        e.grad.row(source.index) += grad;
      } else {
        e.grad.rowwise() += grad / static_cast<double>(e.output.rows());
      }
      return;
    }
  }
}

void SceneCache::backward(ModelParams& grads) {
  auto& g = grads.encoder;
  const auto& p = params_.encoder;
  if (stop_grad_.size() > 0) g.stop += stop_grad_;
  if (not_exist_grad_.size() > 0) g.not_exist += not_exist_grad_;
  if (object_touched_) {
    g.object.weight += object_grad_.weight;
    g.object.bias += object_grad_.bias;
  }
  for (auto& e : entries_) {
    if (e.grad.size() == 0) continue;
    if (!keep_activations_) throw Error("scene cache was built without activations; cannot backpropagate");
    const Matrix dx = nn::stack_backward(p.fusion, e.blocks, e.grad, single_segment(e.grad.rows()),
                                         params_.config.fuse_heads, g.fusion);
    g.feature.weight.noalias() += e.features.transpose() * dx;
    g.feature.bias += dx.colwise().sum();
    g.angle.noalias() += e.angles.transpose() * dx;
    const RowVector col = dx.colwise().sum();
    g.position.noalias() += e.world->viewpoint(e.viewpoint).position * col;
    e.grad.resize(0, 0);
  }
  stop_grad_.resize(0);
  not_exist_grad_.resize(0);
  object_touched_ = false;
}

}  // namespace navgen
