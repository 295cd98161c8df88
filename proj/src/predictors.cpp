#include "livecast/predictors.hpp"

#include <string>
#include <utility>

#include "livecast/error.hpp"

namespace livecast::engine {

using tensor::Tensor;

NeuralStreamPredictor::NeuralStreamPredictor(std::shared_ptr<models::SequenceModel> model,
                                             const GridSpec& grid)
    : model_(std::move(model)), grid_(grid) {
  if (!model_) throw Error("neural stream predictor needs a model");
  grid_.validate();
  if (tensor::shape_size(model_->sample_shape()) != grid_.frame_size())
    throw DimensionError("model consumes " + std::to_string(tensor::shape_size(model_->sample_shape())) +
                         " values per slot but grid frames hold " + std::to_string(grid_.frame_size()));
  model_->reset_state();
}

Tensor NeuralStreamPredictor::to_sample(const Tensor& frame) const {
  if (frame.shape() != grid_.frame_shape())
    throw DimensionError("expected a " + tensor::shape_str(grid_.frame_shape()) + " frame, got " +
                         tensor::shape_str(frame.shape()));
  if (frame.shape() == model_->sample_shape()) return frame;
  return tensor::reshape(frame, model_->sample_shape());
}

Tensor NeuralStreamPredictor::to_frame(const Tensor& out) const {
  if (out.shape() == grid_.frame_shape()) return out;
  if (tensor::shape_size(out.shape()) != grid_.frame_size())
    throw DimensionError("model emits " + std::to_string(tensor::shape_size(out.shape())) +
                         " values per step but grid frames hold " + std::to_string(grid_.frame_size()) +
                         "; single-cell models need a fleet");
  return tensor::reshape(out, grid_.frame_shape());
}

Tensor NeuralStreamPredictor::do_absorb(const Tensor& frame) {
  return to_frame(model_->step(to_sample(frame)));
}

Tensor NeuralStreamPredictor::do_project(const Tensor& prev) {
  return to_frame(model_->step(to_sample(prev)));
}

Snapshot NeuralStreamPredictor::snapshot() const { return Snapshot(model_->state()); }

void NeuralStreamPredictor::restore(const Snapshot& snap) {
  const auto* state = std::any_cast<models::NeuralState>(&snap);
  if (!state) throw Error("snapshot was not taken from a neural stream predictor");
  model_->set_state(*state);
}

void NeuralStreamPredictor::reset() { model_->reset_state(); }

FleetStreamPredictor::FleetStreamPredictor(std::vector<std::shared_ptr<models::SequenceModel>> members,
                                           const GridSpec& grid)
    : members_(std::move(members)), grid_(grid) {
  grid_.validate();
  if (static_cast<int>(members_.size()) != grid_.frame_size())
    throw DimensionError("fleet needs one member per (channel, cell) series: expected " +
                         std::to_string(grid_.frame_size()) + ", got " + std::to_string(members_.size()));
  for (auto& m : members_) {
    if (!m) throw Error("fleet member is null");
    if (tensor::shape_size(m->sample_shape()) != 1)
      throw DimensionError("fleet members must consume a single value per slot");
    m->reset_state();
  }
}

Tensor FleetStreamPredictor::step_all(const Tensor& frame) {
  if (frame.shape() != grid_.frame_shape())
    throw DimensionError("expected a " + tensor::shape_str(grid_.frame_shape()) + " frame, got " +
                         tensor::shape_str(frame.shape()));
  const std::vector<double>& v = frame.values();
  std::vector<double> out(v.size());
  for (std::size_t s = 0; s < members_.size(); ++s) {
    Tensor y = members_[s]->step(Tensor::from_values(members_[s]->sample_shape(), {v[s]}));
    if (y.values().size() != 1)
      throw DimensionError("fleet members must emit a single value per step");
    out[s] = y.values()[0];
  }
  return Tensor::from_values(grid_.frame_shape(), std::move(out));
}

Tensor FleetStreamPredictor::do_absorb(const Tensor& frame) { return step_all(frame); }

Tensor FleetStreamPredictor::do_project(const Tensor& prev) { return step_all(prev); }

Snapshot FleetStreamPredictor::snapshot() const {
  std::vector<models::NeuralState> states;
  states.reserve(members_.size());
  for (const auto& m : members_) states.push_back(m->state());
  return Snapshot(std::move(states));
}

void FleetStreamPredictor::restore(const Snapshot& snap) {
  const auto* states = std::any_cast<std::vector<models::NeuralState>>(&snap);
  if (!states) throw Error("snapshot was not taken from a fleet stream predictor");
  if (states->size() != members_.size())
    throw DimensionError("snapshot holds " + std::to_string(states->size()) + " member states, fleet has " +
                         std::to_string(members_.size()));
  for (std::size_t s = 0; s < members_.size(); ++s) members_[s]->set_state((*states)[s]);
}

void FleetStreamPredictor::reset() {
  for (auto& m : members_) m->reset_state();
}

StatStreamPredictor::StatStreamPredictor(std::vector<stats::ReducedForm> forms, const GridSpec& grid)
    : grid_(grid), forms_(std::move(forms)) {
  grid_.validate();
  if (forms_.empty()) throw ConfigError("stat stream predictor needs at least one reduced form");
  if (forms_.size() != 1 && static_cast<int>(forms_.size()) != grid_.frame_size())
    throw DimensionError("reduced forms must broadcast (one) or cover every series (" +
                         std::to_string(grid_.frame_size()) + "), got " + std::to_string(forms_.size()));
  reset();
}

void StatStreamPredictor::reset() {
  states_.clear();
  states_.reserve(static_cast<std::size_t>(grid_.frame_size()));
  for (int s = 0; s < grid_.frame_size(); ++s) states_.emplace_back(form(s), form(s).mu);
}

Tensor StatStreamPredictor::do_absorb(const Tensor& frame) {
  if (frame.shape() != grid_.frame_shape())
    throw DimensionError("expected a " + tensor::shape_str(grid_.frame_shape()) + " frame, got " +
                         tensor::shape_str(frame.shape()));
  const std::vector<double>& v = frame.values();
  std::vector<double> next(v.size());
  for (int s = 0; s < grid_.frame_size(); ++s) {
    auto idx = static_cast<std::size_t>(s);
    states_[idx].absorb(form(s), v[idx]);
    next[idx] = states_[idx].eval(form(s));
  }
  return Tensor::from_values(grid_.frame_shape(), std::move(next));
}

Tensor StatStreamPredictor::do_project(const Tensor&) {
  std::vector<double> next(static_cast<std::size_t>(grid_.frame_size()));
  for (int s = 0; s < grid_.frame_size(); ++s)
    next[static_cast<std::size_t>(s)] = states_[static_cast<std::size_t>(s)].forecast_step(form(s));
  return Tensor::from_values(grid_.frame_shape(), std::move(next));
}

void StatStreamPredictor::do_online_update(const std::vector<Tensor>& fresh) {
  if (fresh.empty()) throw Error("online update needs at least one frame");
  for (const Tensor& f : fresh)
    if (f.shape() != grid_.frame_shape())
      throw DimensionError("online update frames must match the grid frame shape");
  // All series share one horizon; checking the first keeps a failed update
  // from leaving the grid partially rewound.
  if (static_cast<int>(fresh.size()) > states_[0].outstanding())
    throw Error("online update of " + std::to_string(fresh.size()) +
                " frames exceeds the outstanding forecast horizon of " +
                std::to_string(states_[0].outstanding()));
  std::vector<double> series(fresh.size());
  for (int s = 0; s < grid_.frame_size(); ++s) {
    auto idx = static_cast<std::size_t>(s);
    for (std::size_t i = 0; i < fresh.size(); ++i) series[i] = fresh[i].values()[idx];
    states_[idx].online_update(form(s), series);
  }
}

}  // namespace livecast::engine
