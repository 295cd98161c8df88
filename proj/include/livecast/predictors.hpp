#pragma once

#include <memory>
#include <vector>

#include "livecast/model.hpp"
#include "livecast/report.hpp"
#include "livecast/sarima.hpp"
#include "livecast/stream.hpp"

namespace livecast::engine {

// Latent-state adapter around a single network. Frames are reshaped to the
// model's sample shape when the element counts match (e.g. a 1x1 grid feeding
// a vector-input model), so grid-native and per-cell models share one
// surface. Construction and reset() both return the network to its zero
// recurrent state.
class NeuralStreamPredictor final : public StreamPredictor {
 public:
  NeuralStreamPredictor(std::shared_ptr<models::SequenceModel> model, const GridSpec& grid);

  tensor::Shape frame_shape() const override { return grid_.frame_shape(); }
  StateKind state_kind() const override { return StateKind::latent; }

  Snapshot snapshot() const override;
  void restore(const Snapshot& snap) override;
  void reset() override;

  models::SequenceModel& model() { return *model_; }

 protected:
  tensor::Tensor do_absorb(const tensor::Tensor& frame) override;
  tensor::Tensor do_project(const tensor::Tensor& prev) override;

 private:
  tensor::Tensor to_sample(const tensor::Tensor& frame) const;
  tensor::Tensor to_frame(const tensor::Tensor& out) const;

  std::shared_ptr<models::SequenceModel> model_;
  GridSpec grid_;
};

// One scalar-feedback network per (channel, cell) series, indexed like a
// flattened frame. Lets single-cell models cover a whole grid; one predictor
// step advances every member by one slot.
class FleetStreamPredictor final : public StreamPredictor {
 public:
  FleetStreamPredictor(std::vector<std::shared_ptr<models::SequenceModel>> members,
                       const GridSpec& grid);

  tensor::Shape frame_shape() const override { return grid_.frame_shape(); }
  StateKind state_kind() const override { return StateKind::latent; }

  Snapshot snapshot() const override;
  void restore(const Snapshot& snap) override;
  void reset() override;

  int members() const { return static_cast<int>(members_.size()); }
  models::SequenceModel& member(int index) { return *members_.at(static_cast<std::size_t>(index)); }

 protected:
  tensor::Tensor do_absorb(const tensor::Tensor& frame) override;
  tensor::Tensor do_project(const tensor::Tensor& prev) override;

 private:
  tensor::Tensor step_all(const tensor::Tensor& frame);

  std::vector<std::shared_ptr<models::SequenceModel>> members_;
  GridSpec grid_;
};

// History-driven adapter: one streaming ARMA state per (channel, cell)
// series. A single reduced form broadcasts across the grid; otherwise one
// form per series, indexed like a flattened frame. project() ignores its
// input (the recursion feeds each series' own forecasts back internally);
// all series march in lockstep, so one outstanding horizon covers them all.
class StatStreamPredictor final : public StreamPredictor {
 public:
  StatStreamPredictor(std::vector<stats::ReducedForm> forms, const GridSpec& grid);

  tensor::Shape frame_shape() const override { return grid_.frame_shape(); }
  StateKind state_kind() const override { return StateKind::history; }

  void reset() override;

  const stats::StatState& series_state(int index) const {
    return states_.at(static_cast<std::size_t>(index));
  }

 protected:
  tensor::Tensor do_absorb(const tensor::Tensor& frame) override;
  tensor::Tensor do_project(const tensor::Tensor& prev) override;
  void do_online_update(const std::vector<tensor::Tensor>& fresh) override;

 private:
  const stats::ReducedForm& form(int series) const {
    return forms_.size() == 1 ? forms_[0] : forms_[static_cast<std::size_t>(series)];
  }

  GridSpec grid_;
  std::vector<stats::ReducedForm> forms_;
  std::vector<stats::StatState> states_;
};

}  // namespace livecast::engine
