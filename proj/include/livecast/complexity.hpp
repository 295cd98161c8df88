#pragma once

#include <string>
#include <vector>

#include "livecast/model.hpp"
#include "livecast/sarima.hpp"
#include "livecast/stream.hpp"

namespace livecast::cost {

enum class Algorithm { flsp, rolling };

std::string algorithm_name(Algorithm a);

// Closed-form inputs that are properties of the deployment, not the model:
// batch is the paper's n_bs, buffer_samples the raw sample count b_f held by
// the rolling window (often quoted in batches of feed_len elsewhere).
struct MemoryParams {
  int batch = 1;
  long long buffer_samples = 0;
};

struct CostReport {
  std::string model;
  std::string algorithm;
  double flops = 0;             // multiply-accumulates per predicted slot
  double flops_simplified = 0;  // constant-free form; differs only for convlstm
  long long memory_cells = 0;   // buffered history or retained state, in scalars
  long long parameters = 0;
  double overhead = 1.0;        // per-feed work relative to the snapshot scheme
  std::string flops_formula;
  std::string memory_formula;
};

// Per-slot forecast cost. The recurrent stack is costed; the output head is
// a constant factor absorbed by the instrumentation tolerance below.
double flops(const models::ModelSpec& spec);
double flops(const stats::SarimaOrder& order);
// ConvLSTM cost with the 8x/18x gate constants dropped; identity otherwise.
double flops_simplified(const models::ModelSpec& spec);

// Per-feed work of the rolling scheme relative to snapshot/restore:
// (buffer + feed + span) / (feed + span). 1.0 at buffer 0.
double overhead_ratio(const engine::StreamConfig& cfg);

// Scalars that must stay resident between feeds: model state under the
// snapshot scheme, raw history under rolling. Statistical models keep their
// recursion rings either way.
long long memory_cells(const models::ModelSpec& spec, Algorithm algo, const MemoryParams& mem);
long long memory_cells(const stats::SarimaOrder& order);

long long parameter_count(const stats::SarimaOrder& order);

// Canonical symbolic forms, one per model/column.
std::string flops_formula(models::Arch arch);
std::string flops_formula_stat(bool seasonal);
std::string memory_formula(models::Arch arch, Algorithm algo);
std::string memory_formula_stat(bool seasonal);

CostReport analyze(const models::ModelSpec& spec, Algorithm algo, const engine::StreamConfig& cfg,
                   const MemoryParams& mem);
CostReport analyze(const stats::SarimaOrder& order, Algorithm algo, const engine::StreamConfig& cfg);

// Exact multiply count of one model step, measured by the tensor-op
// instrumentation. State is restored afterwards, so measuring is free of
// side effects.
long long instrumented_count(models::SequenceModel& model, const tensor::Tensor& input);

std::string to_json(const CostReport& report);
std::string to_json(const std::vector<CostReport>& reports);

// Symbolic summary: model x (time complexity, rolling memory, snapshot memory).
std::string formula_table();
// Numeric summary of analyzed reports: model x (parameters, flops, memory).
std::string report_table(const std::vector<CostReport>& reports);

}  // namespace livecast::cost
