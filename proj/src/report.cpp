#include "livecast/report.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "livecast/error.hpp"

namespace livecast::engine {

using tensor::Tensor;

void GridSpec::validate() const {
  if (rows <= 0 || cols <= 0 || channels <= 0)
    throw ConfigError("grid dimensions must be positive");
  if (slot_minutes <= 0 || 24 * 60 % slot_minutes != 0)
    throw ConfigError("slot_minutes must be positive and divide a day");
}

void ReportBatch::validate(const GridSpec& grid) const {
  if (num_slots < 1) throw ConfigError("report batch must cover at least one slot");
  if (cell_ids.empty()) throw ConfigError("report batch has no cells");
  for (int id : cell_ids)
    if (id < 0 || id >= grid.cells())
      throw ConfigError("report cell id " + std::to_string(id) + " outside grid");
  const std::size_t want = static_cast<std::size_t>(num_slots) * cell_ids.size() *
                           static_cast<std::size_t>(grid.channels);
  if (values.size() != want)
    throw ConfigError("report batch carries " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(want));
}

long long MergedWindow::actual_count() const {
  long long n = 0;
  for (const auto& slot_flags : actual)
    for (bool f : slot_flags) n += f ? 1 : 0;
  return n;
}

MergedWindow merge_reports(const GridSpec& grid, long first_slot,
                           const std::vector<Tensor>& estimates,
                           const std::vector<ReportBatch>& reports) {
  grid.validate();
  if (estimates.empty()) throw ConfigError("merge window needs at least one estimated frame");
  for (const auto& f : estimates)
    if (f.shape() != grid.frame_shape())
      throw DimensionError("estimate frame shape " + tensor::shape_str(f.shape()) +
                           " does not match grid " + tensor::shape_str(grid.frame_shape()));
  const int window = static_cast<int>(estimates.size());

  std::vector<std::vector<double>> merged;
  merged.reserve(estimates.size());
  for (const auto& f : estimates) merged.push_back(f.values());
  std::vector<std::vector<bool>> actual(estimates.size(),
                                        std::vector<bool>(static_cast<std::size_t>(grid.cells()), false));

  for (const auto& batch : reports) {
    batch.validate(grid);
    if (batch.first_slot < first_slot ||
        batch.first_slot + batch.num_slots > first_slot + window)
      throw Error("report slots [" + std::to_string(batch.first_slot) + ", " +
                  std::to_string(batch.first_slot + batch.num_slots) + ") fall outside window [" +
                  std::to_string(first_slot) + ", " + std::to_string(first_slot + window) + ")");
    for (int s = 0; s < batch.num_slots; ++s) {
      const int si = static_cast<int>(batch.first_slot - first_slot) + s;
      for (std::size_t pos = 0; pos < batch.cell_ids.size(); ++pos) {
        const int cell = batch.cell_ids[pos];
        const bool seen = actual[static_cast<std::size_t>(si)][static_cast<std::size_t>(cell)];
        for (int ch = 0; ch < grid.channels; ++ch) {
          const double v = batch.value(s, static_cast<int>(pos), ch, grid.channels);
          double& slot_value = merged[static_cast<std::size_t>(si)]
                                     [static_cast<std::size_t>(frame_value_index(grid, ch, cell))];
          if (seen && slot_value != v)
            throw Error("contradictory reports for cell " + std::to_string(cell) + " at slot " +
                        std::to_string(first_slot + si));
          slot_value = v;
        }
        actual[static_cast<std::size_t>(si)][static_cast<std::size_t>(cell)] = true;
      }
    }
  }

  MergedWindow out;
  out.first_slot = first_slot;
  out.actual = std::move(actual);
  out.frames.reserve(merged.size());
  for (auto& v : merged) out.frames.push_back(Tensor::from_values(grid.frame_shape(), std::move(v)));
  return out;
}

}  // namespace livecast::engine
