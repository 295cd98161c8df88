#pragma once

#include <memory>
#include <string>

#include "livecast/model.hpp"
#include "livecast/serial.hpp"

namespace livecast::models {

// Container layout: spec fields under meta/, learnable tensors under param/,
// recurrent state under state/. Values survive a round trip bit for bit.
serial::Entries to_entries(SequenceModel& model);
std::unique_ptr<SequenceModel> from_entries(const serial::Entries& entries);

void save_model(SequenceModel& model, const std::string& path);
std::unique_ptr<SequenceModel> load_model(const std::string& path);

}  // namespace livecast::models
