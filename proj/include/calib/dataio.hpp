#pragma once

#include <string>

#include "calib/numkit.hpp"

namespace calib {

/// CSV with header "f0,...,label" (label column last). Throws data_error
/// naming row and column on non-numeric cells, ragged rows, or bad labels.
LabeledBatch load_csv(const std::string& path);
LabeledBatch load_csv_text(const std::string& text, const std::string& origin);

/// IDX image/label pair (big-endian magics 0x00000803 / 0x00000801).
/// Pixels scale to [0,1] and flatten row-major. Throws data_error naming the
/// byte offset on bad magic or truncation, and on image/label count mismatch.
LabeledBatch load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a batch in the load_csv schema.
void save_csv(const LabeledBatch& batch, const std::string& path);

}  // namespace calib
