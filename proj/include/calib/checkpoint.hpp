#pragma once

#include <string>

#include "calib/trainer.hpp"

namespace calib {

/// Binary layout: "CKPT" magic, u32 version, shape header, little-endian f64
/// parameter and velocity arrays, the rng state, and a trailing CRC32 over
/// everything before it. Round trips are bit-exact; load refuses a bad CRC
/// or version.
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

}  // namespace calib
