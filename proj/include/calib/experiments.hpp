#pragma once

#include <cstdint>
#include <string>

#include "calib/config.hpp"
#include "calib/gaussbench.hpp"
#include "calib/numkit.hpp"

namespace calib {

/// Train/val/test batches built from the configured source, deterministic in
/// the seed. Synthetic sources carry the mixture spec.
struct DataBundle {
    LabeledBatch train;
    LabeledBatch val;  // may be empty
    LabeledBatch test;
    bool synthetic = false;
    GaussianMixtureSpec spec;
};

DataBundle build_data(const DataConfig& data, std::uint64_t seed);

/// Runs one experiment kind end to end and writes report files under
/// config.out_dir. Holds the directory lock for the duration.
void run_experiment(const RunConfig& config);

}  // namespace calib
