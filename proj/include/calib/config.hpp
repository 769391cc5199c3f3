#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "calib/gaussbench.hpp"
#include "calib/losses.hpp"
#include "calib/trainer.hpp"

namespace calib {

enum class DataSource { Synthetic, Csv, Idx };

struct DataConfig {
    DataSource source = DataSource::Synthetic;
    int classes = 5;
    int train_per_class = 10000;
    int test_per_class = 1000;
    int val_per_class = 1000;
    double val_fraction = 0.1;  // csv/idx: train rows held out for validation
    std::string csv_path;
    std::string csv_test_path;  // optional; val split doubles as test otherwise
    std::string idx_images;
    std::string idx_labels;
    std::string idx_test_images;
    std::string idx_test_labels;
};

/// A loss together with the name it was configured under; the name keys
/// report rows.
struct NamedLoss {
    std::string name;
    LossSpec spec;
};

struct ExperimentConfig {
    std::vector<double> gammas = {1.0, 2.0, 3.0, 5.0};  // grad-factor curves
    int grid_points = 1999;                             // grad-factor p resolution
    int runs = 5;                                       // toy-correlation
    std::vector<NamedLoss> losses;                      // ablation / figure losses
    std::vector<double> eta;                            // fixed-point target
    int fixed_point_cases = 20;
    double fixed_point_lr = 0.5;
    int fixed_point_steps = 5000;
    ErrorReading error_reading = ErrorReading::VectorL2;
    int max_log_samples = 5000;  // grad-vs-brier row cap per loss
};

struct RunConfig {
    std::string experiment = "train-eval";
    std::uint64_t seed = 42;
    std::vector<std::uint64_t> seeds;  // multi-seed runs; falls back to {seed}
    std::string out_dir = "out";
    bool write_json = true;
    bool write_csv = true;
    DataConfig data;
    TrainConfig train;
    ExperimentConfig exp;

    std::vector<std::uint64_t> effective_seeds() const {
        return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
    }
};

extern const std::vector<std::string> kExperimentKinds;

/// Loss name -> spec; accepts ce, brier, focal, flsd53, dual_focal, bsce,
/// bsce_gra plus a _gra suffix on the weight-bearing kinds. Throws
/// config_error listing the supported names.
LossSpec parse_loss_name(const std::string& name);

/// Parse and fully validate a config file. Unknown sections or keys are
/// errors carrying the line number.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace calib
