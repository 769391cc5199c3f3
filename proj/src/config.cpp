#include "calib/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include "calib/errors.hpp"

namespace calib {

const std::vector<std::string> kExperimentKinds = {
    "train-eval",  "toy-correlation", "grad-factor",     "grad-vs-brier",
    "ece-over-epochs", "fixed-point",     "weight-ablation"};

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

struct Parser {
    std::string origin;
    int line = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw config_error(origin + ":" + std::to_string(line) + ": " + msg);
    }

    double to_double(const std::string& key, const std::string& v) const {
        try {
            std::size_t used = 0;
            double x = std::stod(v, &used);
            if (used != v.size()) fail(key + ": not a number: '" + v + "'");
            return x;
        } catch (const config_error&) {
            throw;
        } catch (...) {
            fail(key + ": not a number: '" + v + "'");
        }
    }

    long long to_int(const std::string& key, const std::string& v) const {
        try {
            std::size_t used = 0;
            long long x = std::stoll(v, &used);
            if (used != v.size()) fail(key + ": not an integer: '" + v + "'");
            return x;
        } catch (const config_error&) {
            throw;
        } catch (...) {
            fail(key + ": not an integer: '" + v + "'");
        }
    }

    bool to_bool(const std::string& key, const std::string& v) const {
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        fail(key + ": not a boolean: '" + v + "'");
    }
};

std::string supported_losses() {
    return "ce, brier, focal, flsd53, dual_focal, bsce, bsce_gra "
           "(plus _gra suffix on focal/flsd53/dual_focal)";
}

}  // namespace

LossSpec parse_loss_name(const std::string& raw) {
    std::string name = raw;
    bool gra = false;
    if (name == "bsce_gra") return LossSpec{LossKind::BSCE_GRA, 4.0, 2.0, false};
    if (name.size() > 4 && name.substr(name.size() - 4) == "_gra") {
        gra = true;
        name = name.substr(0, name.size() - 4);
    }
    LossSpec spec;
    spec.gra = gra;
    if (name == "ce")
        spec.kind = LossKind::CE;
    else if (name == "brier")
        spec.kind = LossKind::BrierLoss;
    else if (name == "focal")
        spec.kind = LossKind::Focal;
    else if (name == "flsd53")
        spec.kind = LossKind::FocalFLSD53;
    else if (name == "dual_focal")
        spec.kind = LossKind::DualFocal;
    else if (name == "bsce")
        spec.kind = LossKind::BSCE;
    else
        throw config_error("unknown loss '" + raw + "'; supported: " + supported_losses());
    return spec;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    Parser p{origin, 0};
    std::istringstream is(text);
    std::string raw;
    std::string section;
    bool lr_set = false, schedule_set = false;
    std::string loss_name = "ce";
    double loss_gamma = 4.0, loss_beta = 2.0;
    bool loss_gra = false, loss_gra_set = false;

    while (std::getline(is, raw)) {
        ++p.line;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') p.fail("malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "data" && section != "loss" &&
                section != "train" && section != "metrics" && section != "experiment")
                p.fail("unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) p.fail("expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) p.fail("empty key");
        if (section.empty()) p.fail("key '" + key + "' outside any section");
        std::string qkey = section + "." + key;

        if (section == "run") {
            if (key == "experiment") {
                if (std::find(kExperimentKinds.begin(), kExperimentKinds.end(), value) ==
                    kExperimentKinds.end()) {
                    std::string kinds;
                    for (const auto& k : kExperimentKinds) kinds += (kinds.empty() ? "" : ", ") + k;
                    p.fail("unknown experiment '" + value + "'; kinds: " + kinds);
                }
                cfg.experiment = value;
            } else if (key == "seed") {
                cfg.seed = static_cast<std::uint64_t>(p.to_int(qkey, value));
            } else if (key == "seeds") {
                cfg.seeds.clear();
                for (const auto& s : split(value, ','))
                    cfg.seeds.push_back(static_cast<std::uint64_t>(p.to_int(qkey, s)));
            } else if (key == "out_dir") {
                cfg.out_dir = value;
            } else if (key == "formats") {
                cfg.write_json = cfg.write_csv = false;
                for (const auto& f : split(value, ',')) {
                    if (f == "json")
                        cfg.write_json = true;
                    else if (f == "csv")
                        cfg.write_csv = true;
                    else
                        p.fail("formats: unknown format '" + f + "' (csv, json)");
                }
            } else {
                p.fail("unknown key '" + qkey + "'");
            }
        } else if (section == "data") {
            if (key == "source") {
                if (value == "synthetic")
                    cfg.data.source = DataSource::Synthetic;
                else if (value == "csv")
                    cfg.data.source = DataSource::Csv;
                else if (value == "idx")
                    cfg.data.source = DataSource::Idx;
                else
                    p.fail("data.source must be synthetic, csv, or idx");
            } else if (key == "classes") {
                cfg.data.classes = static_cast<int>(p.to_int(qkey, value));
                if (cfg.data.classes < 2) p.fail("data.classes must be >= 2");
            } else if (key == "train_per_class") {
                cfg.data.train_per_class = static_cast<int>(p.to_int(qkey, value));
            } else if (key == "test_per_class") {
                cfg.data.test_per_class = static_cast<int>(p.to_int(qkey, value));
            } else if (key == "val_per_class") {
                cfg.data.val_per_class = static_cast<int>(p.to_int(qkey, value));
            } else if (key == "val_fraction") {
                cfg.data.val_fraction = p.to_double(qkey, value);
                if (cfg.data.val_fraction < 0.0 || cfg.data.val_fraction >= 1.0)
                    p.fail("data.val_fraction must be in [0, 1)");
            } else if (key == "csv_path") {
                cfg.data.csv_path = value;
            } else if (key == "csv_test_path") {
                cfg.data.csv_test_path = value;
            } else if (key == "idx_images") {
                cfg.data.idx_images = value;
            } else if (key == "idx_labels") {
                cfg.data.idx_labels = value;
            } else if (key == "idx_test_images") {
                cfg.data.idx_test_images = value;
            } else if (key == "idx_test_labels") {
                cfg.data.idx_test_labels = value;
            } else {
                p.fail("unknown key '" + qkey + "'");
            }
        } else if (section == "loss") {
            if (key == "kind") {
                try {
                    parse_loss_name(value);
                } catch (const config_error& e) {
                    p.fail(e.what());
                }
                loss_name = value;
            } else if (key == "gamma") {
                loss_gamma = p.to_double(qkey, value);
                if (loss_gamma < 0.0) p.fail("gamma must be >= 0");
            } else if (key == "beta") {
                loss_beta = p.to_double(qkey, value);
                if (loss_beta < 1.0) p.fail("beta must be >= 1");
            } else if (key == "gra") {
                loss_gra = p.to_bool(qkey, value);
                loss_gra_set = true;
            } else {
                p.fail("unknown key '" + qkey + "'");
            }
        } else if (section == "train") {
            if (key == "epochs") {
                cfg.train.epochs = static_cast<int>(p.to_int(qkey, value));
                if (cfg.train.epochs < 1) p.fail("train.epochs must be >= 1");
            } else if (key == "batch_size") {
                cfg.train.batch_size = static_cast<int>(p.to_int(qkey, value));
                if (cfg.train.batch_size < 1) p.fail("train.batch_size must be >= 1");
            } else if (key == "momentum") {
                cfg.train.momentum = p.to_double(qkey, value);
            } else if (key == "weight_decay") {
                cfg.train.weight_decay = p.to_double(qkey, value);
            } else if (key == "lr") {
                double lr = p.to_double(qkey, value);
                if (lr <= 0.0) p.fail("train.lr must be positive");
                cfg.train.lr_schedule = {{std::numeric_limits<int>::max(), lr}};
                lr_set = true;
            } else if (key == "lr_schedule") {
                cfg.train.lr_schedule.clear();
                auto phases = split(value, ',');
                for (std::size_t i = 0; i < phases.size(); ++i) {
                    auto parts = split(phases[i], ':');
                    if (parts.size() == 1) {
                        if (i + 1 != phases.size())
                            p.fail("lr_schedule: only the final phase may omit ':until'");
                        cfg.train.lr_schedule.push_back(
                            {std::numeric_limits<int>::max(), p.to_double(qkey, parts[0])});
                    } else if (parts.size() == 2) {
                        cfg.train.lr_schedule.push_back(
                            {static_cast<int>(p.to_int(qkey, parts[1])),
                             p.to_double(qkey, parts[0])});
                    } else {
                        p.fail("lr_schedule: expected 'lr:until' phases");
                    }
                }
                for (std::size_t i = 1; i < cfg.train.lr_schedule.size(); ++i)
                    if (cfg.train.lr_schedule[i].until_epoch <=
                        cfg.train.lr_schedule[i - 1].until_epoch)
                        p.fail("lr_schedule: breakpoints must be strictly increasing");
                schedule_set = true;
            } else if (key == "hidden") {
                cfg.train.hidden_dims.clear();
                for (const auto& h : split(value, ',')) {
                    int dim = static_cast<int>(p.to_int(qkey, h));
                    if (dim < 1) p.fail("train.hidden dims must be positive");
                    cfg.train.hidden_dims.push_back(dim);
                }
            } else if (key == "grad_log_epochs") {
                cfg.train.grad_log_epochs.clear();
                for (const auto& e : split(value, ','))
                    cfg.train.grad_log_epochs.push_back(static_cast<int>(p.to_int(qkey, e)));
            } else {
                p.fail("unknown key '" + qkey + "'");
            }
        } else if (section == "metrics") {
            if (key == "num_bins") {
                cfg.train.num_bins = static_cast<int>(p.to_int(qkey, value));
                if (cfg.train.num_bins < 1) p.fail("metrics.num_bins must be >= 1");
            } else {
                p.fail("unknown key '" + qkey + "'");
            }
        } else if (section == "experiment") {
            if (key == "gammas") {
                cfg.exp.gammas.clear();
                for (const auto& g : split(value, ','))
                    cfg.exp.gammas.push_back(p.to_double(qkey, g));
            } else if (key == "grid_points") {
                cfg.exp.grid_points = static_cast<int>(p.to_int(qkey, value));
                if (cfg.exp.grid_points < 3) p.fail("experiment.grid_points must be >= 3");
            } else if (key == "runs") {
                cfg.exp.runs = static_cast<int>(p.to_int(qkey, value));
                if (cfg.exp.runs < 1) p.fail("experiment.runs must be >= 1");
            } else if (key == "losses") {
                cfg.exp.losses.clear();
                for (const auto& name : split(value, ',')) {
                    try {
                        cfg.exp.losses.push_back({name, parse_loss_name(name)});
                    } catch (const config_error& e) {
                        p.fail(e.what());
                    }
                }
            } else if (key == "eta") {
                cfg.exp.eta.clear();
                for (const auto& v : split(value, ','))
                    cfg.exp.eta.push_back(p.to_double(qkey, v));
            } else if (key == "fixed_point_cases") {
                cfg.exp.fixed_point_cases = static_cast<int>(p.to_int(qkey, value));
            } else if (key == "fixed_point_lr") {
                cfg.exp.fixed_point_lr = p.to_double(qkey, value);
            } else if (key == "fixed_point_steps") {
                cfg.exp.fixed_point_steps = static_cast<int>(p.to_int(qkey, value));
            } else if (key == "error_reading") {
                if (value == "vector_l2")
                    cfg.exp.error_reading = ErrorReading::VectorL2;
                else if (value == "confidence_gap")
                    cfg.exp.error_reading = ErrorReading::ConfidenceGap;
                else
                    p.fail("experiment.error_reading must be vector_l2 or confidence_gap");
            } else if (key == "max_log_samples") {
                cfg.exp.max_log_samples = static_cast<int>(p.to_int(qkey, value));
            } else {
                p.fail("unknown key '" + qkey + "'");
            }
        }
    }

    if (lr_set && schedule_set)
        throw config_error(origin + ": set either train.lr or train.lr_schedule, not both");

    cfg.train.loss = parse_loss_name(loss_name);
    if (loss_gra_set) cfg.train.loss.gra = loss_gra;
    cfg.train.loss.gamma = loss_gamma;
    cfg.train.loss.beta = loss_beta;

    // cross-field validation
    if (cfg.data.source == DataSource::Csv && cfg.data.csv_path.empty())
        throw config_error(origin + ": data.source=csv requires data.csv_path");
    if (cfg.data.source == DataSource::Idx &&
        (cfg.data.idx_images.empty() || cfg.data.idx_labels.empty()))
        throw config_error(origin + ": data.source=idx requires idx_images and idx_labels");
    if (cfg.data.source == DataSource::Synthetic) {
        if (cfg.data.train_per_class < 1 || cfg.data.test_per_class < 1)
            throw config_error(origin + ": synthetic data needs positive per-class sizes");
    }
    if (!cfg.exp.eta.empty()) {
        double sum = 0.0;
        for (double e : cfg.exp.eta) {
            if (e <= 0.0) throw config_error(origin + ": experiment.eta must be strictly positive");
            sum += e;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw config_error(origin + ": experiment.eta must sum to 1");
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace calib
