#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "calib/calibrate.hpp"
#include "calib/checkpoint.hpp"
#include "calib/config.hpp"
#include "calib/errors.hpp"
#include "calib/experiments.hpp"
#include "calib/metrics.hpp"
#include "calib/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::int64_t seed = -1;
    std::string out_dir;
    std::string format;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "run configuration file");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--out", args.out_dir, "override the output directory");
    cmd->add_option("--format", args.format, "report formats: csv, json, or csv,json");
}

calib::RunConfig load_config(const CommonArgs& args) {
    auto cfg = calib::parse_config(args.config_path);
    if (args.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(args.seed);
        cfg.seeds.clear();
    }
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.format.empty()) {
        cfg.write_json = args.format.find("json") != std::string::npos;
        cfg.write_csv = args.format.find("csv") != std::string::npos;
        if (!cfg.write_json && !cfg.write_csv)
            throw calib::config_error("--format must mention csv or json");
    }
    return cfg;
}

json metrics_json(const calib::CalibrationReport& rep) {
    return json{{"ece", rep.ece},          {"ada_ece", rep.ada_ece},
                {"classwise_ece", rep.classwise_ece}, {"mean_brier", rep.mean_brier},
                {"nll", rep.nll},          {"accuracy", rep.accuracy}};
}

void write_report(const calib::RunConfig& cfg, const std::string& name, const json& body) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / name);
    if (!out) throw calib::data_error("cannot write " + name + " under " + cfg.out_dir);
    out << body.dump(2) << '\n';
}

int cmd_train(const CommonArgs& args, int checkpoint_every, const std::string& resume) {
    auto cfg = load_config(args);
    auto bundle = calib::build_data(cfg.data, cfg.seed);
    auto tc = cfg.train;
    tc.seed = cfg.seed;

    calib::TrainState state =
        resume.empty() ? calib::fresh_train_state(tc, bundle.train, bundle.test)
                       : calib::load_checkpoint(resume);
    calib::TrainHistory history;
    fs::create_directories(cfg.out_dir);
    while (state.epochs_done < tc.epochs) {
        int next = checkpoint_every > 0
                       ? std::min(state.epochs_done + checkpoint_every, tc.epochs)
                       : tc.epochs;
        calib::train_epochs(state, tc, bundle.train, bundle.test, next, history);
        if (checkpoint_every > 0 && state.epochs_done < tc.epochs)
            calib::save_checkpoint(state, (fs::path(cfg.out_dir) /
                                           ("epoch" + std::to_string(state.epochs_done) + ".ckpt"))
                                              .string());
    }
    calib::save_checkpoint(state, (fs::path(cfg.out_dir) / "model.ckpt").string());

    auto preds = calib::predict(state.model, bundle.test);
    auto rep = calib::evaluate_predictions(preds, tc.num_bins);
    json epochs = json::array();
    for (const auto& ep : history.epochs)
        epochs.push_back(json{{"train_loss", ep.train_loss},
                              {"test_ece", ep.test_ece},
                              {"test_accuracy", ep.test_accuracy}});
    write_report(cfg, "train_report.json",
                 json{{"seed", cfg.seed},
                      {"epochs_done", state.epochs_done},
                      {"checkpoint", "model.ckpt"},
                      {"test", metrics_json(rep)},
                      {"epochs", epochs}});
    std::cout << "trained " << state.epochs_done << " epochs; test ece " << rep.ece
              << ", accuracy " << rep.accuracy << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint) {
    auto cfg = load_config(args);
    auto bundle = calib::build_data(cfg.data, cfg.seed);
    auto state = calib::load_checkpoint(checkpoint);
    auto preds = calib::predict(state.model, bundle.test);
    auto rep = calib::evaluate_predictions(preds, cfg.train.num_bins);
    write_report(cfg, "eval_report.json",
                 json{{"seed", cfg.seed}, {"checkpoint", checkpoint}, {"test", metrics_json(rep)}});
    std::cout << "ece " << rep.ece << "  ada_ece " << rep.ada_ece << "  classwise_ece "
              << rep.classwise_ece << "  accuracy " << rep.accuracy << "\n";
    return 0;
}

int cmd_calibrate(const CommonArgs& args, const std::string& checkpoint) {
    auto cfg = load_config(args);
    auto bundle = calib::build_data(cfg.data, cfg.seed);
    if (bundle.val.size() == 0)
        throw calib::config_error("calibrate: the configured data source has no validation split");
    auto state = calib::load_checkpoint(checkpoint);
    auto val_logits = calib::logits_matrix(state.model, bundle.val);
    auto fit = calib::fit_temperature(val_logits, bundle.val.labels, cfg.train.num_bins);

    auto test_logits = calib::logits_matrix(state.model, bundle.test);
    auto pre = calib::evaluate_predictions(
        calib::scale_predictions(test_logits, bundle.test.labels, 1.0), cfg.train.num_bins);
    auto post = calib::evaluate_predictions(
        calib::scale_predictions(test_logits, bundle.test.labels, fit.temperature),
        cfg.train.num_bins);
    write_report(cfg, "calibrate_report.json",
                 json{{"seed", cfg.seed},
                      {"checkpoint", checkpoint},
                      {"temperature", fit.temperature},
                      {"val_ece_pre", fit.val_ece_pre},
                      {"val_ece_post", fit.val_ece_post},
                      {"test_pre", metrics_json(pre)},
                      {"test_post", metrics_json(post)}});
    std::cout << "fitted T = " << fit.temperature << "; val ece " << fit.val_ece_pre << " -> "
              << fit.val_ece_post << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"calibkit: uncertainty-weighted training losses and calibration metrics"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, cal_args, exp_args;
    int checkpoint_every = 0;
    std::string resume, eval_ckpt, cal_ckpt, exp_kind;

    auto* train_cmd = app.add_subcommand("train", "train a model per the config");
    add_common(train_cmd, train_args);
    train_cmd->add_option("--checkpoint-every", checkpoint_every,
                          "write a checkpoint every N epochs");
    train_cmd->add_option("--resume", resume, "resume from a checkpoint file");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();

    auto* cal_cmd =
        app.add_subcommand("calibrate", "fit temperature scaling on the validation split");
    add_common(cal_cmd, cal_args);
    cal_cmd->add_option("--checkpoint", cal_ckpt, "checkpoint to calibrate")->required();

    auto* exp_cmd = app.add_subcommand("experiment", "run a named experiment");
    exp_cmd->add_option("kind", exp_kind, "experiment kind")->required();
    add_common(exp_cmd, exp_args);

    try {
        app.parse(argc, argv);
        if (*train_cmd) return cmd_train(train_args, checkpoint_every, resume);
        if (*eval_cmd) return cmd_eval(eval_args, eval_ckpt);
        if (*cal_cmd) return cmd_calibrate(cal_args, cal_ckpt);
        if (*exp_cmd) {
            auto cfg = load_config(exp_args);
            cfg.experiment = exp_kind;
            calib::run_experiment(cfg);
            std::cout << "experiment " << exp_kind << " written to " << cfg.out_dir << "\n";
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const calib::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const calib::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const calib::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
