#include "calib/experiments.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "calib/calibrate.hpp"
#include "calib/dataio.hpp"
#include "calib/errors.hpp"
#include "calib/metrics.hpp"

namespace calib {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// One experiment process per output directory.
class DirLock {
public:
    explicit DirLock(const std::string& dir) : path_(fs::path(dir) / ".lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw config_error("output directory is locked by another run (remove " +
                               path_.string() + " if stale)");
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

std::string loss_config_name(const LossSpec& spec) {
    auto canon = spec.canonical();
    if (canon.kind == LossKind::BSCE && canon.gra) return "bsce_gra";
    std::string name = loss_kind_name(spec.kind);
    if (spec.gra) name += "_gra";
    return name;
}

json loss_to_json(const LossSpec& spec) {
    return json{{"kind", loss_config_name(spec)},
                {"gamma", spec.gamma},
                {"beta", spec.beta},
                {"gra", spec.canonical().gra}};
}

json config_to_json(const RunConfig& cfg) {
    json data{{"classes", cfg.data.classes},
              {"train_per_class", cfg.data.train_per_class},
              {"test_per_class", cfg.data.test_per_class},
              {"val_per_class", cfg.data.val_per_class},
              {"val_fraction", cfg.data.val_fraction}};
    switch (cfg.data.source) {
        case DataSource::Synthetic: data["source"] = "synthetic"; break;
        case DataSource::Csv:
            data["source"] = "csv";
            data["csv_path"] = cfg.data.csv_path;
            if (!cfg.data.csv_test_path.empty()) data["csv_test_path"] = cfg.data.csv_test_path;
            break;
        case DataSource::Idx:
            data["source"] = "idx";
            data["idx_images"] = cfg.data.idx_images;
            data["idx_labels"] = cfg.data.idx_labels;
            if (!cfg.data.idx_test_images.empty()) {
                data["idx_test_images"] = cfg.data.idx_test_images;
                data["idx_test_labels"] = cfg.data.idx_test_labels;
            }
            break;
    }
    json schedule = json::array();
    for (const auto& phase : cfg.train.lr_schedule)
        schedule.push_back(json{{"until_epoch", phase.until_epoch}, {"lr", phase.lr}});
    json train{{"epochs", cfg.train.epochs},
               {"batch_size", cfg.train.batch_size},
               {"momentum", cfg.train.momentum},
               {"weight_decay", cfg.train.weight_decay},
               {"hidden", cfg.train.hidden_dims},
               {"lr_schedule", schedule},
               {"num_bins", cfg.train.num_bins}};
    json exp{{"runs", cfg.exp.runs},
             {"gammas", cfg.exp.gammas},
             {"grid_points", cfg.exp.grid_points},
             {"fixed_point_cases", cfg.exp.fixed_point_cases},
             {"fixed_point_lr", cfg.exp.fixed_point_lr},
             {"fixed_point_steps", cfg.exp.fixed_point_steps},
             {"max_log_samples", cfg.exp.max_log_samples},
             {"error_reading", cfg.exp.error_reading == ErrorReading::VectorL2
                                   ? "vector_l2"
                                   : "confidence_gap"}};
    if (!cfg.exp.losses.empty()) {
        json losses = json::array();
        for (const auto& nl : cfg.exp.losses) losses.push_back(nl.name);
        exp["losses"] = losses;
    }
    if (!cfg.exp.eta.empty()) exp["eta"] = cfg.exp.eta;
    return json{{"experiment", cfg.experiment},
                {"seed", cfg.seed},
                {"seeds", cfg.effective_seeds()},
                {"out_dir", cfg.out_dir},
                {"loss", loss_to_json(cfg.train.loss)},
                {"data", data},
                {"train", train},
                {"experiment_params", exp}};
}

json metrics_to_json(const CalibrationReport& rep) {
    return json{{"ece", rep.ece},
                {"ada_ece", rep.ada_ece},
                {"classwise_ece", rep.classwise_ece},
                {"mean_brier", rep.mean_brier},
                {"nll", rep.nll},
                {"accuracy", rep.accuracy}};
}

void write_json_report(const RunConfig& cfg, json body,
                       std::chrono::steady_clock::time_point started) {
    if (!cfg.write_json) return;
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
    body["config"] = config_to_json(cfg);
    body["wall_time_seconds"] = elapsed.count();
    std::ofstream out(fs::path(cfg.out_dir) / "report.json");
    if (!out) throw data_error("cannot write report.json under " + cfg.out_dir);
    out << body.dump(2) << '\n';
}

std::ofstream open_csv(const RunConfig& cfg, const std::string& name, const std::string& header) {
    std::ofstream out(fs::path(cfg.out_dir) / name);
    if (!out) throw data_error("cannot write " + name + " under " + cfg.out_dir);
    out.precision(17);
    out << header << '\n';
    return out;
}

void write_bins_csv(const RunConfig& cfg, const std::string& name, const BinReport& bins) {
    if (!cfg.write_csv) return;
    auto out = open_csv(cfg, name, "lower,upper,count,avg_confidence,accuracy");
    for (const auto& b : bins.bins)
        out << b.lower << ',' << b.upper << ',' << b.count << ',' << b.avg_confidence << ','
            << b.accuracy << '\n';
}

TrainConfig train_config_for(const RunConfig& cfg, const LossSpec& loss, std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.loss = loss;
    tc.seed = seed;
    return tc;
}

struct SplitResult {
    LabeledBatch kept;
    LabeledBatch held_out;
};

// Deterministic row split; held_out receives ceil(fraction * n) rows.
SplitResult split_rows(const LabeledBatch& batch, double fraction, RngStream rng) {
    std::vector<std::size_t> order(batch.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    auto n_held = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(batch.size())));
    SplitResult out;
    auto copy_rows = [&](LabeledBatch& dst, std::size_t from, std::size_t to) {
        dst.features = Matrix(to - from, batch.features.cols);
        dst.labels.resize(to - from);
        for (std::size_t i = from; i < to; ++i) {
            auto src = batch.features.row(order[i]);
            std::copy(src.begin(), src.end(), dst.features.row(i - from).begin());
            dst.labels[i - from] = batch.labels[order[i]];
        }
    };
    copy_rows(out.held_out, 0, n_held);
    copy_rows(out.kept, n_held, batch.size());
    return out;
}

struct SeedRun {
    MlpModel model;
    TrainHistory history;
    CalibrationReport pre;
    CalibrationReport post;
    TemperatureFit fit;
    bool scaled = false;
};

// Train on the bundle and evaluate test metrics before and after temperature
// scaling (fitted on the validation split when present).
SeedRun train_and_evaluate(const RunConfig& cfg, const LossSpec& loss, std::uint64_t seed,
                           const DataBundle& bundle) {
    SeedRun run;
    auto tc = train_config_for(cfg, loss, seed);
    auto [model, history] = train(tc, bundle.train, bundle.test);
    run.model = std::move(model);
    run.history = std::move(history);
    auto test_preds = predict(run.model, bundle.test);
    run.pre = evaluate_predictions(test_preds, cfg.train.num_bins);
    if (bundle.val.size() > 0) {
        auto val_logits = logits_matrix(run.model, bundle.val);
        run.fit = fit_temperature(val_logits, bundle.val.labels, cfg.train.num_bins);
        auto test_logits = logits_matrix(run.model, bundle.test);
        auto scaled = scale_predictions(test_logits, bundle.test.labels, run.fit.temperature);
        run.post = evaluate_predictions(scaled, cfg.train.num_bins);
        run.scaled = true;
    } else {
        run.fit.temperature = 1.0;
        run.post = run.pre;
    }
    return run;
}

void accumulate(json& sums, const json& values) {
    for (auto it = values.begin(); it != values.end(); ++it) {
        double v = it.value().get<double>();
        if (!sums.contains(it.key()))
            sums[it.key()] = 0.0;
        sums[it.key()] = sums[it.key()].get<double>() + v;
    }
}

json divide(const json& sums, double n) {
    json out;
    for (auto it = sums.begin(); it != sums.end(); ++it)
        out[it.key()] = it.value().get<double>() / n;
    return out;
}

void run_train_eval(const RunConfig& cfg, std::chrono::steady_clock::time_point started) {
    json runs = json::array();
    json pre_sum, post_sum;
    double temp_sum = 0.0;
    auto seeds = cfg.effective_seeds();
    for (auto seed : seeds) {
        auto bundle = build_data(cfg.data, seed);
        auto run = train_and_evaluate(cfg, cfg.train.loss, seed, bundle);
        json entry{{"seed", seed},
                   {"temperature", run.fit.temperature},
                   {"val_ece_pre", run.fit.val_ece_pre},
                   {"val_ece_post", run.fit.val_ece_post},
                   {"pre", metrics_to_json(run.pre)},
                   {"post", metrics_to_json(run.post)}};
        json epochs = json::array();
        for (const auto& ep : run.history.epochs)
            epochs.push_back(json{{"train_loss", ep.train_loss},
                                  {"test_ece", ep.test_ece},
                                  {"test_accuracy", ep.test_accuracy}});
        entry["epochs"] = epochs;
        runs.push_back(entry);
        accumulate(pre_sum, metrics_to_json(run.pre));
        accumulate(post_sum, metrics_to_json(run.post));
        temp_sum += run.fit.temperature;
        write_bins_csv(cfg, "bins_pre_seed" + std::to_string(seed) + ".csv", run.pre.bin_data);
        write_bins_csv(cfg, "bins_post_seed" + std::to_string(seed) + ".csv", run.post.bin_data);
    }
    double n = static_cast<double>(seeds.size());
    json body{{"runs", runs},
              {"mean", json{{"pre", divide(pre_sum, n)},
                            {"post", divide(post_sum, n)},
                            {"temperature", temp_sum / n}}}};
    write_json_report(cfg, std::move(body), started);
}

void run_toy_correlation(const RunConfig& cfg, std::chrono::steady_clock::time_point started) {
    if (cfg.data.source != DataSource::Synthetic)
        throw config_error("toy-correlation requires data.source = synthetic");
    auto bundle = build_data(cfg.data, cfg.seed);
    ToyDataset toy{std::move(bundle.train), std::move(bundle.test), bundle.spec};
    auto tc = train_config_for(cfg, cfg.train.loss, cfg.seed);
    auto [model, history] = train(tc, toy.train, toy.test);

    std::vector<LossSpec> metrics = {{LossKind::Focal, 1.0, 2.0, false},
                                     {LossKind::DualFocal, 1.0, 2.0, false},
                                     {LossKind::BSCE, 2.0, 2.0, false}};
    auto report = correlation_experiment(model, toy, metrics, cfg.exp.runs, cfg.seed,
                                         cfg.exp.error_reading, &tc);

    json names = json::array({"u_fl", "u_dfl", "u_gbs"});
    json per_run = json::array();
    for (int r = 0; r < report.num_runs; ++r) {
        json entry{{"run", r}};
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            entry[names[m].get<std::string>()] =
                json{{"pearson", report.runs[static_cast<std::size_t>(r)].pearson[m]},
                     {"gamma", report.runs[static_cast<std::size_t>(r)].gamma[m]},
                     {"beta", report.runs[static_cast<std::size_t>(r)].beta[m]}};
        }
        per_run.push_back(entry);
    }
    json mean;
    for (std::size_t m = 0; m < metrics.size(); ++m)
        mean[names[m].get<std::string>()] = report.mean_pearson[m];
    if (cfg.write_csv) {
        auto out = open_csv(cfg, "correlations.csv", "run,metric,pearson,gamma,beta");
        for (int r = 0; r < report.num_runs; ++r)
            for (std::size_t m = 0; m < metrics.size(); ++m) {
                const auto& rr = report.runs[static_cast<std::size_t>(r)];
                out << r << ',' << names[m].get<std::string>() << ',' << rr.pearson[m] << ','
                    << rr.gamma[m] << ',' << rr.beta[m] << '\n';
            }
    }
    write_json_report(cfg, json{{"num_runs", report.num_runs},
                                {"mean_pearson", mean},
                                {"runs", per_run}},
                      started);
}

void run_grad_factor(const RunConfig& cfg, std::chrono::steady_clock::time_point started) {
    json maxima = json::array();
    std::ofstream csv;
    if (cfg.write_csv) csv = open_csv(cfg, "grad_factor.csv", "p,gamma,g");
    for (double gamma : cfg.exp.gammas) {
        double best_p = 0.0, best_g = -1.0;
        for (int i = 1; i <= cfg.exp.grid_points; ++i) {
            double p = static_cast<double>(i) / (cfg.exp.grid_points + 1);
            double g = focal_grad_factor(p, gamma);
            if (cfg.write_csv) csv << p << ',' << gamma << ',' << g << '\n';
            if (g > best_g) {
                best_g = g;
                best_p = p;
            }
        }
        maxima.push_back(json{{"gamma", gamma}, {"argmax_p", best_p}, {"max_g", best_g}});
    }
    write_json_report(cfg, json{{"maxima", maxima}}, started);
}

void run_grad_vs_brier(const RunConfig& cfg, std::chrono::steady_clock::time_point started) {
    auto losses = cfg.exp.losses;
    if (losses.empty())
        losses = {{"flsd53", parse_loss_name("flsd53")},
                  {"dual_focal", parse_loss_name("dual_focal")},
                  {"bsce_gra", parse_loss_name("bsce_gra")}};
    std::ofstream csv;
    if (cfg.write_csv)
        csv = open_csv(cfg, "grad_vs_brier.csv",
                       "loss,sample,brier,grad_norm,ce_grad_norm,weight");
    json summary = json::array();
    auto bundle = build_data(cfg.data, cfg.seed);
    std::size_t cap = std::min<std::size_t>(bundle.train.size(),
                                            static_cast<std::size_t>(cfg.exp.max_log_samples));
    for (const auto& nl : losses) {
        auto run = train_and_evaluate(cfg, nl.spec, cfg.seed, bundle);
        LossSpec ce{LossKind::CE};
        std::vector<double> briers(cap), norms(cap);
        double max_ratio_gap = 0.0;
        bool gra = nl.spec.canonical().gra;
        for (std::size_t i = 0; i < cap; ++i) {
            auto x = bundle.train.features.row(i);
            int label = bundle.train.labels[i];
            double norm = per_sample_last_layer_grad_norm(run.model, x, label, nl.spec);
            double ce_norm = per_sample_last_layer_grad_norm(run.model, x, label, ce);
            auto pv = softmax(forward(run.model, x));
            double weight = uncertainty_weight(nl.spec, pv.probs, label);
            double brier = brier_score(pv, one_hot(label, run.model.num_classes));
            briers[i] = brier;
            norms[i] = norm;
            if (gra && ce_norm > 1e-300)
                max_ratio_gap = std::max(max_ratio_gap, std::abs(norm / ce_norm - weight));
            if (cfg.write_csv)
                csv << nl.name << ',' << i << ',' << brier << ',' << norm << ',' << ce_norm
                    << ',' << weight << '\n';
        }
        json entry{{"loss", nl.name}, {"samples", cap}};
        try {
            entry["pearson_brier_grad_norm"] = pearson(briers, norms);
        } catch (const std::invalid_argument&) {
            entry["pearson_brier_grad_norm"] = nullptr;
        }
        if (gra) entry["max_ratio_minus_weight"] = max_ratio_gap;
        summary.push_back(entry);
    }
    write_json_report(cfg, json{{"losses", summary}}, started);
}

void run_ece_over_epochs(const RunConfig& cfg, std::chrono::steady_clock::time_point started) {
    auto losses = cfg.exp.losses;
    if (losses.empty())
        losses = {{"ce", parse_loss_name("ce")},
                  {"flsd53", parse_loss_name("flsd53")},
                  {"bsce_gra", parse_loss_name("bsce_gra")}};
    std::ofstream csv;
    if (cfg.write_csv)
        csv = open_csv(cfg, "ece_over_epochs.csv", "loss,epoch,train_loss,test_ece,test_accuracy");
    json final_values = json::array();
    auto bundle = build_data(cfg.data, cfg.seed);
    for (const auto& nl : losses) {
        auto tc = train_config_for(cfg, nl.spec, cfg.seed);
        auto [model, history] = train(tc, bundle.train, bundle.test);
        for (std::size_t e = 0; e < history.epochs.size(); ++e) {
            const auto& ep = history.epochs[e];
            if (cfg.write_csv)
                csv << nl.name << ',' << e + 1 << ',' << ep.train_loss << ',' << ep.test_ece
                    << ',' << ep.test_accuracy << '\n';
        }
        final_values.push_back(json{{"loss", nl.name},
                                    {"final_test_ece", history.epochs.back().test_ece},
                                    {"final_test_accuracy", history.epochs.back().test_accuracy}});
    }
    write_json_report(cfg, json{{"losses", final_values}}, started);
}

void run_fixed_point(const RunConfig& cfg, std::chrono::steady_clock::time_point started) {
    std::vector<std::vector<double>> etas;
    if (!cfg.exp.eta.empty()) {
        etas.push_back(cfg.exp.eta);
    } else {
        RngStream rng = RngStream(cfg.seed).split(0xF1);
        for (int c = 0; c < cfg.exp.fixed_point_cases; ++c) {
            int k = 2 + static_cast<int>(rng.below(5));  // K in {2..6}
            std::vector<double> eta(static_cast<std::size_t>(k));
            double sum = 0.0;
            for (auto& e : eta) {
                e = 0.05 + rng.uniform();
                sum += e;
            }
            for (auto& e : eta) e /= sum;
            etas.push_back(std::move(eta));
        }
    }
    LossSpec gra{LossKind::BSCE_GRA, cfg.train.loss.gamma, cfg.train.loss.beta, false};
    std::vector<LossSpec> losses = {{LossKind::CE}, gra};
    json cases = json::array();
    std::ofstream csv;
    if (cfg.write_csv)
        csv = open_csv(cfg, "fixed_point.csv", "case,loss,K,linf_error,stationarity_norm");
    int case_id = 0;
    for (const auto& eta_raw : etas) {
        ProbVector eta{eta_raw};
        for (const auto& loss : losses) {
            auto q = simplex_fixed_point(eta, loss, cfg.exp.fixed_point_lr,
                                         cfg.exp.fixed_point_steps);
            double err = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i)
                err = std::max(err, std::abs(q[i] - eta[i]));
            auto grad = expected_grad_at(eta, eta, loss);
            double gnorm = 0.0;
            for (double g : grad) gnorm += g * g;
            gnorm = std::sqrt(gnorm);
            std::string name = loss_config_name(loss);
            cases.push_back(json{{"case", case_id},
                                 {"loss", name},
                                 {"eta", eta_raw},
                                 {"q", q.probs},
                                 {"linf_error", err},
                                 {"stationarity_norm_at_eta", gnorm}});
            if (cfg.write_csv)
                csv << case_id << ',' << name << ',' << eta_raw.size() << ',' << err << ','
                    << gnorm << '\n';
        }
        ++case_id;
    }
    write_json_report(cfg, json{{"cases", cases}}, started);
}

void run_weight_ablation(const RunConfig& cfg, std::chrono::steady_clock::time_point started) {
    auto losses = cfg.exp.losses;
    if (losses.empty())
        losses = {{"flsd53", parse_loss_name("flsd53")},
                  {"flsd53_gra", parse_loss_name("flsd53_gra")},
                  {"dual_focal", parse_loss_name("dual_focal")},
                  {"dual_focal_gra", parse_loss_name("dual_focal_gra")},
                  {"bsce", parse_loss_name("bsce")},
                  {"bsce_gra", parse_loss_name("bsce_gra")}};
    // ECE columns in the table carry percentages; the JSON keeps raw values.
    std::ofstream csv;
    if (cfg.write_csv)
        csv = open_csv(cfg, "weight_ablation.csv",
                       "loss,seed,accuracy,temperature,pre_ece_pct,post_ece_pct,"
                       "pre_ada_ece_pct,post_ada_ece_pct");
    auto seeds = cfg.effective_seeds();
    json rows = json::array();
    for (const auto& nl : losses) {
        json per_seed = json::array();
        double acc = 0, pre_e = 0, post_e = 0, pre_a = 0, post_a = 0, temp = 0;
        for (auto seed : seeds) {
            auto bundle = build_data(cfg.data, seed);
            auto run = train_and_evaluate(cfg, nl.spec, seed, bundle);
            per_seed.push_back(json{{"seed", seed},
                                    {"accuracy", run.pre.accuracy},
                                    {"temperature", run.fit.temperature},
                                    {"pre_ece", run.pre.ece},
                                    {"post_ece", run.post.ece},
                                    {"pre_ada_ece", run.pre.ada_ece},
                                    {"post_ada_ece", run.post.ada_ece}});
            if (cfg.write_csv)
                csv << nl.name << ',' << seed << ',' << run.pre.accuracy << ','
                    << run.fit.temperature << ',' << 100.0 * run.pre.ece << ','
                    << 100.0 * run.post.ece << ',' << 100.0 * run.pre.ada_ece << ','
                    << 100.0 * run.post.ada_ece << '\n';
            acc += run.pre.accuracy;
            pre_e += run.pre.ece;
            post_e += run.post.ece;
            pre_a += run.pre.ada_ece;
            post_a += run.post.ada_ece;
            temp += run.fit.temperature;
        }
        double n = static_cast<double>(seeds.size());
        if (cfg.write_csv)
            csv << nl.name << ",mean," << acc / n << ',' << temp / n << ','
                << 100.0 * pre_e / n << ',' << 100.0 * post_e / n << ','
                << 100.0 * pre_a / n << ',' << 100.0 * post_a / n << '\n';
        rows.push_back(json{{"loss", nl.name},
                            {"seeds", per_seed},
                            {"mean", json{{"accuracy", acc / n},
                                          {"temperature", temp / n},
                                          {"pre_ece", pre_e / n},
                                          {"post_ece", post_e / n},
                                          {"pre_ada_ece", pre_a / n},
                                          {"post_ada_ece", post_a / n}}}});
    }
    write_json_report(cfg, json{{"losses", rows}}, started);
}

}  // namespace

DataBundle build_data(const DataConfig& data, std::uint64_t seed) {
    DataBundle bundle;
    if (data.source == DataSource::Synthetic) {
        RngStream rng(seed);
        bundle.synthetic = true;
        bundle.spec = random_mixture_spec(data.classes, rng);
        bundle.train = sample_mixture(bundle.spec, data.train_per_class, rng);
        bundle.test = sample_mixture(bundle.spec, data.test_per_class, rng);
        if (data.val_per_class > 0)
            bundle.val = sample_mixture(bundle.spec, data.val_per_class, rng);
        return bundle;
    }
    LabeledBatch all;
    LabeledBatch test;
    bool have_test = false;
    if (data.source == DataSource::Csv) {
        all = load_csv(data.csv_path);
        if (!data.csv_test_path.empty()) {
            test = load_csv(data.csv_test_path);
            have_test = true;
        }
    } else {
        all = load_idx(data.idx_images, data.idx_labels);
        if (!data.idx_test_images.empty()) {
            test = load_idx(data.idx_test_images, data.idx_test_labels);
            have_test = true;
        }
    }
    if (data.val_fraction > 0.0) {
        auto split = split_rows(all, data.val_fraction, RngStream(seed).split(0xDA7A));
        bundle.train = std::move(split.kept);
        bundle.val = std::move(split.held_out);
    } else {
        bundle.train = std::move(all);
    }
    bundle.test = have_test ? std::move(test)
                            : (bundle.val.size() > 0 ? bundle.val : bundle.train);
    return bundle;
}

void run_experiment(const RunConfig& config) {
    auto started = std::chrono::steady_clock::now();
    fs::create_directories(config.out_dir);
    DirLock lock(config.out_dir);
    if (config.experiment == "train-eval")
        run_train_eval(config, started);
    else if (config.experiment == "toy-correlation")
        run_toy_correlation(config, started);
    else if (config.experiment == "grad-factor")
        run_grad_factor(config, started);
    else if (config.experiment == "grad-vs-brier")
        run_grad_vs_brier(config, started);
    else if (config.experiment == "ece-over-epochs")
        run_ece_over_epochs(config, started);
    else if (config.experiment == "fixed-point")
        run_fixed_point(config, started);
    else if (config.experiment == "weight-ablation")
        run_weight_ablation(config, started);
    else {
        std::string kinds;
        for (const auto& k : kExperimentKinds) kinds += (kinds.empty() ? "" : ", ") + k;
        throw config_error("unknown experiment kind '" + config.experiment +
                           "'; kinds: " + kinds);
    }
}

}  // namespace calib
