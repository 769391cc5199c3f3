#include <doctest.h>

#include <stdexcept>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "calib/checkpoint.hpp"
#include "calib/config.hpp"
#include "calib/dataio.hpp"
#include "calib/errors.hpp"
#include "calib/experiments.hpp"

using namespace calib;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("calibkit_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

void put_be32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>((v >> 24) & 0xFF));
    s.push_back(static_cast<char>((v >> 16) & 0xFF));
    s.push_back(static_cast<char>((v >> 8) & 0xFF));
    s.push_back(static_cast<char>(v & 0xFF));
}

}  // namespace

TEST_CASE("config parsing fills defaults and validates") {
    auto cfg = parse_config_text(
        "[run]\n"
        "experiment = train-eval\n"
        "seed = 42\n"
        "[loss]\n"
        "kind = ce\n"
        "[data]\n"
        "source = synthetic\n",
        "test");
    CHECK(cfg.seed == 42);
    CHECK(cfg.train.loss.kind == LossKind::CE);
    CHECK(cfg.train.batch_size == 128);
    CHECK(cfg.train.momentum == 0.9);
    CHECK(cfg.train.weight_decay == 5e-4);
    CHECK(cfg.train.num_bins == 15);
    CHECK(cfg.data.classes == 5);
    CHECK(cfg.data.train_per_class == 10000);
    CHECK(cfg.train.hidden_dims == std::vector<int>{64, 64});

    CHECK_THROWS_WITH_AS(parse_config_text("[loss]\ngamma = -1\n", "t"),
                         doctest::Contains("gamma must be >= 0"), config_error);
    CHECK_THROWS_WITH_AS(parse_config_text("[loss]\nkind = mmce\n", "t"),
                         doctest::Contains("supported"), config_error);
    CHECK_THROWS_WITH_AS(parse_config_text("[run]\nbogus_key = 1\n", "t"),
                         doctest::Contains("unknown key"), config_error);
    CHECK_THROWS_WITH_AS(parse_config_text("[nosuch]\nx = 1\n", "t"),
                         doctest::Contains("unknown section"), config_error);
    CHECK_THROWS_WITH_AS(parse_config_text("[run]\nseed == 3\n", "t"),
                         doctest::Contains("not an integer"), config_error);
}

TEST_CASE("config line numbers appear in errors") {
    try {
        parse_config_text("[run]\nseed = 1\n[loss]\ngamma = oops\n", "cfg");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("cfg:4") != std::string::npos);
    }
}

TEST_CASE("loss names parse including gra suffixes") {
    CHECK(parse_loss_name("ce").kind == LossKind::CE);
    CHECK(parse_loss_name("bsce_gra").kind == LossKind::BSCE_GRA);
    auto flsd_gra = parse_loss_name("flsd53_gra");
    CHECK(flsd_gra.kind == LossKind::FocalFLSD53);
    CHECK(flsd_gra.gra);
    auto dfl_gra = parse_loss_name("dual_focal_gra");
    CHECK(dfl_gra.kind == LossKind::DualFocal);
    CHECK(dfl_gra.gra);
    CHECK_THROWS_AS(parse_loss_name("mmce"), config_error);
}

TEST_CASE("lr schedule parsing") {
    auto cfg = parse_config_text("[train]\nlr_schedule = 0.1:150,0.01:250,0.001\n", "t");
    REQUIRE(cfg.train.lr_schedule.size() == 3);
    CHECK(lr_at_epoch(cfg.train.lr_schedule, 0) == 0.1);
    CHECK(lr_at_epoch(cfg.train.lr_schedule, 150) == 0.01);
    CHECK(lr_at_epoch(cfg.train.lr_schedule, 349) == 0.001);
    CHECK_THROWS_AS(parse_config_text("[train]\nlr = 0.1\nlr_schedule = 0.01\n", "t"),
                    config_error);
}

TEST_CASE("csv loading") {
    auto batch = load_csv_text("f0,f1,label\n1.5,2.5,0\n-1,0.25,1\n3,4,2\n", "t.csv");
    CHECK(batch.size() == 3);
    CHECK(batch.features(0, 0) == 1.5);
    CHECK(batch.features(2, 1) == 4.0);
    CHECK(batch.labels == std::vector<int>{0, 1, 2});

    CHECK_THROWS_WITH_AS(load_csv_text("f0,f1,label\n1,2\n", "t.csv"),
                         doctest::Contains("row 1"), data_error);
    CHECK_THROWS_WITH_AS(load_csv_text("f0,f1,label\n1,2,0\n3,oops,1\n", "t.csv"),
                         doctest::Contains("row 2"), data_error);
    CHECK_THROWS_WITH_AS(load_csv_text("f0,f1,label\n", "t.csv"),
                         doctest::Contains("no data rows"), data_error);
    CHECK_THROWS_AS(load_csv_text("f0,f1\n1,2\n", "t.csv"), data_error);
    CHECK_THROWS_AS(load_csv_text("f0,f1,label\n1,2,0.5\n", "t.csv"), data_error);
}

TEST_CASE("csv round trip") {
    auto dir = temp_dir("csv");
    LabeledBatch batch;
    batch.features = Matrix(2, 3);
    batch.features.data = {0.25, -1.0, 3.5, 0.0, 1e-3, 2.0};
    batch.labels = {1, 0};
    auto path = (dir / "x.csv").string();
    save_csv(batch, path);
    auto loaded = load_csv(path);
    CHECK(loaded.features.data == batch.features.data);
    CHECK(loaded.labels == batch.labels);
}

TEST_CASE("idx loading") {
    auto dir = temp_dir("idx");
    // two 3x3 images
    std::string img;
    put_be32(img, 0x00000803);
    put_be32(img, 2);
    put_be32(img, 3);
    put_be32(img, 3);
    for (int i = 0; i < 18; ++i) img.push_back(static_cast<char>(i * 14));
    std::string lab;
    put_be32(lab, 0x00000801);
    put_be32(lab, 2);
    lab.push_back(3);
    lab.push_back(0);
    write_file(dir / "img.idx", img);
    write_file(dir / "lab.idx", lab);

    auto batch = load_idx((dir / "img.idx").string(), (dir / "lab.idx").string());
    CHECK(batch.size() == 2);
    CHECK(batch.features.cols == 9);
    for (double v : batch.features.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(batch.features(0, 1) == doctest::Approx(14.0 / 255.0));
    CHECK(batch.labels == std::vector<int>{3, 0});

    std::string bad = img;
    bad[3] = 0x05;
    write_file(dir / "bad.idx", bad);
    CHECK_THROWS_WITH_AS(load_idx((dir / "bad.idx").string(), (dir / "lab.idx").string()),
                         doctest::Contains("offset 0"), data_error);

    std::string lab3 = lab;
    lab3[7] = 3;  // count 3 vs 2 images
    write_file(dir / "lab3.idx", lab3);
    CHECK_THROWS_WITH_AS(load_idx((dir / "img.idx").string(), (dir / "lab3.idx").string()),
                         doctest::Contains("mismatch"), data_error);

    write_file(dir / "trunc.idx", img.substr(0, 20));
    CHECK_THROWS_AS(load_idx((dir / "trunc.idx").string(), (dir / "lab.idx").string()),
                    data_error);
}

TEST_CASE("checkpoint round trip is bit exact") {
    auto dir = temp_dir("ckpt");
    LabeledBatch data;
    data.features = Matrix(20, 2);
    RngStream rng(31);
    for (auto& v : data.features.data) v = rng.normal();
    data.labels.assign(20, 0);
    for (std::size_t i = 10; i < 20; ++i) data.labels[i] = 1;

    TrainConfig cfg;
    cfg.loss = {LossKind::CE};
    cfg.epochs = 2;
    cfg.hidden_dims = {4};
    cfg.seed = 17;
    TrainState state = fresh_train_state(cfg, data, data);
    TrainHistory hist;
    train_epochs(state, cfg, data, data, 2, hist);

    auto path = (dir / "m.ckpt").string();
    save_checkpoint(state, path);
    auto loaded = load_checkpoint(path);
    CHECK(loaded.epochs_done == state.epochs_done);
    CHECK(loaded.model.input_dim == state.model.input_dim);
    CHECK(loaded.model.num_classes == state.model.num_classes);
    for (std::size_t l = 0; l < state.model.layers.size(); ++l) {
        CHECK(loaded.model.layers[l].weights.data == state.model.layers[l].weights.data);
        CHECK(loaded.model.layers[l].bias == state.model.layers[l].bias);
        CHECK(loaded.velocity.layers[l].weights.data ==
              state.velocity.layers[l].weights.data);
    }
    CHECK(loaded.rng.state_string() == state.rng.state_string());
}

TEST_CASE("corrupted checkpoints are refused") {
    auto dir = temp_dir("ckpt_bad");
    LabeledBatch data;
    data.features = Matrix(4, 2);
    data.features.data = {0.0, 1.0, 1.0, 0.0, -1.0, 0.5, 0.5, -1.0};
    data.labels = {0, 1, 0, 1};
    TrainConfig cfg;
    cfg.loss = {LossKind::CE};
    cfg.epochs = 1;
    cfg.hidden_dims = {3};
    cfg.seed = 5;
    TrainState state = fresh_train_state(cfg, data, data);
    auto path = (dir / "m.ckpt").string();
    save_checkpoint(state, path);

    std::ifstream in(path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    // flip one payload byte: CRC must catch it
    std::string corrupt = buf;
    corrupt[30] = static_cast<char>(corrupt[30] ^ 0x40);
    write_file(dir / "corrupt.ckpt", corrupt);
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "corrupt.ckpt").string()),
                         doctest::Contains("CRC"), data_error);

    // truncation
    write_file(dir / "short.ckpt", buf.substr(0, buf.size() / 2));
    CHECK_THROWS_AS(load_checkpoint((dir / "short.ckpt").string()), data_error);

    // wrong magic
    std::string magic = buf;
    magic[0] = 'X';
    write_file(dir / "magic.ckpt", magic);
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "magic.ckpt").string()),
                         doctest::Contains("magic"), data_error);
}

TEST_CASE("resumed training reproduces an uninterrupted run bit for bit") {
    RngStream rng(37);
    LabeledBatch data;
    data.features = Matrix(60, 2);
    data.labels.resize(60);
    for (std::size_t i = 0; i < 60; ++i) {
        int label = i < 30 ? 0 : 1;
        data.features(i, 0) = (label == 0 ? -2.0 : 2.0) + rng.normal();
        data.features(i, 1) = rng.normal();
        data.labels[i] = label;
    }
    TrainConfig cfg;
    cfg.loss = {LossKind::BSCE_GRA, 4.0, 2.0};
    cfg.epochs = 5;
    cfg.hidden_dims = {6};
    cfg.seed = 23;

    auto [full_model, full_hist] = train(cfg, data, data);

    auto dir = temp_dir("resume");
    TrainState state = fresh_train_state(cfg, data, data);
    TrainHistory h1;
    train_epochs(state, cfg, data, data, 3, h1);
    save_checkpoint(state, (dir / "e3.ckpt").string());

    auto resumed = load_checkpoint((dir / "e3.ckpt").string());
    TrainHistory h2;
    train_epochs(resumed, cfg, data, data, 5, h2);

    for (std::size_t l = 0; l < full_model.layers.size(); ++l) {
        CHECK(resumed.model.layers[l].weights.data == full_model.layers[l].weights.data);
        CHECK(resumed.model.layers[l].bias == full_model.layers[l].bias);
    }
}

TEST_CASE("build_data synthesizes deterministic splits") {
    DataConfig dc;
    dc.source = DataSource::Synthetic;
    dc.classes = 3;
    dc.train_per_class = 20;
    dc.test_per_class = 10;
    dc.val_per_class = 5;
    auto a = build_data(dc, 77);
    auto b = build_data(dc, 77);
    CHECK(a.train.features.data == b.train.features.data);
    CHECK(a.val.size() == 15);
    CHECK(a.test.size() == 30);
    CHECK(a.train.size() == 60);
    auto c = build_data(dc, 78);
    CHECK(a.train.features.data != c.train.features.data);
}

TEST_CASE("experiment smoke: grad-factor emits parseable csv and report") {
    auto dir = temp_dir("exp_gf");
    RunConfig cfg;
    cfg.experiment = "grad-factor";
    cfg.out_dir = (dir / "out").string();
    cfg.exp.gammas = {1.0, 3.0};
    cfg.exp.grid_points = 999;
    run_experiment(cfg);
    CHECK(fs::exists(fs::path(cfg.out_dir) / "report.json"));
    CHECK(fs::exists(fs::path(cfg.out_dir) / "grad_factor.csv"));
    CHECK_FALSE(fs::exists(fs::path(cfg.out_dir) / ".lock"));

    // emitted csv parses under the dataset csv rules once columns are renamed,
    // i.e. it is rectangular and numeric
    std::ifstream in(fs::path(cfg.out_dir) / "grad_factor.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "p,gamma,g");
    std::string line;
    int rows = 0;
    double best_p = 0.0, best_g = -1.0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 2);
        auto c1 = line.find(',');
        auto c2 = line.rfind(',');
        double p = std::stod(line.substr(0, c1));
        double gamma = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        double g = std::stod(line.substr(c2 + 1));
        if (gamma == 1.0 && g > best_g) {
            best_g = g;
            best_p = p;
        }
    }
    CHECK(rows == 2 * 999);
    // gamma = 1 maximum sits at p = exp(-2), within the grid resolution
    CHECK(std::abs(best_p - std::exp(-2.0)) <= 1.0 / 1000 + 1e-12);
}

TEST_CASE("experiment smoke: fixed-point") {
    auto dir = temp_dir("exp_fp");
    RunConfig cfg;
    cfg.experiment = "fixed-point";
    cfg.out_dir = (dir / "out").string();
    cfg.exp.eta = {0.7, 0.2, 0.1};
    cfg.exp.fixed_point_steps = 3000;
    run_experiment(cfg);
    CHECK(fs::exists(fs::path(cfg.out_dir) / "report.json"));
    std::ifstream in(fs::path(cfg.out_dir) / "fixed_point.csv");
    std::string header;
    std::getline(in, header);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        auto last_comma = line.rfind(',');
        auto second_last = line.rfind(',', last_comma - 1);
        double err = std::stod(line.substr(second_last + 1, last_comma - second_last - 1));
        CHECK(err < 1e-4);
    }
    CHECK(rows == 2);  // ce and bsce_gra
}

TEST_CASE("directory lock blocks concurrent runs") {
    auto dir = temp_dir("lock");
    RunConfig cfg;
    cfg.experiment = "grad-factor";
    cfg.out_dir = (dir / "out").string();
    cfg.exp.gammas = {1.0};
    cfg.exp.grid_points = 9;
    fs::create_directories(cfg.out_dir);
    std::ofstream lock(fs::path(cfg.out_dir) / ".lock");
    lock << "held";
    lock.close();
    CHECK_THROWS_AS(run_experiment(cfg), config_error);
    fs::remove(fs::path(cfg.out_dir) / ".lock");
    run_experiment(cfg);  // proceeds once the lock clears
}

TEST_CASE("unknown experiment kind lists the options") {
    RunConfig cfg;
    cfg.experiment = "nope";
    cfg.out_dir = (temp_dir("exp_bad") / "out").string();
    CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("train-eval"), config_error);
}
