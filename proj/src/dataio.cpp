#include "calib/dataio.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "calib/errors.hpp"

namespace calib {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col,
                  const std::string& origin) {
    try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (...) {
        throw data_error(origin + ": row " + std::to_string(row) + ", column " +
                         std::to_string(col) + ": non-numeric cell '" + cell + "'");
    }
}

std::uint32_t read_be_u32(std::istream& in, std::size_t offset, const std::string& origin) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw data_error(origin + ": truncated at byte offset " + std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

LabeledBatch load_csv_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw data_error(origin + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_row(line);
    if (header.empty() || header.back() != "label")
        throw data_error(origin + ": header must end with a 'label' column");
    std::size_t num_features = header.size() - 1;
    if (num_features == 0) throw data_error(origin + ": no feature columns");

    std::vector<double> features;
    std::vector<int> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_row(line);
        if (cells.size() != header.size())
            throw data_error(origin + ": row " + std::to_string(row) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        for (std::size_t c = 0; c < num_features; ++c)
            features.push_back(parse_cell(cells[c], row, c, origin));
        double lab = parse_cell(cells.back(), row, cells.size() - 1, origin);
        if (lab < 0.0 || lab != std::floor(lab))
            throw data_error(origin + ": row " + std::to_string(row) +
                             ": label must be a non-negative integer");
        labels.push_back(static_cast<int>(lab));
    }
    if (labels.empty()) throw data_error(origin + ": no data rows");

    LabeledBatch batch;
    batch.features = Matrix(labels.size(), num_features);
    batch.features.data = std::move(features);
    batch.labels = std::move(labels);
    return batch;
}

LabeledBatch load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open csv file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_csv_text(ss.str(), path);
}

LabeledBatch load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw data_error("cannot open idx file: " + images_path);
    std::uint32_t magic = read_be_u32(img, 0, images_path);
    if (magic != 0x00000803u)
        throw data_error(images_path + ": bad magic at byte offset 0 (want 0x00000803)");
    std::uint32_t n = read_be_u32(img, 4, images_path);
    std::uint32_t rows = read_be_u32(img, 8, images_path);
    std::uint32_t cols = read_be_u32(img, 12, images_path);
    std::size_t pixels = static_cast<std::size_t>(n) * rows * cols;
    std::vector<unsigned char> buf(pixels);
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
        std::size_t got = static_cast<std::size_t>(img.gcount());
        throw data_error(images_path + ": truncated at byte offset " + std::to_string(16 + got));
    }

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw data_error("cannot open idx file: " + labels_path);
    std::uint32_t lmagic = read_be_u32(lab, 0, labels_path);
    if (lmagic != 0x00000801u)
        throw data_error(labels_path + ": bad magic at byte offset 0 (want 0x00000801)");
    std::uint32_t ln = read_be_u32(lab, 4, labels_path);
    if (ln != n)
        throw data_error("idx count mismatch: " + std::to_string(n) + " images vs " +
                         std::to_string(ln) + " labels");
    std::vector<unsigned char> lbuf(ln);
    if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(ln))) {
        std::size_t got = static_cast<std::size_t>(lab.gcount());
        throw data_error(labels_path + ": truncated at byte offset " + std::to_string(8 + got));
    }

    LabeledBatch batch;
    batch.features = Matrix(n, static_cast<std::size_t>(rows) * cols);
    for (std::size_t i = 0; i < pixels; ++i)
        batch.features.data[i] = static_cast<double>(buf[i]) / 255.0;
    batch.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) batch.labels[i] = static_cast<int>(lbuf[i]);
    return batch;
}

void save_csv(const LabeledBatch& batch, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write csv file: " + path);
    for (std::size_t c = 0; c < batch.features.cols; ++c) out << 'f' << c << ',';
    out << "label\n";
    out.precision(17);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t c = 0; c < batch.features.cols; ++c) out << batch.features(i, c) << ',';
        out << batch.labels[i] << '\n';
    }
}

}  // namespace calib
