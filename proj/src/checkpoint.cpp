#include "calib/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "calib/errors.hpp"

namespace calib {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(buf, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const std::string& origin;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw data_error(origin + ": checkpoint truncated at byte " + std::to_string(pos));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= std::uint64_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

void put_layers(std::string& buf, const std::vector<Layer>& layers) {
    for (const auto& layer : layers) {
        for (double w : layer.weights.data) put_f64(buf, w);
        for (double b : layer.bias) put_f64(buf, b);
    }
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
    std::string buf;
    buf += "CKPT";
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(state.model.input_dim));
    put_u32(buf, static_cast<std::uint32_t>(state.model.layers.size()));
    for (const auto& layer : state.model.layers)
        put_u32(buf, static_cast<std::uint32_t>(layer.weights.rows));
    put_u64(buf, static_cast<std::uint64_t>(state.epochs_done));
    put_layers(buf, state.model.layers);
    put_layers(buf, state.velocity.layers);
    std::string rng_state = state.rng.state_string();
    put_u32(buf, static_cast<std::uint32_t>(rng_state.size()));
    buf += rng_state;

    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write checkpoint: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw data_error("short write on checkpoint: " + path);
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 12 || buf.compare(0, 4, "CKPT") != 0)
        throw data_error(path + ": not a checkpoint (bad magic)");
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= std::uint32_t(static_cast<unsigned char>(buf[buf.size() - 4 + i]))
                      << (8 * i);
    std::uint32_t crc = static_cast<std::uint32_t>(crc32(
        0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc) throw data_error(path + ": checkpoint CRC mismatch");

    Reader r{buf, 4, path};
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw data_error(path + ": unsupported checkpoint version " + std::to_string(version));

    int input_dim = static_cast<int>(r.u32());
    std::uint32_t num_layers = r.u32();
    if (num_layers == 0 || num_layers > 64)
        throw data_error(path + ": implausible layer count");
    std::vector<int> out_dims(num_layers);
    for (auto& d : out_dims) d = static_cast<int>(r.u32());

    TrainState state{MlpModel{}, ParamBlock{}, RngStream(0), 0};
    state.epochs_done = static_cast<int>(r.u64());
    state.model.input_dim = input_dim;
    state.model.num_classes = out_dims.back();
    state.model.hidden_dims.assign(out_dims.begin(), out_dims.end() - 1);

    auto read_layers = [&](std::vector<Layer>& layers) {
        int in_dim = input_dim;
        for (std::uint32_t l = 0; l < num_layers; ++l) {
            Layer layer;
            layer.weights = Matrix(static_cast<std::size_t>(out_dims[l]),
                                   static_cast<std::size_t>(in_dim));
            for (auto& w : layer.weights.data) w = r.f64();
            layer.bias.resize(static_cast<std::size_t>(out_dims[l]));
            for (auto& b : layer.bias) b = r.f64();
            layers.push_back(std::move(layer));
            in_dim = out_dims[l];
        }
    };
    read_layers(state.model.layers);
    read_layers(state.velocity.layers);

    std::uint32_t rng_len = r.u32();
    state.rng.restore_state(r.bytes(rng_len));
    if (r.pos != buf.size() - 4)
        throw data_error(path + ": trailing bytes in checkpoint");
    return state;
}

}  // namespace calib
