#include "diffpurify/dataset.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "diffpurify/tensor_io.hpp"

namespace diffpurify {

LabeledDataset make_blobs2d(const BlobsSpec& spec, std::size_t count, std::uint64_t seed) {
    LabeledDataset out;
    out.num_classes = 2;
    RngStream rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        int label = static_cast<int>(rng.uniform_index(2));
        double sx = label == 0 ? -1.0 : 1.0;
        out.samples.push_back({sx * spec.center_x + spec.noise * rng.gaussian(),
                               sx * spec.center_y + spec.noise * rng.gaussian()});
        out.labels.push_back(label);
    }
    return out;
}

std::vector<GmmComponent> blobs2d_components(const BlobsSpec& spec) {
    double v = spec.noise * spec.noise;
    return {
        {0.5, {-spec.center_x, -spec.center_y}, {v, v}},
        {0.5, {spec.center_x, spec.center_y}, {v, v}},
    };
}

std::vector<State> bars_prototypes(const BarsSpec& spec) {
    auto bar_rows = [&](int r0) {
        State p(kBarsDim, -spec.amplitude);
        for (int r = r0; r < r0 + 2; ++r)
            for (int c = 0; c < kBarsSide; ++c) p[static_cast<std::size_t>(r) * kBarsSide + c] = spec.amplitude;
        return p;
    };
    auto bar_cols = [&](int c0) {
        State p(kBarsDim, -spec.amplitude);
        for (int r = 0; r < kBarsSide; ++r)
            for (int c = c0; c < c0 + 2; ++c) p[static_cast<std::size_t>(r) * kBarsSide + c] = spec.amplitude;
        return p;
    };
    return {bar_rows(1), bar_rows(5), bar_cols(1), bar_cols(5)};
}

std::vector<int> bars_prototype_labels() { return {0, 0, 1, 1}; }

LabeledDataset make_bars8x8(const BarsSpec& spec, std::size_t count, std::uint64_t seed) {
    auto protos = bars_prototypes(spec);
    auto labels = bars_prototype_labels();
    LabeledDataset out;
    out.num_classes = 2;
    RngStream rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t k = rng.uniform_index(protos.size());
        State x = protos[k];
        for (auto& v : x) v += spec.noise * rng.gaussian();
        out.samples.push_back(std::move(x));
        out.labels.push_back(labels[k]);
    }
    return out;
}

std::vector<GmmComponent> bars_components(const BarsSpec& spec) {
    auto protos = bars_prototypes(spec);
    std::vector<GmmComponent> comps;
    double w = 1.0 / static_cast<double>(protos.size());
    double v = spec.noise * spec.noise;
    for (auto& p : protos) comps.push_back({w, std::move(p), State(kBarsDim, v)});
    return comps;
}

namespace {
std::uint32_t read_u32_be(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("idx: truncated header");
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}
}  // namespace

std::vector<State> load_idx_images(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("idx: cannot open " + path);
    if (read_u32_be(is) != 0x00000803u) throw std::runtime_error("idx: bad image magic");
    std::uint32_t count = read_u32_be(is), rows = read_u32_be(is), cols = read_u32_be(is);
    std::vector<State> out;
    out.reserve(count);
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < count; ++i) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!is) throw std::runtime_error("idx: truncated image data");
        State x(buf.size());
        for (std::size_t j = 0; j < buf.size(); ++j) x[j] = buf[j] / 255.0;
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("idx: cannot open " + path);
    if (read_u32_be(is) != 0x00000801u) throw std::runtime_error("idx: bad label magic");
    std::uint32_t count = read_u32_be(is);
    std::vector<unsigned char> buf(count);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("idx: truncated label data");
    return std::vector<int>(buf.begin(), buf.end());
}

void save_dataset(const std::string& path, const std::vector<State>& samples) {
    if (samples.empty()) throw std::invalid_argument("save_dataset: empty dataset");
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(samples.size()),
              static_cast<std::uint32_t>(samples[0].size())};
    for (const auto& s : samples) t.data.insert(t.data.end(), s.begin(), s.end());
    save_tensor(path, t);
}

std::vector<State> load_dataset(const std::string& path) {
    Tensor t = load_tensor(path);
    if (t.dims.size() != 2) throw std::runtime_error("load_dataset: expected rank-2 tensor");
    std::vector<State> out(t.dims[0], State(t.dims[1]));
    std::size_t k = 0;
    for (auto& s : out)
        for (auto& v : s) v = t.data[k++];
    return out;
}

}  // namespace diffpurify
