#include "diffpurify/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace diffpurify {

namespace {

constexpr char kTensorMagic[8] = {'M', 'P', 'T', 'E', 'N', 'S', '0', '1'};
constexpr char kBundleMagic[8] = {'M', 'P', 'M', 'O', 'D', 'L', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("tensor read: truncated stream");
    return v;
}

}  // namespace

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

void write_tensor(std::ostream& os, const Tensor& t) {
    if (t.data.size() != t.element_count())
        throw std::invalid_argument("write_tensor: dims do not match payload");
    os.write(kTensorMagic, sizeof(kTensorMagic));
    write_u32(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) write_u32(os, d);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write_tensor: stream failure");
}

Tensor read_tensor(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0)
        throw std::runtime_error("read_tensor: bad magic");
    Tensor t;
    std::uint32_t rank = read_u32(is);
    t.dims.resize(rank);
    for (auto& d : t.dims) d = read_u32(is);
    t.data.resize(t.element_count());
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("read_tensor: truncated payload");
    return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_tensor: cannot open " + path);
    write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_tensor: cannot open " + path);
    return read_tensor(is);
}

const Tensor& TensorBundle::get(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return t;
    throw std::out_of_range("bundle: no tensor named " + name);
}

void TensorBundle::add(const std::string& name, Tensor t) {
    entries.emplace_back(name, std::move(t));
}

void save_bundle(const std::string& path, const TensorBundle& bundle) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_bundle: cannot open " + path);
    os.write(kBundleMagic, sizeof(kBundleMagic));
    write_u32(os, static_cast<std::uint32_t>(bundle.entries.size()));
    for (const auto& [name, t] : bundle.entries) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_tensor(os, t);
    }
    if (!os) throw std::runtime_error("save_bundle: stream failure");
}

TensorBundle load_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_bundle: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kBundleMagic, sizeof(magic)) != 0)
        throw std::runtime_error("load_bundle: bad magic");
    TensorBundle out;
    std::uint32_t count = read_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t len = read_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw std::runtime_error("load_bundle: truncated name");
        out.add(name, read_tensor(is));
    }
    return out;
}

}  // namespace diffpurify
