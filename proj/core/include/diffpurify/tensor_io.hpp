#ifndef DIFFPURIFY_TENSOR_IO_HPP
#define DIFFPURIFY_TENSOR_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace diffpurify {

// Portable tensor format: 8-byte magic "MPTENS01", u32 rank, rank u32 dims,
// then the payload as little-endian f64, row-major.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<double> data;

    std::size_t element_count() const;
};

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// A named collection of tensors with a versioned header ("MPMODL01"),
// used for model checkpoints and other multi-tensor files.
struct TensorBundle {
    std::vector<std::pair<std::string, Tensor>> entries;

    const Tensor& get(const std::string& name) const;
    void add(const std::string& name, Tensor t);
};

void save_bundle(const std::string& path, const TensorBundle& bundle);
TensorBundle load_bundle(const std::string& path);

}  // namespace diffpurify

#endif
