#ifndef DIFFPURIFY_DATASET_HPP
#define DIFFPURIFY_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "diffpurify/attack.hpp"
#include "diffpurify/score.hpp"
#include "diffpurify/state.hpp"

namespace diffpurify {

// Two-class 2-D blobs at mirrored centers; the quick attack-module test set.
struct BlobsSpec {
    double center_x = 1.5;
    double center_y = 1.0;
    double noise = 0.3;
};
LabeledDataset make_blobs2d(const BlobsSpec& spec, std::size_t count, std::uint64_t seed);
std::vector<GmmComponent> blobs2d_components(const BlobsSpec& spec);

// Two-class 8x8 bar-orientation images: two horizontal-bar prototypes
// (class 0) and two vertical-bar prototypes (class 1), bars two pixels wide,
// background -amplitude and bar +amplitude, plus isotropic Gaussian noise.
struct BarsSpec {
    double amplitude = 0.25;
    double noise = 0.05;
};
constexpr int kBarsSide = 8;
constexpr int kBarsDim = kBarsSide * kBarsSide;

std::vector<State> bars_prototypes(const BarsSpec& spec);       // 4 prototypes
std::vector<int> bars_prototype_labels();                       // {0, 0, 1, 1}
LabeledDataset make_bars8x8(const BarsSpec& spec, std::size_t count, std::uint64_t seed);
std::vector<GmmComponent> bars_components(const BarsSpec& spec);  // matching mixture

// IDX readers (big-endian; magic 0x00000803 for images, 0x00000801 for
// labels). Pixels are scaled from [0, 255] to [0, 1].
std::vector<State> load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);

void save_dataset(const std::string& path, const std::vector<State>& samples);
std::vector<State> load_dataset(const std::string& path);

}  // namespace diffpurify

#endif
