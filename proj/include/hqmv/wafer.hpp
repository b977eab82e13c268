#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hqmv/rng.hpp"

namespace hqmv::wafer {

constexpr std::size_t kNumClasses = 8;

// Fixed class order; every report emits these names alongside indices.
enum class Defect : std::uint8_t {
    Center = 0,
    Donut,
    EdgeLoc,
    EdgeRing,
    Loc,
    NearFull,
    Scratch,
    Random,
};

extern const std::array<const char*, kNumClasses> kClassNames;
int class_index(const std::string& name);  // -1 if unknown

// Grid values: 0 outside the wafer disk, 1 good die, 2 defect die.
struct WaferSample {
    std::uint16_t H = 0, W = 0;
    std::vector<std::uint8_t> grid;              // H x W
    std::array<std::uint8_t, kNumClasses> label{};  // multi-hot

    std::size_t defect_count() const;
    std::string label_bits() const;
};

struct DatasetConfig {
    std::uint16_t H = 26, W = 26;
    double noise_rate = 0.02;  // symmetric 1<->2 flip probability, max 0.2
    std::uint64_t seed = 42;
    // (class combination, sample count) rows; order defines sample order.
    std::vector<std::pair<std::vector<Defect>, std::size_t>> counts;

    static DatasetConfig default_profile(std::uint64_t seed, std::uint16_t H = 26,
                                         std::uint16_t W = 26);
    std::size_t total_count() const;
};

// In-disk boolean mask (1 = defect) for one topology.
std::vector<std::uint8_t> render_defect(Defect kind, Rng& rng, std::size_t H,
                                        std::size_t W);

WaferSample compose_sample(const std::vector<Defect>& kinds, Rng& rng,
                           const DatasetConfig& cfg);

// Deterministic for (seed, config); per-sample derived RNG streams.
std::vector<WaferSample> generate_dataset(const DatasetConfig& cfg);

// Zip-of-NPY archive: records arr_0 (uint8 maps N x H x W) and arr_1
// (uint8 labels N x 8). Rejects malformed headers with positioned errors.
std::vector<WaferSample> load_archive(const std::string& path);

// Native "WFR1" container, little-endian.
void save_native(const std::string& path, const std::vector<WaferSample>& samples);
std::vector<WaferSample> load_native(const std::string& path);

void export_manifest(const std::string& path, const std::vector<WaferSample>& samples);

}  // namespace hqmv::wafer
