#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmimh/rng.hpp"
#include "cmimh/tensor.hpp"

namespace cmimh {

enum class SplitTag : std::uint8_t { train, database, query };

// Aligned feature matrices for the two modalities plus optional multi-hot
// labels and per-row split tags. Train rows are a subset of database rows.
struct PairedDataset {
    Tensor x_i;  // N x D_i
    Tensor x_t;  // N x D_t
    std::optional<Tensor> labels;  // N x C, entries in {0,1}
    std::vector<bool> is_query, is_database, is_train;

    std::size_t n() const { return x_i.rows; }
    std::vector<std::size_t> rows_with(SplitTag tag) const;
};

struct SyntheticSpec {
    std::size_t n = 2000;
    std::size_t classes = 10;
    std::size_t d_i = 64, d_t = 48;
    std::size_t shared_dim = 8;
    std::size_t private_dim_i = 4, private_dim_t = 4;
    double noise_i = 0.3, noise_t = 0.3;
    std::uint64_t seed = 1;
};

// Binary feature container: magic "CMHX", u32 version, u32 N, u32 D,
// then N*D little-endian float32, row-major. CSV accepted as a fallback
// (extension .csv). Features are promoted to float64 on load.
Tensor read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const Tensor& t);

// Labels: CSV of N rows x C cols of 0/1.
Tensor read_label_file(const std::string& path);
void write_label_file(const std::string& path, const Tensor& labels);

// Split sidecar: one line per row, comma-joined tags from
// {query, database, train}.
std::vector<std::string> read_lines(const std::string& path);
void write_split_file(const std::string& path, const PairedDataset& ds);
void apply_split_file(PairedDataset& ds, const std::string& path);

PairedDataset load_dataset(const std::string& features_i, const std::string& features_t,
                           const std::optional<std::string>& labels = std::nullopt,
                           const std::optional<std::string>& split = std::nullopt);

// Class-conditional shared latent + modality-private latents through fixed
// random linear maps, plus Gaussian noise; labels are one-hot class ids.
PairedDataset generate_synthetic(const SyntheticSpec& spec);

// Tags rows: n_query disjoint query rows, everything else database,
// n_train train rows sampled from the database.
void split(PairedDataset& ds, std::size_t n_query, std::size_t n_train, std::uint64_t seed);

}  // namespace cmimh
