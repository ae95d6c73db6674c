#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmimh/tensor.hpp"

namespace cmimh {

// N binary codes bit-packed into 64-bit words; bit b of code j lives at
// word b/64, bit b%64. Padding bits of the last word are zero.
struct PackedCodes {
    std::size_t n = 0;
    std::size_t bits = 0;
    std::vector<std::uint64_t> words;  // n * words_per_code

    std::size_t words_per_code() const { return (bits + 63) / 64; }
    const std::uint64_t* code(std::size_t j) const { return &words[j * words_per_code()]; }

    bool get_bit(std::size_t j, std::size_t b) const {
        return (code(j)[b / 64] >> (b % 64)) & 1ULL;
    }
    void set_bit(std::size_t j, std::size_t b) {
        words[j * words_per_code() + b / 64] |= 1ULL << (b % 64);
    }
};

struct RankedHit {
    std::size_t index;
    unsigned distance;
};

struct PrCurvePoint {
    unsigned radius;
    double precision;
    double recall;
};

struct RetrievalResult {
    double map_at_k = 0.0;
    std::vector<double> per_query_ap;
    std::vector<std::pair<std::size_t, double>> prec_at_k;  // (K, mean precision)
    std::vector<PrCurvePoint> pr_curve;
};

// bit = 1 iff mu >= 0.5 (ties up, matching the z >= 0 sign rule).
PackedCodes binarize(const Tensor& mu_batch);
PackedCodes pack_bits(const Tensor& bits);
Tensor unpack(const PackedCodes& codes);

unsigned hamming_distance(const PackedCodes& a, std::size_t ja, const PackedCodes& b,
                          std::size_t jb);

// Top-k by Hamming distance; ties broken by ascending database index.
std::vector<RankedHit> hamming_rank(const PackedCodes& queries, std::size_t query_row,
                                    const PackedCodes& database, std::size_t k);

// AP@k with normalizer min(R, k); R is the total number of relevant
// database items for the query. R == 0 is a contract violation.
double average_precision_at_k(const std::vector<int>& ranked_relevance, std::size_t k,
                              std::size_t total_relevant);

bool share_label(const Tensor& a_labels, std::size_t ra, const Tensor& b_labels,
                 std::size_t rb);

RetrievalResult evaluate(const PackedCodes& query_codes, const PackedCodes& db_codes,
                         const Tensor& query_labels, const Tensor& db_labels, std::size_t k,
                         const std::vector<std::size_t>& prec_grid = {1, 10, 50, 100, 500,
                                                                      1000});

struct CodeStats {
    double corr_mse = 0.0;              // ||(1/N) Hhat^T Hhat - I||_F^2, Hhat = 2H-1
    std::vector<double> per_bit_mean;   // of the packed bits
    std::vector<double> mu_histogram;   // 20 equal bins over [0,1]
    double extreme_fraction = 0.0;      // mu in [0, 0.01] or [0.99, 1]
};

CodeStats code_stats(const PackedCodes& codes);
CodeStats code_stats(const PackedCodes& codes, const Tensor& mu);

// Codes container: magic "CMHB", u32 version, u32 N, u32 L, then packed
// words little-endian.
void write_codes_file(const std::string& path, const PackedCodes& codes);
PackedCodes read_codes_file(const std::string& path);

}  // namespace cmimh
