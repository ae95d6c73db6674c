#include "cmimh/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cmimh {

namespace {

PackedCodes pack_with_threshold(const Tensor& m, double threshold) {
    PackedCodes out;
    out.n = m.rows;
    out.bits = m.cols;
    out.words.assign(out.n * out.words_per_code(), 0);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            if (m.at(r, c) >= threshold) out.set_bit(r, c);
    return out;
}

}  // namespace

PackedCodes binarize(const Tensor& mu_batch) { return pack_with_threshold(mu_batch, 0.5); }

PackedCodes pack_bits(const Tensor& bits) { return pack_with_threshold(bits, 0.5); }

Tensor unpack(const PackedCodes& codes) {
    Tensor out(codes.n, codes.bits);
    for (std::size_t r = 0; r < codes.n; ++r)
        for (std::size_t b = 0; b < codes.bits; ++b)
            out.at(r, b) = codes.get_bit(r, b) ? 1.0 : 0.0;
    return out;
}

unsigned hamming_distance(const PackedCodes& a, std::size_t ja, const PackedCodes& b,
                          std::size_t jb) {
    if (a.bits != b.bits) throw std::invalid_argument("hamming_distance: code length mismatch");
    const std::uint64_t* wa = a.code(ja);
    const std::uint64_t* wb = b.code(jb);
    unsigned d = 0;
    for (std::size_t w = 0; w < a.words_per_code(); ++w)
        d += static_cast<unsigned>(std::popcount(wa[w] ^ wb[w]));
    return d;
}

std::vector<RankedHit> hamming_rank(const PackedCodes& queries, std::size_t query_row,
                                    const PackedCodes& database, std::size_t k) {
    if (queries.bits != database.bits)
        throw std::invalid_argument("hamming_rank: code length mismatch");
    std::vector<RankedHit> hits(database.n);
    for (std::size_t j = 0; j < database.n; ++j)
        hits[j] = {j, hamming_distance(queries, query_row, database, j)};
    const std::size_t kk = std::min(k, database.n);
    auto cmp = [](const RankedHit& x, const RankedHit& y) {
        return x.distance != y.distance ? x.distance < y.distance : x.index < y.index;
    };
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(kk), hits.end(),
                      cmp);
    hits.resize(kk);
    return hits;
}

double average_precision_at_k(const std::vector<int>& ranked_relevance, std::size_t k,
                              std::size_t total_relevant) {
    if (k == 0) throw std::invalid_argument("average_precision_at_k: k must be >= 1");
    if (total_relevant == 0)
        throw std::logic_error("average_precision_at_k: no relevant items for query");
    double sum = 0.0;
    std::size_t hits = 0;
    const std::size_t upto = std::min(k, ranked_relevance.size());
    for (std::size_t r = 0; r < upto; ++r) {
        if (ranked_relevance[r]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(std::min(total_relevant, k));
}

bool share_label(const Tensor& a_labels, std::size_t ra, const Tensor& b_labels,
                 std::size_t rb) {
    for (std::size_t c = 0; c < a_labels.cols; ++c)
        if (a_labels.at(ra, c) != 0.0 && b_labels.at(rb, c) != 0.0) return true;
    return false;
}

RetrievalResult evaluate(const PackedCodes& query_codes, const PackedCodes& db_codes,
                         const Tensor& query_labels, const Tensor& db_labels, std::size_t k,
                         const std::vector<std::size_t>& prec_grid) {
    if (query_labels.cols != db_labels.cols)
        throw std::invalid_argument("evaluate: label dimension mismatch");
    if (query_codes.n != query_labels.rows || db_codes.n != db_labels.rows)
        throw std::invalid_argument("evaluate: codes/labels row mismatch");

    RetrievalResult res;
    res.per_query_ap.resize(query_codes.n);

    std::vector<std::size_t> grid;
    for (std::size_t g : prec_grid)
        if (g >= 1 && g <= db_codes.n) grid.push_back(g);
    std::vector<double> prec_sums(grid.size(), 0.0);

    // PR curve micro-averaged over queries at integer radii 0..L.
    const std::size_t radii = db_codes.bits + 1;
    std::vector<double> retrieved_at(radii, 0.0), relevant_at(radii, 0.0);
    double total_relevant_all = 0.0;

    for (std::size_t q = 0; q < query_codes.n; ++q) {
        auto ranked = hamming_rank(query_codes, q, db_codes, db_codes.n);
        std::vector<int> rel(ranked.size());
        std::size_t total_rel = 0;
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            rel[r] = share_label(query_labels, q, db_labels, ranked[r].index) ? 1 : 0;
            total_rel += static_cast<std::size_t>(rel[r]);
        }
        res.per_query_ap[q] = average_precision_at_k(rel, k, total_rel);

        for (std::size_t g = 0; g < grid.size(); ++g) {
            std::size_t hits = 0;
            for (std::size_t r = 0; r < grid[g]; ++r) hits += static_cast<std::size_t>(rel[r]);
            prec_sums[g] += static_cast<double>(hits) / static_cast<double>(grid[g]);
        }

        std::vector<double> ret_cum(radii, 0.0), rel_cum(radii, 0.0);
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            ret_cum[ranked[r].distance] += 1.0;
            rel_cum[ranked[r].distance] += rel[r];
        }
        double rsum = 0.0, csum = 0.0;
        for (std::size_t d = 0; d < radii; ++d) {
            rsum += ret_cum[d];
            csum += rel_cum[d];
            retrieved_at[d] += rsum;
            relevant_at[d] += csum;
        }
        total_relevant_all += static_cast<double>(total_rel);
    }

    double ap_sum = 0.0;
    for (double ap : res.per_query_ap) ap_sum += ap;
    res.map_at_k = ap_sum / static_cast<double>(query_codes.n);

    for (std::size_t g = 0; g < grid.size(); ++g)
        res.prec_at_k.emplace_back(grid[g], prec_sums[g] / static_cast<double>(query_codes.n));

    for (std::size_t d = 0; d < radii; ++d) {
        PrCurvePoint p;
        p.radius = static_cast<unsigned>(d);
        p.precision = retrieved_at[d] > 0.0 ? relevant_at[d] / retrieved_at[d] : 1.0;
        p.recall = total_relevant_all > 0.0 ? relevant_at[d] / total_relevant_all : 0.0;
        res.pr_curve.push_back(p);
    }
    return res;
}

CodeStats code_stats(const PackedCodes& codes) {
    CodeStats s;
    const std::size_t n = codes.n, L = codes.bits;
    s.per_bit_mean.assign(L, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t b = 0; b < L; ++b)
            if (codes.get_bit(j, b)) s.per_bit_mean[b] += 1.0;
    for (double& m : s.per_bit_mean) m /= static_cast<double>(n);

    // (1/N) Hhat^T Hhat with Hhat = 2H - 1.
    std::vector<double> corr(L * L, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t a = 0; a < L; ++a) {
            const double va = codes.get_bit(j, a) ? 1.0 : -1.0;
            for (std::size_t b = 0; b < L; ++b)
                corr[a * L + b] += va * (codes.get_bit(j, b) ? 1.0 : -1.0);
        }
    for (std::size_t a = 0; a < L; ++a)
        for (std::size_t b = 0; b < L; ++b) {
            const double v = corr[a * L + b] / static_cast<double>(n) - (a == b ? 1.0 : 0.0);
            s.corr_mse += v * v;
        }
    s.mu_histogram.assign(20, 0.0);
    return s;
}

CodeStats code_stats(const PackedCodes& codes, const Tensor& mu) {
    CodeStats s = code_stats(codes);
    std::size_t extreme = 0;
    for (double v : mu.data) {
        std::size_t bin = std::min<std::size_t>(19, static_cast<std::size_t>(v * 20.0));
        s.mu_histogram[bin] += 1.0;
        if (v <= 0.01 || v >= 0.99) ++extreme;
    }
    for (double& h : s.mu_histogram) h /= static_cast<double>(mu.size());
    s.extreme_fraction = static_cast<double>(extreme) / static_cast<double>(mu.size());
    return s;
}

namespace {
constexpr char kCodesMagic[4] = {'C', 'M', 'H', 'B'};
constexpr std::uint32_t kCodesVersion = 1;
}  // namespace

void write_codes_file(const std::string& path, const PackedCodes& codes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.write(kCodesMagic, 4);
    auto w32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    w32(kCodesVersion);
    w32(static_cast<std::uint32_t>(codes.n));
    w32(static_cast<std::uint32_t>(codes.bits));
    for (std::uint64_t word : codes.words) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(word >> (8 * i));
        out.write(reinterpret_cast<char*>(b), 8);
    }
}

PackedCodes read_codes_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCodesMagic, 4) != 0)
        throw std::runtime_error(path + ": bad magic");
    auto r32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw std::runtime_error(path + ": truncated");
        return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
               std::uint32_t(b[3]) << 24;
    };
    const std::uint32_t version = r32();
    if (version != kCodesVersion)
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    PackedCodes codes;
    codes.n = r32();
    codes.bits = r32();
    codes.words.resize(codes.n * codes.words_per_code());
    for (std::uint64_t& word : codes.words) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw std::runtime_error(path + ": truncated payload");
        word = 0;
        for (int i = 0; i < 8; ++i) word |= std::uint64_t(b[i]) << (8 * i);
    }
    return codes;
}

}  // namespace cmimh
