#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <vector>

#include "cmimh/retrieval.hpp"
#include "cmimh/rng.hpp"

using namespace cmimh;

namespace {

Tensor random_bits(Rng& rng, std::size_t n, std::size_t bits) {
    Tensor t(n, bits);
    for (double& v : t.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return t;
}

// Reference Hamming distance straight off the unpacked bit matrix.
unsigned naive_hamming(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb) {
    unsigned d = 0;
    for (std::size_t c = 0; c < a.cols; ++c) d += a.at(ra, c) != b.at(rb, c);
    return d;
}

// Reference AP@k computed directly from the definition.
double naive_ap(const std::vector<int>& rel, std::size_t k, std::size_t total_relevant) {
    double num = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, rel.size()); ++r) {
        if (rel[r]) {
            ++hits;
            num += double(hits) / double(r + 1);
        }
    }
    return num / double(std::min(total_relevant, k));
}

Tensor one_hot_labels(Rng& rng, std::size_t n, std::size_t classes) {
    Tensor y = Tensor::zeros(n, classes);
    for (std::size_t r = 0; r < n; ++r) y.at(r, rng.next_u64() % classes) = 1.0;
    return y;
}

}  // namespace

TEST_CASE("pack and unpack round trip across word boundaries") {
    Rng rng(3);
    for (std::size_t bits : {1, 7, 63, 64, 65, 100, 128, 130}) {
        auto t = random_bits(rng, 9, bits);
        auto packed = pack_bits(t);
        CHECK(packed.n == 9);
        CHECK(packed.bits == bits);
        auto back = unpack(packed);
        CHECK(back.data == t.data);
        // Padding bits in the last word stay zero.
        if (bits % 64 != 0)
            for (std::size_t j = 0; j < packed.n; ++j)
                CHECK((packed.code(j)[packed.words_per_code() - 1] >> (bits % 64)) == 0);
    }
}

TEST_CASE("binarize thresholds mu at one half with ties up") {
    Tensor mu(2, 3);
    mu.data = {0.49999, 0.5, 0.50001, 0.0, 1.0, 0.25};
    auto packed = binarize(mu);
    CHECK_FALSE(packed.get_bit(0, 0));
    CHECK(packed.get_bit(0, 1));
    CHECK(packed.get_bit(0, 2));
    CHECK_FALSE(packed.get_bit(1, 0));
    CHECK(packed.get_bit(1, 1));
    CHECK_FALSE(packed.get_bit(1, 2));
}

TEST_CASE("hamming distance matches bit-level reference on random codes") {
    Rng rng(7);
    for (std::size_t bits : {16, 64, 96}) {
        auto ta = random_bits(rng, 20, bits);
        auto tb = random_bits(rng, 20, bits);
        auto pa = pack_bits(ta), pb = pack_bits(tb);
        for (std::size_t i = 0; i < 20; ++i)
            for (std::size_t j = 0; j < 20; ++j)
                CHECK(hamming_distance(pa, i, pb, j) == naive_hamming(ta, i, tb, j));
    }
}

TEST_CASE("hamming_rank orders by distance then index") {
    Rng rng(11);
    auto tq = random_bits(rng, 5, 24);
    auto tdb = random_bits(rng, 60, 24);
    auto pq = pack_bits(tq), pdb = pack_bits(tdb);
    for (std::size_t q = 0; q < 5; ++q) {
        auto hits = hamming_rank(pq, q, pdb, 25);
        REQUIRE(hits.size() == 25);
        for (std::size_t r = 0; r + 1 < hits.size(); ++r) {
            const bool ordered = hits[r].distance < hits[r + 1].distance ||
                                 (hits[r].distance == hits[r + 1].distance &&
                                  hits[r].index < hits[r + 1].index);
            CHECK(ordered);
        }
        // Every omitted item is at least as far as the worst kept one.
        std::vector<bool> kept(60, false);
        for (const auto& h : hits) {
            CHECK(h.distance == naive_hamming(tq, q, tdb, h.index));
            kept[h.index] = true;
        }
        for (std::size_t j = 0; j < 60; ++j)
            if (!kept[j]) CHECK(naive_hamming(tq, q, tdb, j) >= hits.back().distance);
    }
    // k larger than the database clips.
    CHECK(hamming_rank(pq, 0, pdb, 1000).size() == 60);
}

TEST_CASE("average precision matches the definition and known cases") {
    CHECK(average_precision_at_k({1, 1, 1}, 3, 3) == doctest::Approx(1.0));
    CHECK(average_precision_at_k({0, 0, 0}, 3, 5) == doctest::Approx(0.0));
    // One relevant at rank 2 of 3, R=1: AP = (1/2)/1.
    CHECK(average_precision_at_k({0, 1, 0}, 3, 1) == doctest::Approx(0.5));
    // Normalizer is min(R, k).
    CHECK(average_precision_at_k({1, 0}, 2, 5) == doctest::Approx(1.0 / 2.0));
    CHECK_THROWS(average_precision_at_k({0, 0}, 2, 0));
    Rng rng(13);
    for (int t = 0; t < 200; ++t) {
        const std::size_t len = 1 + rng.next_u64() % 30;
        std::vector<int> rel(len);
        std::size_t r_total = 0;
        for (int& v : rel) {
            v = rng.uniform() < 0.4;
            r_total += v;
        }
        r_total += rng.next_u64() % 5;  // relevant items may sit outside the list
        if (r_total == 0) continue;
        const std::size_t k = 1 + rng.next_u64() % 35;
        CHECK(average_precision_at_k(rel, k, r_total) ==
              doctest::Approx(naive_ap(rel, k, r_total)).epsilon(1e-12));
    }
}

TEST_CASE("evaluate agrees with a brute-force reference") {
    Rng rng(17);
    const std::size_t bits = 12, nq = 8, ndb = 40;
    auto tq = random_bits(rng, nq, bits);
    auto tdb = random_bits(rng, ndb, bits);
    auto yq = one_hot_labels(rng, nq, 3);
    auto ydb = one_hot_labels(rng, ndb, 3);
    auto pq = pack_bits(tq), pdb = pack_bits(tdb);
    const std::size_t k = 15;
    auto res = evaluate(pq, pdb, yq, ydb, k);

    double map_ref = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
        auto hits = hamming_rank(pq, q, pdb, ndb);
        std::vector<int> rel;
        std::size_t r_total = 0;
        for (const auto& h : hits) rel.push_back(share_label(yq, q, ydb, h.index));
        for (std::size_t j = 0; j < ndb; ++j) r_total += share_label(yq, q, ydb, j);
        REQUIRE(r_total > 0);
        const double ap = naive_ap(rel, k, r_total);
        CHECK(res.per_query_ap[q] == doctest::Approx(ap).epsilon(1e-12));
        map_ref += ap;
    }
    CHECK(res.map_at_k == doctest::Approx(map_ref / nq).epsilon(1e-12));

    // Precision grid is clipped to the database size.
    for (const auto& [kk, prec] : res.prec_at_k) {
        CHECK(kk <= ndb);
        double ref = 0.0;
        for (std::size_t q = 0; q < nq; ++q) {
            auto hits = hamming_rank(pq, q, pdb, kk);
            std::size_t good = 0;
            for (const auto& h : hits) good += share_label(yq, q, ydb, h.index);
            ref += double(good) / double(kk);
        }
        CHECK(prec == doctest::Approx(ref / nq).epsilon(1e-12));
    }

    // Micro-averaged PR curve over Hamming radii.
    REQUIRE(res.pr_curve.size() == bits + 1);
    for (const auto& pt : res.pr_curve) {
        std::size_t retrieved = 0, rel_retrieved = 0, rel_total = 0;
        for (std::size_t q = 0; q < nq; ++q)
            for (std::size_t j = 0; j < ndb; ++j) {
                const bool rel = share_label(yq, q, ydb, j);
                rel_total += rel;
                if (hamming_distance(pq, q, pdb, j) <= pt.radius) {
                    ++retrieved;
                    rel_retrieved += rel;
                }
            }
        const double prec = retrieved ? double(rel_retrieved) / double(retrieved) : 1.0;
        CHECK(pt.precision == doctest::Approx(prec).epsilon(1e-12));
        CHECK(pt.recall == doctest::Approx(double(rel_retrieved) / double(rel_total)).epsilon(1e-12));
    }
    // Radius L retrieves everything.
    CHECK(res.pr_curve.back().recall == doctest::Approx(1.0));
}

TEST_CASE("random codes with random labels give mAP near the relevant fraction") {
    // With distance-independent relevance, the top 100 of 300 holds about
    // a quarter relevant items at precision ~0.25, and the normalizer
    // min(R, k) is ~75, putting expected AP near 0.083.
    Rng rng(23);
    const std::size_t classes = 4, ndb = 300, nq = 120;
    auto pq = pack_bits(random_bits(rng, nq, 32));
    auto pdb = pack_bits(random_bits(rng, ndb, 32));
    auto yq = one_hot_labels(rng, nq, classes);
    auto ydb = one_hot_labels(rng, ndb, classes);
    auto res = evaluate(pq, pdb, yq, ydb, 100);
    CHECK(res.map_at_k > 0.06);
    CHECK(res.map_at_k < 0.14);
}

TEST_CASE("code_stats on hand-built codes") {
    // Perfectly balanced, pairwise-orthogonal two-bit codes.
    Tensor bits(4, 2);
    bits.data = {0, 0, 0, 1, 1, 0, 1, 1};
    auto stats = code_stats(pack_bits(bits));
    CHECK(stats.per_bit_mean[0] == doctest::Approx(0.5));
    CHECK(stats.per_bit_mean[1] == doctest::Approx(0.5));
    CHECK(stats.corr_mse == doctest::Approx(0.0));

    // Identical bits: Hhat columns equal, off-diagonal of the Gram matrix
    // is 1, so the Frobenius error is 2.
    Tensor dup(4, 2);
    dup.data = {0, 0, 1, 1, 0, 0, 1, 1};
    CHECK(code_stats(pack_bits(dup)).corr_mse == doctest::Approx(2.0));

    // mu histogram and extreme fraction.
    Tensor mu(2, 2);
    mu.data = {0.005, 0.5, 0.995, 0.12};
    auto with_mu = code_stats(binarize(mu), mu);
    CHECK(with_mu.extreme_fraction == doctest::Approx(0.5));
    double hist_sum = 0.0;
    for (double h : with_mu.mu_histogram) hist_sum += h;
    CHECK(hist_sum == doctest::Approx(1.0));
    CHECK(with_mu.mu_histogram[2] == doctest::Approx(0.25));  // 0.12 lands in bin [0.10,0.15)
}

TEST_CASE("codes file round trips") {
    Rng rng(29);
    auto packed = pack_bits(random_bits(rng, 17, 48));
    const auto path = (std::filesystem::temp_directory_path() / "cmimh_codes_test.bin").string();
    write_codes_file(path, packed);
    auto back = read_codes_file(path);
    std::filesystem::remove(path);
    CHECK(back.n == packed.n);
    CHECK(back.bits == packed.bits);
    CHECK(back.words == packed.words);
    CHECK_THROWS(read_codes_file("/nonexistent/cmimh_codes.bin"));
}
