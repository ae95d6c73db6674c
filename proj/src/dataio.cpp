#include "cmimh/dataio.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cmimh {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'H', 'X'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) fail("feature file: truncated header");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

bool ends_with(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

Tensor read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    std::vector<double> data;
    std::size_t cols = 0, rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            data.push_back(std::stod(cell));
            ++c;
        }
        if (rows == 0)
            cols = c;
        else if (c != cols)
            fail(path + ": ragged CSV row");
        ++rows;
    }
    if (rows == 0) fail(path + ": empty file");
    return Tensor(rows, cols, std::move(data));
}

void check_finite_or_fail(const Tensor& t, const std::string& path) {
    if (!t.all_finite()) fail(path + ": non-finite values");
}

}  // namespace

std::vector<std::size_t> PairedDataset::rows_with(SplitTag tag) const {
    const std::vector<bool>& mask =
        tag == SplitTag::train ? is_train : (tag == SplitTag::query ? is_query : is_database);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.push_back(i);
    return out;
}

Tensor read_feature_file(const std::string& path) {
    if (ends_with(path, ".csv")) {
        Tensor t = read_csv_matrix(path);
        check_finite_or_fail(t, path);
        return t;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) fail(path + ": bad magic");
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) fail(path + ": unsupported version " + std::to_string(version));
    const std::uint32_t n = read_u32(in);
    const std::uint32_t d = read_u32(in);
    Tensor t(n, d);
    std::vector<unsigned char> buf(std::size_t(n) * d * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) fail(path + ": truncated payload");
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint32_t bits = std::uint32_t(buf[4 * i]) | std::uint32_t(buf[4 * i + 1]) << 8 |
                             std::uint32_t(buf[4 * i + 2]) << 16 |
                             std::uint32_t(buf[4 * i + 3]) << 24;
        float f;
        std::memcpy(&f, &bits, 4);
        t[i] = static_cast<double>(f);
    }
    check_finite_or_fail(t, path);
    return t;
}

void write_feature_file(const std::string& path, const Tensor& t) {
    if (ends_with(path, ".csv")) {
        std::ofstream out(path);
        if (!out) fail("cannot open " + path);
        out.precision(9);
        for (std::size_t r = 0; r < t.rows; ++r) {
            for (std::size_t c = 0; c < t.cols; ++c)
                out << (c ? "," : "") << t.at(r, c);
            out << "\n";
        }
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(t.rows));
    write_u32(out, static_cast<std::uint32_t>(t.cols));
    for (double v : t.data) {
        float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char b[4] = {static_cast<unsigned char>(bits),
                              static_cast<unsigned char>(bits >> 8),
                              static_cast<unsigned char>(bits >> 16),
                              static_cast<unsigned char>(bits >> 24)};
        out.write(reinterpret_cast<char*>(b), 4);
    }
}

Tensor read_label_file(const std::string& path) {
    Tensor t = read_csv_matrix(path);
    for (double v : t.data)
        if (v != 0.0 && v != 1.0) fail(path + ": labels must be 0/1");
    return t;
}

void write_label_file(const std::string& path, const Tensor& labels) {
    std::ofstream out(path);
    if (!out) fail("cannot open " + path);
    for (std::size_t r = 0; r < labels.rows; ++r) {
        for (std::size_t c = 0; c < labels.cols; ++c)
            out << (c ? "," : "") << static_cast<int>(labels.at(r, c));
        out << "\n";
    }
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

void write_split_file(const std::string& path, const PairedDataset& ds) {
    std::ofstream out(path);
    if (!out) fail("cannot open " + path);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        std::vector<std::string> tags;
        if (ds.is_query[i]) tags.push_back("query");
        if (ds.is_database[i]) tags.push_back("database");
        if (ds.is_train[i]) tags.push_back("train");
        for (std::size_t t = 0; t < tags.size(); ++t) out << (t ? "," : "") << tags[t];
        out << "\n";
    }
}

void apply_split_file(PairedDataset& ds, const std::string& path) {
    auto lines = read_lines(path);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.size() != ds.n()) fail(path + ": split row count mismatch");
    ds.is_query.assign(ds.n(), false);
    ds.is_database.assign(ds.n(), false);
    ds.is_train.assign(ds.n(), false);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::stringstream ss(lines[i]);
        std::string tag;
        while (std::getline(ss, tag, ',')) {
            if (tag == "query")
                ds.is_query[i] = true;
            else if (tag == "database")
                ds.is_database[i] = true;
            else if (tag == "train")
                ds.is_train[i] = true;
            else
                fail(path + ": unknown split tag '" + tag + "'");
        }
        if (ds.is_query[i] && ds.is_database[i])
            fail(path + ": row tagged both query and database");
        if (ds.is_train[i] && !ds.is_database[i])
            fail(path + ": train rows must be database rows");
    }
}

PairedDataset load_dataset(const std::string& features_i, const std::string& features_t,
                           const std::optional<std::string>& labels,
                           const std::optional<std::string>& split_path) {
    PairedDataset ds;
    ds.x_i = read_feature_file(features_i);
    ds.x_t = read_feature_file(features_t);
    if (ds.x_i.rows != ds.x_t.rows) fail("dataset: modality row counts differ");
    if (labels) {
        ds.labels = read_label_file(*labels);
        if (ds.labels->rows != ds.x_i.rows) fail("dataset: label row count mismatch");
    }
    ds.is_query.assign(ds.n(), false);
    ds.is_database.assign(ds.n(), true);
    ds.is_train.assign(ds.n(), true);
    if (split_path) apply_split_file(ds, *split_path);
    if (ds.labels) {
        for (std::size_t i = 0; i < ds.n(); ++i) {
            if (!ds.is_query[i] && !ds.is_database[i]) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < ds.labels->cols; ++c) s += ds.labels->at(i, c);
            if (s == 0.0) fail("dataset: query/database row " + std::to_string(i) +
                               " has no label");
        }
    }
    return ds;
}

PairedDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.d_i == 0 || spec.d_t == 0 || spec.classes == 0 || spec.shared_dim == 0)
        throw std::invalid_argument("generate_synthetic: zero dimension");
    if (spec.noise_i < 0 || spec.noise_t < 0)
        throw std::invalid_argument("generate_synthetic: negative noise");

    Rng root(spec.seed);
    Rng rng_maps = root.substream(1);
    Rng rng_classes = root.substream(2);
    Rng rng_latent = root.substream(3);
    Rng rng_noise = root.substream(4);

    const std::size_t li = spec.shared_dim + spec.private_dim_i;
    const std::size_t lt = spec.shared_dim + spec.private_dim_t;
    Tensor map_i(li, spec.d_i), map_t(lt, spec.d_t);
    for (double& v : map_i.data) v = rng_maps.normal() / std::sqrt(double(li));
    for (double& v : map_t.data) v = rng_maps.normal() / std::sqrt(double(lt));

    // Class-conditional latent means. The shared block is common to both
    // modalities; each private block carries weaker class structure of its
    // own, so a modality's features hold label information the other
    // modality does not see.
    Tensor class_means(spec.classes, spec.shared_dim);
    for (double& v : class_means.data) v = rng_maps.normal() * 0.6;
    Tensor priv_means_i(spec.classes, std::max<std::size_t>(spec.private_dim_i, 1));
    Tensor priv_means_t(spec.classes, std::max<std::size_t>(spec.private_dim_t, 1));
    for (double& v : priv_means_i.data) v = rng_maps.normal() * 2.0;
    for (double& v : priv_means_t.data) v = rng_maps.normal() * 2.0;

    PairedDataset ds;
    ds.x_i = Tensor(spec.n, spec.d_i);
    ds.x_t = Tensor(spec.n, spec.d_t);
    ds.labels = Tensor(spec.n, spec.classes);
    for (std::size_t j = 0; j < spec.n; ++j) {
        const std::size_t c = rng_classes.index(spec.classes);
        ds.labels->at(j, c) = 1.0;
        std::vector<double> shared(spec.shared_dim);
        for (std::size_t k = 0; k < spec.shared_dim; ++k)
            shared[k] = class_means.at(c, k) + 0.5 * rng_latent.normal();
        std::vector<double> lat_i(li), lat_t(lt);
        for (std::size_t k = 0; k < spec.shared_dim; ++k) lat_i[k] = lat_t[k] = shared[k];
        for (std::size_t k = 0; k < spec.private_dim_i; ++k)
            lat_i[spec.shared_dim + k] = priv_means_i.at(c, k) + rng_latent.normal();
        for (std::size_t k = 0; k < spec.private_dim_t; ++k)
            lat_t[spec.shared_dim + k] = priv_means_t.at(c, k) + rng_latent.normal();
        for (std::size_t d = 0; d < spec.d_i; ++d) {
            double v = 0.0;
            for (std::size_t k = 0; k < li; ++k) v += lat_i[k] * map_i.at(k, d);
            ds.x_i.at(j, d) = v + spec.noise_i * rng_noise.normal();
        }
        for (std::size_t d = 0; d < spec.d_t; ++d) {
            double v = 0.0;
            for (std::size_t k = 0; k < lt; ++k) v += lat_t[k] * map_t.at(k, d);
            ds.x_t.at(j, d) = v + spec.noise_t * rng_noise.normal();
        }
    }
    ds.is_query.assign(spec.n, false);
    ds.is_database.assign(spec.n, true);
    ds.is_train.assign(spec.n, true);
    return ds;
}

void split(PairedDataset& ds, std::size_t n_query, std::size_t n_train, std::uint64_t seed) {
    const std::size_t n = ds.n();
    if (n_query + 1 > n) throw std::invalid_argument("split: n_query too large");
    if (n_train > n - n_query) throw std::invalid_argument("split: n_train too large");
    Rng rng(seed);
    auto perm = rng.permutation(n);
    ds.is_query.assign(n, false);
    ds.is_database.assign(n, false);
    ds.is_train.assign(n, false);
    for (std::size_t i = 0; i < n_query; ++i) ds.is_query[perm[i]] = true;
    for (std::size_t i = n_query; i < n; ++i) ds.is_database[perm[i]] = true;
    for (std::size_t i = n_query; i < n_query + n_train; ++i) ds.is_train[perm[i]] = true;
}

}  // namespace cmimh
