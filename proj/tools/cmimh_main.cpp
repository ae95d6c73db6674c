#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "cmimh/bernoulli.hpp"
#include "cmimh/dataio.hpp"
#include "cmimh/oracles.hpp"
#include "cmimh/retrieval.hpp"
#include "cmimh/trainer.hpp"

using json = nlohmann::ordered_json;
using namespace cmimh;
namespace fs = std::filesystem;

namespace {

// Exit codes: 1 usage/config, 2 data, 3 numeric failure.
struct CliError {
    int code;
    std::string msg;
};

[[noreturn]] void usage_error(const std::string& msg) { throw CliError{1, msg}; }
[[noreturn]] void data_error(const std::string& msg) { throw CliError{2, msg}; }

void require_file(const std::string& path) {
    if (!fs::exists(path)) data_error("file not found: " + path);
}

// ---- run configuration -------------------------------------------------

struct RunConfig {
    std::string features_i, features_t;
    std::string labels, split;  // optional, empty when unset
    std::string out_dir = "out";
    std::size_t code_bits = 16;
    NetSizes sizes;
    TrainConfig train;
    std::size_t eval_k = 1000;
    std::vector<std::size_t> prec_grid{1, 10, 50, 100, 500, 1000};
};

json to_json(const RunConfig& c) {
    json j;
    j["features_i"] = c.features_i;
    j["features_t"] = c.features_t;
    j["labels"] = c.labels;
    j["split"] = c.split;
    j["out_dir"] = c.out_dir;
    j["code_bits"] = c.code_bits;
    j["encoder_hidden"] = c.sizes.encoder_hidden;
    j["critic_hidden"] = c.sizes.critic_hidden;
    j["critic_embed"] = c.sizes.critic_embed;
    j["tc_hidden"] = c.sizes.tc_hidden;
    j["batch_size"] = c.train.batch_size;
    j["momentum"] = c.train.momentum;
    j["weight_decay"] = c.train.weight_decay;
    j["lr_main"] = c.train.lr_main;
    j["lr_decoders"] = c.train.lr_decoders;
    j["lambda1"] = c.train.lambdas.l1;
    j["lambda2"] = c.train.lambdas.l2;
    j["lambda3"] = c.train.lambdas.l3;
    j["lambda4"] = c.train.lambdas.l4;
    j["epochs"] = c.train.epochs;
    j["seed"] = c.train.seed;
    j["critic_steps_per_main"] = c.train.critic_steps_per_main;
    j["critic_input"] =
        c.train.objective.critic_input == CriticInput::mu ? "mu" : "samples";
    j["critic_samples"] = c.train.objective.critic_samples;
    j["negative_mode"] = c.train.objective.negative_mode == NegativeMode::full_matrix
                             ? "full_matrix"
                             : "cyclic_shift";
    j["eval_k"] = c.eval_k;
    j["prec_grid"] = c.prec_grid;
    return j;
}

RunConfig parse_config(const std::string& path) {
    require_file(path);
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        usage_error(path + ": invalid JSON: " + e.what());
    }
    RunConfig c;
    // Typos in key names must fail loudly, so every key is checked
    // against the known set before any value is read.
    const json known = to_json(c);
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) usage_error(path + ": unknown config key \"" + key + "\"");
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
        };
        get("features_i", c.features_i);
        get("features_t", c.features_t);
        get("labels", c.labels);
        get("split", c.split);
        get("out_dir", c.out_dir);
        get("code_bits", c.code_bits);
        get("encoder_hidden", c.sizes.encoder_hidden);
        get("critic_hidden", c.sizes.critic_hidden);
        get("critic_embed", c.sizes.critic_embed);
        get("tc_hidden", c.sizes.tc_hidden);
        get("batch_size", c.train.batch_size);
        get("momentum", c.train.momentum);
        get("weight_decay", c.train.weight_decay);
        get("lr_main", c.train.lr_main);
        get("lr_decoders", c.train.lr_decoders);
        get("lambda1", c.train.lambdas.l1);
        get("lambda2", c.train.lambdas.l2);
        get("lambda3", c.train.lambdas.l3);
        get("lambda4", c.train.lambdas.l4);
        get("epochs", c.train.epochs);
        get("seed", c.train.seed);
        get("critic_steps_per_main", c.train.critic_steps_per_main);
        get("critic_samples", c.train.objective.critic_samples);
        get("eval_k", c.eval_k);
        get("prec_grid", c.prec_grid);
        if (j.contains("critic_input")) {
            const std::string v = j.at("critic_input");
            if (v == "mu")
                c.train.objective.critic_input = CriticInput::mu;
            else if (v == "samples")
                c.train.objective.critic_input = CriticInput::samples;
            else
                usage_error("critic_input must be \"mu\" or \"samples\"");
        }
        if (j.contains("negative_mode")) {
            const std::string v = j.at("negative_mode");
            if (v == "full_matrix")
                c.train.objective.negative_mode = NegativeMode::full_matrix;
            else if (v == "cyclic_shift")
                c.train.objective.negative_mode = NegativeMode::cyclic_shift;
            else
                usage_error("negative_mode must be \"full_matrix\" or \"cyclic_shift\"");
        }
    } catch (const json::exception& e) {
        usage_error(path + ": bad value type: " + e.what());
    }
    if (c.features_i.empty() || c.features_t.empty())
        usage_error(path + ": features_i and features_t are required");
    try {
        c.train.validate();
    } catch (const std::exception& e) {
        usage_error(e.what());
    }
    return c;
}

PairedDataset load_from_config(const RunConfig& c) {
    require_file(c.features_i);
    require_file(c.features_t);
    if (!c.labels.empty()) require_file(c.labels);
    if (!c.split.empty()) require_file(c.split);
    try {
        return load_dataset(c.features_i, c.features_t,
                            c.labels.empty() ? std::nullopt : std::optional(c.labels),
                            c.split.empty() ? std::nullopt : std::optional(c.split));
    } catch (const std::exception& e) {
        data_error(e.what());
    }
}

Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
    Tensor out(rows.size(), x.cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < x.cols; ++c) out.at(r, c) = x.at(rows[r], c);
    return out;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) data_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

json stats_to_json(const CodeStats& s) {
    json j;
    j["corr_mse"] = s.corr_mse;
    j["per_bit_mean"] = s.per_bit_mean;
    j["mu_histogram"] = s.mu_histogram;
    j["extreme_fraction"] = s.extreme_fraction;
    return j;
}

// ---- train -------------------------------------------------------------

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed_override) {
    RunConfig cfg = parse_config(config_path);
    if (seed_override) cfg.train.seed = *seed_override;
    PairedDataset ds = load_from_config(cfg);

    fs::create_directories(cfg.out_dir);
    write_json_file(cfg.out_dir + "/resolved_config.json", to_json(cfg));

    auto train_rows = ds.rows_with(SplitTag::train);
    const Tensor xi = train_rows.empty() ? ds.x_i : take_rows(ds.x_i, train_rows);
    const Tensor xt = train_rows.empty() ? ds.x_t : take_rows(ds.x_t, train_rows);

    Trainer trainer(init_bundle(xi.cols, xt.cols, cfg.code_bits, cfg.train.seed, cfg.sizes),
                    cfg.train);
    std::ofstream log(cfg.out_dir + "/loss.csv");
    log << "epoch,recon_i,recon_t,js_mi,skl,tc_i,tc_t,bal,total\n";
    log.precision(17);
    for (std::size_t e = 0; e < cfg.train.epochs; ++e) {
        LossBreakdown b = trainer.train_epoch(xi, xt);
        log << (e + 1) << ',' << b.recon_i << ',' << b.recon_t << ',' << b.js_mi << ','
            << b.skl << ',' << b.tc_i << ',' << b.tc_t << ',' << b.bal << ',' << b.total
            << '\n';
    }
    trainer.save(cfg.out_dir + "/checkpoint.bin");

    // Final per-bit statistics of the learned codes on the train rows.
    const Tensor mu_i = encode_value(trainer.bundle().encoder_i, xi);
    const Tensor mu_t = encode_value(trainer.bundle().encoder_t, xt);
    json stats;
    stats["modality_i"] = stats_to_json(code_stats(binarize(mu_i), mu_i));
    stats["modality_t"] = stats_to_json(code_stats(binarize(mu_t), mu_t));
    write_json_file(cfg.out_dir + "/code_stats.json", stats);
    return 0;
}

// ---- encode ------------------------------------------------------------

int cmd_encode(const std::string& ckpt_path, const std::string& features_path,
               const std::string& modality, const std::string& out_path) {
    if (modality != "i" && modality != "t") usage_error("--modality must be \"i\" or \"t\"");
    require_file(ckpt_path);
    require_file(features_path);
    Trainer trainer = Trainer::load(ckpt_path);
    Tensor x = read_feature_file(features_path);
    const std::size_t want = modality == "i" ? trainer.bundle().d_i : trainer.bundle().d_t;
    if (x.cols != want)
        data_error("feature dimension " + std::to_string(x.cols) +
                   " does not match checkpoint dimension " + std::to_string(want));
    const Mlp& enc =
        modality == "i" ? trainer.bundle().encoder_i : trainer.bundle().encoder_t;
    write_codes_file(out_path, binarize(encode_value(enc, x)));
    return 0;
}

// ---- eval --------------------------------------------------------------

int cmd_eval(const std::string& query_codes, const std::string& db_codes,
             const std::string& query_labels, const std::string& db_labels, std::size_t k,
             const std::string& out_dir) {
    for (const auto& p : {query_codes, db_codes, query_labels, db_labels}) require_file(p);
    PackedCodes q = read_codes_file(query_codes);
    PackedCodes db = read_codes_file(db_codes);
    Tensor yq = read_label_file(query_labels);
    Tensor ydb = read_label_file(db_labels);
    if (yq.rows != q.n || ydb.rows != db.n)
        data_error("label row count does not match code count");
    if (q.bits != db.bits) data_error("query and database code lengths differ");

    RetrievalResult res = evaluate(q, db, yq, ydb, k);
    fs::create_directories(out_dir);
    json metrics;
    metrics["k"] = k;
    metrics["map_at_k"] = res.map_at_k;
    json pk = json::array();
    for (const auto& [kk, prec] : res.prec_at_k) pk.push_back({{"k", kk}, {"precision", prec}});
    metrics["prec_at_k"] = pk;
    metrics["query_code_stats"] = stats_to_json(code_stats(q));
    metrics["db_code_stats"] = stats_to_json(code_stats(db));
    write_json_file(out_dir + "/metrics.json", metrics);

    std::ofstream pr(out_dir + "/pr_curve.csv");
    pr << "radius,precision,recall\n";
    pr.precision(17);
    for (const auto& pt : res.pr_curve)
        pr << pt.radius << ',' << pt.precision << ',' << pt.recall << '\n';

    std::ofstream ap(out_dir + "/per_query_ap.csv");
    ap << "query,ap\n";
    ap.precision(17);
    for (std::size_t i = 0; i < res.per_query_ap.size(); ++i)
        ap << i << ',' << res.per_query_ap[i] << '\n';
    std::cout << "mAP@" << k << " = " << res.map_at_k << "\n";
    return 0;
}

// ---- ablate ------------------------------------------------------------

struct TaskMaps {
    double i2t, t2i, i2i, t2t, corr_mse_i, corr_mse_t;
};

TaskMaps train_and_eval(const RunConfig& cfg, const PairedDataset& ds) {
    auto train_rows = ds.rows_with(SplitTag::train);
    auto query_rows = ds.rows_with(SplitTag::query);
    auto db_rows = ds.rows_with(SplitTag::database);
    if (query_rows.empty() || db_rows.empty() || !ds.labels)
        data_error("ablate needs labels and a split with query and database rows");
    const Tensor xi = train_rows.empty() ? ds.x_i : take_rows(ds.x_i, train_rows);
    const Tensor xt = train_rows.empty() ? ds.x_t : take_rows(ds.x_t, train_rows);

    Trainer trainer(init_bundle(ds.x_i.cols, ds.x_t.cols, cfg.code_bits, cfg.train.seed,
                                cfg.sizes),
                    cfg.train);
    for (std::size_t e = 0; e < cfg.train.epochs; ++e) trainer.train_epoch(xi, xt);

    const Tensor yq = take_rows(*ds.labels, query_rows);
    const Tensor ydb = take_rows(*ds.labels, db_rows);
    auto codes = [&](const Mlp& enc, const Tensor& x, const std::vector<std::size_t>& rows) {
        return binarize(encode_value(enc, take_rows(x, rows)));
    };
    const auto& b = trainer.bundle();
    PackedCodes qi = codes(b.encoder_i, ds.x_i, query_rows);
    PackedCodes qt = codes(b.encoder_t, ds.x_t, query_rows);
    PackedCodes dbi = codes(b.encoder_i, ds.x_i, db_rows);
    PackedCodes dbt = codes(b.encoder_t, ds.x_t, db_rows);

    TaskMaps m{};
    m.i2t = evaluate(qi, dbt, yq, ydb, cfg.eval_k).map_at_k;
    m.t2i = evaluate(qt, dbi, yq, ydb, cfg.eval_k).map_at_k;
    m.i2i = evaluate(qi, dbi, yq, ydb, cfg.eval_k).map_at_k;
    m.t2t = evaluate(qt, dbt, yq, ydb, cfg.eval_k).map_at_k;
    const Tensor mu_i = encode_value(b.encoder_i, xi);
    const Tensor mu_t = encode_value(b.encoder_t, xt);
    m.corr_mse_i = code_stats(binarize(mu_i), mu_i).corr_mse;
    m.corr_mse_t = code_stats(binarize(mu_t), mu_t).corr_mse;
    return m;
}

int cmd_ablate(const std::string& config_path, const std::string& axis,
               const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds,
               const std::string& out_path) {
    const RunConfig base = parse_config(config_path);
    const bool is_critic_axis = axis == "critic_input";
    if (axis != "lambda1" && axis != "lambda2" && axis != "l_ind" && axis != "l_bal" &&
        !is_critic_axis)
        usage_error("unknown ablation axis \"" + axis +
                    "\" (expected lambda1, lambda2, l_ind, l_bal or critic_input)");
    if (values.empty()) usage_error("--values must be non-empty");
    PairedDataset ds = load_from_config(base);

    std::ofstream out(out_path);
    if (!out) data_error("cannot write " + out_path);
    out << "axis,value,seed,map_i2t,map_t2i,map_i2i,map_t2t,corr_mse_i,corr_mse_t\n";
    out.precision(17);
    for (const std::string& value : values) {
        RunConfig cfg = base;
        if (is_critic_axis) {
            if (value == "mu")
                cfg.train.objective.critic_input = CriticInput::mu;
            else if (value == "samples")
                cfg.train.objective.critic_input = CriticInput::samples;
            else
                usage_error("critic_input values must be \"mu\" or \"samples\"");
        } else {
            double v = 0.0;
            try {
                v = std::stod(value);
            } catch (const std::exception&) {
                usage_error("non-numeric value \"" + value + "\" for axis " + axis);
            }
            if (axis == "lambda1")
                cfg.train.lambdas.l1 = v;
            else if (axis == "lambda2")
                cfg.train.lambdas.l2 = v;
            else if (axis == "l_ind")
                cfg.train.lambdas.l3 = v;
            else
                cfg.train.lambdas.l4 = v;
        }
        for (std::uint64_t seed : seeds) {
            cfg.train.seed = seed;
            TaskMaps m = train_and_eval(cfg, ds);
            out << axis << ',' << value << ',' << seed << ',' << m.i2t << ',' << m.t2i << ','
                << m.i2i << ',' << m.t2t << ',' << m.corr_mse_i << ',' << m.corr_mse_t
                << '\n';
        }
    }
    return 0;
}

// ---- synth -------------------------------------------------------------

int cmd_synth(const SyntheticSpec& spec, std::size_t n_query, std::size_t n_train,
              const std::string& out_dir) {
    PairedDataset ds = generate_synthetic(spec);
    split(ds, n_query, n_train, spec.seed);
    fs::create_directories(out_dir);
    write_feature_file(out_dir + "/features_i.bin", ds.x_i);
    write_feature_file(out_dir + "/features_t.bin", ds.x_t);
    write_label_file(out_dir + "/labels.csv", *ds.labels);
    write_split_file(out_dir + "/split.txt", ds);
    return 0;
}

// ---- check -------------------------------------------------------------

bool report(const char* name, bool ok) {
    std::cout << (ok ? "pass" : "FAIL") << "  " << name << "\n";
    return ok;
}

int cmd_check(std::size_t instances, std::uint64_t seed) {
    using namespace cmimh::oracles;
    bool all = true;
    Rng rng(seed);

    {
        // Closed-form Bernoulli KL against exhaustive enumeration.
        bool ok = true;
        for (std::size_t t = 0; t < instances; ++t) {
            const std::size_t bits = 1 + rng.next_u64() % 10;
            std::vector<double> pv(bits), qv(bits);
            for (double& v : pv) v = rng.uniform();
            for (double& v : qv) v = rng.uniform();
            const auto p = bernoulli::clamp(pv), q = bernoulli::clamp(qv);
            double brute = 0.0;
            for (std::size_t c = 0; c < (std::size_t{1} << bits); ++c) {
                const double pp = bernoulli_prob(p.mu, c);
                brute += pp * std::log(pp / bernoulli_prob(q.mu, c));
            }
            ok &= std::abs(bernoulli::kl_bernoulli(p, q) - brute) < 1e-10;
        }
        all &= report("bernoulli KL closed form vs enumeration", ok);
    }
    {
        bool ok = true;
        for (std::size_t t = 0; t < instances; ++t)
            ok &= verify_private_info_identity(random_instance(rng)).ok(1e-9);
        all &= report("conditional-information identity and bounds", ok);
    }
    {
        // Variational JS bound stays below the divergence it estimates.
        bool ok = true;
        for (std::size_t t = 0; t < std::max<std::size_t>(instances / 10, 10); ++t) {
            auto inst = random_instance(rng);
            auto cj = code_joint(inst);
            const std::size_t n = std::size_t{1} << inst.bits;
            auto pm = product_of_marginals(cj, n, n);
            const double cap = 2.0 * exact_jsd(cj, pm);
            for (int c = 0; c < 20; ++c) {
                std::vector<double> critic(cj.size());
                for (double& v : critic) v = 20.0 * (rng.uniform() - 0.5);
                ok &= js_bound_expectation(cj, pm, critic) <= cap + 1e-9;
            }
        }
        all &= report("JS bound never exceeds the exact divergence", ok);
    }
    {
        // Density-ratio critic makes the JS bound tight.
        bool ok = true;
        for (std::size_t t = 0; t < std::max<std::size_t>(instances / 10, 10); ++t) {
            std::vector<double> p(8), q(8);
            double sp = 0, sq = 0;
            for (double& v : p) sp += v = rng.uniform() + 1e-3;
            for (double& v : q) sq += v = rng.uniform() + 1e-3;
            for (double& v : p) v /= sp;
            for (double& v : q) v /= sq;
            std::vector<double> critic(8);
            for (int i = 0; i < 8; ++i) critic[i] = std::log(p[i] / q[i]);
            ok &= std::abs(js_bound_expectation(p, q, critic) - 2.0 * exact_jsd(p, q)) < 1e-9;
        }
        all &= report("JS bound tight at the density-ratio critic", ok);
    }
    {
        // Two total-correlation routes agree.
        bool ok = true;
        for (std::size_t t = 0; t < instances; ++t) {
            const std::size_t bits = 1 + rng.next_u64() % 5;
            std::vector<double> qz(std::size_t{1} << bits);
            double s = 0;
            for (double& v : qz) s += v = rng.uniform() + 1e-4;
            for (double& v : qz) v /= s;
            const double a = exact_tc(qz, bits), b = exact_tc_entropy_identity(qz, bits);
            ok &= std::abs(a - b) < 1e-9 && a >= -1e-12;
        }
        all &= report("total correlation identity between entropy routes", ok);
    }
    {
        // Packed Hamming distance vs per-bit reference.
        bool ok = true;
        for (std::size_t t = 0; t < instances; ++t) {
            const std::size_t bits = 1 + rng.next_u64() % 100;
            Tensor ta(1, bits), tb(1, bits);
            unsigned want = 0;
            for (std::size_t c = 0; c < bits; ++c) {
                ta[c] = rng.uniform() < 0.5;
                tb[c] = rng.uniform() < 0.5;
                want += ta[c] != tb[c];
            }
            ok &= hamming_distance(pack_bits(ta), 0, pack_bits(tb), 0) == want;
        }
        all &= report("packed Hamming distance vs bit-level reference", ok);
    }
    {
        // Ranking ties resolve by ascending database index.
        bool ok = true;
        for (std::size_t t = 0; t < std::max<std::size_t>(instances / 10, 10); ++t) {
            Tensor tq(1, 8), tdb(30, 8);
            for (double& v : tq.data) v = rng.uniform() < 0.5;
            for (double& v : tdb.data) v = rng.uniform() < 0.5;
            auto hits = hamming_rank(pack_bits(tq), 0, pack_bits(tdb), 30);
            for (std::size_t r = 0; r + 1 < hits.size(); ++r)
                ok &= hits[r].distance < hits[r + 1].distance ||
                      (hits[r].distance == hits[r + 1].distance &&
                       hits[r].index < hits[r + 1].index);
        }
        all &= report("hamming ranking is totally ordered with index ties", ok);
    }
    std::cout << (all ? "all checks passed" : "CHECK FAILURES") << "\n";
    return all ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal binary hashing: training, encoding and retrieval evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    auto* train = app.add_subcommand("train", "Train a model from a JSON config");
    train->add_option("--config", config_path, "Run configuration JSON")->required();
    train->add_option("--seed", seed_override, "Override the config seed");

    std::string ckpt, features, modality = "i", out_path;
    auto* encode = app.add_subcommand("encode", "Encode features to packed binary codes");
    encode->add_option("--checkpoint", ckpt)->required();
    encode->add_option("--features", features)->required();
    encode->add_option("--modality", modality, "i or t");
    encode->add_option("--out", out_path)->required();

    std::string q_codes, db_codes, q_labels, db_labels, eval_out = "eval_out";
    std::size_t eval_k = 1000;
    auto* eval_cmd = app.add_subcommand("eval", "Retrieval metrics for query vs database codes");
    eval_cmd->add_option("--query-codes", q_codes)->required();
    eval_cmd->add_option("--db-codes", db_codes)->required();
    eval_cmd->add_option("--query-labels", q_labels)->required();
    eval_cmd->add_option("--db-labels", db_labels)->required();
    eval_cmd->add_option("--k", eval_k, "mAP cutoff");
    eval_cmd->add_option("--out-dir", eval_out);

    std::string axis, ablate_config, ablate_out = "ablation.csv";
    std::vector<std::string> axis_values;
    std::vector<std::uint64_t> ablate_seeds{1};
    auto* ablate = app.add_subcommand("ablate", "Sweep one objective axis and tabulate mAP");
    ablate->add_option("--config", ablate_config)->required();
    ablate->add_option("--axis", axis, "lambda1, lambda2, l_ind, l_bal or critic_input")
        ->required();
    ablate->add_option("--values", axis_values)->required()->delimiter(',');
    ablate->add_option("--seeds", ablate_seeds)->delimiter(',');
    ablate->add_option("--out", ablate_out);

    SyntheticSpec spec;
    std::size_t n_query = 200, n_train = 1500;
    std::string synth_out = "synth_out";
    auto* synth = app.add_subcommand("synth", "Generate a paired synthetic dataset");
    synth->add_option("--n", spec.n);
    synth->add_option("--classes", spec.classes);
    synth->add_option("--d-i", spec.d_i);
    synth->add_option("--d-t", spec.d_t);
    synth->add_option("--shared-dim", spec.shared_dim);
    synth->add_option("--private-dim-i", spec.private_dim_i);
    synth->add_option("--private-dim-t", spec.private_dim_t);
    synth->add_option("--noise-i", spec.noise_i);
    synth->add_option("--noise-t", spec.noise_t);
    synth->add_option("--seed", spec.seed);
    synth->add_option("--n-query", n_query);
    synth->add_option("--n-train", n_train);
    synth->add_option("--out-dir", synth_out);

    std::size_t check_instances = 200;
    std::uint64_t check_seed = 1;
    auto* check = app.add_subcommand("check", "Run the exact-enumeration property suite");
    check->add_option("--instances", check_instances);
    check->add_option("--seed", check_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*train) return cmd_train(config_path, seed_override);
        if (*encode) return cmd_encode(ckpt, features, modality, out_path);
        if (*eval_cmd) return cmd_eval(q_codes, db_codes, q_labels, db_labels, eval_k, eval_out);
        if (*ablate) return cmd_ablate(ablate_config, axis, axis_values, ablate_seeds, ablate_out);
        if (*synth) return cmd_synth(spec, n_query, n_train, synth_out);
        if (*check) return cmd_check(check_instances, check_seed);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.msg << "\n";
        return e.code;
    } catch (const std::domain_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        const bool numeric = msg.find("finite") != std::string::npos;
        std::cerr << (numeric ? "numeric error: " : "error: ") << msg << "\n";
        return numeric ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
