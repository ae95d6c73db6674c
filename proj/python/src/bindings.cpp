#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cmimh/bernoulli.hpp"
#include "cmimh/dataio.hpp"
#include "cmimh/networks.hpp"
#include "cmimh/oracles.hpp"
#include "cmimh/retrieval.hpp"
#include "cmimh/trainer.hpp"

namespace py = pybind11;
using namespace cmimh;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
    Tensor t(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + t.data.size(), t.data.begin());
    return t;
}

py::array_t<double> to_array(const Tensor& t) {
    py::array_t<double> a({t.rows, t.cols});
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PackedCodes pack_array(const Array& bits) { return pack_bits(to_tensor(bits)); }

py::dict result_dict(const RetrievalResult& r) {
    py::dict d;
    d["map_at_k"] = r.map_at_k;
    d["per_query_ap"] = r.per_query_ap;
    py::dict prec;
    for (const auto& [k, p] : r.prec_at_k) prec[py::int_(k)] = p;
    d["prec_at_k"] = prec;
    py::list curve;
    for (const auto& pt : r.pr_curve)
        curve.append(py::make_tuple(pt.radius, pt.precision, pt.recall));
    d["pr_curve"] = curve;
    return d;
}

py::dict stats_dict(const CodeStats& s) {
    py::dict d;
    d["corr_mse"] = s.corr_mse;
    d["per_bit_mean"] = s.per_bit_mean;
    d["mu_histogram"] = s.mu_histogram;
    d["extreme_fraction"] = s.extreme_fraction;
    return d;
}

// Owns a Trainer so python callers get train/encode/save in one object.
class Model {
  public:
    Model(std::size_t d_i, std::size_t d_t, std::size_t code_bits, TrainConfig cfg,
          const NetSizes& sizes)
        : trainer_(init_bundle(d_i, d_t, code_bits, cfg.seed, sizes), std::move(cfg)) {}

    explicit Model(Trainer t) : trainer_(std::move(t)) {}

    py::dict train_epoch(const Array& xi, const Array& xt) {
        LossBreakdown b = trainer_.train_epoch(to_tensor(xi), to_tensor(xt));
        py::dict d;
        d["recon_i"] = b.recon_i;
        d["recon_t"] = b.recon_t;
        d["js_mi"] = b.js_mi;
        d["skl"] = b.skl;
        d["tc_i"] = b.tc_i;
        d["tc_t"] = b.tc_t;
        d["balance"] = b.bal;
        d["total"] = b.total;
        return d;
    }

    py::array_t<double> encode_mu(const Array& x, const std::string& modality) const {
        const Mlp& enc = pick(modality);
        return to_array(encode_value(enc, to_tensor(x)));
    }

    py::array_t<double> encode_bits(const Array& x, const std::string& modality) const {
        const Mlp& enc = pick(modality);
        return to_array(unpack(binarize(encode_value(enc, to_tensor(x)))));
    }

    std::size_t epoch() const { return trainer_.epoch(); }
    std::size_t code_bits() const { return trainer_.bundle().code_bits; }
    void save(const std::string& path) const { trainer_.save(path); }
    static Model load(const std::string& path) { return Model(Trainer::load(path)); }

  private:
    const Mlp& pick(const std::string& m) const {
        if (m == "i") return trainer_.bundle().encoder_i;
        if (m == "t") return trainer_.bundle().encoder_t;
        throw std::invalid_argument("modality must be 'i' or 't'");
    }
    Trainer trainer_;
};

TrainConfig make_config(std::size_t batch_size, std::size_t epochs, std::uint64_t seed,
                        double lr_main, double lr_decoders, double momentum,
                        double weight_decay, double l1, double l2, double l3, double l4,
                        std::size_t critic_steps) {
    TrainConfig cfg;
    cfg.batch_size = batch_size;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.lr_main = lr_main;
    cfg.lr_decoders = lr_decoders;
    cfg.momentum = momentum;
    cfg.weight_decay = weight_decay;
    cfg.lambdas = Lambdas{l1, l2, l3, l4};
    cfg.critic_steps_per_main = critic_steps;
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_cmimh, m) {
    m.doc() = "cross-modal binary hashing: training, encoding, retrieval metrics";

    py::class_<Model>(m, "Model")
        .def(py::init([](std::size_t d_i, std::size_t d_t, std::size_t code_bits,
                         std::size_t batch_size, std::size_t epochs, std::uint64_t seed,
                         double lr_main, double lr_decoders, double momentum,
                         double weight_decay, double l1, double l2, double l3, double l4,
                         std::size_t critic_steps, std::size_t encoder_hidden,
                         std::size_t critic_hidden, std::size_t critic_embed,
                         std::size_t tc_hidden) {
                 NetSizes sizes{encoder_hidden, critic_hidden, critic_embed, tc_hidden};
                 return Model(d_i, d_t, code_bits,
                              make_config(batch_size, epochs, seed, lr_main, lr_decoders,
                                          momentum, weight_decay, l1, l2, l3, l4,
                                          critic_steps),
                              sizes);
             }),
             py::arg("d_i"), py::arg("d_t"), py::arg("code_bits") = 16,
             py::arg("batch_size") = 128, py::arg("epochs") = 100, py::arg("seed") = 0,
             py::arg("lr_main") = 0.01, py::arg("lr_decoders") = 0.001,
             py::arg("momentum") = 0.9, py::arg("weight_decay") = 1e-4,
             py::arg("l1") = 1.5, py::arg("l2") = 1.0, py::arg("l3") = 0.25,
             py::arg("l4") = 0.01, py::arg("critic_steps") = 1,
             py::arg("encoder_hidden") = 1024, py::arg("critic_hidden") = 512,
             py::arg("critic_embed") = 512, py::arg("tc_hidden") = 512)
        .def("train_epoch", &Model::train_epoch, py::arg("x_i"), py::arg("x_t"))
        .def("encode_mu", &Model::encode_mu, py::arg("x"), py::arg("modality"))
        .def("encode_bits", &Model::encode_bits, py::arg("x"), py::arg("modality"))
        .def("save", &Model::save, py::arg("path"))
        .def_static("load", &Model::load, py::arg("path"))
        .def_property_readonly("epoch", &Model::epoch)
        .def_property_readonly("code_bits", &Model::code_bits);

    m.def(
        "generate_synthetic",
        [](std::size_t n, std::size_t classes, std::size_t d_i, std::size_t d_t,
           std::uint64_t seed, std::size_t n_query, std::size_t n_train,
           std::uint64_t split_seed) {
            SyntheticSpec spec;
            spec.n = n;
            spec.classes = classes;
            spec.d_i = d_i;
            spec.d_t = d_t;
            spec.seed = seed;
            PairedDataset ds = generate_synthetic(spec);
            split(ds, n_query, n_train, split_seed);
            py::dict d;
            d["x_i"] = to_array(ds.x_i);
            d["x_t"] = to_array(ds.x_t);
            d["labels"] = to_array(*ds.labels);
            auto rows = [](const std::vector<std::size_t>& v) { return v; };
            d["train_rows"] = rows(ds.rows_with(SplitTag::train));
            d["query_rows"] = rows(ds.rows_with(SplitTag::query));
            d["database_rows"] = rows(ds.rows_with(SplitTag::database));
            return d;
        },
        py::arg("n") = 2000, py::arg("classes") = 10, py::arg("d_i") = 64,
        py::arg("d_t") = 48, py::arg("seed") = 1, py::arg("n_query") = 200,
        py::arg("n_train") = 1800, py::arg("split_seed") = 2);

    m.def(
        "evaluate",
        [](const Array& query_bits, const Array& db_bits, const Array& query_labels,
           const Array& db_labels, std::size_t k) {
            return result_dict(evaluate(pack_array(query_bits), pack_array(db_bits),
                                        to_tensor(query_labels), to_tensor(db_labels), k));
        },
        py::arg("query_bits"), py::arg("db_bits"), py::arg("query_labels"),
        py::arg("db_labels"), py::arg("k") = 1000);

    m.def(
        "hamming_distance",
        [](const Array& a, const Array& b) {
            PackedCodes pa = pack_array(a), pb = pack_array(b);
            if (pa.n != 1 || pb.n != 1)
                throw std::invalid_argument("expected single-row bit arrays");
            return hamming_distance(pa, 0, pb, 0);
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "code_stats",
        [](const Array& mu) {
            Tensor t = to_tensor(mu);
            return stats_dict(code_stats(binarize(t), t));
        },
        py::arg("mu"));

    m.def("kl_bernoulli",
          [](const std::vector<double>& p, const std::vector<double>& q) {
              return bernoulli::kl_bernoulli(bernoulli::clamp(p), bernoulli::clamp(q));
          });
    m.def("skl_bernoulli",
          [](const std::vector<double>& p, const std::vector<double>& q) {
              return bernoulli::skl_bernoulli(bernoulli::clamp(p), bernoulli::clamp(q));
          });

    m.def("exact_mi", &oracles::exact_mi, py::arg("joint"), py::arg("rows"),
          py::arg("cols"));
    m.def("exact_kl", &oracles::exact_kl, py::arg("p"), py::arg("q"));
    m.def("exact_jsd", &oracles::exact_jsd, py::arg("p"), py::arg("q"));
    m.def("exact_tc", &oracles::exact_tc, py::arg("code_dist"), py::arg("bits"));
}
