#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ocsvdd/auc.hpp"
#include "ocsvdd/fidelity.hpp"
#include "ocsvdd/loo.hpp"
#include "ocsvdd/model_io.hpp"
#include "ocsvdd/svdd.hpp"
#include "ocsvdd/synth.hpp"
#include "ocsvdd/task.hpp"

namespace py = pybind11;
using namespace ocsvdd;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw DimensionError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Array to_array(const std::vector<double>& v) {
    // Shape-container form: the count-only constructor mis-strides on older pybind11.
    return Array(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

py::dict grad_result(const GradCheckResult& r) {
    py::dict d;
    d["max_rel_error"] = r.max_rel_error;
    d["worst_index"] = r.worst_index;
    d["analytic"] = r.analytic_at_worst;
    d["numeric"] = r.numeric_at_worst;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Deep SVDD and Meta-SVDD one-class detectors";

    auto base = py::register_exception<Error>(m, "OcsvddError", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());

    py::class_<EncoderConfig>(m, "EncoderConfig")
        .def(py::init<>())
        .def_readwrite("input_dim", &EncoderConfig::input_dim)
        .def_readwrite("hidden_dims", &EncoderConfig::hidden_dims)
        .def_readwrite("latent_dim", &EncoderConfig::latent_dim)
        .def_readwrite("final_bias", &EncoderConfig::final_bias);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("center_floor", &TrainConfig::center_floor);

    py::class_<MetaConfig>(m, "MetaConfig")
        .def(py::init<>())
        .def_readwrite("samples", &MetaConfig::samples)
        .def_readwrite("meta_batch", &MetaConfig::meta_batch)
        .def_readwrite("eta", &MetaConfig::eta)
        .def_readwrite("support_size", &MetaConfig::support_size)
        .def_readwrite("query_in", &MetaConfig::query_in)
        .def_readwrite("query_out", &MetaConfig::query_out)
        .def_readwrite("lr", &MetaConfig::lr)
        .def_readwrite("meta_steps", &MetaConfig::meta_steps)
        .def_readwrite("seed", &MetaConfig::seed)
        .def_readwrite("inference_hidden", &MetaConfig::inference_hidden);

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("n_tasks", &SynthConfig::n_tasks)
        .def_readwrite("dim", &SynthConfig::dim)
        .def_readwrite("samples_per_class", &SynthConfig::samples_per_class)
        .def_readwrite("separation", &SynthConfig::separation)
        .def_readwrite("seed", &SynthConfig::seed);

    py::class_<LooConfig>(m, "LooConfig")
        .def(py::init<>())
        .def_readwrite("encoder", &LooConfig::encoder)
        .def_readwrite("train", &LooConfig::train)
        .def_readwrite("meta", &LooConfig::meta)
        .def_readwrite("shared_meta", &LooConfig::shared_meta);

    py::class_<TaskDataset>(m, "TaskDataset")
        .def(py::init([](std::string id, const Array& features, std::vector<int> labels) {
                 TaskDataset t{std::move(id), to_matrix(features), std::move(labels)};
                 t.validate();
                 return t;
             }),
             py::arg("task_id"), py::arg("features"), py::arg("labels"))
        .def_readonly("task_id", &TaskDataset::task_id)
        .def_property_readonly("features", [](const TaskDataset& t) { return to_array(t.features); })
        .def_readonly("labels", &TaskDataset::labels)
        .def("save", [](const TaskDataset& t, const std::filesystem::path& p) { save_task(t, p); });

    py::class_<SvddModel>(m, "SvddModel")
        .def_readonly("config", &SvddModel::config)
        .def_property_readonly("center", [](const SvddModel& s) { return to_array(s.center.value); })
        .def("encode", [](const SvddModel& s, const Array& x) { return to_array(encode(to_matrix(x), s.params)); })
        .def("score", [](const SvddModel& s, const Array& x) { return to_array(score(to_matrix(x), s)); })
        .def("to_bytes", [](const SvddModel& s) { return py::bytes(serialize_model(to_model_file(s))); })
        .def("save", [](const SvddModel& s, const std::filesystem::path& p) { save_model(to_model_file(s), p); })
        .def_static("load", [](const std::filesystem::path& p) { return svdd_model_from_file(load_model(p)); });

    py::class_<MetaModel>(m, "MetaModel")
        .def_readonly("config", &MetaModel::config)
        .def("to_bytes", [](const MetaModel& s) { return py::bytes(serialize_model(to_model_file(s))); })
        .def("save", [](const MetaModel& s, const std::filesystem::path& p) { save_model(to_model_file(s), p); })
        .def_static("load", [](const std::filesystem::path& p) { return meta_model_from_file(load_model(p)); });

    m.def(
        "train_ocsvdd",
        [](const Array& x, const TrainConfig& train, std::optional<EncoderConfig> encoder) {
            const Matrix data = to_matrix(x);
            EncoderConfig enc = encoder.value_or(EncoderConfig{});
            enc.input_dim = data.cols();
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train_ocsvdd(data, train, enc);
            }
            return py::make_tuple(std::move(r.model), r.epoch_losses);
        },
        py::arg("x"), py::arg("train") = TrainConfig{}, py::arg("encoder") = py::none(),
        "Train on in-distribution rows. Returns (model, per-epoch losses).");

    m.def(
        "auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) { return auc(scores, labels); },
        py::arg("scores"), py::arg("labels"), "ROC AUC with label -1 as the detection-positive class.");

    m.def("generate_synthetic", &generate_synthetic, py::arg("config") = SynthConfig{});
    m.def("write_synthetic", &write_synthetic, py::arg("config"), py::arg("directory"));
    m.def("load_task", &load_task, py::arg("path"));
    m.def("load_task_dir", &load_task_dir, py::arg("directory"));

    m.def(
        "meta_train",
        [](const std::vector<TaskDataset>& tasks, const std::vector<std::string>& holdout, const MetaConfig& meta,
           std::optional<EncoderConfig> encoder) {
            if (tasks.empty()) throw InputError("meta_train: no tasks");
            EncoderConfig enc = encoder.value_or(EncoderConfig{});
            enc.input_dim = tasks.front().dim();
            MetaTrainResult r;
            {
                py::gil_scoped_release release;
                r = meta_train(tasks, holdout, enc, meta);
            }
            return py::make_tuple(std::move(r.model), r.step_losses);
        },
        py::arg("tasks"), py::arg("holdout") = std::vector<std::string>{}, py::arg("meta") = MetaConfig{},
        py::arg("encoder") = py::none(), "Meta-train on every task not in holdout. Returns (model, per-step losses).");

    m.def(
        "adapt_and_score",
        [](const Array& support, const Array& queries, const MetaModel& model, std::optional<std::size_t> sampled,
           std::uint64_t seed) {
            return to_array(adapt_and_score(to_matrix(support), to_matrix(queries), model, AdaptOptions{sampled, seed}));
        },
        py::arg("support"), py::arg("queries"), py::arg("model"), py::arg("sampled") = py::none(), py::arg("seed") = 0);

    m.def(
        "eval_loo",
        [](const std::vector<TaskDataset>& tasks, const LooConfig& config) {
            AucTable table;
            {
                py::gil_scoped_release release;
                table = eval_loo(tasks, config);
            }
            py::list rows;
            for (const auto& r : table.rows) rows.append(py::make_tuple(r.task_id, r.oc_svdd_auc, r.meta_svdd_auc));
            return rows;
        },
        py::arg("tasks"), py::arg("config") = LooConfig{},
        "Leave-one-out evaluation. Returns [(task_id, oc_svdd_auc, meta_svdd_auc)] sorted by task_id.");

    m.def(
        "gradient_fidelity",
        [](std::uint64_t seed) {
            const FidelityReport r = gradient_fidelity(seed);
            py::dict d;
            d["ocsvdd"] = grad_result(r.ocsvdd);
            d["ocsvdd_bias"] = grad_result(r.ocsvdd_bias);
            d["meta"] = grad_result(r.meta);
            d["worst"] = r.worst();
            return d;
        },
        py::arg("seed") = 0);
}
