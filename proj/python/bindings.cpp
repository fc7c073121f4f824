#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "coatsynth/baselines.hpp"
#include "coatsynth/dataset.hpp"
#include "coatsynth/eval.hpp"
#include "coatsynth/io.hpp"
#include "coatsynth/mesh.hpp"
#include "coatsynth/render.hpp"
#include "coatsynth/toyflow.hpp"

namespace py = pybind11;
using namespace coatsynth;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const ColorImage& img) {
    Array out({img.height(), img.width(), 3});
    std::memcpy(out.mutable_data(), img.data().data(), img.data().size() * sizeof(double));
    return out;
}

Array to_numpy(const ScalarMap& map) {
    Array out({map.height(), map.width()});
    std::memcpy(out.mutable_data(), map.data().data(), map.data().size() * sizeof(double));
    return out;
}

ColorImage color_from(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidArgument("expected an (H, W, 3) array");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return ColorImage(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

ScalarMap scalar_from(const Array& a) {
    if (a.ndim() != 2) throw InvalidArgument("expected an (H, W) array");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return ScalarMap(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

py::dict stack_dict(const ChannelStack& s) {
    py::dict d;
    d["image"] = to_numpy(s.image);
    d["albedo"] = to_numpy(s.albedo);
    d["normals"] = to_numpy(s.normals);
    d["depth"] = to_numpy(s.depth);
    d["shading"] = to_numpy(s.shading);
    d["residual"] = to_numpy(s.residual);
    d["object_mask"] = to_numpy(s.object_mask);
    return d;
}

SceneSpec scene_from(const std::string& json) { return io::scene_from_json(nlohmann::json::parse(json)); }

Array vertices_of(const TriangleMesh& m) {
    Array out({static_cast<py::ssize_t>(m.vertex_count()), py::ssize_t{3}});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        const Vec3 v = m.vertices()[i];
        r(i, 0) = v.x;
        r(i, 1) = v.y;
        r(i, 2) = v.z;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Synthetic coating renderer, baselines and toy flow model";
    m.attr("__version__") = COATSYNTH_VERSION;

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);

    py::class_<TraitVector>(m, "TraitVector")
        .def(py::init([](double r, double me, double tr, double th) {
                 TraitVector t{r, me, tr, th};
                 t.validate();
                 return t;
             }),
             py::arg("roughness") = 0.5, py::arg("metalness") = 0.0, py::arg("transmission") = 0.0,
             py::arg("thickness") = 0.0)
        .def_readonly("roughness", &TraitVector::roughness)
        .def_readonly("metalness", &TraitVector::metalness)
        .def_readonly("transmission", &TraitVector::transmission)
        .def_readonly("thickness", &TraitVector::thickness)
        .def("__eq__", [](const TraitVector& a, const TraitVector& b) { return a == b; })
        .def("__repr__", [](const TraitVector& t) {
            return "TraitVector(roughness=" + std::to_string(t.roughness) +
                   ", metalness=" + std::to_string(t.metalness) + ", transmission=" + std::to_string(t.transmission) +
                   ", thickness=" + std::to_string(t.thickness) + ")";
        });

    m.def("icosphere_vertices", [](int subdivisions, double radius) { return vertices_of(make_icosphere(subdivisions, radius)); },
          py::arg("subdivisions"), py::arg("radius") = 1.0);
    m.def(
        "extruded_icosphere_vertices",
        [](int subdivisions, double epsilon, double scale) {
            return vertices_of(extrude_cover(make_icosphere(subdivisions), epsilon, scale));
        },
        py::arg("subdivisions"), py::arg("epsilon") = kCoverEpsilon, py::arg("scale") = kCoverScale);

    m.def("reference_scene", [](int side) { return io::to_json(make_reference_scene(side)).dump(); },
          py::arg("side") = 256, "Fixed test scene as a JSON string.");
    m.def("render", [](const std::string& scene) { return stack_dict(render_uncoated(scene_from(scene))); },
          py::arg("scene"));
    m.def(
        "render_coated",
        [](const std::string& scene_json, const TraitVector& traits, std::array<double, 3> color,
           std::optional<Array> mask) {
            const SceneSpec scene = scene_from(scene_json);
            CoatingSpec coat;
            coat.traits = traits;
            coat.albedo = Rgb{color[0], color[1], color[2]};
            coat.mask = mask ? scalar_from(*mask) : render_uncoated(scene).object_mask;
            return stack_dict(render_coated(scene, coat));
        },
        py::arg("scene"), py::arg("traits"), py::arg("color"), py::arg("mask") = py::none());
    m.def(
        "generate_mask",
        [](const std::string& scene, std::uint64_t seed, double coverage) {
            Rng rng(seed);
            return to_numpy(generate_mask(render_uncoated(scene_from(scene)), rng, coverage));
        },
        py::arg("scene"), py::arg("seed"), py::arg("coverage") = 0.5);

    m.def(
        "blend_if",
        [](const Array& base, const Array& coat, const Array& mask, std::array<double, 4> t) {
            const BlendIfThresholds th{t[0], t[1], t[2], t[3]};
            th.validate();
            return to_numpy(blend_if(color_from(base), color_from(coat), scalar_from(mask), th));
        },
        py::arg("base"), py::arg("coat"), py::arg("mask"), py::arg("thresholds") = std::array<double, 4>{0.0, 0.25, 0.75, 1.0});
    m.def(
        "color_blend",
        [](const Array& base, const Array& coat, const Array& mask) {
            return to_numpy(color_blend(color_from(base), color_from(coat), scalar_from(mask)));
        },
        py::arg("base"), py::arg("coat"), py::arg("mask"));
    m.def(
        "luminance", [](std::array<double, 3> c) { return luminance(Rgb{c[0], c[1], c[2]}); }, py::arg("rgb"));

    m.def(
        "psnr",
        [](const Array& a, const Array& b, double peak) {
            return psnr({a.data(), static_cast<std::size_t>(a.size())}, {b.data(), static_cast<std::size_t>(b.size())}, peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);

    m.def(
        "conditioning_width",
        [](int image_channels, int albedo_channels, int mask_channels, int patch, int mask_factor, int latent_channels) {
            return flow::conditioning_layout(image_channels, albedo_channels, mask_channels, patch, mask_factor,
                                             latent_channels)
                .total();
        },
        py::arg("image_channels"), py::arg("albedo_channels"), py::arg("mask_channels"), py::arg("patch"),
        py::arg("mask_factor") = 1, py::arg("latent_channels") = 0);
    m.def(
        "grad_check",
        [](std::uint64_t seed) {
            Rng rng(seed);
            const flow::FlowModelParams model = flow::make_reference_model(rng);
            const flow::FlowInstance inst = flow::make_reference_instance(4, model.token_dim, model.cond_dim, rng);
            return py::make_tuple(model.parameter_count(), flow::grad_check(model, inst));
        },
        py::arg("seed") = 0, "Returns (parameter count, max relative error) for the reference model.");
    m.def("set_thread_count", &set_thread_count, py::arg("n"));
}
