// pybind11 front end. Tensors cross the boundary as NCHW float32 numpy
// arrays; everything is copied, so Python never aliases C++ memory.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>

#include <cstring>
#include <string>
#include <vector>

#include "wtsr/config.hpp"
#include "wtsr/image_io.hpp"
#include "wtsr/metrics.hpp"
#include "wtsr/pipeline.hpp"
#include "wtsr/tensor.hpp"
#include "wtsr/texture.hpp"

namespace py = pybind11;
using namespace wtsr;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const Array& a) {
  if (a.ndim() != 4) throw Error("expected a 4-d (n, c, h, w) array");
  Tensor t(a.shape(0), a.shape(1), a.shape(2), a.shape(3));
  std::memcpy(t.data(), a.data(), sizeof(float) * static_cast<size_t>(t.size()));
  return t;
}

py::array_t<float> array_from(const Tensor& t) {
  const Shape s = t.shape();
  py::array_t<float> a({static_cast<py::ssize_t>(s.n), static_cast<py::ssize_t>(s.c),
                        static_cast<py::ssize_t>(s.h), static_cast<py::ssize_t>(s.w)});
  std::memcpy(a.mutable_data(), t.data(), sizeof(float) * static_cast<size_t>(t.size()));
  return a;
}

}  // namespace

PYBIND11_MODULE(_wtsr, m) {
  m.doc() = "texture-guided super-resolution core (NCHW float32 arrays)";
  m.attr("__version__") = "0.1.0";

  m.def(
      "conv2d",
      [](const Array& x, const Array& w, py::object bias, int64_t pad) {
        std::vector<float> b;
        if (!bias.is_none()) {
          Array ba = py::cast<Array>(bias);
          if (ba.ndim() != 1) throw Error("bias must be a 1-d array");
          b.assign(ba.data(), ba.data() + ba.shape(0));
        }
        return array_from(conv2d<float>(tensor_from(x), tensor_from(w), b, pad));
      },
      py::arg("input"), py::arg("weight"), py::arg("bias") = py::none(), py::arg("pad") = 0,
      "Stride-1 zero-padded convolution; weight is (out_c, in_c, k, k).");

  m.def(
      "global_avg_pool", [](const Array& x) { return array_from(global_avg_pool(tensor_from(x))); },
      py::arg("x"), "Per-channel spatial mean, shape (n, c, 1, 1).");

  m.def(
      "pixel_shuffle",
      [](const Array& x, int64_t r) { return array_from(pixel_shuffle(tensor_from(x), r)); },
      py::arg("x"), py::arg("r"), "(n, c*r^2, h, w) -> (n, c, h*r, w*r).");

  m.def(
      "pixel_unshuffle",
      [](const Array& x, int64_t r) { return array_from(pixel_unshuffle(tensor_from(x), r)); },
      py::arg("x"), py::arg("r"));

  m.def(
      "resize_bicubic",
      [](const Array& x, int64_t out_h, int64_t out_w, bool antialias) {
        return array_from(resize_bicubic(tensor_from(x), out_h, out_w, antialias));
      },
      py::arg("x"), py::arg("out_h"), py::arg("out_w"), py::arg("antialias") = true,
      "Cubic resample (a = -0.5); antialiasing widens the kernel on downscale.");

  m.def(
      "rgb_to_luma", [](const Array& x) { return array_from(rgb_to_luma(tensor_from(x))); },
      py::arg("x"), "BT.601 full-range luma of an (n, 3, h, w) image.");

  m.def(
      "sobel_magnitude",
      [](const Array& x) { return array_from(sobel_magnitude(tensor_from(x)).data); },
      py::arg("x"),
      "Replicate-padded Sobel gradient magnitude of a single-channel plane, scaled to [0, 1].");

  m.def(
      "texture_map", [](const Array& x) { return array_from(texture_map(tensor_from(x)).data); },
      py::arg("x"), "Edge map: luma (for 3-channel input) followed by sobel_magnitude.");

  m.def(
      "diff_map",
      [](const Array& a, const Array& b) {
        return array_from(diff_map(tensor_from(a), tensor_from(b)).data);
      },
      py::arg("reference"), py::arg("output"), "Signed luma difference, reference minus output.");

  m.def(
      "degrade",
      [](const Array& hr, int64_t scale) {
        return array_from(degrade_bicubic(tensor_from(hr), scale));
      },
      py::arg("hr"), py::arg("scale"),
      "Crop to a multiple of scale, then antialiased bicubic downscale.");

  m.def(
      "psnr",
      [](const Array& a, const Array& b, int64_t shave) {
        return psnr(tensor_from(a), tensor_from(b), shave);
      },
      py::arg("a"), py::arg("b"), py::arg("shave") = 0,
      "PSNR in dB on the luma plane (99 dB cap); 3-channel inputs use video-range luma.");

  m.def(
      "ssim",
      [](const Array& a, const Array& b, int64_t shave) {
        return ssim(tensor_from(a), tensor_from(b), shave);
      },
      py::arg("a"), py::arg("b"), py::arg("shave") = 0,
      "Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5).");

  m.def(
      "load_image", [](const std::string& path) { return array_from(load_image_tensor(path)); },
      py::arg("path"), "Read a PNG/PPM/PGM file as a (1, 3, h, w) array in [0, 1].");

  m.def(
      "save_image",
      [](const Array& x, const std::string& path) { save_tensor_image(tensor_from(x), path); },
      py::arg("x"), py::arg("path"), "Quantize a 1- or 3-channel image to 8 bits and write it.");

  m.def(
      "train",
      [](const std::string& config_path) {
        TrainConfig cfg = parse_config(config_path);
        StageCheckpoint backbone = train_backbone(cfg);
        auto samples = build_tpm_dataset(backbone, cfg);
        StageCheckpoint tpm = train_tpm(samples, cfg);
        train_tfm(cfg, backbone, tpm);
        return cfg.output_dir;
      },
      py::arg("config_path"),
      "Run all three training stages from a JSON config; returns the checkpoint directory.");

  m.def(
      "infer",
      [](const std::string& bundle_dir, const Array& lr) {
        PipelineBundle bundle = load_bundle(bundle_dir);
        return array_from(infer(bundle, tensor_from(lr)));
      },
      py::arg("bundle_dir"), py::arg("lr"),
      "Super-resolve a (1, 3, h, w) LR array with a trained checkpoint directory.");
}
