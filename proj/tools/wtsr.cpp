// Command-line driver: train / infer / eval / texture-map / metric / degrade.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "wtsr/config.hpp"
#include "wtsr/image_io.hpp"
#include "wtsr/metrics.hpp"
#include "wtsr/pipeline.hpp"
#include "wtsr/texture.hpp"

namespace {

using namespace wtsr;

struct TrainArgs {
  std::string stage;
  std::string config;
};

struct InferArgs {
  std::string bundle;
  std::string input;
  std::string output;
};

struct EvalArgs {
  std::string method;
  std::string bundle;
  std::string manifest;
  int64_t scale = 3;
  std::string report;
  int64_t shave = -1;  // -1 means "use the scale"
};

struct MapArgs {
  std::string input;
  std::string output;
};

struct MetricArgs {
  std::string kind;
  std::string a;
  std::string b;
  int64_t shave = 0;
};

struct DegradeArgs {
  std::string input;
  int64_t scale = 3;
  std::string output;
};

int run_train(const TrainArgs& args) {
  TrainConfig cfg = parse_config(args.config);
  if (args.stage == "backbone") {
    train_backbone(cfg);
    std::cout << "wrote " << cfg.output_dir << "/backbone.ckpt\n";
  } else if (args.stage == "tpm") {
    StageCheckpoint backbone = load_checkpoint(cfg.output_dir + "/backbone.ckpt");
    auto samples = build_tpm_dataset(backbone, cfg);
    train_tpm(samples, cfg);
    std::cout << "wrote " << cfg.output_dir << "/tpm.ckpt\n";
  } else {
    StageCheckpoint backbone = load_checkpoint(cfg.output_dir + "/backbone.ckpt");
    StageCheckpoint tpm = load_checkpoint(cfg.output_dir + "/tpm.ckpt");
    train_tfm(cfg, backbone, tpm);
    std::cout << "wrote " << cfg.output_dir << "/tfm.ckpt\n";
  }
  return 0;
}

int run_infer(const InferArgs& args) {
  PipelineBundle bundle = load_bundle(args.bundle);
  Tensor lr = load_image_tensor(args.input);
  Tensor sr = infer(bundle, lr);
  save_tensor_image(sr, args.output);
  std::cout << "wrote " << args.output << " (" << sr.shape().w << "x" << sr.shape().h << ")\n";
  return 0;
}

int run_eval(const EvalArgs& args) {
  const EvalMethod method = eval_method_from_name(args.method);
  PipelineBundle bundle;
  PipelineBundle* bundle_ptr = nullptr;
  if (method == EvalMethod::bundle) {
    if (args.bundle.empty()) throw Error("eval: --method bundle requires --bundle DIR");
    bundle = load_bundle(args.bundle);
    bundle_ptr = &bundle;
  }
  const DatasetManifest manifest = load_manifest(args.manifest);
  const int64_t shave = args.shave < 0 ? args.scale : args.shave;
  EvalReport report = evaluate_benchmark(method, manifest, args.scale, shave, bundle_ptr);
  std::ofstream out(args.report);
  if (!out) throw Error("cannot open " + args.report + " for writing");
  out << report_json(report) << "\n";
  std::cout << report_table(report);
  return 0;
}

int run_texture_map(const MapArgs& args) {
  Tensor img = load_image_tensor(args.input);
  EdgeMap map = texture_map(img);
  save_tensor_image(map.data, args.output);
  return 0;
}

int run_metric(const MetricArgs& args) {
  Tensor a = load_image_tensor(args.a);
  Tensor b = load_image_tensor(args.b);
  const double v = args.kind == "psnr" ? psnr(a, b, args.shave) : ssim(a, b, args.shave);
  std::printf("%.4f\n", v);
  return 0;
}

int run_degrade(const DegradeArgs& args) {
  Tensor hr = load_image_tensor(args.input);
  Tensor lr = degrade_bicubic(hr, args.scale);
  save_tensor_image(lr, args.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weak-texture-guided super-resolution pipeline"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train one pipeline stage");
  train->add_option("--stage", train_args.stage, "pipeline stage")
      ->required()
      ->check(CLI::IsMember({"backbone", "tpm", "tfm"}));
  train->add_option("--config", train_args.config, "JSON config path")->required();

  InferArgs infer_args;
  CLI::App* inf = app.add_subcommand("infer", "super-resolve one image");
  inf->add_option("--bundle", infer_args.bundle, "checkpoint directory")->required();
  inf->add_option("--input", infer_args.input, "LR input image")->required();
  inf->add_option("--output", infer_args.output, "SR output image")->required();

  EvalArgs eval_args;
  CLI::App* ev = app.add_subcommand("eval", "score a benchmark manifest");
  ev->add_option("--method", eval_args.method, "bicubic, bundle, or identity")
      ->required()
      ->check(CLI::IsMember({"bicubic", "bundle", "identity"}));
  ev->add_option("--bundle", eval_args.bundle, "checkpoint directory (bundle method)");
  ev->add_option("--manifest", eval_args.manifest, "dataset manifest JSON")->required();
  ev->add_option("--scale", eval_args.scale, "upscale factor")->required();
  ev->add_option("--report", eval_args.report, "output report JSON path")->required();
  ev->add_option("--shave", eval_args.shave, "border pixels to ignore (default: scale)");

  MapArgs map_args;
  CLI::App* tm = app.add_subcommand("texture-map", "write the Sobel texture map");
  tm->add_option("--input", map_args.input, "input image")->required();
  tm->add_option("--output", map_args.output, "grayscale output image")->required();

  MetricArgs metric_args;
  CLI::App* met = app.add_subcommand("metric", "print PSNR or SSIM of two images");
  met->add_option("--kind", metric_args.kind, "psnr or ssim")
      ->required()
      ->check(CLI::IsMember({"psnr", "ssim"}));
  met->add_option("a", metric_args.a, "first image")->required();
  met->add_option("b", metric_args.b, "second image")->required();
  met->add_option("--shave", metric_args.shave, "border pixels to ignore");

  DegradeArgs degrade_args;
  CLI::App* deg = app.add_subcommand("degrade", "bicubic-downscale an HR image");
  deg->add_option("--input", degrade_args.input, "HR input image")->required();
  deg->add_option("--scale", degrade_args.scale, "downscale factor")->required();
  deg->add_option("--output", degrade_args.output, "LR output image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train->parsed()) return run_train(train_args);
    if (inf->parsed()) return run_infer(infer_args);
    if (ev->parsed()) return run_eval(eval_args);
    if (tm->parsed()) return run_texture_map(map_args);
    if (met->parsed()) return run_metric(metric_args);
    if (deg->parsed()) return run_degrade(degrade_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
