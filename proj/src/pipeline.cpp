#include "wtsr/pipeline.hpp"

#include <json.hpp>

#include <bit>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "wtsr/image_io.hpp"

namespace wtsr {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'W', 'T', 'S', 'R', 'C', 'K', 'P', 'T'};
constexpr int64_t kFormatVersion = 1;

json spec_json(const NetworkSpec& s) {
  return json{{"role", role_name(s.role)},
              {"in_channels", s.in_channels},
              {"out_channels", s.out_channels},
              {"feature_channels", s.feature_channels},
              {"n_groups", s.n_groups},
              {"n_blocks_per_group", s.n_blocks_per_group},
              {"ca_reduction", s.ca_reduction},
              {"scale", s.scale},
              {"has_upscaler", s.has_upscaler}};
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec s;
  try {
    s.role = role_from_name(j.at("role").get<std::string>());
    s.in_channels = j.at("in_channels").get<int64_t>();
    s.out_channels = j.at("out_channels").get<int64_t>();
    s.feature_channels = j.at("feature_channels").get<int64_t>();
    s.n_groups = j.at("n_groups").get<int64_t>();
    s.n_blocks_per_group = j.at("n_blocks_per_group").get<int64_t>();
    s.ca_reduction = j.at("ca_reduction").get<int64_t>();
    s.scale = j.at("scale").get<int64_t>();
    s.has_upscaler = j.at("has_upscaler").get<bool>();
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint header: bad spec field: ") + e.what());
  }
  s.validate();
  return s;
}

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[size_t(rng() % i)]);
}

// Stacks [1,c,h,w] crops into one [k,c,h,w] batch.
Tensor stack_batch(const std::vector<Tensor>& items) {
  const Shape s = items.front().shape();
  Tensor out(int64_t(items.size()), s.c, s.h, s.w);
  const int64_t per = s.c * s.h * s.w;
  for (size_t i = 0; i < items.size(); ++i)
    std::memcpy(out.data() + int64_t(i) * per, items[i].data(), size_t(per) * sizeof(float));
  return out;
}

struct SampleOrigin {
  int64_t image = 0;
  int64_t y = 0;
  int64_t x = 0;
};

// Epoch = patches_per_image_per_epoch random crops from every image,
// shuffled, then consumed in batches (last batch may be short).
std::vector<SampleOrigin> draw_epoch_origins(const std::vector<std::pair<int64_t, int64_t>>& ranges,
                                             int64_t per_image, std::mt19937_64& rng) {
  std::vector<SampleOrigin> origins;
  origins.reserve(ranges.size() * size_t(per_image));
  for (size_t img = 0; img < ranges.size(); ++img) {
    const auto [ry, rx] = ranges[img];
    for (int64_t k = 0; k < per_image; ++k) {
      SampleOrigin o;
      o.image = int64_t(img);
      o.y = int64_t(rng() % uint64_t(ry));
      o.x = int64_t(rng() % uint64_t(rx));
      origins.push_back(o);
    }
  }
  shuffle_vec(origins, rng);
  return origins;
}

void append_log(const std::string& output_dir, Stage stage, int64_t epoch, double mean_loss,
                double wall_seconds) {
  std::filesystem::create_directories(output_dir);
  const std::string path = output_dir + "/log.jsonl";
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot open " + path + " for appending");
  json line{{"stage", stage_name(stage)},
            {"epoch", epoch},
            {"mean_loss", mean_loss},
            {"wall_seconds", wall_seconds}};
  out << line.dump() << "\n";
}

// Shared epoch loop: make_batch assembles (input, target) for a list of
// origins; the stage seed drives both sampling and init elsewhere.
void run_training(Network& net, const std::vector<std::pair<int64_t, int64_t>>& ranges,
                  const TrainConfig& cfg, int64_t epochs, Stage stage, uint64_t sampler_seed,
                  const std::function<std::pair<Tensor, Tensor>(const std::vector<SampleOrigin>&)>&
                      make_batch) {
  std::mt19937_64 rng(sampler_seed);
  for (int64_t epoch = 0; epoch < epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto origins = draw_epoch_origins(ranges, cfg.patches_per_image_per_epoch, rng);
    double loss_sum = 0.0;
    int64_t sample_count = 0;
    for (size_t start = 0; start < origins.size(); start += size_t(cfg.batch)) {
      const size_t stop = std::min(origins.size(), start + size_t(cfg.batch));
      const std::vector<SampleOrigin> batch(origins.begin() + int64_t(start),
                                            origins.begin() + int64_t(stop));
      auto [input, target] = make_batch(batch);
      Tensor pred = net.forward(input, true);
      LossValue loss = l1_loss(pred, target);
      if (!std::isfinite(loss.value))
        throw Error("stage " + std::string(stage_name(stage)) + " epoch " +
                    std::to_string(epoch) + ": non-finite loss, aborting");
      net.zero_grad();
      net.backward(loss.grad);
      net.adam_step(cfg.lr);
      loss_sum += loss.value * double(batch.size());
      sample_count += int64_t(batch.size());
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    append_log(cfg.output_dir, stage, epoch, loss_sum / double(sample_count), wall);
  }
}

void persist(StageCheckpoint& ckpt, const TrainConfig& cfg, const char* filename) {
  std::filesystem::create_directories(cfg.output_dir);
  ckpt.config_snapshot = serialize_config(cfg);
  save_checkpoint(ckpt, cfg.output_dir + "/" + filename);
}

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::rcan: return "rcan";
    case Stage::tpm: return "tpm";
    case Stage::tfm: return "tfm";
  }
  return "?";
}

Stage stage_from_name(const std::string& s) {
  if (s == "rcan") return Stage::rcan;
  if (s == "tpm") return Stage::tpm;
  if (s == "tfm") return Stage::tfm;
  throw Error("unknown stage '" + s + "'");
}

void save_checkpoint(const StageCheckpoint& ckpt, const std::string& path) {
  Network& net = const_cast<Network&>(ckpt.net);  // params() is non-const; no mutation here
  auto params = net.params();

  json manifest = json::array();
  int64_t offset = 0;
  for (const auto& p : params) {
    const Shape s = p.param->value.shape();
    manifest.push_back(json{{"name", p.name},
                            {"shape", {s.n, s.c, s.h, s.w}},
                            {"byte_offset", offset}});
    offset += s.elems() * int64_t(sizeof(float));
  }

  json header{{"format_version", kFormatVersion},
              {"stage", stage_name(ckpt.stage)},
              {"spec", spec_json(ckpt.spec)},
              {"step_count", net.step_count()},
              {"config", ckpt.config_snapshot.empty() ? json::object()
                                                      : json::parse(ckpt.config_snapshot)},
              {"tensors", manifest}};
  const std::string header_text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp + " for writing");
    out.write(kMagic, 8);
    const uint64_t len = header_text.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(header_text.data(), int64_t(header_text.size()));
    for (const auto& p : params) {
      const Tensor& t = p.param->value;
      out.write(reinterpret_cast<const char*>(t.data()), t.size() * int64_t(sizeof(float)));
    }
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

StageCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 8) != 0)
    throw Error("checkpoint " + path + ": bad magic");
  uint64_t header_len = 0;
  std::memcpy(&header_len, blob.data() + 8, 8);
  if (16 + header_len > blob.size())
    throw Error("checkpoint " + path + ": header length " + std::to_string(header_len) +
                " exceeds file size " + std::to_string(blob.size()));

  json header = json::parse(blob.substr(16, header_len), nullptr, false);
  if (header.is_discarded()) throw Error("checkpoint " + path + ": header is not valid JSON");

  const int64_t version = header.value("format_version", int64_t(-1));
  if (version != kFormatVersion)
    throw Error("checkpoint " + path + ": unsupported version " + std::to_string(version));

  StageCheckpoint ckpt;
  ckpt.stage = stage_from_name(header.at("stage").get<std::string>());
  ckpt.spec = spec_from_json(header.at("spec"));
  ckpt.net = build_network<float>(ckpt.spec, 0);
  ckpt.net.set_step_count(header.at("step_count").get<int64_t>());
  ckpt.config_snapshot = header.at("config").dump();

  const json& manifest = header.at("tensors");
  auto params = ckpt.net.params();
  if (!manifest.is_array() || manifest.size() != params.size())
    throw Error("checkpoint " + path + ": tensor manifest has " +
                std::to_string(manifest.size()) + " entries, expected " +
                std::to_string(params.size()));

  const size_t data_start = 16 + header_len;
  int64_t expected_bytes = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const json& entry = manifest[i];
    if (entry.at("name").get<std::string>() != params[i].name)
      throw Error("checkpoint " + path + ": tensor " + std::to_string(i) + " is '" +
                  entry.at("name").get<std::string>() + "', expected '" + params[i].name + "'");
    const auto dims = entry.at("shape").get<std::vector<int64_t>>();
    const Shape want = params[i].param->value.shape();
    if (dims.size() != 4 || Shape{dims[0], dims[1], dims[2], dims[3]} != want)
      throw Error("checkpoint " + path + ": tensor '" + params[i].name + "' shape mismatch");
    if (entry.at("byte_offset").get<int64_t>() != expected_bytes)
      throw Error("checkpoint " + path + ": tensor '" + params[i].name + "' offset mismatch");
    expected_bytes += want.elems() * int64_t(sizeof(float));
  }
  if (data_start + size_t(expected_bytes) != blob.size())
    throw Error("checkpoint " + path + ": data length mismatch (have " +
                std::to_string(blob.size() - data_start) + " bytes, manifest needs " +
                std::to_string(expected_bytes) + ")");

  size_t pos = data_start;
  for (auto& p : params) {
    Tensor& t = p.param->value;
    std::memcpy(t.data(), blob.data() + pos, size_t(t.size()) * sizeof(float));
    pos += size_t(t.size()) * sizeof(float);
  }
  return ckpt;
}

void PipelineBundle::validate() const {
  if (backbone.spec.scale != scale || tfm.spec.scale != scale)
    throw Error("bundle: checkpoint scales disagree (backbone " +
                std::to_string(backbone.spec.scale) + ", tfm " + std::to_string(tfm.spec.scale) +
                ", bundle " + std::to_string(scale) + ")");
  if (backbone.spec.in_channels != 3 || backbone.spec.out_channels != 3)
    throw Error("bundle: backbone must map 3 -> 3 channels");
  if (tpm.spec.in_channels != 1 || tpm.spec.out_channels != 1 || tpm.spec.has_upscaler)
    throw Error("bundle: texture predictor must map 1 -> 1 channels without an upscaler");
  if (tfm.spec.in_channels != 4 || tfm.spec.out_channels != 3)
    throw Error("bundle: texture fusion must map 4 -> 3 channels");
}

PipelineBundle load_bundle(const std::string& dir) {
  PipelineBundle b;
  b.backbone = load_checkpoint(dir + "/backbone.ckpt");
  b.tpm = load_checkpoint(dir + "/tpm.ckpt");
  b.tfm = load_checkpoint(dir + "/tfm.ckpt");
  b.scale = b.backbone.spec.scale;
  b.validate();
  return b;
}

std::vector<TrainPair> load_training_pairs(const TrainConfig& cfg) {
  if (cfg.dataset.empty()) throw Error("config: dataset manifest path is empty");
  const DatasetManifest m = load_manifest(cfg.dataset);
  if (m.scale != cfg.scale)
    throw Error("manifest scale " + std::to_string(m.scale) + " != config scale " +
                std::to_string(cfg.scale));
  std::vector<TrainPair> pairs;
  for (size_t i = 0; i < m.hr.size(); ++i) {
    TrainPair p;
    p.id = std::filesystem::path(m.hr[i]).stem().string();
    p.hr = crop_to_multiple(load_image_tensor(m.hr[i]), cfg.scale);
    p.lr = m.lr.empty() ? degrade_bicubic(p.hr, cfg.scale) : load_image_tensor(m.lr[i]);
    const Shape ls = p.lr.shape(), hs = p.hr.shape();
    if (hs.h != ls.h * cfg.scale || hs.w != ls.w * cfg.scale)
      throw Error("pair " + p.id + ": lr " + ls.str() + " is not hr " + hs.str() + " / scale");
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw Error("dataset " + m.name + " is empty");
  return pairs;
}

StageCheckpoint train_backbone(const TrainConfig& cfg) {
  cfg.validate();
  auto pairs = load_training_pairs(cfg);

  StageCheckpoint ckpt;
  ckpt.stage = Stage::rcan;
  ckpt.spec = cfg.backbone_spec();
  ckpt.net = build_network<float>(ckpt.spec, cfg.seed);

  std::vector<std::pair<int64_t, int64_t>> ranges;
  for (const auto& p : pairs) {
    const Shape ls = p.lr.shape();
    if (ls.h < cfg.patch || ls.w < cfg.patch)
      throw Error("pair " + p.id + ": lr " + ls.str() + " smaller than patch " +
                  std::to_string(cfg.patch));
    ranges.emplace_back(ls.h - cfg.patch + 1, ls.w - cfg.patch + 1);
  }

  auto make_batch = [&](const std::vector<SampleOrigin>& batch) {
    std::vector<Tensor> ins, tgts;
    for (const auto& o : batch) {
      const auto& p = pairs[size_t(o.image)];
      ins.push_back(crop(p.lr, o.y, o.x, cfg.patch, cfg.patch));
      tgts.push_back(crop(p.hr, o.y * cfg.scale, o.x * cfg.scale, cfg.patch * cfg.scale,
                          cfg.patch * cfg.scale));
    }
    return std::make_pair(stack_batch(ins), stack_batch(tgts));
  };

  run_training(ckpt.net, ranges, cfg, cfg.epochs_backbone, Stage::rcan, cfg.seed * 2 + 1,
               make_batch);
  persist(ckpt, cfg, "backbone.ckpt");
  return ckpt;
}

std::vector<TpmSample> build_tpm_dataset(StageCheckpoint& backbone, const TrainConfig& cfg) {
  auto pairs = load_training_pairs(cfg);
  std::vector<TpmSample> out;
  for (const auto& p : pairs) {
    Tensor restored = backbone.net.forward(p.lr, false);
    TpmSample s;
    s.input = texture_map(restored);
    s.target = diff_map(p.hr, restored);
    out.push_back(std::move(s));
  }
  return out;
}

StageCheckpoint train_tpm(const std::vector<TpmSample>& pairs, const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw Error("train_tpm: empty pair list");

  StageCheckpoint ckpt;
  ckpt.stage = Stage::tpm;
  ckpt.spec = cfg.tpm_spec();
  ckpt.net = build_network<float>(ckpt.spec, cfg.seed + 1);

  // crops live at HR resolution, so windows span patch * scale pixels
  const int64_t hp = cfg.patch * cfg.scale;
  std::vector<std::pair<int64_t, int64_t>> ranges;
  for (const auto& p : pairs) {
    const Shape s = p.input.data.shape();
    if (s.h < hp || s.w < hp)
      throw Error("train_tpm: map " + s.str() + " smaller than patch " + std::to_string(hp));
    ranges.emplace_back(s.h - hp + 1, s.w - hp + 1);
  }

  auto make_batch = [&](const std::vector<SampleOrigin>& batch) {
    std::vector<Tensor> ins, tgts;
    for (const auto& o : batch) {
      const auto& p = pairs[size_t(o.image)];
      ins.push_back(crop(p.input.data, o.y, o.x, hp, hp));
      tgts.push_back(crop(p.target.data, o.y, o.x, hp, hp));
    }
    return std::make_pair(stack_batch(ins), stack_batch(tgts));
  };

  run_training(ckpt.net, ranges, cfg, cfg.epochs_tpm, Stage::tpm, (cfg.seed + 1) * 2 + 1,
               make_batch);
  persist(ckpt, cfg, "tpm.ckpt");
  return ckpt;
}

Tensor build_fused_input(const Tensor& lr, Network& backbone, Network& tpm, int64_t scale) {
  const Shape ls = lr.shape();
  Tensor restored = backbone.forward(lr, false);
  const Shape rs = restored.shape();
  if (rs.h != ls.h * scale || rs.w != ls.w * scale)
    throw Error("build_fused_input: backbone output " + rs.str() + " is not " +
                std::to_string(scale) + "x input " + ls.str());
  EdgeMap dense = texture_map(restored);
  Tensor predicted = tpm.forward(dense.data, false);
  predicted.clamp(0.0f, 1.0f);
  EdgeMap lr_edge = shrink_edge(EdgeMap{std::move(predicted)}, scale);
  return concat_channels(lr, lr_edge.data);
}

StageCheckpoint train_tfm(const TrainConfig& cfg, StageCheckpoint& backbone,
                          StageCheckpoint& tpm) {
  cfg.validate();
  auto pairs = load_training_pairs(cfg);

  StageCheckpoint ckpt;
  ckpt.stage = Stage::tfm;
  ckpt.spec = cfg.tfm_spec();
  ckpt.net = build_network<float>(ckpt.spec, cfg.seed + 2);

  std::vector<std::pair<int64_t, int64_t>> ranges;
  for (const auto& p : pairs) {
    const Shape ls = p.lr.shape();
    if (ls.h < cfg.patch || ls.w < cfg.patch)
      throw Error("pair " + p.id + ": lr " + ls.str() + " smaller than patch " +
                  std::to_string(cfg.patch));
    ranges.emplace_back(ls.h - cfg.patch + 1, ls.w - cfg.patch + 1);
  }

  auto make_batch = [&](const std::vector<SampleOrigin>& batch) {
    std::vector<Tensor> ins, tgts;
    for (const auto& o : batch) {
      const auto& p = pairs[size_t(o.image)];
      ins.push_back(crop(p.lr, o.y, o.x, cfg.patch, cfg.patch));
      tgts.push_back(crop(p.hr, o.y * cfg.scale, o.x * cfg.scale, cfg.patch * cfg.scale,
                          cfg.patch * cfg.scale));
    }
    Tensor fused = build_fused_input(stack_batch(ins), backbone.net, tpm.net, cfg.scale);
    return std::make_pair(std::move(fused), stack_batch(tgts));
  };

  run_training(ckpt.net, ranges, cfg, cfg.epochs_tfm, Stage::tfm, (cfg.seed + 2) * 2 + 1,
               make_batch);
  persist(ckpt, cfg, "tfm.ckpt");
  return ckpt;
}

Tensor infer(PipelineBundle& bundle, const Tensor& lr) {
  bundle.validate();
  Tensor fused = build_fused_input(lr, bundle.backbone.net, bundle.tpm.net, bundle.scale);
  Tensor sr = bundle.tfm.net.forward(fused, false);
  sr.clamp(0.0f, 1.0f);
  return sr;
}

}  // namespace wtsr
