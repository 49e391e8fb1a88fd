/* Copyright 2026 The MAFT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "maft/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "maft/container.hpp"
#include "maft/error.hpp"
#include "maft/keyvalue.hpp"
#include "maft/objective.hpp"

namespace maft {
namespace {

constexpr double kMinClassFraction = 0.01;
constexpr int kMaxSceneAttempts = 500;
constexpr double kTexturePeriod = 8.0;

constexpr std::uint64_t kTrainStream = 1ull << 20;
constexpr std::uint64_t kValStream = 2ull << 20;
constexpr std::uint64_t kTestStream = 3ull << 20;

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t UniformIndex(std::mt19937_64& rng, std::size_t lo,
                         std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Paints one shape with `label` into the label map.
void PaintShape(std::vector<std::size_t>& labels, std::size_t h, std::size_t w,
                std::size_t label, std::mt19937_64& rng) {
  const double area = Uniform(rng, 0.10, 0.25) * static_cast<double>(h * w);
  const int type = static_cast<int>(UniformIndex(rng, 0, 2));
  const double hh = static_cast<double>(h), ww = static_cast<double>(w);
  if (type == 0) {  // rectangle
    const double aspect = Uniform(rng, 0.5, 2.0);
    const double rh = std::clamp(std::sqrt(area * aspect), 3.0, hh);
    const double rw = std::clamp(area / rh, 3.0, ww);
    const auto bh = static_cast<std::size_t>(rh);
    const auto bw = static_cast<std::size_t>(rw);
    const std::size_t y0 = UniformIndex(rng, 0, h - bh);
    const std::size_t x0 = UniformIndex(rng, 0, w - bw);
    for (std::size_t y = y0; y < y0 + bh; ++y) {
      for (std::size_t x = x0; x < x0 + bw; ++x) labels[y * w + x] = label;
    }
  } else if (type == 1) {  // ellipse
    const double aspect = Uniform(rng, 0.6, 1.6);
    const double ry = std::sqrt(area / std::numbers::pi * aspect);
    const double rx = area / (std::numbers::pi * ry);
    const double cy = Uniform(rng, 0.0, hh), cx = Uniform(rng, 0.0, ww);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
        const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
        if (dy * dy + dx * dx <= 1.0) labels[y * w + x] = label;
      }
    }
  } else {  // horizontal or vertical stripe across the image
    const bool horizontal = UniformIndex(rng, 0, 1) == 0;
    const double length = horizontal ? ww : hh;
    const double extent = horizontal ? hh : ww;
    const auto thick = static_cast<std::size_t>(
        std::clamp(area / length, 2.0, extent));
    const std::size_t start =
        UniformIndex(rng, 0, static_cast<std::size_t>(extent) - thick);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t pos = horizontal ? y : x;
        if (pos >= start && pos < start + thick) labels[y * w + x] = label;
      }
    }
  }
}

void RenderImage(SyntheticScene& scene, const Tensor& attrs,
                 std::mt19937_64& rng) {
  const std::size_t h = scene.height, w = scene.width;
  std::normal_distribution<double> jitter(0.0, 0.04);
  std::normal_distribution<double> noise(0.0, 0.03);
  const std::size_t c = attrs.rows();
  std::vector<std::array<double, 3>> base(c);
  std::vector<std::array<double, 3>> amp(c);
  for (std::size_t k : scene.classes) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      base[k][ch] = 0.5 + 0.6 * attrs.at(k, ch) + jitter(rng);
      amp[k][ch] = 0.35 * attrs.at(k, 3 + ch);
    }
  }
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  scene.image = Tensor({h, w, 3});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t k = scene.labels[y * w + x];
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      const double tex = amp[k][0] * std::cos(kTwoPi * fx / kTexturePeriod) +
                         amp[k][1] * std::cos(kTwoPi * fy / kTexturePeriod) +
                         amp[k][2] *
                             std::cos(kTwoPi * (fx + fy) / kTexturePeriod);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        scene.image[(y * w + x) * 3 + ch] =
            std::clamp(base[k][ch] + tex + noise(rng), 0.0, 1.0);
      }
    }
  }
  scene.image = scene.image.AsType(DType::kFloat32).AsType(DType::kFloat64);
}

Tensor MaskFromPredicate(std::size_t h, std::size_t w, auto&& on) {
  Tensor m({h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) m[y * w + x] = on(y, x) ? 1.0 : 0.0;
  }
  return m;
}

Tensor Morph(const Tensor& mask, std::size_t radius, bool dilate) {
  Check(mask.rank() == 2, ErrorCode::kDimension, "mask must be [H,W]");
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  Tensor cur = mask;
  for (std::size_t step = 0; step < radius; ++step) {
    Tensor next({h, w});
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        bool value = !dilate;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const long yy = static_cast<long>(y) + dy;
            const long xx = static_cast<long>(x) + dx;
            const bool inside = yy >= 0 && xx >= 0 &&
                                yy < static_cast<long>(h) &&
                                xx < static_cast<long>(w);
            const bool on =
                inside && cur[static_cast<std::size_t>(yy) * w +
                              static_cast<std::size_t>(xx)] >= 0.5;
            value = dilate ? (value || on) : (value && on);
          }
        }
        next[y * w + x] = value ? 1.0 : 0.0;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

Tensor Slice(const Tensor& masks, std::size_t i) {
  const std::size_t h = masks.dim(1), w = masks.dim(2);
  return Tensor({h, w}, std::vector<double>(masks.data() + i * h * w,
                                            masks.data() + (i + 1) * h * w));
}

bool AnyOn(const Tensor& m) {
  return std::any_of(m.values().begin(), m.values().end(),
                     [](double v) { return v >= 0.5; });
}

void StoreScenes(TensorFile& file, const std::string& name,
                 const std::vector<SyntheticScene>& scenes, std::size_t size) {
  const std::size_t s = scenes.size(), hw = size * size;
  Tensor images({s, size, size, 3}, DType::kFloat32);
  Tensor labels({s, size, size}, DType::kFloat32);
  for (std::size_t i = 0; i < s; ++i) {
    std::copy_n(scenes[i].image.data(), hw * 3, images.data() + i * hw * 3);
    for (std::size_t p = 0; p < hw; ++p) {
      labels[i * hw + p] = static_cast<double>(scenes[i].labels[p]);
    }
  }
  file.Put(name + ".images", std::move(images));
  file.Put(name + ".labels", std::move(labels));
}

std::vector<SyntheticScene> ReadScenes(const TensorFile& file,
                                       const std::string& name,
                                       std::size_t size,
                                       std::size_t num_classes) {
  const Tensor& images = file.Get(name + ".images");
  const Tensor& labels = file.Get(name + ".labels");
  Check(images.rank() == 4 && images.dim(1) == size &&
            images.dim(2) == size && images.dim(3) == 3,
        ErrorCode::kFormat,
        name + ".images has shape " + ShapeString(images.shape()));
  const std::size_t s = images.dim(0), hw = size * size;
  Check(labels.shape() == Shape{s, size, size}, ErrorCode::kFormat,
        name + ".labels has shape " + ShapeString(labels.shape()));
  Check(images.AllFinite(), ErrorCode::kFormat,
        name + ".images holds non-finite values");
  std::vector<SyntheticScene> scenes(s);
  for (std::size_t i = 0; i < s; ++i) {
    SyntheticScene& sc = scenes[i];
    sc.height = sc.width = size;
    sc.image = Tensor({size, size, 3},
                      std::vector<double>(images.data() + i * hw * 3,
                                          images.data() + (i + 1) * hw * 3));
    sc.labels.resize(hw);
    for (std::size_t p = 0; p < hw; ++p) {
      const double v = labels[i * hw + p];
      Check(v >= 0.0 && v == std::floor(v) &&
                v < static_cast<double>(num_classes),
            ErrorCode::kFormat, name + ".labels holds an invalid class index");
      sc.labels[p] = static_cast<std::size_t>(v);
    }
    sc.RefreshClasses();
  }
  return scenes;
}

}  // namespace

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Tensor SyntheticScene::GtMasks() const {
  Tensor masks({classes.size(), height, width});
  const std::size_t hw = height * width;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    for (std::size_t p = 0; p < hw; ++p) {
      masks[k * hw + p] = labels[p] == classes[k] ? 1.0 : 0.0;
    }
  }
  return masks;
}

std::size_t SyntheticScene::MajorityClass() const {
  std::size_t best = classes.front(), best_count = 0;
  for (std::size_t k : classes) {
    const auto count = static_cast<std::size_t>(
        std::count(labels.begin(), labels.end(), k));
    if (count > best_count) {
      best = k;
      best_count = count;
    }
  }
  return best;
}

void SyntheticScene::RefreshClasses() {
  const std::set<std::size_t> present(labels.begin(), labels.end());
  classes.assign(present.begin(), present.end());
}

SyntheticScene GenScene(std::uint64_t seed, const TextEmbeddings& text,
                        const SceneSpec& spec) {
  const std::size_t c = text.num_classes();
  const std::size_t h = spec.height, w = spec.width;
  Check(h >= 8 && w >= 8, ErrorCode::kInvalidArgument,
        "scene must be at least 8x8");
  std::vector<std::size_t> pool = spec.pool;
  if (pool.empty()) {
    pool.resize(c);
    for (std::size_t k = 0; k < c; ++k) pool[k] = k;
  }
  for (std::size_t k : pool) {
    Check(k < c, ErrorCode::kInvalidArgument, "pool class out of range");
  }
  if (spec.required) {
    Check(*spec.required < c, ErrorCode::kInvalidArgument,
          "required class out of range");
    std::erase(pool, *spec.required);
  }
  const std::size_t want = spec.classes_per_scene;
  const std::size_t from_pool = spec.required ? want - 1 : want;
  Check(want >= 1 && from_pool <= pool.size(), ErrorCode::kInvalidArgument,
        "classes_per_scene " + std::to_string(want) +
            " exceeds the available classes");

  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::size_t> chosen(pool.begin(), pool.begin() + from_pool);
  if (spec.required) chosen.push_back(*spec.required);
  std::shuffle(chosen.begin(), chosen.end(), rng);

  SyntheticScene scene;
  scene.height = h;
  scene.width = w;
  const auto min_pixels = static_cast<std::size_t>(
      std::ceil(kMinClassFraction * static_cast<double>(h * w)));
  bool ok = false;
  for (int attempt = 0; attempt < kMaxSceneAttempts && !ok; ++attempt) {
    scene.labels.assign(h * w, chosen.front());
    for (std::size_t i = 1; i < chosen.size(); ++i) {
      PaintShape(scene.labels, h, w, chosen[i], rng);
    }
    ok = std::all_of(chosen.begin(), chosen.end(), [&](std::size_t k) {
      return static_cast<std::size_t>(std::count(
                 scene.labels.begin(), scene.labels.end(), k)) >= min_pixels;
    });
  }
  Check(ok, ErrorCode::kConvergence,
        "could not place every class with at least 1% area");
  scene.RefreshClasses();
  RenderImage(scene, ClassAttributes(text), rng);
  return scene;
}

std::string PerturbKindName(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kIdentity: return "identity";
    case PerturbKind::kErode: return "erode";
    case PerturbKind::kDilate: return "dilate";
    case PerturbKind::kShift: return "shift";
    case PerturbKind::kUnion: return "union";
    case PerturbKind::kRandomBlob: return "blob";
  }
  return "identity";
}

PerturbKind ParsePerturbKind(const std::string& name) {
  for (PerturbKind k :
       {PerturbKind::kIdentity, PerturbKind::kErode, PerturbKind::kDilate,
        PerturbKind::kShift, PerturbKind::kUnion, PerturbKind::kRandomBlob}) {
    if (PerturbKindName(k) == name) return k;
  }
  Fail(ErrorCode::kInvalidArgument, "unknown perturbation '" + name + "'");
}

Tensor Erode(const Tensor& mask, std::size_t radius) {
  return Morph(mask, radius, false);
}

Tensor Dilate(const Tensor& mask, std::size_t radius) {
  return Morph(mask, radius, true);
}

Tensor ShiftMask(const Tensor& mask, long dy, long dx) {
  Check(mask.rank() == 2, ErrorCode::kDimension, "mask must be [H,W]");
  const auto h = static_cast<long>(mask.dim(0));
  const auto w = static_cast<long>(mask.dim(1));
  return MaskFromPredicate(mask.dim(0), mask.dim(1), [&](std::size_t y,
                                                         std::size_t x) {
    const long sy = static_cast<long>(y) - dy, sx = static_cast<long>(x) - dx;
    return sy >= 0 && sx >= 0 && sy < h && sx < w &&
           mask[static_cast<std::size_t>(sy * w + sx)] >= 0.5;
  });
}

MaskProposalSet PerturbProposals(const Tensor& gt_masks,
                                 const std::vector<std::size_t>& gt_classes,
                                 std::uint64_t seed,
                                 const ProposalSpec& spec) {
  Check(gt_masks.rank() == 3 && gt_masks.dim(0) >= 1 &&
            gt_masks.dim(0) == gt_classes.size(),
        ErrorCode::kDimension, "need one gt mask [H,W] per gt class");
  const std::size_t k = gt_masks.dim(0), h = gt_masks.dim(1),
                    w = gt_masks.dim(2);
  std::mt19937_64 rng(seed);
  std::vector<Tensor> masks;
  MaskProposalSet out;
  auto emit = [&](Tensor m, long source, PerturbKind kind) {
    if (!AnyOn(m)) return;
    masks.push_back(std::move(m));
    out.source_class.push_back(source);
    out.kinds.push_back(kind);
  };
  const auto has = [&](PerturbKind kind) {
    return std::find(spec.kinds.begin(), spec.kinds.end(), kind) !=
           spec.kinds.end();
  };
  for (std::size_t i = 0; i < k; ++i) {
    const Tensor gt = Slice(gt_masks, i);
    Check(AnyOn(gt), ErrorCode::kInvalidArgument, "gt mask is empty");
    const auto src = static_cast<long>(gt_classes[i]);
    emit(gt, src, PerturbKind::kIdentity);
    if (has(PerturbKind::kErode) && spec.max_radius >= 1) {
      emit(Erode(gt, UniformIndex(rng, 1, spec.max_radius)), src,
           PerturbKind::kErode);
    }
    if (has(PerturbKind::kDilate) && spec.max_radius >= 1) {
      emit(Dilate(gt, UniformIndex(rng, 1, spec.max_radius)), src,
           PerturbKind::kDilate);
    }
    if (has(PerturbKind::kShift) && spec.max_shift >= 1) {
      const auto m = static_cast<long>(spec.max_shift);
      long dy = 0, dx = 0;
      while (dy == 0 && dx == 0) {
        dy = std::uniform_int_distribution<long>(-m, m)(rng);
        dx = std::uniform_int_distribution<long>(-m, m)(rng);
      }
      emit(ShiftMask(gt, dy, dx), src, PerturbKind::kShift);
    }
    if (has(PerturbKind::kUnion) && k >= 2) {
      std::size_t j = UniformIndex(rng, 0, k - 2);
      if (j >= i) ++j;
      const Tensor other = Slice(gt_masks, j);
      emit(MaskFromPredicate(h, w,
                             [&](std::size_t y, std::size_t x) {
                               return gt[y * w + x] >= 0.5 ||
                                      other[y * w + x] >= 0.5;
                             }),
           src, PerturbKind::kUnion);
    }
  }
  if (has(PerturbKind::kRandomBlob)) {
    const double max_r = std::max(2.0, static_cast<double>(std::min(h, w)) / 4);
    for (std::size_t b = 0; b < spec.blobs; ++b) {
      const double cy = Uniform(rng, 0.0, static_cast<double>(h));
      const double cx = Uniform(rng, 0.0, static_cast<double>(w));
      const double ry = Uniform(rng, 2.0, max_r);
      const double rx = Uniform(rng, 2.0, max_r);
      emit(MaskFromPredicate(h, w,
                             [&](std::size_t y, std::size_t x) {
                               const double dy =
                                   (static_cast<double>(y) + 0.5 - cy) / ry;
                               const double dx =
                                   (static_cast<double>(x) + 0.5 - cx) / rx;
                               return dy * dy + dx * dx <= 1.0;
                             }),
           -1, PerturbKind::kRandomBlob);
    }
  }
  out.masks = Tensor({masks.size(), h, w});
  for (std::size_t n = 0; n < masks.size(); ++n) {
    std::copy_n(masks[n].data(), h * w, out.masks.data() + n * h * w);
  }
  out.iou = IouMatrix(gt_masks, out.masks);
  return out;
}

void DataConfig::Validate() const {
  Check(num_classes >= 2, ErrorCode::kInvalidArgument,
        "num_classes must be >= 2");
  Check(image_size >= 8, ErrorCode::kInvalidArgument,
        "image_size must be >= 8");
  Check(classes_per_scene >= 1, ErrorCode::kInvalidArgument,
        "classes_per_scene must be >= 1");
  const auto unseen = static_cast<std::size_t>(
      std::lround(unseen_fraction * static_cast<double>(num_classes)));
  Check(unseen_fraction > 0.0 && unseen_fraction < 1.0 && unseen >= 1 &&
            unseen < num_classes,
        ErrorCode::kInvalidArgument,
        "unseen_fraction must leave at least one class on each side");
  // Train and val scenes draw from the seen classes only.
  Check(classes_per_scene <= num_classes - unseen, ErrorCode::kInvalidArgument,
        "classes_per_scene exceeds the number of seen classes");
  Check(train_scenes >= 1 && val_scenes >= 1 && test_scenes >= 1,
        ErrorCode::kInvalidArgument, "every split needs at least one scene");
}

std::vector<std::pair<std::string, std::string>> DataConfig::ToPairs() const {
  return {
      {"num_classes", std::to_string(num_classes)},
      {"unseen_fraction", FormatDouble(unseen_fraction)},
      {"image_size", std::to_string(image_size)},
      {"classes_per_scene", std::to_string(classes_per_scene)},
      {"train_scenes", std::to_string(train_scenes)},
      {"val_scenes", std::to_string(val_scenes)},
      {"test_scenes", std::to_string(test_scenes)},
      {"embed_dim", std::to_string(embed_dim)},
      {"seed", std::to_string(seed)},
  };
}

void DataConfig::Set(const std::string& key, const std::string& value) {
  if (key == "num_classes") {
    num_classes = ParseSize(key, value);
  } else if (key == "unseen_fraction") {
    unseen_fraction = ParseDouble(key, value);
  } else if (key == "image_size") {
    image_size = ParseSize(key, value);
  } else if (key == "classes_per_scene") {
    classes_per_scene = ParseSize(key, value);
  } else if (key == "train_scenes") {
    train_scenes = ParseSize(key, value);
  } else if (key == "val_scenes") {
    val_scenes = ParseSize(key, value);
  } else if (key == "test_scenes") {
    test_scenes = ParseSize(key, value);
  } else if (key == "embed_dim") {
    embed_dim = ParseSize(key, value);
  } else if (key == "seed") {
    seed = ParseUint64(key, value);
  } else {
    Fail(ErrorCode::kInvalidArgument, "unknown data key '" + key + "'");
  }
}

const std::vector<SyntheticScene>& Dataset::split(
    const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  Fail(ErrorCode::kInvalidArgument,
       "unknown split '" + name + "' (train, val, test)");
}

SceneSpec SeenSceneSpec(const Dataset& data) {
  SceneSpec spec;
  spec.height = spec.width = data.config.image_size;
  spec.classes_per_scene = data.config.classes_per_scene;
  spec.pool = data.text.vocab.SeenIndices();
  return spec;
}

Dataset GenerateDataset(const DataConfig& config) {
  config.Validate();
  Dataset data;
  data.config = config;
  const ClassVocabulary vocab =
      SplitVocab(MakeVocabulary(config.num_classes), MixSeed(config.seed, 1),
                 config.unseen_fraction);
  data.text = EmbedClasses(vocab, config.embed_dim, MixSeed(config.seed, 2));
  const SceneSpec seen = SeenSceneSpec(data);
  for (std::size_t i = 0; i < config.train_scenes; ++i) {
    data.train.push_back(
        GenScene(MixSeed(config.seed, kTrainStream + i), data.text, seen));
  }
  for (std::size_t i = 0; i < config.val_scenes; ++i) {
    data.val.push_back(
        GenScene(MixSeed(config.seed, kValStream + i), data.text, seen));
  }
  const std::vector<std::size_t> unseen = vocab.UnseenIndices();
  for (std::size_t i = 0; i < config.test_scenes; ++i) {
    SceneSpec spec = seen;
    spec.pool.clear();
    spec.required = unseen[i % unseen.size()];
    data.test.push_back(
        GenScene(MixSeed(config.seed, kTestStream + i), data.text, spec));
  }
  return data;
}

void SaveDataset(const Dataset& data, const std::string& path) {
  TensorFile file;
  for (const auto& [k, v] : data.config.ToPairs()) file.SetMeta("data", k, v);
  StoreEmbeddings(data.text, file);
  const std::size_t size = data.config.image_size;
  StoreScenes(file, "train", data.train, size);
  StoreScenes(file, "val", data.val, size);
  StoreScenes(file, "test", data.test, size);
  file.Save(path);
}

Dataset LoadDataset(const std::string& path) {
  const TensorFile file = TensorFile::Load(path);
  Dataset data;
  for (const auto& [k, v] : file.Section("data")) data.config.Set(k, v);
  data.config.Validate();
  data.text = ReadEmbeddings(file);
  Check(data.text.num_classes() == data.config.num_classes,
        ErrorCode::kFormat, "vocabulary size does not match num_classes");
  const std::size_t size = data.config.image_size;
  const std::size_t c = data.config.num_classes;
  data.train = ReadScenes(file, "train", size, c);
  data.val = ReadScenes(file, "val", size, c);
  data.test = ReadScenes(file, "test", size, c);
  for (const auto* split : {&data.train, &data.val}) {
    for (const SyntheticScene& s : *split) {
      for (std::size_t k : s.classes) {
        Check(data.text.vocab.is_seen(k), ErrorCode::kInvariant,
              "unseen class " + data.text.vocab.names[k] +
                  " appears in a training split");
      }
    }
  }
  return data;
}

}  // namespace maft
