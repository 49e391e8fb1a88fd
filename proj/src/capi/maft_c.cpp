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

#include "maft/maft.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "maft/config.hpp"
#include "maft/container.hpp"
#include "maft/data.hpp"
#include "maft/encoder.hpp"
#include "maft/error.hpp"
#include "maft/evaluate.hpp"
#include "maft/gradcheck.hpp"
#include "maft/report.hpp"
#include "maft/train.hpp"

struct maft_config {
  maft::ExperimentConfig value;
};

struct maft_dataset {
  maft::Dataset value;
};

struct maft_model {
  maft::EncoderWeights value;
};

struct maft_report {
  maft::Report value;
  std::vector<std::pair<std::string, maft::Tensor>> tensors;
};

namespace {

thread_local std::string g_last_error;

maft_status SetError(maft_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

maft_status FromCode(maft::ErrorCode code) {
  return static_cast<maft_status>(static_cast<int>(code));
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
maft_status Guard(Fn&& fn) {
  try {
    return fn();
  } catch (const maft::Error& e) {
    return SetError(FromCode(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return SetError(MAFT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return SetError(MAFT_ERR_INTERNAL, e.what());
  } catch (...) {
    return SetError(MAFT_ERR_INTERNAL, "unknown error");
  }
}

maft_status NullArg(const char* name) {
  return SetError(MAFT_ERR_INVALID_ARGUMENT,
                  std::string("null argument: ") + name);
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string Hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

extern "C" {

const char* maft_version(void) { return "1.0.0"; }

const char* maft_last_error(void) { return g_last_error.c_str(); }

const char* maft_status_name(maft_status status) {
  switch (status) {
    case MAFT_OK: return "ok";
    case MAFT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MAFT_ERR_DIMENSION: return "dimension mismatch";
    case MAFT_ERR_FORMAT: return "format error";
    case MAFT_ERR_IO: return "i/o error";
    case MAFT_ERR_NUMERIC: return "numeric error";
    case MAFT_ERR_CONVERGENCE: return "convergence failure";
    case MAFT_ERR_INVARIANT: return "invariant violation";
    case MAFT_ERR_DEGENERATE: return "degenerate input";
    case MAFT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void maft_string_free(char* s) { std::free(s); }

// ---- configuration ----

maft_status maft_config_create(const char* preset, maft_config** out) {
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    const std::string name = preset == nullptr ? "toy" : preset;
    auto* c = new maft_config;
    if (name == "toy") {
      c->value = maft::ExperimentConfig{};
    } else if (name == "experiment") {
      c->value = maft::ExperimentPreset();
    } else {
      delete c;
      return SetError(MAFT_ERR_INVALID_ARGUMENT,
                      "unknown preset '" + name + "' (toy, experiment)");
    }
    *out = c;
    return MAFT_OK;
  });
}

maft_status maft_config_load(const char* path, maft_config** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new maft_config{maft::ExperimentConfig::Load(path)};
    return MAFT_OK;
  });
}

maft_status maft_config_parse(const char* text, maft_config** out) {
  if (text == nullptr) return NullArg("text");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new maft_config{maft::ExperimentConfig::Parse(text)};
    return MAFT_OK;
  });
}

maft_status maft_config_save(const maft_config* config, const char* path) {
  if (config == nullptr) return NullArg("config");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    config->value.Save(path);
    return MAFT_OK;
  });
}

maft_status maft_config_text(const maft_config* config, char** out) {
  if (config == nullptr) return NullArg("config");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = CopyString(config->value.Text());
    return MAFT_OK;
  });
}

maft_status maft_config_set(maft_config* config, const char* key,
                            const char* value) {
  if (config == nullptr) return NullArg("config");
  if (key == nullptr) return NullArg("key");
  if (value == nullptr) return NullArg("value");
  return Guard([&] {
    maft::ExperimentConfig next = config->value;
    next.Set(key, value);
    next.Validate();
    config->value = std::move(next);
    return MAFT_OK;
  });
}

maft_status maft_config_reseed(maft_config* config, uint64_t seed) {
  if (config == nullptr) return NullArg("config");
  return Guard([&] {
    config->value.Reseed(seed);
    return MAFT_OK;
  });
}

void maft_config_free(maft_config* config) { delete config; }

// ---- data ----

maft_status maft_dataset_generate(const maft_config* config,
                                  maft_dataset** out) {
  if (config == nullptr) return NullArg("config");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    config->value.Validate();
    *out = new maft_dataset{maft::GenerateDataset(config->value.data)};
    return MAFT_OK;
  });
}

maft_status maft_dataset_load(const char* path, maft_dataset** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new maft_dataset{maft::LoadDataset(path)};
    return MAFT_OK;
  });
}

maft_status maft_dataset_save(const maft_dataset* data, const char* path) {
  if (data == nullptr) return NullArg("data");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    maft::SaveDataset(data->value, path);
    return MAFT_OK;
  });
}

maft_status maft_dataset_report(const maft_dataset* data, maft_report** out) {
  if (data == nullptr) return NullArg("data");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    const maft::Dataset& d = data->value;
    auto* r = new maft_report;
    for (const auto& [k, v] : d.config.ToPairs()) r->value.Set("data." + k, v);
    r->value.SetInt("seen_classes",
                    static_cast<long long>(d.text.vocab.SeenIndices().size()));
    r->value.SetInt(
        "unseen_classes",
        static_cast<long long>(d.text.vocab.UnseenIndices().size()));
    for (std::size_t c = 0; c < d.text.vocab.size(); ++c) {
      r->value.Set("class." + d.text.vocab.names[c] + ".split",
                   d.text.vocab.is_seen(c) ? "seen" : "unseen");
    }
    *out = r;
    return MAFT_OK;
  });
}

void maft_dataset_free(maft_dataset* data) { delete data; }

// ---- models ----

maft_status maft_model_load(const char* path, maft_model** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new maft_model{maft::LoadCheckpoint(path)};
    return MAFT_OK;
  });
}

maft_status maft_model_save(const maft_model* model, const char* path) {
  if (model == nullptr) return NullArg("model");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    maft::SaveCheckpoint(model->value, path);
    return MAFT_OK;
  });
}

maft_status maft_model_fingerprint(const maft_model* model, uint64_t* out) {
  if (model == nullptr) return NullArg("model");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = model->value.params.Fingerprint();
    return MAFT_OK;
  });
}

maft_status maft_model_set_temperature(maft_model* model, double tau) {
  if (model == nullptr) return NullArg("model");
  return Guard([&] {
    maft::EncoderConfig next = model->value.config;
    next.temperature = tau;
    next.Validate();
    model->value.config = next;
    return MAFT_OK;
  });
}

void maft_model_free(maft_model* model) { delete model; }

maft_status maft_pretrain(const maft_config* config, const maft_dataset* data,
                          maft_model** out, maft_report** report) {
  if (config == nullptr) return NullArg("config");
  if (data == nullptr) return NullArg("data");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    const maft::ExperimentConfig& c = config->value;
    c.Validate();
    maft::PretrainResult result =
        maft::PretrainToy(c.encoder, data->value, c.pretrain);
    auto* r = new maft_report;
    for (const auto& [k, v] : c.pretrain.ToPairs())
      r->value.Set("pretrain." + k, v);
    r->value.SetInt("iterations", static_cast<long long>(result.losses.size()));
    r->value.SetNumber("initial_accuracy", result.initial_accuracy);
    r->value.SetNumber("final_accuracy", result.final_accuracy);
    r->value.Set("converged", result.converged ? "true" : "false");
    if (!result.losses.empty()) {
      r->value.SetNumber("loss_first", result.losses.front());
      r->value.SetNumber("loss_last", result.losses.back());
    }
    r->value.Set("model_fingerprint", Hex(result.weights.params.Fingerprint()));
    r->tensors.emplace_back(
        "losses", maft::Tensor({result.losses.size()}, result.losses));
    *out = new maft_model{std::move(result.weights)};
    if (report != nullptr) {
      *report = r;
    } else {
      delete r;
    }
    if (!result.converged) {
      return SetError(MAFT_ERR_CONVERGENCE,
                      "pre-training missed the accuracy target: final " +
                          std::to_string(result.final_accuracy) + " < " +
                          std::to_string(c.pretrain.target_accuracy));
    }
    return MAFT_OK;
  });
}

maft_status maft_finetune(const maft_config* config, const maft_dataset* data,
                          const maft_model* teacher,
                          maft_snapshot_fn on_snapshot, void* user,
                          maft_model** out, maft_report** report) {
  if (config == nullptr) return NullArg("config");
  if (data == nullptr) return NullArg("data");
  if (teacher == nullptr) return NullArg("teacher");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    const maft::ExperimentConfig& c = config->value;
    c.Validate();
    const std::uint64_t teacher_before = teacher->value.params.Fingerprint();
    maft::SnapshotFn snapshot;
    if (on_snapshot != nullptr) {
      snapshot = [&](std::size_t it, const maft::EncoderWeights& student) {
        const maft_model view{student};
        on_snapshot(it, &view, user);
      };
    }
    maft::FinetuneResult result =
        maft::FinetuneMaft(teacher->value, data->value, c.train, snapshot);
    const std::uint64_t teacher_after = teacher->value.params.Fingerprint();
    maft::Check(teacher_before == teacher_after, maft::ErrorCode::kInvariant,
                "teacher weights changed during fine-tuning");

    auto* r = new maft_report;
    for (const auto& [k, v] : c.train.ToPairs()) r->value.Set("train." + k, v);
    r->value.SetInt("iterations", static_cast<long long>(result.curve.size()));
    if (!result.curve.empty()) {
      r->value.SetNumber("l_ma_first", result.curve.front().l_ma);
      r->value.SetNumber("l_ma_last", result.curve.back().l_ma);
      r->value.SetNumber("l_dis_last", result.curve.back().l_dis);
      r->value.SetNumber("total_last", result.curve.back().total);
    }
    r->value.Set("teacher_fingerprint", Hex(teacher_before));
    r->value.Set("student_fingerprint",
                 Hex(result.student.params.Fingerprint()));
    const auto& held_out =
        data->value.test.empty() ? data->value.val : data->value.test;
    if (!held_out.empty()) {
      r->value.SetNumber("distillation_gap",
                         maft::DistillationGap(result.student, teacher->value,
                                               data->value, held_out));
    }
    maft::Tensor curve({result.curve.size(), 4});
    for (std::size_t i = 0; i < result.curve.size(); ++i) {
      curve.at(i, 0) = result.curve[i].l_ma;
      curve.at(i, 1) = result.curve[i].l_dis;
      curve.at(i, 2) = result.curve[i].lambda;
      curve.at(i, 3) = result.curve[i].total;
    }
    r->tensors.emplace_back("loss_curve", std::move(curve));
    *out = new maft_model{std::move(result.student)};
    if (report != nullptr) {
      *report = r;
    } else {
      delete r;
    }
    return MAFT_OK;
  });
}

// ---- evaluation ----

namespace {

maft_report* EvalToReport(const maft::EvalReport& e) {
  auto* r = new maft_report;
  r->value = e.ToReport();
  r->tensors.emplace_back(
      "per_class_iou",
      maft::Tensor({e.per_class_iou.size()}, e.per_class_iou));
  return r;
}

}  // namespace

maft_status maft_evaluate(const maft_config* config, const maft_dataset* data,
                          const maft_model* model, maft_report** out) {
  if (config == nullptr) return NullArg("config");
  if (data == nullptr) return NullArg("data");
  if (model == nullptr) return NullArg("model");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    config->value.eval.Validate();
    *out = EvalToReport(
        maft::Evaluate(model->value, data->value, config->value.eval));
    return MAFT_OK;
  });
}

maft_status maft_compare(const maft_config* config, const maft_dataset* data,
                         const maft_model* teacher, const maft_model* student,
                         maft_report** out) {
  if (config == nullptr) return NullArg("config");
  if (data == nullptr) return NullArg("data");
  if (teacher == nullptr) return NullArg("teacher");
  if (student == nullptr) return NullArg("student");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    maft::EvalConfig frozen = config->value.eval;
    frozen.mode = maft::EvalMode::kFrozenMerge;
    maft::EvalConfig ip = config->value.eval;
    ip.mode = maft::EvalMode::kIpClip;
    frozen.Validate();
    const maft::EvalReport a =
        maft::Evaluate(teacher->value, data->value, frozen);
    const maft::EvalReport b = maft::Evaluate(teacher->value, data->value, ip);
    const maft::EvalReport m = maft::Evaluate(student->value, data->value, ip);
    auto* r = new maft_report;
    r->value.Merge(a.ToReport(), "frozen.");
    r->value.Merge(b.ToReport(), "teacher.");
    r->value.Merge(m.ToReport(), "maft.");
    r->value.SetNumber("delta.hiou", m.hiou - a.hiou);
    r->value.SetNumber("delta.miou_unseen", m.miou_unseen - a.miou_unseen);
    r->value.SetNumber("delta.spearman_unseen",
                       m.spearman_unseen - b.spearman_unseen);
    r->tensors.emplace_back(
        "frozen.per_class_iou",
        maft::Tensor({a.per_class_iou.size()}, a.per_class_iou));
    r->tensors.emplace_back(
        "teacher.per_class_iou",
        maft::Tensor({b.per_class_iou.size()}, b.per_class_iou));
    r->tensors.emplace_back(
        "maft.per_class_iou",
        maft::Tensor({m.per_class_iou.size()}, m.per_class_iou));
    *out = r;
    return MAFT_OK;
  });
}

maft_status maft_count_flops(const maft_config* config, const char* pipeline,
                             size_t n, maft_report** out) {
  if (config == nullptr) return NullArg("config");
  if (pipeline == nullptr) return NullArg("pipeline");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    const maft::FlopReport f = maft::CountFlops(
        maft::ParseFlopPipeline(pipeline), config->value.encoder, n,
        config->value.eval.seed, config->value.eval.merge_mode);
    *out = new maft_report{f.ToReport(), {}};
    return MAFT_OK;
  });
}

maft_status maft_grad_check(const maft_config* config, const uint64_t* seeds,
                            size_t num_seeds, double tolerance, int* passed,
                            maft_report** out) {
  if (config == nullptr) return NullArg("config");
  if (seeds == nullptr && num_seeds > 0) return NullArg("seeds");
  return Guard([&] {
    maft::GradCheckOptions options;
    options.encoder = config->value.encoder;
    options.lambda = config->value.train.lambda;
    if (num_seeds > 0) options.seeds.assign(seeds, seeds + num_seeds);
    if (tolerance > 0.0) options.tolerance = tolerance;
    const maft::GradCheckReport g = maft::RunGradCheck(options);
    if (passed != nullptr) *passed = g.passed ? 1 : 0;
    if (out != nullptr) *out = new maft_report{g.ToReport(), {}};
    return MAFT_OK;
  });
}

double maft_hiou(double miou_seen, double miou_unseen) {
  return maft::HIoU(miou_seen, miou_unseen);
}

// ---- reports ----

maft_status maft_report_size(const maft_report* report, size_t* out) {
  if (report == nullptr) return NullArg("report");
  if (out == nullptr) return NullArg("out");
  *out = report->value.entries().size();
  return MAFT_OK;
}

maft_status maft_report_entry(const maft_report* report, size_t index,
                              const char** key, const char** value) {
  if (report == nullptr) return NullArg("report");
  const auto& entries = report->value.entries();
  if (index >= entries.size()) {
    return SetError(MAFT_ERR_INVALID_ARGUMENT, "report index out of range");
  }
  if (key != nullptr) *key = entries[index].first.c_str();
  if (value != nullptr) *value = entries[index].second.c_str();
  return MAFT_OK;
}

maft_status maft_report_get(const maft_report* report, const char* key,
                            const char** value) {
  if (report == nullptr) return NullArg("report");
  if (key == nullptr) return NullArg("key");
  if (value == nullptr) return NullArg("value");
  for (const auto& [k, v] : report->value.entries()) {
    if (k == key) {
      *value = v.c_str();
      return MAFT_OK;
    }
  }
  return SetError(MAFT_ERR_INVALID_ARGUMENT,
                  std::string("no report key '") + key + "'");
}

maft_status maft_report_number(const maft_report* report, const char* key,
                               double* out) {
  if (report == nullptr) return NullArg("report");
  if (key == nullptr) return NullArg("key");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = report->value.Number(key);
    return MAFT_OK;
  });
}

maft_status maft_report_text(const maft_report* report, char** out) {
  if (report == nullptr) return NullArg("report");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = CopyString(report->value.Text());
    return MAFT_OK;
  });
}

maft_status maft_report_write(const maft_report* report, const char* path) {
  if (report == nullptr) return NullArg("report");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    report->value.Write(path);
    return MAFT_OK;
  });
}

maft_status maft_report_write_tensors(const maft_report* report,
                                      const char* path) {
  if (report == nullptr) return NullArg("report");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    maft::TensorFile file;
    for (const auto& [name, t] : report->tensors) file.Put(name, t);
    for (const auto& [k, v] : report->value.entries())
      file.SetMeta("report", k, v);
    file.Save(path);
    return MAFT_OK;
  });
}

void maft_report_free(maft_report* report) { delete report; }

}  // extern "C"
