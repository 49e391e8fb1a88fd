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

// Command-line front end. Links only the C interface.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maft/maft.h"

namespace {

// Carries a status out of a subcommand.
struct CliFailure : std::runtime_error {
  CliFailure(maft_status s, const std::string& what)
      : std::runtime_error(what), status(s) {}
  maft_status status;
};

void Ok(maft_status s) {
  if (s != MAFT_OK) throw CliFailure(s, maft_last_error());
}

struct ConfigDeleter {
  void operator()(maft_config* p) const { maft_config_free(p); }
};
struct DatasetDeleter {
  void operator()(maft_dataset* p) const { maft_dataset_free(p); }
};
struct ModelDeleter {
  void operator()(maft_model* p) const { maft_model_free(p); }
};
struct ReportDeleter {
  void operator()(maft_report* p) const { maft_report_free(p); }
};
using ConfigPtr = std::unique_ptr<maft_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<maft_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<maft_model, ModelDeleter>;
using ReportPtr = std::unique_ptr<maft_report, ReportDeleter>;

struct Common {
  std::string config_path;
  std::string preset = "toy";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out;
};

void AddCommon(CLI::App* app, Common& c, bool out_required,
               const std::string& out_help) {
  app->add_option("--config", c.config_path, "INI config file")
      ->check(CLI::ExistingFile);
  app->add_option("--preset", c.preset, "Built-in config when no --config")
      ->check(CLI::IsMember({"toy", "experiment"}));
  app->add_option("--seed", c.seed, "Reseed every config section");
  app->add_option("--set", c.overrides, "Override section.key=value")
      ->type_name("KEY=VALUE");
  auto* out = app->add_option("--out", c.out, out_help);
  if (out_required) out->required();
}

void Set(maft_config* config, const std::string& key,
         const std::string& value) {
  Ok(maft_config_set(config, key.c_str(), value.c_str()));
}

ConfigPtr LoadConfig(const Common& c) {
  maft_config* raw = nullptr;
  if (!c.config_path.empty()) {
    Ok(maft_config_load(c.config_path.c_str(), &raw));
  } else {
    Ok(maft_config_create(c.preset.c_str(), &raw));
  }
  ConfigPtr config(raw);
  if (c.seed) Ok(maft_config_reseed(config.get(), *c.seed));
  for (const std::string& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CliFailure(MAFT_ERR_INVALID_ARGUMENT,
                       "--set expects section.key=value, got '" + kv + "'");
    }
    Set(config.get(), kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

DatasetPtr GetDataset(const maft_config* config, const std::string& path) {
  maft_dataset* raw = nullptr;
  if (path.empty()) {
    Ok(maft_dataset_generate(config, &raw));
  } else {
    Ok(maft_dataset_load(path.c_str(), &raw));
  }
  return DatasetPtr(raw);
}

ModelPtr LoadModel(const std::string& path) {
  maft_model* raw = nullptr;
  Ok(maft_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

std::string Format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double Number(const maft_report* r, const std::string& key) {
  double v = 0.0;
  Ok(maft_report_number(r, key.c_str(), &v));
  return v;
}

std::string Text(const maft_report* r, const std::string& key) {
  const char* v = nullptr;
  Ok(maft_report_get(r, key.c_str(), &v));
  return v;
}

// Report plus its tensor container next to it.
void WriteReport(const maft_report* r, const std::string& path,
                 bool with_tensors) {
  if (path.empty()) return;
  Ok(maft_report_write(r, path.c_str()));
  if (with_tensors) {
    Ok(maft_report_write_tensors(r, (path + ".tensors").c_str()));
  }
}

std::string DefaultReportPath(const std::string& report,
                              const std::string& out) {
  return report.empty() ? out + ".report" : report;
}

void PrintEvalLine(const char* label, const maft_report* r,
                   const std::string& prefix) {
  std::printf("%-14s mIoU seen %5.1f  unseen %5.1f  all %5.1f  hIoU %5.1f  "
              "rho seen %.3f  rho unseen %.3f\n",
              label, Number(r, prefix + "miou_seen"),
              Number(r, prefix + "miou_unseen"),
              Number(r, prefix + "miou_all"), Number(r, prefix + "hiou"),
              Number(r, prefix + "spearman_seen"),
              Number(r, prefix + "spearman_unseen"));
}

void SnapshotToDir(size_t iteration, const maft_model* student, void* user) {
  const auto* dir = static_cast<const std::string*>(user);
  const std::string path =
      (std::filesystem::path(*dir) /
       ("student_" + std::to_string(iteration) + ".maft"))
          .string();
  if (maft_model_save(student, path.c_str()) != MAFT_OK) {
    std::fprintf(stderr, "warning: snapshot %s not written: %s\n",
                 path.c_str(), maft_last_error());
    return;
  }
  std::printf("snapshot %zu -> %s\n", iteration, path.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask-aware fine-tuning on synthetic segmentation scenes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", maft_version());

  // config
  Common cfg_c;
  auto* cfg_cmd = app.add_subcommand("config", "Print the resolved config");
  AddCommon(cfg_cmd, cfg_c, false, "Write the config here");

  // gen-data
  Common gen_c;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  AddCommon(gen, gen_c, true, "Dataset file");

  // pretrain
  Common pre_c;
  std::string pre_data, pre_report;
  std::optional<std::size_t> pre_iters;
  auto* pre = app.add_subcommand("pretrain", "Pre-train the toy teacher");
  AddCommon(pre, pre_c, true, "Teacher checkpoint");
  pre->add_option("--data", pre_data, "Dataset file (generated if absent)")
      ->check(CLI::ExistingFile);
  pre->add_option("--iterations", pre_iters, "Pre-training iterations");
  pre->add_option("--report", pre_report, "Report path (default <out>.report)");

  // finetune
  Common ft_c;
  std::string ft_data, ft_teacher, ft_report, ft_snapshots;
  std::optional<std::size_t> ft_iters;
  std::optional<double> ft_lambda, ft_tau;
  auto* ft = app.add_subcommand("finetune", "Mask-aware fine-tuning");
  AddCommon(ft, ft_c, true, "Student checkpoint");
  ft->add_option("--teacher", ft_teacher, "Teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ft->add_option("--data", ft_data, "Dataset file (generated if absent)")
      ->check(CLI::ExistingFile);
  ft->add_option("--iterations", ft_iters, "Fine-tuning iterations");
  ft->add_option("--lambda", ft_lambda, "Weight of the distillation term");
  ft->add_option("--tau", ft_tau, "Student softmax temperature");
  ft->add_option("--report", ft_report, "Report path (default <out>.report)");
  ft->add_option("--snapshots", ft_snapshots,
                 "Directory for intermediate student checkpoints");

  // eval
  Common ev_c;
  std::string ev_data, ev_model, ev_mode, ev_lambda, ev_split, ev_merge;
  std::optional<double> ev_tau;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  AddCommon(ev, ev_c, false, "Report path");
  ev->add_option("--model", ev_model, "Checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Dataset file (generated if absent)")
      ->check(CLI::ExistingFile);
  ev->add_option("--mode", ev_mode, "Scoring path")
      ->check(CLI::IsMember({"frozen_merge", "ipclip", "upper_bound"}));
  ev->add_option("--lambda", ev_lambda, "Ensemble exponent, or 'off'");
  ev->add_option("--tau", ev_tau, "Softmax temperature override");
  ev->add_option("--split", ev_split, "Dataset split")
      ->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--merge-mode", ev_merge, "Sub-image construction")
      ->check(CLI::IsMember({"mask", "crop", "mask_and_crop"}));

  // compare
  Common cmp_c;
  std::string cmp_data, cmp_teacher, cmp_student, cmp_lambda;
  auto* cmp = app.add_subcommand(
      "compare", "Frozen merge baseline vs the fine-tuned encoder");
  AddCommon(cmp, cmp_c, false, "Report path");
  cmp->add_option("--teacher", cmp_teacher, "Teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  cmp->add_option("--student", cmp_student, "Fine-tuned checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  cmp->add_option("--data", cmp_data, "Dataset file (generated if absent)")
      ->check(CLI::ExistingFile);
  cmp->add_option("--lambda", cmp_lambda, "Ensemble exponent, or 'off'");

  // flops
  Common fl_c;
  std::string fl_mode;
  std::size_t fl_n = 16;
  auto* fl = app.add_subcommand("flops", "Count encoder multiply-accumulates");
  AddCommon(fl, fl_c, false, "Report path");
  fl->add_option("--mode", fl_mode, "Pipeline (both when absent)")
      ->check(CLI::IsMember({"merge", "ipclip"}));
  fl->add_option("-n,--proposals", fl_n, "Number of proposals")
      ->check(CLI::PositiveNumber);

  // grad-check
  Common gc_c;
  std::vector<std::uint64_t> gc_seeds = {0, 1, 2, 3, 4};
  double gc_tol = 1e-4;
  std::optional<double> gc_lambda;
  auto* gc = app.add_subcommand("grad-check",
                                "Finite-difference check of the objective");
  AddCommon(gc, gc_c, false, "Report path");
  gc->add_option("--seeds", gc_seeds, "Problem seeds");
  gc->add_option("--tolerance", gc_tol, "Maximum relative error");
  gc->add_option("--lambda", gc_lambda, "Weight of the distillation term");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cfg_cmd) {
      ConfigPtr config = LoadConfig(cfg_c);
      char* text = nullptr;
      Ok(maft_config_text(config.get(), &text));
      std::fputs(text, stdout);
      maft_string_free(text);
      if (!cfg_c.out.empty()) Ok(maft_config_save(config.get(), cfg_c.out.c_str()));
    } else if (*gen) {
      ConfigPtr config = LoadConfig(gen_c);
      DatasetPtr data = GetDataset(config.get(), "");
      Ok(maft_dataset_save(data.get(), gen_c.out.c_str()));
      maft_report* raw = nullptr;
      Ok(maft_dataset_report(data.get(), &raw));
      ReportPtr r(raw);
      WriteReport(r.get(), gen_c.out + ".report", false);
      std::printf("dataset %s: %s classes (%s seen, %s unseen), scenes "
                  "train %s / val %s / test %s\n",
                  gen_c.out.c_str(), Text(r.get(), "data.num_classes").c_str(),
                  Text(r.get(), "seen_classes").c_str(),
                  Text(r.get(), "unseen_classes").c_str(),
                  Text(r.get(), "data.train_scenes").c_str(),
                  Text(r.get(), "data.val_scenes").c_str(),
                  Text(r.get(), "data.test_scenes").c_str());
    } else if (*pre) {
      ConfigPtr config = LoadConfig(pre_c);
      if (pre_iters) Set(config.get(), "pretrain.iterations", std::to_string(*pre_iters));
      DatasetPtr data = GetDataset(config.get(), pre_data);
      maft_model* model_raw = nullptr;
      maft_report* report_raw = nullptr;
      const maft_status s =
          maft_pretrain(config.get(), data.get(), &model_raw, &report_raw);
      ModelPtr model(model_raw);
      ReportPtr r(report_raw);
      if (s != MAFT_OK && s != MAFT_ERR_CONVERGENCE) Ok(s);
      const std::string message = s == MAFT_OK ? "" : maft_last_error();
      Ok(maft_model_save(model.get(), pre_c.out.c_str()));
      WriteReport(r.get(), DefaultReportPath(pre_report, pre_c.out), true);
      std::printf("pretrain: %s iterations, val accuracy %.3f -> %.3f, "
                  "checkpoint %s\n",
                  Text(r.get(), "iterations").c_str(),
                  Number(r.get(), "initial_accuracy"),
                  Number(r.get(), "final_accuracy"), pre_c.out.c_str());
      if (s != MAFT_OK) throw CliFailure(s, message);
    } else if (*ft) {
      ConfigPtr config = LoadConfig(ft_c);
      if (ft_iters) Set(config.get(), "train.iterations", std::to_string(*ft_iters));
      if (ft_lambda) Set(config.get(), "train.lambda", Format(*ft_lambda));
      if (ft_tau) Set(config.get(), "train.tau", Format(*ft_tau));
      DatasetPtr data = GetDataset(config.get(), ft_data);
      ModelPtr teacher = LoadModel(ft_teacher);
      if (!ft_snapshots.empty()) std::filesystem::create_directories(ft_snapshots);
      maft_model* model_raw = nullptr;
      maft_report* report_raw = nullptr;
      Ok(maft_finetune(config.get(), data.get(), teacher.get(),
                       ft_snapshots.empty() ? nullptr : SnapshotToDir,
                       &ft_snapshots, &model_raw, &report_raw));
      ModelPtr model(model_raw);
      ReportPtr r(report_raw);
      Ok(maft_model_save(model.get(), ft_c.out.c_str()));
      WriteReport(r.get(), DefaultReportPath(ft_report, ft_c.out), true);
      std::printf("finetune: %s iterations, l_ma %.4f -> %.4f, l_dis %.4f, "
                  "distillation gap %.4f, checkpoint %s\n",
                  Text(r.get(), "iterations").c_str(),
                  Number(r.get(), "l_ma_first"), Number(r.get(), "l_ma_last"),
                  Number(r.get(), "l_dis_last"),
                  Number(r.get(), "distillation_gap"), ft_c.out.c_str());
    } else if (*ev) {
      ConfigPtr config = LoadConfig(ev_c);
      if (!ev_mode.empty()) Set(config.get(), "eval.mode", ev_mode);
      if (!ev_lambda.empty()) Set(config.get(), "eval.ensemble_lambda", ev_lambda);
      if (!ev_split.empty()) Set(config.get(), "eval.split", ev_split);
      if (!ev_merge.empty()) Set(config.get(), "eval.merge_mode", ev_merge);
      DatasetPtr data = GetDataset(config.get(), ev_data);
      ModelPtr model = LoadModel(ev_model);
      if (ev_tau) Ok(maft_model_set_temperature(model.get(), *ev_tau));
      maft_report* raw = nullptr;
      Ok(maft_evaluate(config.get(), data.get(), model.get(), &raw));
      ReportPtr r(raw);
      WriteReport(r.get(), ev_c.out, true);
      PrintEvalLine(Text(r.get(), "eval.mode").c_str(), r.get(), "");
    } else if (*cmp) {
      ConfigPtr config = LoadConfig(cmp_c);
      if (!cmp_lambda.empty()) Set(config.get(), "eval.ensemble_lambda", cmp_lambda);
      DatasetPtr data = GetDataset(config.get(), cmp_data);
      ModelPtr teacher = LoadModel(cmp_teacher);
      ModelPtr student = LoadModel(cmp_student);
      maft_report* raw = nullptr;
      Ok(maft_compare(config.get(), data.get(), teacher.get(), student.get(),
                      &raw));
      ReportPtr r(raw);
      WriteReport(r.get(), cmp_c.out, true);
      PrintEvalLine("frozen_merge", r.get(), "frozen.");
      PrintEvalLine("teacher ipclip", r.get(), "teacher.");
      PrintEvalLine("maft ipclip", r.get(), "maft.");
      std::printf("delta hIoU %+.1f  delta rho unseen %+.3f\n",
                  Number(r.get(), "delta.hiou"),
                  Number(r.get(), "delta.spearman_unseen"));
    } else if (*fl) {
      ConfigPtr config = LoadConfig(fl_c);
      std::vector<std::string> pipelines;
      if (fl_mode.empty()) {
        pipelines = {"merge", "ipclip"};
      } else {
        pipelines = {fl_mode};
      }
      std::vector<ReportPtr> reports;
      for (const std::string& p : pipelines) {
        maft_report* raw = nullptr;
        Ok(maft_count_flops(config.get(), p.c_str(), fl_n, &raw));
        reports.emplace_back(raw);
        std::printf("%-7s N=%zu encoder MACs %s (%.4f G), resize MACs %s\n",
                    p.c_str(), fl_n,
                    Text(raw, "encoder_macs").c_str(),
                    Number(raw, "encoder_gmacs"),
                    Text(raw, "resize_macs").c_str());
      }
      if (reports.size() == 2) {
        std::printf("merge / ipclip = %.2f\n",
                    Number(reports[0].get(), "encoder_macs") /
                        Number(reports[1].get(), "encoder_macs"));
      }
      if (!fl_c.out.empty()) {
        // One file; each pipeline under its own prefix.
        std::string text = "format_version=1\n";
        for (std::size_t i = 0; i < reports.size(); ++i) {
          size_t n = 0;
          Ok(maft_report_size(reports[i].get(), &n));
          for (size_t k = 0; k < n; ++k) {
            const char* key = nullptr;
            const char* value = nullptr;
            Ok(maft_report_entry(reports[i].get(), k, &key, &value));
            text += pipelines[i] + "." + key + "=" + value + "\n";
          }
        }
        std::FILE* f = std::fopen(fl_c.out.c_str(), "w");
        if (f == nullptr) {
          throw CliFailure(MAFT_ERR_IO, "cannot write " + fl_c.out);
        }
        std::fputs(text.c_str(), f);
        std::fclose(f);
      }
    } else if (*gc) {
      ConfigPtr config = LoadConfig(gc_c);
      if (gc_lambda) Set(config.get(), "train.lambda", Format(*gc_lambda));
      int passed = 0;
      maft_report* raw = nullptr;
      Ok(maft_grad_check(config.get(), gc_seeds.data(), gc_seeds.size(),
                         gc_tol, &passed, &raw));
      ReportPtr r(raw);
      WriteReport(r.get(), gc_c.out, false);
      std::printf("grad-check: %s parameters, %s probes, max rel error %.3g "
                  "(tolerance %.3g): %s\n",
                  Text(r.get(), "params_checked").c_str(),
                  Text(r.get(), "probes").c_str(),
                  Number(r.get(), "max_rel_error"), gc_tol,
                  passed ? "PASS" : "FAIL");
      if (!passed) {
        throw CliFailure(MAFT_ERR_NUMERIC,
                         "gradient check exceeded the tolerance");
      }
    }
  } catch (const CliFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(MAFT_ERR_INTERNAL);
  }
  return 0;
}
