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

/* C interface to the MAFT library. Objects are opaque handles owned by the
 * caller and released with the matching *_free function. Every call that can
 * fail returns a maft_status; on failure maft_last_error() describes the
 * cause for the calling thread until its next failing call. */

#ifndef MAFT_MAFT_H_
#define MAFT_MAFT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MAFT_API __declspec(dllexport)
#else
#define MAFT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum maft_status {
  MAFT_OK = 0,
  MAFT_ERR_INVALID_ARGUMENT = 1,
  MAFT_ERR_DIMENSION = 2,
  MAFT_ERR_FORMAT = 3,
  MAFT_ERR_IO = 4,
  MAFT_ERR_NUMERIC = 5,
  MAFT_ERR_CONVERGENCE = 6,
  MAFT_ERR_INVARIANT = 7,
  MAFT_ERR_DEGENERATE = 8,
  MAFT_ERR_INTERNAL = 99
} maft_status;

typedef struct maft_config maft_config;
typedef struct maft_dataset maft_dataset;
typedef struct maft_model maft_model;
typedef struct maft_report maft_report;

MAFT_API const char* maft_version(void);
MAFT_API const char* maft_last_error(void);
MAFT_API const char* maft_status_name(maft_status status);
/* Releases strings returned through char** out-parameters. */
MAFT_API void maft_string_free(char* s);

/* ---- configuration ---- */

/* preset: "toy" (32x32 unit-test scale) or "experiment" (64x64, 12 classes). */
MAFT_API maft_status maft_config_create(const char* preset, maft_config** out);
MAFT_API maft_status maft_config_load(const char* path, maft_config** out);
MAFT_API maft_status maft_config_parse(const char* text, maft_config** out);
MAFT_API maft_status maft_config_save(const maft_config* config,
                                      const char* path);
MAFT_API maft_status maft_config_text(const maft_config* config, char** out);
/* key is "section.key", e.g. "train.lr". */
MAFT_API maft_status maft_config_set(maft_config* config, const char* key,
                                     const char* value);
MAFT_API maft_status maft_config_reseed(maft_config* config, uint64_t seed);
MAFT_API void maft_config_free(maft_config* config);

/* ---- data ---- */

MAFT_API maft_status maft_dataset_generate(const maft_config* config,
                                           maft_dataset** out);
MAFT_API maft_status maft_dataset_load(const char* path, maft_dataset** out);
MAFT_API maft_status maft_dataset_save(const maft_dataset* data,
                                       const char* path);
/* Summary of class split and scene counts. */
MAFT_API maft_status maft_dataset_report(const maft_dataset* data,
                                         maft_report** out);
MAFT_API void maft_dataset_free(maft_dataset* data);

/* ---- models ---- */

MAFT_API maft_status maft_model_load(const char* path, maft_model** out);
MAFT_API maft_status maft_model_save(const maft_model* model,
                                     const char* path);
MAFT_API maft_status maft_model_fingerprint(const maft_model* model,
                                            uint64_t* out);
/* Replaces the softmax temperature used when classifying. */
MAFT_API maft_status maft_model_set_temperature(maft_model* model, double tau);
MAFT_API void maft_model_free(maft_model* model);

/* Pre-trains a toy teacher. When the accuracy target is missed the model and
 * report are still returned and the status is MAFT_ERR_CONVERGENCE. */
MAFT_API maft_status maft_pretrain(const maft_config* config,
                                   const maft_dataset* data, maft_model** out,
                                   maft_report** report);

/* Called after every eval_every steps and after the last one. The student
 * handle is only valid during the call. */
typedef void (*maft_snapshot_fn)(size_t iteration, const maft_model* student,
                                 void* user);

/* Mask-aware fine-tuning of a copy of the teacher. The report holds the loss
 * curve as the tensor "loss_curve" [iterations, 4] with columns
 * l_ma, l_dis, lambda, total. */
MAFT_API maft_status maft_finetune(const maft_config* config,
                                   const maft_dataset* data,
                                   const maft_model* teacher,
                                   maft_snapshot_fn on_snapshot, void* user,
                                   maft_model** out, maft_report** report);

/* ---- evaluation ---- */

/* Uses the [eval] section of the config. The report holds per-class IoU as
 * the tensor "per_class_iou" [C]. */
MAFT_API maft_status maft_evaluate(const maft_config* config,
                                   const maft_dataset* data,
                                   const maft_model* model,
                                   maft_report** out);

/* frozen_merge on the teacher, ipclip on the teacher and ipclip on the
 * student, under the prefixes "frozen.", "teacher." and "maft.". */
MAFT_API maft_status maft_compare(const maft_config* config,
                                  const maft_dataset* data,
                                  const maft_model* teacher,
                                  const maft_model* student,
                                  maft_report** out);

/* pipeline: "merge" or "ipclip". Uses the [encoder] section. */
MAFT_API maft_status maft_count_flops(const maft_config* config,
                                      const char* pipeline, size_t n,
                                      maft_report** out);

/* Float64 gradient check of the full objective at the config's encoder
 * shape. *passed is set to 1 when every probe is within tolerance. */
MAFT_API maft_status maft_grad_check(const maft_config* config,
                                     const uint64_t* seeds, size_t num_seeds,
                                     double tolerance, int* passed,
                                     maft_report** out);

MAFT_API double maft_hiou(double miou_seen, double miou_unseen);

/* ---- reports ---- */

MAFT_API maft_status maft_report_size(const maft_report* report, size_t* out);
/* Borrowed pointers, valid until the report is freed. */
MAFT_API maft_status maft_report_entry(const maft_report* report, size_t index,
                                       const char** key, const char** value);
/* MAFT_ERR_INVALID_ARGUMENT when the key is absent. */
MAFT_API maft_status maft_report_get(const maft_report* report,
                                     const char* key, const char** value);
MAFT_API maft_status maft_report_number(const maft_report* report,
                                        const char* key, double* out);
MAFT_API maft_status maft_report_text(const maft_report* report, char** out);
/* Key=value text file. */
MAFT_API maft_status maft_report_write(const maft_report* report,
                                       const char* path);
/* Tensor container with the report's arrays and its entries as metadata. */
MAFT_API maft_status maft_report_write_tensors(const maft_report* report,
                                               const char* path);
MAFT_API void maft_report_free(maft_report* report);

#ifdef __cplusplus
}
#endif

#endif /* MAFT_MAFT_H_ */
