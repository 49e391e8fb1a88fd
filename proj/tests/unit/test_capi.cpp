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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "maft/maft.h"

extern "C" const char* maft_test_c_version(void);

namespace {

class CApi : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("maft_capi_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir_);
    ASSERT_EQ(maft_config_create("toy", &config_), MAFT_OK);
    for (const auto& [k, v] : std::vector<std::pair<const char*, const char*>>{
             {"data.train_scenes", "4"},
             {"data.val_scenes", "2"},
             {"data.test_scenes", "3"},
             {"pretrain.iterations", "3"},
             {"pretrain.batch_size", "2"},
             {"train.iterations", "2"},
             {"train.batch_size", "1"},
             {"train.eval_every", "1"}})
      ASSERT_EQ(maft_config_set(config_, k, v), MAFT_OK) << k;
    ASSERT_EQ(maft_dataset_generate(config_, &data_), MAFT_OK);
  }
  void TearDown() override {
    maft_dataset_free(data_);
    maft_config_free(config_);
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string File(const char* name) const { return (dir_ / name).string(); }

  maft_model* Pretrain() {
    maft_model* model = nullptr;
    maft_report* report = nullptr;
    const maft_status s = maft_pretrain(config_, data_, &model, &report);
    // Three steps cannot reach the accuracy target; the model still comes back.
    EXPECT_TRUE(s == MAFT_OK || s == MAFT_ERR_CONVERGENCE) << maft_status_name(s);
    EXPECT_NE(model, nullptr);
    EXPECT_NE(report, nullptr);
    maft_report_free(report);
    return model;
  }

  std::filesystem::path dir_;
  maft_config* config_ = nullptr;
  maft_dataset* data_ = nullptr;
};

std::string Text(const maft_report* r) {
  char* t = nullptr;
  EXPECT_EQ(maft_report_text(r, &t), MAFT_OK);
  std::string out = t ? t : "";
  maft_string_free(t);
  return out;
}

TEST(CApiBasics, VersionStatusAndHiou) {
  EXPECT_STREQ(maft_version(), maft_test_c_version());
  EXPECT_STREQ(maft_status_name(MAFT_OK), "ok");
  EXPECT_STREQ(maft_status_name(MAFT_ERR_CONVERGENCE), "convergence failure");
  EXPECT_DOUBLE_EQ(maft_hiou(40.0, 40.0), 40.0);
  EXPECT_EQ(maft_hiou(0.0, 0.0), 0.0);
}

TEST(CApiBasics, ErrorsSetLastError) {
  maft_config* c = nullptr;
  EXPECT_EQ(maft_config_create("huge", &c), MAFT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(c, nullptr);
  EXPECT_NE(std::string(maft_last_error()).find("huge"), std::string::npos);
  EXPECT_EQ(maft_config_create("toy", nullptr), MAFT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(maft_config_parse("format_version=7\n", &c), MAFT_ERR_FORMAT);
  EXPECT_EQ(maft_config_load("/nonexistent/maft.ini", &c), MAFT_ERR_IO);
  maft_model* m = nullptr;
  EXPECT_EQ(maft_model_load("/nonexistent/model.maft", &m), MAFT_ERR_IO);
  maft_config_free(nullptr);
  maft_model_free(nullptr);
  maft_report_free(nullptr);
  maft_string_free(nullptr);
}

TEST(CApiBasics, ConfigSetIsAtomic) {
  maft_config* c = nullptr;
  ASSERT_EQ(maft_config_create("experiment", &c), MAFT_OK);
  char* before = nullptr;
  ASSERT_EQ(maft_config_text(c, &before), MAFT_OK);
  EXPECT_EQ(maft_config_set(c, "train.lr", "-1"), MAFT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(maft_config_set(c, "encoder.image_size", "32"),
            MAFT_ERR_INVALID_ARGUMENT);  // no longer matches data.image_size
  EXPECT_EQ(maft_config_set(c, "train.nothing", "1"), MAFT_ERR_INVALID_ARGUMENT);
  char* after = nullptr;
  ASSERT_EQ(maft_config_text(c, &after), MAFT_OK);
  EXPECT_STREQ(before, after);
  maft_config* back = nullptr;
  ASSERT_EQ(maft_config_parse(after, &back), MAFT_OK);
  maft_string_free(before);
  maft_string_free(after);
  maft_config_free(back);
  maft_config_free(c);
}

TEST_F(CApi, DatasetRoundTrip) {
  ASSERT_EQ(maft_dataset_save(data_, File("d.maft").c_str()), MAFT_OK);
  maft_dataset* loaded = nullptr;
  ASSERT_EQ(maft_dataset_load(File("d.maft").c_str(), &loaded), MAFT_OK);
  maft_report *a = nullptr, *b = nullptr;
  ASSERT_EQ(maft_dataset_report(data_, &a), MAFT_OK);
  ASSERT_EQ(maft_dataset_report(loaded, &b), MAFT_OK);
  EXPECT_EQ(Text(a), Text(b));
  maft_report_free(a);
  maft_report_free(b);
  maft_dataset_free(loaded);
  std::ofstream(File("junk.maft")) << "not a container";
  EXPECT_EQ(maft_dataset_load(File("junk.maft").c_str(), &loaded), MAFT_ERR_FORMAT);
}

struct Snapshots {
  std::vector<size_t> iterations;
  std::vector<uint64_t> fingerprints;
};

void OnSnapshot(size_t it, const maft_model* student, void* user) {
  auto* s = static_cast<Snapshots*>(user);
  uint64_t fp = 0;
  maft_model_fingerprint(student, &fp);
  s->iterations.push_back(it);
  s->fingerprints.push_back(fp);
}

TEST_F(CApi, TrainEvaluateCompare) {
  maft_model* teacher = Pretrain();
  ASSERT_NE(teacher, nullptr);
  uint64_t teacher_fp = 0;
  ASSERT_EQ(maft_model_fingerprint(teacher, &teacher_fp), MAFT_OK);

  Snapshots snaps;
  maft_model* student = nullptr;
  maft_report* ft = nullptr;
  ASSERT_EQ(maft_finetune(config_, data_, teacher, OnSnapshot, &snaps, &student, &ft),
            MAFT_OK)
      << maft_last_error();
  EXPECT_EQ(snaps.iterations, (std::vector<size_t>{1, 2}));
  uint64_t student_fp = 0, after_fp = 0;
  ASSERT_EQ(maft_model_fingerprint(student, &student_fp), MAFT_OK);
  ASSERT_EQ(maft_model_fingerprint(teacher, &after_fp), MAFT_OK);
  EXPECT_EQ(after_fp, teacher_fp);
  EXPECT_EQ(snaps.fingerprints.back(), student_fp);
  EXPECT_NE(student_fp, teacher_fp);
  double gap = -1.0;
  EXPECT_EQ(maft_report_number(ft, "distillation_gap", &gap), MAFT_OK);
  EXPECT_GE(gap, 0.0);
  ASSERT_EQ(maft_report_write_tensors(ft, File("ft.tensors").c_str()), MAFT_OK);
  EXPECT_GT(std::filesystem::file_size(File("ft.tensors")), 0u);

  // Evaluation is deterministic.
  maft_report *e1 = nullptr, *e2 = nullptr;
  ASSERT_EQ(maft_evaluate(config_, data_, student, &e1), MAFT_OK);
  ASSERT_EQ(maft_evaluate(config_, data_, student, &e2), MAFT_OK);
  EXPECT_EQ(Text(e1), Text(e2));
  double s = 0, u = 0, h = 0;
  ASSERT_EQ(maft_report_number(e1, "miou_seen", &s), MAFT_OK);
  ASSERT_EQ(maft_report_number(e1, "miou_unseen", &u), MAFT_OK);
  ASSERT_EQ(maft_report_number(e1, "hiou", &h), MAFT_OK);
  EXPECT_NEAR(h, maft_hiou(s, u), 1e-9);
  const char* value = nullptr;
  EXPECT_EQ(maft_report_get(e1, "no_such_key", &value), MAFT_ERR_INVALID_ARGUMENT);
  size_t n = 0;
  ASSERT_EQ(maft_report_size(e1, &n), MAFT_OK);
  const char* key = nullptr;
  ASSERT_EQ(maft_report_entry(e1, 0, &key, &value), MAFT_OK);
  EXPECT_STREQ(key, "eval.mode");
  EXPECT_EQ(Text(e1).rfind("format_version=", 0), 0u);
  EXPECT_EQ(maft_report_entry(e1, n, &key, &value), MAFT_ERR_INVALID_ARGUMENT);

  maft_report* cmp = nullptr;
  ASSERT_EQ(maft_compare(config_, data_, teacher, student, &cmp), MAFT_OK);
  double d = 0, fh = 0, mh = 0;
  ASSERT_EQ(maft_report_number(cmp, "delta.hiou", &d), MAFT_OK);
  ASSERT_EQ(maft_report_number(cmp, "frozen.hiou", &fh), MAFT_OK);
  ASSERT_EQ(maft_report_number(cmp, "maft.hiou", &mh), MAFT_OK);
  EXPECT_DOUBLE_EQ(d, mh - fh);

  // Checkpoints survive a round trip; temperature changes the fingerprint
  // only through the config, not the weights.
  ASSERT_EQ(maft_model_save(student, File("s.maft").c_str()), MAFT_OK);
  maft_model* back = nullptr;
  ASSERT_EQ(maft_model_load(File("s.maft").c_str(), &back), MAFT_OK);
  uint64_t back_fp = 0;
  ASSERT_EQ(maft_model_fingerprint(back, &back_fp), MAFT_OK);
  EXPECT_EQ(back_fp, student_fp);
  EXPECT_EQ(maft_model_set_temperature(back, 0.0), MAFT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(maft_model_set_temperature(back, 0.05), MAFT_OK);

  maft_report_free(cmp);
  maft_report_free(e1);
  maft_report_free(e2);
  maft_report_free(ft);
  maft_model_free(back);
  maft_model_free(student);
  maft_model_free(teacher);
}

TEST_F(CApi, FlopsAndGradCheck) {
  maft_report *merge = nullptr, *ip = nullptr;
  ASSERT_EQ(maft_count_flops(config_, "merge", 16, &merge), MAFT_OK);
  ASSERT_EQ(maft_count_flops(config_, "ipclip", 16, &ip), MAFT_OK);
  double m = 0, i = 0;
  ASSERT_EQ(maft_report_number(merge, "encoder_macs", &m), MAFT_OK);
  ASSERT_EQ(maft_report_number(ip, "encoder_macs", &i), MAFT_OK);
  EXPECT_GE(m / i, 5.0);
  maft_report* bad = nullptr;
  EXPECT_EQ(maft_count_flops(config_, "dense", 4, &bad), MAFT_ERR_INVALID_ARGUMENT);
  maft_report_free(merge);
  maft_report_free(ip);

  const uint64_t seeds[] = {3};
  int passed = 0;
  maft_report* g = nullptr;
  ASSERT_EQ(maft_grad_check(config_, seeds, 1, 1e-4, &passed, &g), MAFT_OK);
  EXPECT_EQ(passed, 1);
  double err = 1.0;
  ASSERT_EQ(maft_report_number(g, "max_rel_error", &err), MAFT_OK);
  EXPECT_LE(err, 1e-4);
  maft_report_free(g);
  EXPECT_EQ(maft_grad_check(config_, nullptr, 1, 1e-4, &passed, &g),
            MAFT_ERR_INVALID_ARGUMENT);
}

}  // namespace
