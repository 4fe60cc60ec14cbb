#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "jsafe/nn/adam.hpp"
#include "jsafe/nn/checkpoint.hpp"

namespace jsafe::nn {
namespace {

TEST(Adam, FirstStepMovesEachEntryByTheLearningRate) {
  Param<double> p("p", 1, 3);
  p.value << 1.0, 2.0, 3.0;
  p.grad << 0.5, -4.0, 1e-3;
  AdamState<double> st({&p}, 0.01);
  ASSERT_TRUE(adam_step(st, {&p}));
  // Bias correction makes the first update lr * g / (|g| + eps').
  EXPECT_NEAR(p.value(0, 0), 1.0 - 0.01, 1e-7);
  EXPECT_NEAR(p.value(0, 1), 2.0 + 0.01, 1e-7);
  EXPECT_NEAR(p.value(0, 2), 3.0 - 0.01, 1e-4);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, MatchesReferenceRecursionOverSeveralSteps) {
  Param<double> p("p", 1, 1);
  p.value << 0.3;
  AdamState<double> st({&p}, 0.05);
  double x = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 20; ++t) {
    p.grad(0, 0) = 2.0 * p.value(0, 0) - 1.0;
    const double g = 2.0 * x - 1.0;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    adam_step(st, {&p});
    EXPECT_NEAR(p.value(0, 0), x, 1e-12);
  }
}

TEST(Adam, MinimisesAQuadratic) {
  Param<double> p("p", 2, 2);
  p.value << 3.0, -2.0, 1.0, 5.0;
  AdamState<double> st({&p}, 0.05);
  for (int i = 0; i < 3000; ++i) {
    p.grad = 2.0 * p.value;
    adam_step(st, {&p});
  }
  EXPECT_LT(p.value.cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Adam, SkipsNonFiniteGradientsWithoutTouchingState) {
  Param<double> p("p", 1, 2);
  p.value << 1.0, 1.0;
  p.grad << 1.0, std::numeric_limits<double>::quiet_NaN();
  AdamState<double> st({&p});
  EXPECT_FALSE(adam_step(st, {&p}));
  EXPECT_TRUE(st.skipped_last);
  EXPECT_EQ(st.step, 0);
  EXPECT_EQ(p.value(0, 0), 1.0);
  EXPECT_EQ(st.first_moment[0].squaredNorm(), 0.0);
}

TEST(ClipGradNorm, RescalesOnlyAboveTheLimit) {
  Param<double> a("a", 1, 1), b("b", 1, 1);
  a.grad << 3.0;
  b.grad << 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm<double>({&a, &b}, 10.0), 5.0);
  EXPECT_EQ(a.grad(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm<double>({&a, &b}, 1.0), 5.0);
  EXPECT_NEAR(std::hypot(a.grad(0, 0), b.grad(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(a.grad(0, 0) / b.grad(0, 0), 0.75, 1e-12);
}

Checkpoint sample_checkpoint() {
  Param<float> w("w", 2, 3), b("b", 1, 3);
  for (int i = 0; i < 6; ++i) w.value.data()[i] = 0.5f * static_cast<float>(i) - 1.0f;
  b.value << 1e-7f, -3.5f, 1e20f;
  AdamState<float> st({&w, &b});
  w.grad.setConstant(0.25f);
  b.grad.setConstant(-1.0f);
  adam_step(st, {&w, &b});
  Checkpoint ck;
  ck.header["kind"] = "dqn";
  ck.header["note"] = "round trip";
  ck.parameters = export_parameters<float>({&w, &b});
  ck.optimizer = export_optimizer(st, {&w, &b});
  return ck;
}

TEST(Checkpoint, SerialisationRoundTripIsExact) {
  const Checkpoint ck = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(ck);
  EXPECT_EQ(bytes.substr(0, 8), "JSAFECKP");
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.header, ck.header);
  EXPECT_EQ(back.parameters, ck.parameters);
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(*back.optimizer, *ck.optimizer);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "jsafe_ckpt_test.bin";
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(path.string(), ck);
  EXPECT_EQ(load_checkpoint(path.string()).parameters, ck.parameters);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), CheckpointError);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), CheckpointError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(deserialize_checkpoint(bad_version), CheckpointError);
  for (std::size_t cut : {std::size_t{4}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut)), CheckpointError) << cut;
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), CheckpointError);
}

TEST(Checkpoint, ImportRestoresValuesAndChecksNamesAndShapes) {
  const Checkpoint ck = sample_checkpoint();
  Param<double> w("w", 2, 3), b("b", 1, 3);
  import_parameters<double>({&w, &b}, ck.parameters);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(w.value.data()[i], static_cast<double>(ck.parameters[0].values[static_cast<std::size_t>(i)]));
  EXPECT_EQ(b.value(0, 2), static_cast<double>(1e20f));
  AdamState<double> st;
  import_optimizer(st, {&w, &b}, *ck.optimizer);
  EXPECT_EQ(st.step, 1);

  Param<double> wrong_shape("w", 3, 2);
  EXPECT_THROW(import_parameters<double>({&wrong_shape, &b}, ck.parameters), CheckpointError);
  Param<double> wrong_name("v", 2, 3);
  EXPECT_THROW(import_parameters<double>({&wrong_name, &b}, ck.parameters), CheckpointError);
  EXPECT_THROW(import_parameters<double>({&w}, ck.parameters), CheckpointError);
}

}  // namespace
}  // namespace jsafe::nn
