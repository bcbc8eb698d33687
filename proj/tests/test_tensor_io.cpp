#include "mixlab/tensor_io.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace mixlab {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mixlab_tensor_io_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(TensorIo, RoundTripIsBitExact) {
  CounterRng rng(1);
  const std::vector<NamedTensor> in = {{"a", oracle::random_matrix(rng, 3, 4)},
                                       {"b.c", oracle::random_matrix(rng, 1, 1)},
                                       {"empty", Matrix(0, 5)},
                                       {"tiny", Matrix::Constant(2, 2, 4.9e-324)}};
  const fs::path stem = scratch("round_trip");
  save_tensors(stem, in);
  const auto out = load_tensors(stem);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].name, in[i].name);
    EXPECT_EQ(out[i].value.rows(), in[i].value.rows());
    EXPECT_EQ(out[i].value.cols(), in[i].value.cols());
    EXPECT_EQ(out[i].value, in[i].value);
  }
  EXPECT_EQ(find_tensor(out, "b.c"), in[1].value);
  EXPECT_THROW(find_tensor(out, "zzz"), IoError);
}

TEST(TensorIo, ErrorsNameThePath) {
  const fs::path stem = scratch("does_not_exist");
  try {
    load_tensors(stem);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("does_not_exist"), std::string::npos);
  }
  EXPECT_THROW(save_tensors(scratch("bad_name"), {{"has space", Matrix::Zero(1, 1)}}), IoError);
  EXPECT_THROW(save_tensors(fs::path("/nonexistent_dir_for_test/x"), {{"a", Matrix::Zero(1, 1)}}), IoError);
}

TEST(TensorIo, TruncatedDataAndMalformedManifest) {
  const fs::path stem = scratch("truncated");
  save_tensors(stem, {{"a", Matrix::Ones(4, 4)}});
  fs::resize_file(data_path(stem), 8);
  EXPECT_THROW(load_tensors(stem), IoError);

  const fs::path bad = scratch("malformed");
  save_tensors(bad, {{"a", Matrix::Ones(1, 1)}});
  std::ofstream(manifest_path(bad), std::ios::app) << "b two 1 0\n";
  EXPECT_THROW(load_tensors(bad), IoError);
}

TEST(TensorIo, StackRoundTrip) {
  for (MixerKind kind : {MixerKind::hydra, MixerKind::bimamba, MixerKind::favor, MixerKind::softmax}) {
    BlockStackConfig cfg;
    cfg.d_model = 8;
    cfg.num_blocks = 2;
    cfg.kernel_size = 3;
    cfg.mixer = kind;
    cfg.num_heads = 2;
    cfg.features = 4;
    cfg.state_size = 3;
    const auto blocks = init_stack(cfg, 5);
    const fs::path stem = scratch("stack_" + to_string(kind));
    save_tensors(stem, flatten_stack(blocks));
    const auto back = unflatten_stack(load_tensors(stem), cfg);
    ASSERT_EQ(back.size(), blocks.size());
    CounterRng rng(9);
    const FeatureSequence x(oracle::random_matrix(rng, 6, 8));
    EXPECT_EQ(stack_forward(x, cfg, back).values(), stack_forward(x, cfg, blocks).values()) << to_string(kind);
  }
}

}  // namespace
}  // namespace mixlab
