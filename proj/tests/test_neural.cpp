#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dream/neural.hpp"

using namespace dream;

namespace {

std::vector<std::size_t> dense_widths(const MlpModel& model) {
  std::vector<std::size_t> widths;
  for (const auto& spec : model.specs())
    if (spec.kind == LayerSpec::Kind::Dense) widths.push_back(spec.width);
  return widths;
}

std::size_t count_kind(const MlpModel& model, LayerSpec::Kind kind) {
  std::size_t n = 0;
  for (const auto& spec : model.specs())
    if (spec.kind == kind) ++n;
  return n;
}

// Well-separated Gaussian blobs in 12 dimensions; class c lights up
// dimensions [4c, 4c+4). Rows interleave classes so any contiguous split
// keeps all classes on both sides.
void make_blobs(std::size_t n_per_class, std::size_t n_classes, Matrix& x,
                Matrix& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  const std::size_t n = n_per_class * n_classes;
  x = Matrix::Zero(n, 12);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      const std::size_t row = i * n_classes + c;
      for (std::size_t d = 0; d < 12; ++d)
        x(row, d) = (d / 4 == c ? 5.0 : 0.0) + noise(rng);
      labels[row] = c;
    }
  }
  y = one_hot(labels, n_classes);
}

}  // namespace

TEST_CASE("hidden widths scale with the input") {
  CHECK(dense_widths(build_dream_nap(30, 9, 1)) ==
        std::vector<std::size_t>{36, 18, 9, 9});
  CHECK(dense_widths(build_dream_nap(10, 5, 1)) ==
        std::vector<std::size_t>{12, 6, 3, 5});
  // round half up, floor of one neuron: 3 -> [4, 2, 1]
  CHECK(dense_widths(build_dream_nap(3, 2, 1)) ==
        std::vector<std::size_t>{4, 2, 1, 2});
}

TEST_CASE("layer stack composition") {
  const auto nap = build_dream_nap(30, 9, 1);
  CHECK(count_kind(nap, LayerSpec::Kind::Dropout) == 4);
  CHECK(count_kind(nap, LayerSpec::Kind::BatchNorm) == 0);
  for (const auto& spec : nap.specs())
    if (spec.kind == LayerSpec::Kind::Dropout) CHECK(spec.rate == 0.2);
  CHECK(nap.specs().back().kind == LayerSpec::Kind::Activation);
  CHECK(nap.specs().back().act == Activation::Softmax);

  const auto napr = build_dream_napr(120, 9, Activation::Relu, 1);
  CHECK(dense_widths(napr) == std::vector<std::size_t>{300, 200, 100, 50, 9});
  CHECK(count_kind(napr, LayerSpec::Kind::Dropout) == 5);
  CHECK(count_kind(napr, LayerSpec::Kind::BatchNorm) == 5);
  for (const auto& spec : napr.specs())
    if (spec.kind == LayerSpec::Kind::Dropout) CHECK(spec.rate == 0.5);
}

TEST_CASE("parameter count") {
  // 30 -> 36 -> 18 -> 9 -> 9:
  // (30*36+36) + (36*18+18) + (18*9+9) + (9*9+9) = 2043
  CHECK(build_dream_nap(30, 9, 1).parameter_count() == 2043);
}

TEST_CASE("softmax output is a probability distribution") {
  auto model = build_dream_nap(6, 4, 7);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Matrix batch(5, 6);
  for (int i = 0; i < batch.size(); ++i) batch.data()[i] = g(rng);
  const Matrix probs = model.forward(batch, false);
  REQUIRE(probs.rows() == 5);
  REQUIRE(probs.cols() == 4);
  for (int r = 0; r < probs.rows(); ++r) {
    CHECK(probs.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int c = 0; c < probs.cols(); ++c) CHECK(probs(r, c) > 0.0);
  }
}

TEST_CASE("softmax of equal logits is uniform") {
  // A model with all-zero weights and biases produces zero logits.
  MlpModel model(3, {LayerSpec::dense(4), LayerSpec::activation(Activation::Softmax)}, 1);
  model.dense_params()[0].weights.setZero();
  model.dense_params()[0].bias.setZero();
  const Matrix probs = model.forward(Matrix::Random(2, 3), false);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(probs(r, c) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("inference is deterministic, bit for bit") {
  auto a = build_dream_nap(8, 3, 99);
  auto b = build_dream_nap(8, 3, 99);
  const Matrix batch = Matrix::Random(7, 8);
  const Matrix pa = a.forward(batch, false);
  const Matrix pb = b.forward(batch, false);
  CHECK((pa - pb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;

  SUBCASE("plain dense/relu stack") {
    auto model = build_dream_nap(9, 4, 5);
    Matrix batch(6, 9);
    for (int i = 0; i < batch.size(); ++i) batch.data()[i] = g(rng);
    Matrix onehot = one_hot({0, 1, 2, 3, 1, 2}, 4);
    CHECK(model.gradient_check(batch, onehot, 80) < 1e-4);
  }
  SUBCASE("with batch normalization") {
    auto model = build_dream_napr(12, 3, Activation::Relu, 5);
    Matrix batch(8, 12);
    for (int i = 0; i < batch.size(); ++i) batch.data()[i] = g(rng);
    Matrix onehot = one_hot({0, 1, 2, 0, 1, 2, 0, 1}, 3);
    CHECK(model.gradient_check(batch, onehot, 80) < 1e-3);
  }
  SUBCASE("sigmoid activations") {
    MlpModel model(5,
                   {LayerSpec::dense(6), LayerSpec::activation(Activation::Sigmoid),
                    LayerSpec::dense(3), LayerSpec::activation(Activation::Softmax)},
                   17);
    Matrix batch(4, 5);
    for (int i = 0; i < batch.size(); ++i) batch.data()[i] = g(rng);
    Matrix onehot = one_hot({0, 1, 2, 1}, 3);
    CHECK(model.gradient_check(batch, onehot, 60) < 1e-4);
  }
}

TEST_CASE("output-layer bias gradient has the closed form (p - y) averaged") {
  MlpModel model(4, {LayerSpec::dense(3), LayerSpec::activation(Activation::Softmax)}, 2);
  const Matrix batch = Matrix::Random(5, 4);
  const Matrix onehot = one_hot({0, 1, 2, 0, 1}, 3);
  const Matrix probs = model.forward(batch, false);
  model.loss_and_gradients(batch, onehot, false);
  const Eigen::VectorXd expected =
      (probs - onehot).colwise().mean().transpose();
  const auto& got = model.bias_grads().back();
  REQUIRE(got.size() == expected.size());
  for (int i = 0; i < got.size(); ++i)
    CHECK(got(i) == doctest::Approx(expected(i)).epsilon(1e-10));
}

TEST_CASE("a tiny Adam step lowers the loss") {
  auto model = build_dream_nap(6, 3, 21);
  const Matrix batch = Matrix::Random(16, 6);
  const Matrix onehot = one_hot({0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0}, 3);
  const double before = model.loss_and_gradients(batch, onehot, false);
  model.adam_step(1e-5);
  Matrix probs = model.forward(batch, false);
  double after = 0.0;
  for (int r = 0; r < probs.rows(); ++r)
    for (int c = 0; c < probs.cols(); ++c)
      if (onehot(r, c) > 0.5) after -= std::log(probs(r, c));
  after /= static_cast<double>(probs.rows());
  CHECK(after < before);
}

TEST_CASE("training separates an easy synthetic problem") {
  Matrix x, y;
  make_blobs(60, 3, x, y, 101);
  // trace-free split: last 30 rows as validation
  const Matrix tx = x.topRows(150), ty = y.topRows(150);
  const Matrix vx = x.bottomRows(30), vy = y.bottomRows(30);
  auto model = build_dream_nap(12, 3, 13);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 60;
  const auto result = train(model, tx, ty, vx, vy, cfg);
  REQUIRE(!result.history.empty());
  const Matrix probs = model.forward(vx, false);
  std::size_t correct = 0;
  for (int r = 0; r < probs.rows(); ++r) {
    int pred;
    probs.row(r).maxCoeff(&pred);
    int truth;
    vy.row(r).maxCoeff(&truth);
    if (pred == truth) ++correct;
  }
  CHECK(static_cast<double>(correct) / probs.rows() == doctest::Approx(1.0));
  // loss history should improve overall
  CHECK(result.history.back().train_loss < result.history.front().train_loss);
}

TEST_CASE("training restores the best-validation-loss snapshot") {
  Matrix x, y;
  make_blobs(20, 3, x, y, 55);
  const Matrix tx = x.topRows(50), ty = y.topRows(50);
  const Matrix vx = x.bottomRows(10), vy = y.bottomRows(10);
  auto model = build_dream_nap(12, 3, 9);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 25;
  const auto result = train(model, tx, ty, vx, vy, cfg);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  for (const auto& rec : result.history)
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_epoch = rec.epoch;
    }
  CHECK(result.best_epoch == best_epoch);
  // The restored model reproduces the recorded best validation loss.
  Matrix probs = model.forward(vx, false);
  double loss = 0.0;
  for (int r = 0; r < probs.rows(); ++r)
    for (int c = 0; c < probs.cols(); ++c)
      if (vy(r, c) > 0.5) loss -= std::log(std::max(probs(r, c), 1e-12));
  loss /= static_cast<double>(probs.rows());
  CHECK(loss == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("training is reproducible for a fixed seed") {
  Matrix x, y;
  make_blobs(15, 3, x, y, 7);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 5;
  auto run = [&](std::uint64_t seed) {
    auto model = build_dream_nap(12, 3, seed);
    train(model, x, y, x, y, cfg);
    return model.forward(x, false);
  };
  const Matrix a = run(31), b = run(31), c = run(32);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("early stopping honours patience") {
  Matrix x, y;
  make_blobs(15, 3, x, y, 7);
  auto model = build_dream_nap(12, 3, 3);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 200;
  cfg.patience = 3;
  const auto result = train(model, x, y, x, y, cfg);
  CHECK(result.history.size() <= 200);
  CHECK(result.history.size() >= result.best_epoch);
}

TEST_CASE("save/load round-trip preserves behaviour") {
  auto model = build_dream_napr(10, 4, Activation::Relu, 77);
  const Matrix batch = Matrix::Random(6, 10);
  // run one training step so batchnorm running stats are non-trivial
  const Matrix onehot = one_hot({0, 1, 2, 3, 0, 1}, 4);
  model.loss_and_gradients(batch, onehot, true);
  model.adam_step(0.001);
  const Matrix before = model.forward(batch, false);

  std::ostringstream out;
  model.save(out, {"a", "b", "c", "d"});
  std::istringstream in(out.str());
  std::vector<std::string> labels;
  auto back = MlpModel::load(in, &labels);
  CHECK(labels == std::vector<std::string>{"a", "b", "c", "d"});
  const Matrix after = back.forward(batch, false);
  REQUIRE(after.rows() == before.rows());
  CHECK((after - before).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(back.parameter_count() == model.parameter_count());
}

TEST_CASE("one_hot layout") {
  const Matrix y = one_hot({2, 0}, 3);
  CHECK(y(0, 2) == 1.0);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(1, 0) == 1.0);
  CHECK(y.sum() == doctest::Approx(2.0));
}
