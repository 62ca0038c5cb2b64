#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace dream {

using Matrix = Eigen::MatrixXd;  // rows = samples, cols = features

enum class Activation { Relu, Sigmoid, Softmax };

struct LayerSpec {
  enum class Kind { Dense, Activation, Dropout, BatchNorm };
  Kind kind;
  std::size_t width = 0;       // Dense output width
  Activation act = Activation::Relu;
  double rate = 0.0;           // Dropout

  static LayerSpec dense(std::size_t w) { return {Kind::Dense, w}; }
  static LayerSpec activation(Activation a) { return {Kind::Activation, 0, a}; }
  static LayerSpec dropout(double r) { return {Kind::Dropout, 0, Activation::Relu, r}; }
  static LayerSpec batchnorm() { return {Kind::BatchNorm}; }
};

struct DenseParams {
  Matrix weights;            // in x out
  Eigen::VectorXd bias;      // out
};

struct BatchNormParams {
  Eigen::VectorXd gamma, beta;
  Eigen::VectorXd running_mean, running_var;
  double momentum = 0.99;
  double epsilon = 1e-3;
};

struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long long step = 0;
};

class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::size_t input_width, std::vector<LayerSpec> specs,
           std::uint64_t seed);

  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const;
  const std::vector<LayerSpec>& specs() const { return specs_; }

  /// Row-wise probability output. training=true applies inverted dropout
  /// (advancing the model RNG) and batch statistics for batchnorm;
  /// training=false is deterministic.
  Matrix forward(const Matrix& batch, bool training = false);

  /// One forward+backward pass: returns mean categorical cross-entropy and
  /// fills parameter gradients. `onehot` rows are one-hot label vectors.
  double loss_and_gradients(const Matrix& batch, const Matrix& onehot,
                            bool training);

  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double epsilon = 1e-8);

  /// Max relative error between analytic and central-difference gradients
  /// over up to `max_params` randomly chosen parameters (h = 1e-5).
  /// Dropout layers are ignored during the check.
  double gradient_check(const Matrix& batch, const Matrix& onehot,
                        std::size_t max_params = 64);

  std::size_t parameter_count() const;

  void save(std::ostream& sink,
            const std::vector<std::string>& label_alphabet = {}) const;
  static MlpModel load(std::istream& source,
                       std::vector<std::string>* label_alphabet = nullptr);

  std::mt19937_64& rng() { return rng_; }

  // Exposed for gradient checking and tests.
  std::vector<DenseParams>& dense_params() { return dense_; }
  std::vector<BatchNormParams>& batchnorm_params() { return bnorm_; }
  const std::vector<Matrix>& weight_grads() const { return grad_w_; }
  const std::vector<Eigen::VectorXd>& bias_grads() const { return grad_b_; }

 private:
  struct Tape;
  Matrix forward_impl(const Matrix& batch, bool training, Tape* tape);

  std::size_t input_width_ = 0;
  std::vector<LayerSpec> specs_;
  std::vector<DenseParams> dense_;   // one per Dense spec, in order
  std::vector<BatchNormParams> bnorm_;
  std::vector<Matrix> grad_w_;
  std::vector<Eigen::VectorXd> grad_b_;
  std::vector<Eigen::VectorXd> grad_gamma_, grad_beta_;
  AdamState adam_;
  AdamState adam_bn_;
  std::mt19937_64 rng_;
  bool freeze_running_stats_ = false;

  friend struct GradientCheckAccess;
};

/// DREAM-NAP: hidden widths [1.2, 0.6, 0.3] x input (round-half-up, min 1),
/// ReLU + dropout 0.2 after each, dense(n_classes) + softmax.
MlpModel build_dream_nap(std::size_t input_width, std::size_t n_classes,
                         std::uint64_t seed);

/// DREAM-NAPr: hidden widths [300, 200, 100, 50], each followed by
/// batchnorm, the chosen activation, and dropout 0.5.
MlpModel build_dream_napr(std::size_t input_width, std::size_t n_classes,
                          Activation act, std::uint64_t seed);

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  double learning_rate = 0.001;
  std::size_t patience = 0;  // 0 = run the full epoch budget
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0, train_accuracy = 0.0;
  double val_loss = 0.0, val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based; argmin validation loss
};

/// Minimizes categorical cross-entropy with Adam; shuffles rows each epoch
/// with the model RNG; restores the snapshot at minimum validation loss.
TrainResult train(MlpModel& model, const Matrix& train_x, const Matrix& train_y,
                  const Matrix& val_x, const Matrix& val_y,
                  const TrainConfig& cfg);

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t n_classes);

}  // namespace dream
