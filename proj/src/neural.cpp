#include "dream/neural.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "dream/event_log.hpp"  // ValidationError

namespace dream {

namespace {

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix sigmoid(const Matrix& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::ArrayXd e = (x.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace

struct MlpModel::Tape {
  // One slot per layer spec, filled as needed by kind.
  std::vector<Matrix> inputs;    // Dense, Activation, BatchNorm: layer input
  std::vector<Matrix> outputs;   // Activation: layer output
  std::vector<Matrix> masks;     // Dropout: inverted-dropout mask
  std::vector<Matrix> xhat;      // BatchNorm: normalized input
  std::vector<Eigen::VectorXd> batch_var;  // BatchNorm: variance used
};

MlpModel::MlpModel(std::size_t input_width, std::vector<LayerSpec> specs,
                   std::uint64_t seed)
    : input_width_(input_width), specs_(std::move(specs)), rng_(seed) {
  if (input_width_ == 0) throw ValidationError("MlpModel: input width 0");

  bool uses_sigmoid = false;
  for (const auto& s : specs_)
    if (s.kind == LayerSpec::Kind::Activation && s.act == Activation::Sigmoid)
      uses_sigmoid = true;

  std::size_t width = input_width_;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    switch (s.kind) {
      case LayerSpec::Kind::Dense: {
        if (s.width == 0) throw ValidationError("dense layer of width 0");
        // He-style fan-in scaling for ReLU stacks, Xavier for sigmoid.
        const double limit = uses_sigmoid
                                 ? std::sqrt(6.0 / (width + s.width))
                                 : std::sqrt(6.0 / width);
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseParams p;
        p.weights = Matrix::NullaryExpr(
            static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(s.width),
            [&] { return dist(rng_); });
        p.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.width));
        dense_.push_back(std::move(p));
        width = s.width;
        break;
      }
      case LayerSpec::Kind::BatchNorm: {
        BatchNormParams p;
        const auto w = static_cast<Eigen::Index>(width);
        p.gamma = Eigen::VectorXd::Ones(w);
        p.beta = Eigen::VectorXd::Zero(w);
        p.running_mean = Eigen::VectorXd::Zero(w);
        p.running_var = Eigen::VectorXd::Ones(w);
        bnorm_.push_back(std::move(p));
        break;
      }
      case LayerSpec::Kind::Activation:
        if (s.act == Activation::Softmax && i + 1 != specs_.size())
          throw ValidationError("softmax must be the final layer");
        break;
      case LayerSpec::Kind::Dropout:
        if (s.rate < 0.0 || s.rate >= 1.0)
          throw ValidationError("dropout rate must be in [0,1)");
        break;
    }
  }

  grad_w_.resize(dense_.size());
  grad_b_.resize(dense_.size());
  grad_gamma_.resize(bnorm_.size());
  grad_beta_.resize(bnorm_.size());
  adam_.m_w.resize(dense_.size());
  adam_.v_w.resize(dense_.size());
  adam_.m_b.resize(dense_.size());
  adam_.v_b.resize(dense_.size());
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    adam_.m_w[i] = Matrix::Zero(dense_[i].weights.rows(), dense_[i].weights.cols());
    adam_.v_w[i] = adam_.m_w[i];
    adam_.m_b[i] = Eigen::VectorXd::Zero(dense_[i].bias.size());
    adam_.v_b[i] = adam_.m_b[i];
  }
  adam_bn_.m_b.resize(2 * bnorm_.size());
  adam_bn_.v_b.resize(2 * bnorm_.size());
  for (std::size_t i = 0; i < bnorm_.size(); ++i) {
    adam_bn_.m_b[2 * i] = Eigen::VectorXd::Zero(bnorm_[i].gamma.size());
    adam_bn_.v_b[2 * i] = adam_bn_.m_b[2 * i];
    adam_bn_.m_b[2 * i + 1] = adam_bn_.m_b[2 * i];
    adam_bn_.v_b[2 * i + 1] = adam_bn_.m_b[2 * i];
  }
}

std::size_t MlpModel::output_width() const {
  std::size_t width = input_width_;
  for (const auto& s : specs_)
    if (s.kind == LayerSpec::Kind::Dense) width = s.width;
  return width;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& d : dense_)
    n += static_cast<std::size_t>(d.weights.size() + d.bias.size());
  for (const auto& b : bnorm_)
    n += static_cast<std::size_t>(b.gamma.size() + b.beta.size());
  return n;
}

Matrix MlpModel::forward_impl(const Matrix& batch, bool training, Tape* tape) {
  if (static_cast<std::size_t>(batch.cols()) != input_width_)
    throw ValidationError("forward: batch width does not match model input");
  if (tape) {
    tape->inputs.resize(specs_.size());
    tape->outputs.resize(specs_.size());
    tape->masks.resize(specs_.size());
    tape->xhat.resize(specs_.size());
    tape->batch_var.resize(specs_.size());
  }

  Matrix x = batch;
  std::size_t dense_idx = 0, bn_idx = 0;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    switch (s.kind) {
      case LayerSpec::Kind::Dense: {
        if (tape) tape->inputs[i] = x;
        const auto& p = dense_[dense_idx++];
        x = (x * p.weights).rowwise() + p.bias.transpose();
        break;
      }
      case LayerSpec::Kind::Activation: {
        if (tape) tape->inputs[i] = x;
        if (s.act == Activation::Relu) x = relu(x);
        else if (s.act == Activation::Sigmoid) x = sigmoid(x);
        else x = softmax_rows(x);
        if (tape) tape->outputs[i] = x;
        break;
      }
      case LayerSpec::Kind::Dropout: {
        if (training && s.rate > 0.0) {
          std::bernoulli_distribution keep(1.0 - s.rate);
          Matrix mask(x.rows(), x.cols());
          for (Eigen::Index r = 0; r < mask.rows(); ++r)
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
              mask(r, c) = keep(rng_) ? 1.0 / (1.0 - s.rate) : 0.0;
          x = x.cwiseProduct(mask);
          if (tape) tape->masks[i] = std::move(mask);
        } else if (tape) {
          tape->masks[i] = Matrix::Ones(x.rows(), x.cols());
        }
        break;
      }
      case LayerSpec::Kind::BatchNorm: {
        auto& p = bnorm_[bn_idx++];
        if (tape) tape->inputs[i] = x;
        Eigen::VectorXd mean, var;
        if (training) {
          const double n = static_cast<double>(x.rows());
          mean = x.colwise().mean();
          Matrix centered = x.rowwise() - mean.transpose();
          var = centered.array().square().colwise().mean();
          if (!freeze_running_stats_) {
            p.running_mean =
                p.momentum * p.running_mean + (1.0 - p.momentum) * mean;
            // unbiased variance for the running estimate
            const double correction = n > 1.0 ? n / (n - 1.0) : 1.0;
            p.running_var = p.momentum * p.running_var +
                            (1.0 - p.momentum) * correction * var;
          }
        } else {
          mean = p.running_mean;
          var = p.running_var;
        }
        Eigen::ArrayXd inv_std = (var.array() + p.epsilon).sqrt().inverse();
        Matrix xhat = (x.rowwise() - mean.transpose()).array().rowwise() *
                      inv_std.transpose();
        x = (xhat.array().rowwise() * p.gamma.transpose().array()).matrix()
                .rowwise() +
            p.beta.transpose();
        if (tape) {
          tape->xhat[i] = std::move(xhat);
          tape->batch_var[i] = var;
        }
        break;
      }
    }
  }
  return x;
}

Matrix MlpModel::forward(const Matrix& batch, bool training) {
  return forward_impl(batch, training, nullptr);
}

double MlpModel::loss_and_gradients(const Matrix& batch, const Matrix& onehot,
                                    bool training) {
  if (specs_.empty() || specs_.back().kind != LayerSpec::Kind::Activation ||
      specs_.back().act != Activation::Softmax) {
    throw ValidationError("loss requires a final softmax layer");
  }
  Tape tape;
  const Matrix probs = forward_impl(batch, training, &tape);
  const double n = static_cast<double>(batch.rows());
  const double loss =
      -(onehot.array() * (probs.array() + 1e-12).log()).sum() / n;

  // Softmax + cross-entropy fold: gradient at the softmax pre-activation.
  Matrix g = (probs - onehot) / n;

  std::size_t dense_idx = dense_.size();
  std::size_t bn_idx = bnorm_.size();
  for (std::size_t ii = specs_.size(); ii-- > 0;) {
    const auto& s = specs_[ii];
    switch (s.kind) {
      case LayerSpec::Kind::Activation: {
        if (s.act == Activation::Softmax) break;  // folded into g above
        if (s.act == Activation::Relu) {
          g = g.cwiseProduct(
              (tape.inputs[ii].array() > 0.0).cast<double>().matrix());
        } else {  // sigmoid
          const Matrix& y = tape.outputs[ii];
          g = g.cwiseProduct(
              (y.array() * (1.0 - y.array())).matrix());
        }
        break;
      }
      case LayerSpec::Kind::Dropout: {
        if (training && s.rate > 0.0) g = g.cwiseProduct(tape.masks[ii]);
        break;
      }
      case LayerSpec::Kind::Dense: {
        --dense_idx;
        grad_w_[dense_idx] = tape.inputs[ii].transpose() * g;
        grad_b_[dense_idx] = g.colwise().sum();
        g = g * dense_[dense_idx].weights.transpose();
        break;
      }
      case LayerSpec::Kind::BatchNorm: {
        --bn_idx;
        const auto& p = bnorm_[bn_idx];
        const Matrix& xhat = tape.xhat[ii];
        grad_gamma_[bn_idx] = g.cwiseProduct(xhat).colwise().sum();
        grad_beta_[bn_idx] = g.colwise().sum();
        Eigen::ArrayXd inv_std =
            (tape.batch_var[ii].array() + p.epsilon).sqrt().inverse();
        if (training) {
          const double rows = static_cast<double>(g.rows());
          // d/dx of (x - mu)/sigma with mu, sigma computed from the batch
          Matrix gy = g.array().rowwise() * p.gamma.transpose().array();
          Eigen::RowVectorXd sum_gy = gy.colwise().sum();
          Eigen::RowVectorXd sum_gy_xhat =
              gy.cwiseProduct(xhat).colwise().sum();
          Matrix dx = rows * gy;
          dx.rowwise() -= sum_gy;
          dx -= (xhat.array().rowwise() * sum_gy_xhat.array()).matrix();
          g = (dx.array().rowwise() * (inv_std.transpose() / rows)).matrix();
        } else {
          g = (g.array().rowwise() *
               (p.gamma.transpose().array() * inv_std.transpose()))
                  .matrix();
        }
        break;
      }
    }
  }
  return loss;
}

void MlpModel::adam_step(double lr, double beta1, double beta2,
                         double epsilon) {
  ++adam_.step;
  const double t = static_cast<double>(adam_.step);
  const double bias1 = 1.0 - std::pow(beta1, t);
  const double bias2 = 1.0 - std::pow(beta2, t);
  auto update = [&](auto& param, auto& grad, auto& m, auto& v) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = (beta2 * v.array() + (1.0 - beta2) * grad.array().square()).matrix();
    param.array() -=
        lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + epsilon);
  };
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    update(dense_[i].weights, grad_w_[i], adam_.m_w[i], adam_.v_w[i]);
    update(dense_[i].bias, grad_b_[i], adam_.m_b[i], adam_.v_b[i]);
  }
  for (std::size_t i = 0; i < bnorm_.size(); ++i) {
    update(bnorm_[i].gamma, grad_gamma_[i], adam_bn_.m_b[2 * i],
           adam_bn_.v_b[2 * i]);
    update(bnorm_[i].beta, grad_beta_[i], adam_bn_.m_b[2 * i + 1],
           adam_bn_.v_b[2 * i + 1]);
  }
}

double MlpModel::gradient_check(const Matrix& batch, const Matrix& onehot,
                                std::size_t max_params) {
  // Work on a copy with dropout removed and running stats frozen so the
  // forward pass is a pure function of the parameters.
  MlpModel probe = *this;
  for (auto& s : probe.specs_)
    if (s.kind == LayerSpec::Kind::Dropout) s.rate = 0.0;
  probe.freeze_running_stats_ = true;

  probe.loss_and_gradients(batch, onehot, /*training=*/true);
  const auto analytic_w = probe.grad_w_;
  const auto analytic_b = probe.grad_b_;
  const auto analytic_gamma = probe.grad_gamma_;
  const auto analytic_beta = probe.grad_beta_;

  // Also records which ReLU units are active: a central difference that
  // straddles a ReLU kink measures the average of two different slopes and
  // says nothing about the (one-sided) analytic gradient, so such slots
  // are excluded from the check.
  auto loss_at = [&](std::vector<bool>& relu_signs) {
    Tape tape;
    const Matrix probs = probe.forward_impl(batch, true, &tape);
    relu_signs.clear();
    for (std::size_t i = 0; i < probe.specs_.size(); ++i) {
      const auto& s = probe.specs_[i];
      if (s.kind == LayerSpec::Kind::Activation && s.act == Activation::Relu)
        for (Eigen::Index k = 0; k < tape.inputs[i].size(); ++k)
          relu_signs.push_back(tape.inputs[i].data()[k] > 0.0);
    }
    return -(onehot.array() * (probs.array() + 1e-12).log()).sum() /
           static_cast<double>(batch.rows());
  };

  struct Slot {
    double* value;
    double analytic;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < probe.dense_.size(); ++i) {
    for (Eigen::Index k = 0; k < probe.dense_[i].weights.size(); ++k)
      slots.push_back({probe.dense_[i].weights.data() + k,
                       analytic_w[i].data()[k]});
    for (Eigen::Index k = 0; k < probe.dense_[i].bias.size(); ++k)
      slots.push_back({probe.dense_[i].bias.data() + k, analytic_b[i].data()[k]});
  }
  for (std::size_t i = 0; i < probe.bnorm_.size(); ++i) {
    for (Eigen::Index k = 0; k < probe.bnorm_[i].gamma.size(); ++k)
      slots.push_back({probe.bnorm_[i].gamma.data() + k,
                       analytic_gamma[i].data()[k]});
    for (Eigen::Index k = 0; k < probe.bnorm_[i].beta.size(); ++k)
      slots.push_back({probe.bnorm_[i].beta.data() + k,
                       analytic_beta[i].data()[k]});
  }
  std::shuffle(slots.begin(), slots.end(), probe.rng_);
  if (slots.size() > max_params) slots.resize(max_params);

  const double h = 1e-5;
  double max_rel_error = 0.0;
  std::vector<bool> signs_up, signs_down;
  for (const auto& slot : slots) {
    const double saved = *slot.value;
    *slot.value = saved + h;
    const double up = loss_at(signs_up);
    *slot.value = saved - h;
    const double down = loss_at(signs_down);
    *slot.value = saved;
    if (signs_up != signs_down) continue;  // kink crossed
    const double numeric = (up - down) / (2.0 * h);
    // Below this the central difference is dominated by cancellation noise
    // (one ulp of the loss over 2h is ~1e-11); agreement at that scale is
    // agreement on a zero gradient.
    if (std::abs(numeric - slot.analytic) < 1e-9) continue;
    const double denom =
        std::max({std::abs(numeric), std::abs(slot.analytic), 1e-8});
    max_rel_error = std::max(max_rel_error,
                             std::abs(numeric - slot.analytic) / denom);
  }
  return max_rel_error;
}

namespace {

std::size_t scaled_width(std::size_t input, double factor) {
  const auto w =
      static_cast<std::size_t>(std::floor(input * factor + 0.5));
  return std::max<std::size_t>(w, 1);
}

}  // namespace

MlpModel build_dream_nap(std::size_t input_width, std::size_t n_classes,
                         std::uint64_t seed) {
  // Four dropout layers: one in each gap of the five-layer stack
  // (input, 1.2x, 0.6x, 0.3x, output).
  std::vector<LayerSpec> specs;
  specs.push_back(LayerSpec::dropout(0.2));
  for (double factor : {1.2, 0.6, 0.3}) {
    specs.push_back(LayerSpec::dense(scaled_width(input_width, factor)));
    specs.push_back(LayerSpec::activation(Activation::Relu));
    specs.push_back(LayerSpec::dropout(0.2));
  }
  specs.push_back(LayerSpec::dense(n_classes));
  specs.push_back(LayerSpec::activation(Activation::Softmax));
  return MlpModel(input_width, std::move(specs), seed);
}

MlpModel build_dream_napr(std::size_t input_width, std::size_t n_classes,
                          Activation act, std::uint64_t seed) {
  // Five batchnorm + five dropout layers: one pair per gap of the six-layer
  // stack (input, 300, 200, 100, 50, output).
  std::vector<LayerSpec> specs;
  specs.push_back(LayerSpec::batchnorm());
  specs.push_back(LayerSpec::dropout(0.5));
  for (std::size_t width : {300u, 200u, 100u, 50u}) {
    specs.push_back(LayerSpec::dense(width));
    specs.push_back(LayerSpec::batchnorm());
    specs.push_back(LayerSpec::activation(act));
    specs.push_back(LayerSpec::dropout(0.5));
  }
  specs.push_back(LayerSpec::dense(n_classes));
  specs.push_back(LayerSpec::activation(Activation::Softmax));
  return MlpModel(input_width, std::move(specs), seed);
}

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t n_classes) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                            static_cast<Eigen::Index>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes)
      throw ValidationError("one_hot: label index out of range");
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
  }
  return out;
}

namespace {

double batch_accuracy(const Matrix& probs, const Matrix& onehot) {
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index pred = 0;
    probs.row(r).maxCoeff(&pred);
    Eigen::Index truth = 0;
    onehot.row(r).maxCoeff(&truth);
    if (pred == truth) ++correct;
  }
  return probs.rows() > 0 ? static_cast<double>(correct) / probs.rows() : 0.0;
}

double eval_loss(MlpModel& model, const Matrix& x, const Matrix& y) {
  const Matrix probs = model.forward(x, false);
  return -(y.array() * (probs.array() + 1e-12).log()).sum() /
         static_cast<double>(x.rows());
}

}  // namespace

TrainResult train(MlpModel& model, const Matrix& train_x, const Matrix& train_y,
                  const Matrix& val_x, const Matrix& val_y,
                  const TrainConfig& cfg) {
  if (train_x.rows() == 0) throw ValidationError("train: empty training set");
  if (cfg.batch_size == 0) throw ValidationError("train: batch_size 0");

  TrainResult result;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<DenseParams> best_dense = model.dense_params();
  std::vector<BatchNormParams> best_bn = model.batchnorm_params();
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(static_cast<std::size_t>(train_x.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), model.rng());
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      Matrix bx(len, train_x.cols()), by(len, train_y.cols());
      for (std::size_t i = 0; i < len; ++i) {
        bx.row(static_cast<Eigen::Index>(i)) =
            train_x.row(static_cast<Eigen::Index>(order[start + i]));
        by.row(static_cast<Eigen::Index>(i)) =
            train_y.row(static_cast<Eigen::Index>(order[start + i]));
      }
      const double loss = model.loss_and_gradients(bx, by, true);
      if (!std::isfinite(loss)) {
        throw ValidationError("train: loss diverged (NaN/inf) at epoch " +
                              std::to_string(epoch));
      }
      model.adam_step(cfg.learning_rate);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = eval_loss(model, train_x, train_y);
    rec.train_accuracy = batch_accuracy(model.forward(train_x, false), train_y);
    if (val_x.rows() > 0) {
      rec.val_loss = eval_loss(model, val_x, val_y);
      rec.val_accuracy = batch_accuracy(model.forward(val_x, false), val_y);
    } else {
      rec.val_loss = rec.train_loss;
      rec.val_accuracy = rec.train_accuracy;
    }
    result.history.push_back(rec);

    if (rec.val_loss < best_val_loss) {
      best_val_loss = rec.val_loss;
      best_dense = model.dense_params();
      best_bn = model.batchnorm_params();
      result.best_epoch = epoch;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.patience && cfg.patience > 0) {
      break;
    }
  }

  model.dense_params() = best_dense;
  model.batchnorm_params() = best_bn;
  return result;
}

void MlpModel::save(std::ostream& sink,
                    const std::vector<std::string>& label_alphabet) const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["input_width"] = input_width_;
  j["label_alphabet"] = label_alphabet;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& s : specs_) {
    nlohmann::ordered_json layer;
    switch (s.kind) {
      case LayerSpec::Kind::Dense:
        layer = {{"kind", "dense"}, {"width", s.width}};
        break;
      case LayerSpec::Kind::Activation:
        layer = {{"kind", "activation"},
                 {"fn", s.act == Activation::Relu      ? "relu"
                        : s.act == Activation::Sigmoid ? "sigmoid"
                                                       : "softmax"}};
        break;
      case LayerSpec::Kind::Dropout:
        layer = {{"kind", "dropout"}, {"rate", s.rate}};
        break;
      case LayerSpec::Kind::BatchNorm:
        layer = {{"kind", "batchnorm"}};
        break;
    }
    j["layers"].push_back(layer);
  }
  auto matrix_to_json = [](const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto vector_to_json = [](const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
  };
  j["dense"] = nlohmann::ordered_json::array();
  for (const auto& d : dense_) {
    j["dense"].push_back({{"weights", matrix_to_json(d.weights)},
                          {"bias", vector_to_json(d.bias)}});
  }
  j["batchnorm"] = nlohmann::ordered_json::array();
  for (const auto& b : bnorm_) {
    j["batchnorm"].push_back({{"gamma", vector_to_json(b.gamma)},
                              {"beta", vector_to_json(b.beta)},
                              {"running_mean", vector_to_json(b.running_mean)},
                              {"running_var", vector_to_json(b.running_var)},
                              {"momentum", b.momentum},
                              {"epsilon", b.epsilon}});
  }
  sink << j.dump() << "\n";
}

MlpModel MlpModel::load(std::istream& source,
                        std::vector<std::string>* label_alphabet) {
  nlohmann::json j;
  source >> j;
  if (j.value("format_version", 0) != 1)
    throw ParseError("model checkpoint: unsupported format version");
  std::vector<LayerSpec> specs;
  for (const auto& layer : j.at("layers")) {
    const std::string kind = layer.at("kind");
    if (kind == "dense") {
      specs.push_back(LayerSpec::dense(layer.at("width").get<std::size_t>()));
    } else if (kind == "activation") {
      const std::string fn = layer.at("fn");
      specs.push_back(LayerSpec::activation(fn == "relu" ? Activation::Relu
                                            : fn == "sigmoid"
                                                ? Activation::Sigmoid
                                                : Activation::Softmax));
    } else if (kind == "dropout") {
      specs.push_back(LayerSpec::dropout(layer.at("rate").get<double>()));
    } else if (kind == "batchnorm") {
      specs.push_back(LayerSpec::batchnorm());
    } else {
      throw ParseError("model checkpoint: unknown layer kind '" + kind + "'");
    }
  }
  MlpModel model(j.at("input_width").get<std::size_t>(), std::move(specs), 0);
  auto json_to_matrix = [](const nlohmann::json& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            rows[r][c].get<double>();
    return m;
  };
  auto json_to_vector = [](const nlohmann::json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
      v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
  };
  const auto& dense = j.at("dense");
  if (dense.size() != model.dense_.size())
    throw ParseError("model checkpoint: dense layer count mismatch");
  for (std::size_t i = 0; i < model.dense_.size(); ++i) {
    model.dense_[i].weights = json_to_matrix(dense[i].at("weights"));
    model.dense_[i].bias = json_to_vector(dense[i].at("bias"));
  }
  const auto& bn = j.at("batchnorm");
  if (bn.size() != model.bnorm_.size())
    throw ParseError("model checkpoint: batchnorm layer count mismatch");
  for (std::size_t i = 0; i < model.bnorm_.size(); ++i) {
    model.bnorm_[i].gamma = json_to_vector(bn[i].at("gamma"));
    model.bnorm_[i].beta = json_to_vector(bn[i].at("beta"));
    model.bnorm_[i].running_mean = json_to_vector(bn[i].at("running_mean"));
    model.bnorm_[i].running_var = json_to_vector(bn[i].at("running_var"));
    model.bnorm_[i].momentum = bn[i].at("momentum").get<double>();
    model.bnorm_[i].epsilon = bn[i].at("epsilon").get<double>();
  }
  if (label_alphabet)
    *label_alphabet = j.value("label_alphabet", std::vector<std::string>{});
  return model;
}

}  // namespace dream
