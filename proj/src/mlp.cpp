#include "sdlab/mlp.hpp"

#include <cmath>

namespace sdlab {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat silu(const Mat& z) {
  return z.unaryExpr([](double v) { return v * sigmoid(v); });
}

Mat silu_grad(const Mat& z) {
  return z.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, int n_embeddings, std::mt19937_64& rng) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ParameterError("mlp needs at least input and output widths");
  std::normal_distribution<double> normal;
  const std::size_t n_layers = widths_.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    // Output layer starts small so the untrained model predicts near-zero epsilon.
    const double scale = (l + 1 == n_layers ? 0.1 : 1.0) * std::sqrt(2.0 / in);
    Mat w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * normal(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Vec::Zero(out));
  }
  const int h0 = widths_.size() > 2 ? widths_[1] : widths_.back();
  embedding_ = Mat(h0, std::max(n_embeddings, 1));
  for (Eigen::Index i = 0; i < embedding_.size(); ++i) embedding_.data()[i] = 0.1 * normal(rng);
}

Mat Mlp::forward(const Mat& input, const std::vector<int>& embedding_index, Cache* cache) const {
  if (input.rows() != widths_.front()) throw ParameterError("mlp input width mismatch");
  if (static_cast<Eigen::Index>(embedding_index.size()) != input.cols()) {
    throw ParameterError("mlp needs one embedding index per column");
  }
  if (cache) {
    cache->pre.clear();
    cache->post.assign(1, input);
  }
  Mat act = input;
  const std::size_t n_layers = weights_.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    Mat z = weights_[l] * act;
    z.colwise() += biases_[l];
    if (l == 0) {
      for (Eigen::Index c = 0; c < z.cols(); ++c) z.col(c) += embedding_.col(embedding_index[static_cast<std::size_t>(c)]);
    }
    if (l + 1 < n_layers) {
      act = silu(z);
    } else {
      act = z;
    }
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(act);
    }
  }
  return act;
}

Vec Mlp::backward(const Cache& cache, const std::vector<int>& embedding_index, const Mat& d_output) const {
  const std::size_t n_layers = weights_.size();
  std::vector<Mat> dw(n_layers);
  std::vector<Vec> db(n_layers);
  Mat demb = Mat::Zero(embedding_.rows(), embedding_.cols());
  Mat delta = d_output;  // gradient wrt pre-activation of the current layer
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) delta = delta.cwiseProduct(silu_grad(cache.pre[l]));
    dw[l] = delta * cache.post[l].transpose();
    db[l] = delta.rowwise().sum();
    if (l == 0) {
      for (Eigen::Index c = 0; c < delta.cols(); ++c) demb.col(embedding_index[static_cast<std::size_t>(c)]) += delta.col(c);
    } else {
      delta = weights_[l].transpose() * delta;
    }
  }
  Vec flat(num_parameters());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    flat.segment(off, dw[l].size()) = Eigen::Map<const Vec>(dw[l].data(), dw[l].size());
    off += dw[l].size();
    flat.segment(off, db[l].size()) = db[l];
    off += db[l].size();
  }
  flat.segment(off, demb.size()) = Eigen::Map<const Vec>(demb.data(), demb.size());
  return flat;
}

Eigen::Index Mlp::num_parameters() const {
  Eigen::Index n = embedding_.size();
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

Vec Mlp::parameters() const {
  Vec flat(num_parameters());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.segment(off, weights_[l].size()) = Eigen::Map<const Vec>(weights_[l].data(), weights_[l].size());
    off += weights_[l].size();
    flat.segment(off, biases_[l].size()) = biases_[l];
    off += biases_[l].size();
  }
  flat.segment(off, embedding_.size()) = Eigen::Map<const Vec>(embedding_.data(), embedding_.size());
  return flat;
}

void Mlp::set_parameters(const Vec& flat) {
  if (flat.size() != num_parameters()) throw ParameterError("mlp parameter count mismatch");
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<Vec>(weights_[l].data(), weights_[l].size()) = flat.segment(off, weights_[l].size());
    off += weights_[l].size();
    biases_[l] = flat.segment(off, biases_[l].size());
    off += biases_[l].size();
  }
  Eigen::Map<Vec>(embedding_.data(), embedding_.size()) = flat.segment(off, embedding_.size());
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    // Row-major weight arrays.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = weights_[l];
    layers.push_back({{"rows", rm.rows()},
                      {"cols", rm.cols()},
                      {"weights", std::vector<double>(rm.data(), rm.data() + rm.size())},
                      {"bias", std::vector<double>(biases_[l].data(), biases_[l].data() + biases_[l].size())}});
  }
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> emb = embedding_;
  return {{"widths", widths_},
          {"layers", layers},
          {"embedding", {{"rows", emb.rows()},
                         {"cols", emb.cols()},
                         {"data", std::vector<double>(emb.data(), emb.data() + emb.size())}}}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m;
  m.widths_ = j.at("widths").get<std::vector<int>>();
  for (const auto& layer : j.at("layers")) {
    const auto rows = layer.at("rows").get<Eigen::Index>();
    const auto cols = layer.at("cols").get<Eigen::Index>();
    const auto w = layer.at("weights").get<std::vector<double>>();
    const auto b = layer.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
      throw ModelError("checkpoint layer shape mismatch");
    }
    m.weights_.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), rows, cols));
    m.biases_.push_back(Eigen::Map<const Vec>(b.data(), rows));
  }
  const auto& e = j.at("embedding");
  const auto data = e.at("data").get<std::vector<double>>();
  m.embedding_ = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data.data(), e.at("rows").get<Eigen::Index>(), e.at("cols").get<Eigen::Index>());
  if (m.weights_.size() + 1 != m.widths_.size()) throw ModelError("checkpoint widths do not match layers");
  return m;
}

void Adam::step(Vec& params, const Vec& grad) {
  if (m_.size() != params.size()) {
    m_ = Vec::Zero(params.size());
    v_ = Vec::Zero(params.size());
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace sdlab
