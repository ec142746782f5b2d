// Linear probe model read from a tensor archive:
//   x     = embedding rows of the prompt, reduced by "last" or "mean"
//   x_-1  = optional layer norm of x
//   logit = W_U x_-1
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iclprobe/model/backend.hpp"
#include "iclprobe/model/tensor_archive.hpp"

namespace iclprobe {

enum class Reduction { Last = 0, Mean = 1 };

class TensorEvalBackend final : public Backend {
 public:
  explicit TensorEvalBackend(const TensorArchive& archive) {
    const auto& emb = archive.at("embedding");
    const auto& unemb = archive.at("unembedding");
    if (emb.shape.size() != 2 || unemb.shape.size() != 2) {
      fail(ErrorCode::ShapeMismatch, "embedding and unembedding must be 2-d");
    }
    if (emb.shape != unemb.shape) {
      fail(ErrorCode::ShapeMismatch, "embedding " + shape_text(emb.shape) + " vs unembedding " + shape_text(unemb.shape));
    }
    vocab_ = emb.shape[0];
    dim_ = emb.shape[1];
    if (vocab_ < 1 || dim_ < 1) fail(ErrorCode::ShapeMismatch, "empty embedding");
    embedding_ = to_matrix(emb);
    unembedding_ = to_matrix(unemb);
    if (archive.contains("final_norm.weight") != archive.contains("final_norm.bias")) {
      fail(ErrorCode::ShapeMismatch, "final norm needs both weight and bias");
    }
    if (archive.contains("final_norm.weight")) {
      const auto& w = archive.at("final_norm.weight");
      const auto& b = archive.at("final_norm.bias");
      if (w.shape != std::vector<std::int64_t>{dim_} || b.shape != w.shape) {
        fail(ErrorCode::ShapeMismatch, "final norm parameters must have shape [" + std::to_string(dim_) + "]");
      }
      norm_weight_ = Eigen::Map<const Eigen::VectorXf>(w.data.data(), dim_).cast<double>();
      norm_bias_ = Eigen::Map<const Eigen::VectorXf>(b.data.data(), dim_).cast<double>();
      has_norm_ = true;
    }
    if (archive.contains("reduction")) {
      const auto& r = archive.at("reduction");
      if (r.data.size() != 1 || (r.data[0] != 0.0f && r.data[0] != 1.0f)) {
        fail(ErrorCode::ShapeMismatch, "reduction must be a single 0 (last) or 1 (mean)");
      }
      reduction_ = r.data[0] == 0.0f ? Reduction::Last : Reduction::Mean;
    }
  }

  std::size_t vocab_size() const { return static_cast<std::size_t>(vocab_); }
  std::size_t model_dim() const { return static_cast<std::size_t>(dim_); }
  const Eigen::MatrixXd& unembedding() const { return unembedding_; }

  Eigen::VectorXd hidden(std::span<const TokenId> prompt) const {
    Eigen::VectorXd x;
    if (reduction_ == Reduction::Last) {
      x = embedding_.row(prompt.back()).transpose();
    } else {
      x = Eigen::VectorXd::Zero(dim_);
      for (TokenId id : prompt) x += embedding_.row(id).transpose();
      x /= static_cast<double>(prompt.size());
    }
    if (has_norm_) {
      const double mean = x.mean();
      const double var = (x.array() - mean).square().mean();
      x = ((x.array() - mean) / std::sqrt(var + 1e-5)).matrix().cwiseProduct(norm_weight_) + norm_bias_;
    }
    return x;
  }

  ScoreResult score(const ScoreRequest& req) const override {
    check_request(req, vocab_size());
    const Eigen::VectorXd x = hidden(req.prompt);
    const Eigen::VectorXd logits = unembedding_ * x;
    const double peak = logits.maxCoeff();
    const double lse = peak + std::log((logits.array() - peak).exp().sum());
    std::vector<double> lp(static_cast<std::size_t>(vocab_));
    for (Eigen::Index i = 0; i < logits.size(); ++i) lp[static_cast<std::size_t>(i)] = logits(i) - lse;
    ScoreResult res;
    res.topk = top_k_of(lp, req.top_k);
    res.full_logprobs = std::move(lp);
    res.exhaustive = true;
    if (req.want_hidden) res.hidden_last = std::vector<double>(x.data(), x.data() + x.size());
    return res;
  }

  std::string kind() const override { return "tensor"; }

 private:
  static std::string shape_text(const std::vector<std::int64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
  }

  static Eigen::MatrixXd to_matrix(const Tensor& t) {
    using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(t.data.data(), t.shape[0], t.shape[1]).cast<double>();
  }

  std::int64_t vocab_ = 0;
  std::int64_t dim_ = 0;
  Eigen::MatrixXd embedding_;
  Eigen::MatrixXd unembedding_;
  bool has_norm_ = false;
  Eigen::VectorXd norm_weight_;
  Eigen::VectorXd norm_bias_;
  Reduction reduction_ = Reduction::Last;
};

}  // namespace iclprobe
