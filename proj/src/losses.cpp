// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "warpsynth/correspondence.hpp"

namespace warpsynth {

nlohmann::json LossReport::to_json() const {
  nlohmann::json j = {{"iteration", iteration}, {"epoch", epoch},   {"feat", feat},     {"perc", perc},
                      {"context", context},     {"adv_g", adv_g},   {"adv_d", adv_d},   {"domain", domain},
                      {"reg", reg},             {"total", total},   {"recon_l1", recon_l1}};
  if (warmup_ce) j["warmup_ce"] = *warmup_ce;
  return j;
}

LossReport LossReport::from_json(const nlohmann::json& j) {
  LossReport r;
  r.iteration = j.at("iteration").get<std::int64_t>();
  r.epoch = j.at("epoch").get<std::int64_t>();
  r.feat = j.at("feat").get<double>();
  r.perc = j.at("perc").get<double>();
  r.context = j.at("context").get<double>();
  r.adv_g = j.at("adv_g").get<double>();
  r.adv_d = j.at("adv_d").get<double>();
  r.domain = j.at("domain").get<double>();
  r.reg = j.at("reg").get<double>();
  r.total = j.at("total").get<double>();
  r.recon_l1 = j.at("recon_l1").get<double>();
  if (j.contains("warmup_ce")) r.warmup_ce = j.at("warmup_ce").get<double>();
  return r;
}

bool LossReport::all_finite() const {
  for (double v : {feat, perc, context, adv_g, adv_d, domain, reg, total, recon_l1})
    if (!std::isfinite(v)) return false;
  return !warmup_ce || std::isfinite(*warmup_ce);
}

namespace {

template <typename T>
const Var<T>& layer_of(const FeatureSet<T>& set, const std::string& name) {
  auto it = set.find(name);
  if (it == set.end()) throw std::invalid_argument("feature set lacks layer '" + name + "'");
  return it->second;
}

}  // namespace

template <typename T>
Var<T> feature_matching_loss(const FeatureSet<T>& out, const FeatureSet<T>& gt, const LossConfig& cfg) {
  std::vector<Var<T>> terms;
  std::vector<T> weights;
  for (std::size_t l = 0; l < cfg.feat_layers.size(); ++l) {
    terms.push_back(ops::l1_loss(layer_of(out, cfg.feat_layers[l]), layer_of(gt, cfg.feat_layers[l])));
    weights.push_back(static_cast<T>(cfg.lambda_feat[l]));
  }
  return ops::weighted_sum(terms, weights);
}

template <typename T>
Var<T> feature_matching_loss(const Var<T>& out, const Var<T>& gt, const PerceptualBackbone<T>& backbone,
                             const LossConfig& cfg) {
  require_shape(gt.shape(), out.shape(), "feature_matching_loss");
  return feature_matching_loss(backbone.extract(out, cfg.feat_layers), backbone.extract(gt, cfg.feat_layers), cfg);
}

template <typename T>
Var<T> domain_alignment_loss(const Var<T>& xs, const Var<T>& ys) {
  return ops::l1_loss(xs, ys);
}

template <typename T>
Var<T> perceptual_loss(const FeatureSet<T>& out, const FeatureSet<T>& gt, const LossConfig& cfg) {
  return ops::l1_loss(layer_of(out, cfg.perc_layer), layer_of(gt, cfg.perc_layer));
}

template <typename T>
Var<T> perceptual_loss(const Var<T>& out, const Var<T>& gt, const PerceptualBackbone<T>& backbone,
                       const LossConfig& cfg) {
  require_shape(gt.shape(), out.shape(), "perceptual_loss");
  const std::vector<std::string> layers = {cfg.perc_layer};
  return perceptual_loss(backbone.extract(out, layers), backbone.extract(gt, layers), cfg);
}

namespace {

// Forward and backward state of the contextual loss for one sample.
template <typename T>
struct ContextualSample {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  Mat xhat, yhat;     // normalized centered features [C, n], [C, m]
  Eigen::Matrix<T, Eigen::Dynamic, 1> xnorm, ynorm;
  Mat d, a;           // distances and affinities [n, m]
  Eigen::Matrix<T, Eigen::Dynamic, 1> q;  // row minimum + 1e-5
  std::vector<Index> argmin, argmax;
  T cx = 0;
};

constexpr double kContextEps = 1e-5;
constexpr double kNormEps = 1e-8;

template <typename T, typename MapX, typename MapY>
ContextualSample<T> contextual_forward(const MapX& x, const MapY& y, T bandwidth) {
  using Mat = typename ContextualSample<T>::Mat;
  ContextualSample<T> s;
  const Eigen::Matrix<T, Eigen::Dynamic, 1> mu = y.rowwise().mean();
  Mat xc = x.colwise() - mu;
  Mat yc = y.colwise() - mu;
  s.xnorm = xc.colwise().norm().transpose().cwiseMax(T(kNormEps));
  s.ynorm = yc.colwise().norm().transpose().cwiseMax(T(kNormEps));
  s.xhat = xc * s.xnorm.cwiseInverse().asDiagonal();
  s.yhat = yc * s.ynorm.cwiseInverse().asDiagonal();
  s.d = (Mat::Ones(x.cols(), y.cols()) - s.xhat.transpose() * s.yhat);
  const Index n = s.d.rows();
  s.q.resize(n);
  s.argmin.resize(static_cast<std::size_t>(n));
  s.argmax.resize(static_cast<std::size_t>(n));
  s.a.resize(n, s.d.cols());
  T total = 0;
  for (Index i = 0; i < n; ++i) {
    Index jmin = 0;
    s.d.row(i).minCoeff(&jmin);
    s.argmin[static_cast<std::size_t>(i)] = jmin;
    s.q[i] = s.d(i, jmin) + T(kContextEps);
    auto z = ((T(1) - s.d.row(i).array() / s.q[i]) / bandwidth).eval();
    auto w = (z - z.maxCoeff()).exp().eval();
    s.a.row(i) = w / w.sum();
    Index jmax = 0;
    total += s.a.row(i).maxCoeff(&jmax);
    s.argmax[static_cast<std::size_t>(i)] = jmax;
  }
  s.cx = total / T(n);
  return s;
}

}  // namespace

template <typename T>
Var<T> contextual_loss(const Var<T>& out_features, const Var<T>& exemplar_features, T bandwidth) {
  using Mat = typename ContextualSample<T>::Mat;
  const Shape xs = out_features.shape();
  const Shape ys = exemplar_features.shape();
  if (xs.n != ys.n || xs.c != ys.c)
    throw ShapeError("contextual_loss: feature sets " + xs.str() + " and " + ys.str() + " are incompatible");
  std::vector<ContextualSample<T>> samples;
  Tensor<T> value(Shape{1, 1, 1, 1});
  for (Index b = 0; b < xs.n; ++b) {
    samples.push_back(contextual_forward<T>(out_features.value().channels(b), exemplar_features.value().channels(b),
                                            bandwidth));
    value[0] -= std::log(samples.back().cx) / T(xs.n);
  }
  return make_result<T>(std::move(value), {out_features.node(), exemplar_features.node()},
                        [samples = std::move(samples), bandwidth](Node<T>& self) {
    auto& px = self.parents[0];
    auto& py = self.parents[1];
    const Index batch = static_cast<Index>(samples.size());
    for (Index b = 0; b < batch; ++b) {
      const auto& s = samples[static_cast<std::size_t>(b)];
      const Index n = s.d.rows();
      const Index m = s.d.cols();
      const T dcx = -self.grad[0] / (T(batch) * s.cx);
      Mat ddt(n, m);  // gradient w.r.t. d̃
      for (Index i = 0; i < n; ++i) {
        const Index jmax = s.argmax[static_cast<std::size_t>(i)];
        const T da = dcx / T(n);
        // Softmax backward with a one-hot upstream: dz = A ⊙ (e_jmax − A_jmax) · da.
        auto dz = (-s.a(i, jmax) * da * s.a.row(i).array()).eval();
        dz(jmax) += s.a(i, jmax) * da;
        ddt.row(i) = -dz / bandwidth;
      }
      Mat dd(n, m);
      for (Index i = 0; i < n; ++i) {
        dd.row(i) = ddt.row(i) / s.q[i];
        const T dq = -(ddt.row(i).array() * s.d.row(i).array()).sum() / (s.q[i] * s.q[i]);
        dd(i, s.argmin[static_cast<std::size_t>(i)]) += dq;
      }
      const Mat ds = -dd;
      Mat dxhat = s.yhat * ds.transpose();
      Mat dyhat = s.xhat * ds;
      auto unnormalize = [](const Mat& hat, const Mat& dhat, const auto& norm) {
        Mat out = dhat;
        for (Index k = 0; k < hat.cols(); ++k) {
          if (norm[k] > T(kNormEps)) out.col(k) = (dhat.col(k) - hat.col(k) * hat.col(k).dot(dhat.col(k))) / norm[k];
          else out.col(k) = dhat.col(k) / norm[k];
        }
        return out;
      };
      const Mat dxc = unnormalize(s.xhat, dxhat, s.xnorm);
      Mat dyc = unnormalize(s.yhat, dyhat, s.ynorm);
      const Eigen::Matrix<T, Eigen::Dynamic, 1> dmu = -(dxc.rowwise().sum() + dyc.rowwise().sum());
      dyc.colwise() += dmu / T(m);
      if (px->requires_grad) px->grad_buffer().channels(b) += dxc;
      if (py->requires_grad) py->grad_buffer().channels(b) += dyc;
    }
  });
}

template <typename T>
Var<T> contextual_loss(const FeatureSet<T>& out, const FeatureSet<T>& exemplar, const LossConfig& cfg) {
  std::vector<Var<T>> terms;
  std::vector<T> weights;
  for (std::size_t l = 0; l < cfg.context_layers.size(); ++l) {
    const auto& name = cfg.context_layers[l];
    terms.push_back(contextual_loss(layer_of(out, name), layer_of(exemplar, name),
                                    static_cast<T>(cfg.context_bandwidth)));
    weights.push_back(static_cast<T>(cfg.omega_context[l]));
  }
  return ops::weighted_sum(terms, weights);
}

template <typename T>
Var<T> contextual_loss(const Var<T>& out, const Var<T>& exemplar, const PerceptualBackbone<T>& backbone,
                       const LossConfig& cfg) {
  return contextual_loss(backbone.extract(out, cfg.context_layers), backbone.extract(exemplar, cfg.context_layers),
                         cfg);
}

template <typename T>
Var<T> cycle_regularization(const Var<T>& y, const Var<T>& m, T alpha) {
  const Index hw = m.shape().h;
  Var<T> small = y;
  if (y.shape().plane() != hw) {
    Index side = 0;
    while (side * side < hw) ++side;
    small = ops::resize_bilinear(y, side, side);
  }
  Var<T> cycled = warp_backward(m, warp(m, small, alpha), alpha);
  return ops::l1_loss(cycled, small);
}

template <typename T>
Var<T> hinge_d_loss(const std::vector<Var<T>>& real_logits, const std::vector<Var<T>>& fake_logits) {
  if (real_logits.size() != fake_logits.size() || real_logits.empty())
    throw std::invalid_argument("hinge_d_loss: scale count mismatch");
  std::vector<Var<T>> terms;
  for (std::size_t s = 0; s < real_logits.size(); ++s) {
    terms.push_back(ops::hinge_mean(real_logits[s], T(1)));
    terms.push_back(ops::hinge_mean(fake_logits[s], T(-1)));
  }
  return ops::weighted_sum(terms, std::vector<T>(terms.size(), T(1) / T(real_logits.size())));
}

template <typename T>
Var<T> hinge_g_loss(const std::vector<Var<T>>& fake_logits) {
  if (fake_logits.empty()) throw std::invalid_argument("hinge_g_loss: no logits");
  std::vector<Var<T>> terms;
  for (const auto& f : fake_logits) terms.push_back(ops::mean(f));
  return ops::weighted_sum(terms, std::vector<T>(terms.size(), T(-1) / T(fake_logits.size())));
}

std::array<double, 6> psi_weights(const LossConfig& cfg) {
  return {cfg.psi_feat, cfg.psi_perc, cfg.psi_context, cfg.psi_adv, cfg.psi_domain, cfg.psi_reg};
}

double total_generator_loss(const std::array<double, 6>& terms, const LossConfig& cfg) {
  const auto psi = psi_weights(cfg);
  double total = 0;
  for (std::size_t i = 0; i < 6; ++i) total += psi[i] * terms[i];
  return total;
}

template <typename T>
Var<T> total_generator_loss(const GeneratorTerms<T>& terms, const LossConfig& cfg) {
  const auto psi = psi_weights(cfg);
  const std::array<const Var<T>*, 6> all = {&terms.feat, &terms.perc, &terms.context,
                                            &terms.adv,  &terms.domain, &terms.reg};
  std::vector<Var<T>> vars;
  std::vector<T> weights;
  for (std::size_t i = 0; i < 6; ++i) {
    if (!all[i]->defined()) continue;
    vars.push_back(*all[i]);
    weights.push_back(static_cast<T>(psi[i]));
  }
  if (vars.empty()) return Var<T>(Tensor<T>(Shape{1, 1, 1, 1}));
  return ops::weighted_sum(vars, weights);
}

template <typename T>
double feature_cosine(const Tensor<T>& a, const Tensor<T>& b) {
  require_shape(b.shape(), a.shape(), "feature_cosine");
  const Shape s = a.shape();
  double total = 0;
  for (Index n = 0; n < s.n; ++n) {
    const auto x = a.vec().segment(n * s.sample(), s.sample()).template cast<double>();
    const auto y = b.vec().segment(n * s.sample(), s.sample()).template cast<double>();
    const double denom = std::max(x.norm() * y.norm(), kNormEps);
    total += x.dot(y) / denom;
  }
  return total / static_cast<double>(s.n);
}

template <typename T>
double semantic_consistency_score(const FeatureSet<T>& out, const FeatureSet<T>& gt) {
  double total = 0;
  for (const auto& name : semantic_layers()) total += feature_cosine(layer_of(out, name).value(), layer_of(gt, name).value());
  return total / static_cast<double>(semantic_layers().size());
}

template <typename T>
double semantic_consistency_score(const Var<T>& out, const Var<T>& gt, const PerceptualBackbone<T>& backbone) {
  NoGradGuard no_grad;
  require_shape(gt.shape(), out.shape(), "semantic_consistency_score");
  return semantic_consistency_score(backbone.extract(out, semantic_layers()), backbone.extract(gt, semantic_layers()));
}

template <typename T>
StyleRelevance style_relevance_score(const Var<T>& out, const Var<T>& exemplar,
                                     const PerceptualBackbone<T>& backbone) {
  NoGradGuard no_grad;
  require_shape(exemplar.shape(), out.shape(), "style_relevance_score");
  const std::vector<std::string> layers = {"relu1_2", "relu2_2"};
  const auto fo = backbone.extract(out, layers);
  const auto fe = backbone.extract(exemplar, layers);
  return {feature_cosine(fo.at("relu1_2").value(), fe.at("relu1_2").value()),
          feature_cosine(fo.at("relu2_2").value(), fe.at("relu2_2").value())};
}

#define WARPSYNTH_INSTANTIATE_LOSSES(T)                                                                    \
  template Var<T> feature_matching_loss(const FeatureSet<T>&, const FeatureSet<T>&, const LossConfig&);    \
  template Var<T> feature_matching_loss(const Var<T>&, const Var<T>&, const PerceptualBackbone<T>&,        \
                                        const LossConfig&);                                                \
  template Var<T> domain_alignment_loss(const Var<T>&, const Var<T>&);                                     \
  template Var<T> perceptual_loss(const FeatureSet<T>&, const FeatureSet<T>&, const LossConfig&);          \
  template Var<T> perceptual_loss(const Var<T>&, const Var<T>&, const PerceptualBackbone<T>&,              \
                                  const LossConfig&);                                                      \
  template Var<T> contextual_loss(const Var<T>&, const Var<T>&, T);                                        \
  template Var<T> contextual_loss(const FeatureSet<T>&, const FeatureSet<T>&, const LossConfig&);          \
  template Var<T> contextual_loss(const Var<T>&, const Var<T>&, const PerceptualBackbone<T>&,              \
                                  const LossConfig&);                                                      \
  template Var<T> cycle_regularization(const Var<T>&, const Var<T>&, T);                                   \
  template Var<T> hinge_d_loss(const std::vector<Var<T>>&, const std::vector<Var<T>>&);                    \
  template Var<T> hinge_g_loss(const std::vector<Var<T>>&);                                                \
  template Var<T> total_generator_loss(const GeneratorTerms<T>&, const LossConfig&);                       \
  template double feature_cosine(const Tensor<T>&, const Tensor<T>&);                                      \
  template double semantic_consistency_score(const FeatureSet<T>&, const FeatureSet<T>&);                  \
  template double semantic_consistency_score(const Var<T>&, const Var<T>&, const PerceptualBackbone<T>&);  \
  template StyleRelevance style_relevance_score(const Var<T>&, const Var<T>&, const PerceptualBackbone<T>&);

WARPSYNTH_INSTANTIATE_LOSSES(float)
WARPSYNTH_INSTANTIATE_LOSSES(double)

}  // namespace warpsynth
