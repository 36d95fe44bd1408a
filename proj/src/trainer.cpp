// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "warpsynth/archive.hpp"

namespace warpsynth {
namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kInferenceIteration = ~0ULL;

Var<float> noise_for(const ModelConfig& m, std::uint64_t seed, Index batch, std::uint64_t iteration) {
  RandomState rng = RandomState(seed).derive({kNoiseStream, iteration});
  return Var<float>(rng.normal_tensor<float>(Shape{batch, m.aux_channels, m.image_size, m.image_size}));
}

TranslationResult translate_with(Networks& nets, const ExperimentConfig& config, const Tensor<float>& x_a,
                                 const Tensor<float>& exemplar) {
  NoGradGuard no_grad;
  FrozenSpectralGuard frozen;
  Var<float> aux;
  if (config.model.aux_channels > 0) aux = noise_for(config.model, config.train.seed, x_a.n(), kInferenceIteration);
  TranslationResult out;
  out.correspondence = nets.correspondence(Var<float>(x_a), aux, Var<float>(exemplar), aux);
  out.output = nets.translation(out.correspondence.warped);
  return out;
}

void load_parameters(const ArchiveReader& r, const std::string& ns, ParameterSet<float> set, Adam* adam) {
  if (adam) {
    adam->first_moments().clear();
    adam->second_moments().clear();
  }
  for (auto& [name, var] : set.params) {
    Tensor<float> t = r.get<float>(ns + "/" + name);
    require_shape(t.shape(), var.shape(), "checkpoint tensor");
    var.mutable_value() = std::move(t);
    const std::string m = "adam." + ns + "/" + name + ".m";
    if (adam && r.contains(m)) {
      adam->first_moments()[name] = r.get<float>(m);
      adam->second_moments()[name] = r.get<float>("adam." + ns + "/" + name + ".v");
    }
  }
  for (auto& [name, tensor] : set.buffers) *tensor = r.get<float>(ns + "/" + name);
}

std::string mismatch_message(const std::filesystem::path& path, std::uint64_t stored, std::uint64_t current) {
  return "config hash mismatch: checkpoint " + path.string() + " was written with " + hash_hex(stored) +
         ", current config is " + hash_hex(current);
}

}  // namespace

void Adam::step(ParameterSet<float>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_);
  const float b2 = static_cast<float>(beta2_);
  for (auto& [name, var] : params.params) {
    if (!var.has_grad()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m = Tensor<float>(var.shape());
      v = Tensor<float>(var.shape());
    }
    const auto g = var.grad().vec().array();
    m.vec().array() = b1 * m.vec().array() + (1.0f - b1) * g;
    v.vec().array() = b2 * v.vec().array() + (1.0f - b2) * g.square();
    const float step = static_cast<float>(lr_ / c1);
    const float root_c2 = static_cast<float>(std::sqrt(c2));
    var.mutable_value().vec().array() -=
        step * m.vec().array() / (v.vec().array().sqrt() / root_c2 + static_cast<float>(eps_));
  }
}

Networks::Networks(const ModelConfig& config, std::uint64_t seed) : backbone(config) {
  RandomState root(seed);
  RandomState corr_rng = root.derive({1});
  RandomState trans_rng = root.derive({2});
  RandomState disc_rng = root.derive({3});
  correspondence = CorrespondenceNet<float>(config, corr_rng);
  translation = TranslationNet<float>(config, trans_rng);
  discriminator = PatchDiscriminator<float>(config, disc_rng);
}

ParameterSet<float> Networks::generator_params() {
  ParameterSet<float> out;
  correspondence.collect("corr", out);
  translation.collect("trans", out);
  return out;
}

ParameterSet<float> Networks::discriminator_params() {
  ParameterSet<float> out;
  discriminator.collect("disc", out);
  return out;
}

Trainer::Trainer(ExperimentConfig config, Dataset data) : config_(std::move(config)), data_(std::move(data)) {
  validate(config_);
  const ModelConfig& m = config_.model;
  if (data_.size() == 0) throw DataError("training dataset is empty");
  if (data_.image_size != m.image_size)
    throw ConfigError("model.image_size: " + std::to_string(m.image_size) + " but the dataset holds " +
                      std::to_string(data_.image_size) + " pixel images");
  if (data_.classes != m.input_channels)
    throw ConfigError("model.input_channels: " + std::to_string(m.input_channels) + " but the dataset provides " +
                      std::to_string(data_.classes) + " input channels");
  if (m.warmup_epochs > 0 && (m.task != TaskKind::Mask || m.aux_channels != m.input_channels))
    throw ConfigError("model.warmup_epochs: the warm-up needs a mask task with aux_channels == input_channels");
  nets_ = std::make_unique<Networks>(m, config_.train.seed);
  const TrainConfig& t = config_.train;
  adam_g_ = Adam(t.lr_g, t.beta1, t.beta2, t.adam_epsilon);
  adam_d_ = Adam(t.lr_d, t.beta1, t.beta2, t.adam_epsilon);
}

std::int64_t Trainer::batches_per_epoch() const {
  const std::int64_t b = config_.train.batch_size;
  return (data_.size() + b - 1) / b;
}

Batch Trainer::next_batch() const {
  const auto e = static_cast<std::uint64_t>(epoch());
  const auto k = static_cast<std::uint64_t>(iteration_ % batches_per_epoch());
  RandomState rng = RandomState(config_.train.seed).derive({e, k});
  return stack(sample_batch(data_, config_.train.batch_size, config_.train.pseudo_prob, config_.augment, rng));
}

Var<float> Trainer::noise(Index batch, std::uint64_t stream) const {
  const std::uint64_t it = stream == 0 ? static_cast<std::uint64_t>(iteration_) : stream;
  return noise_for(config_.model, config_.train.seed, batch, it);
}

Trainer::WarmupInputs Trainer::apply_warmup(const Batch& batch) const {
  WarmupInputs out;
  if (config_.model.aux_channels == 0) return out;
  out.active = warmup_active();
  if (out.active) {
    out.aux_a = Var<float>(batch.x_a);
    out.aux_b = Var<float>(batch.exemplar_x_a);
  } else {
    out.aux_a = noise(batch.size(), 0);
    out.aux_b = out.aux_a;
  }
  return out;
}

LossReport Trainer::train_step() { return train_step(next_batch()); }

LossReport Trainer::train_step(const Batch& batch) {
  const ModelConfig& m = config_.model;
  const LossConfig& lc = config_.loss;
  Networks& n = *nets_;
  const auto alpha = static_cast<float>(m.softmax_alpha);
  const WarmupInputs warm = apply_warmup(batch);
  const Var<float> x_a(batch.x_a);
  const Var<float> x_b(batch.x_b);
  const Var<float> exemplar(batch.exemplar);

  LossReport report;
  report.iteration = iteration_ + 1;
  report.epoch = epoch();

  // Discriminator phase: the generator runs without a graph.
  ParameterSet<float> d_params = n.discriminator_params();
  ParameterSet<float> g_params = n.generator_params();
  Var<float> fake_detached;
  {
    NoGradGuard no_grad;
    FrozenSpectralGuard frozen;
    fake_detached = n.translation(n.correspondence(x_a, warm.aux_a, exemplar, warm.aux_b).warped);
  }
  {
    Var<float> loss_d = hinge_d_loss(n.discriminator(x_a, x_b), n.discriminator(x_a, fake_detached));
    report.adv_d = loss_d.item();
    if (!std::isfinite(report.adv_d)) throw TrainingDiverged("adv_d", report.to_json().dump());
    backward(loss_d);
    adam_d_.step(d_params);
    d_params.zero_grad();
  }

  // Generator phase.
  Correspondence<float> corr = n.correspondence(x_a, warm.aux_a, exemplar, warm.aux_b);
  Var<float> fake = n.translation(corr.warped);
  GeneratorTerms<float> terms;
  {
    FrozenSpectralGuard frozen;
    terms.adv = hinge_g_loss(n.discriminator(x_a, fake));
  }
  const std::vector<Index> pseudo = batch.pseudo_indices();
  if (!pseudo.empty()) {
    Var<float> fake_p = ops::gather_batch(fake, pseudo);
    Var<float> real_p = ops::gather_batch(x_b, pseudo);
    terms.feat = feature_matching_loss(fake_p, real_p, n.backbone, lc);
    report.recon_l1 = (fake_p.value().vec() - real_p.value().vec()).cwiseAbs().mean();
  }
  terms.perc = perceptual_loss(fake, x_b, n.backbone, lc);
  terms.context = contextual_loss(fake, exemplar, n.backbone, lc);
  terms.domain = domain_alignment_loss(corr.x_features, n.correspondence.adapt(x_b, Domain::B, warm.aux_a));
  terms.reg = cycle_regularization(exemplar, corr.correlation, alpha);
  Var<float> total = total_generator_loss(terms, lc);

  report.feat = terms.feat.defined() ? terms.feat.item() : 0.0;
  report.perc = terms.perc.item();
  report.context = terms.context.item();
  report.adv_g = terms.adv.item();
  report.domain = terms.domain.item();
  report.reg = terms.reg.item();
  report.total = total_generator_loss({report.feat, report.perc, report.context, report.adv_g, report.domain, report.reg},
                                      lc);
  if (warm.active) {
    const Index side = m.corr_size;
    const Tensor<float> target = resize_image(batch.x_a, side, side, Resample::Nearest);
    const Tensor<float> source = resize_image(batch.exemplar_x_a, side, side, Resample::Nearest);
    Var<float> ce = ops::cross_entropy(warp(corr.correlation, Var<float>(source), alpha), target, 1e-6f);
    report.warmup_ce = ce.item();
    total = ops::weighted_sum<float>({total, ce}, {1.0f, static_cast<float>(lc.warmup_ce_weight)});
  }

  const std::pair<const char*, double> checks[] = {{"feat", report.feat},     {"perc", report.perc},
                                                   {"context", report.context}, {"adv_g", report.adv_g},
                                                   {"domain", report.domain}, {"reg", report.reg},
                                                   {"warmup_ce", report.warmup_ce.value_or(0.0)},
                                                   {"total", report.total},
                                                   {"objective", static_cast<double>(total.item())}};
  for (const auto& [name, value] : checks)
    if (!std::isfinite(value)) throw TrainingDiverged(name, report.to_json().dump());

  backward(total);
  adam_g_.step(g_params);
  g_params.zero_grad();
  d_params.zero_grad();
  ++iteration_;
  return report;
}

TranslationResult Trainer::translate(const Tensor<float>& x_a, const Tensor<float>& exemplar) {
  return translate_with(*nets_, config_, x_a, exemplar);
}

void Trainer::checkpoint(const std::filesystem::path& path) const {
  ArchiveWriter w;
  auto save = [&](const std::string& ns, ParameterSet<float> set, const Adam& adam) {
    for (const auto& [name, var] : set.params) {
      w.add(ns + "/" + name, var.value());
      auto& moments = const_cast<Adam&>(adam);
      if (auto it = moments.first_moments().find(name); it != moments.first_moments().end()) {
        w.add("adam." + ns + "/" + name + ".m", it->second);
        w.add("adam." + ns + "/" + name + ".v", moments.second_moments().at(name));
      }
    }
    for (const auto& [name, tensor] : set.buffers) w.add(ns + "/" + name, *tensor);
  };
  save("g", nets_->generator_params(), adam_g_);
  save("d", nets_->discriminator_params(), adam_d_);
  w.meta() = {{"iteration", iteration_},
              {"adam_g_steps", adam_g_.steps()},
              {"adam_d_steps", adam_d_.steps()},
              {"seed", config_.train.seed},
              {"config_hash", hash_hex(config_hash(config_))},
              {"config", serialize(config_)}};
  w.write(path, config_hash(config_));
}

void Trainer::restore(const std::filesystem::path& path) {
  ArchiveReader r(path);
  if (r.config_hash() != config_hash(config_))
    throw CheckpointError(mismatch_message(path, r.config_hash(), config_hash(config_)));
  load_parameters(r, "g", nets_->generator_params(), &adam_g_);
  load_parameters(r, "d", nets_->discriminator_params(), &adam_d_);
  iteration_ = r.meta().at("iteration").get<std::int64_t>();
  adam_g_.set_steps(r.meta().at("adam_g_steps").get<std::int64_t>());
  adam_d_.set_steps(r.meta().at("adam_d_steps").get<std::int64_t>());
}

InferenceModel InferenceModel::load(const std::filesystem::path& checkpoint, const ExperimentConfig* expected) {
  ArchiveReader r(checkpoint);
  InferenceModel model;
  try {
    model.config_ = parse_config(r.meta().at("config").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(checkpoint.string() + ": no embedded config (" + e.what() + ")");
  }
  if (config_hash(model.config_) != r.config_hash())
    throw CheckpointError(mismatch_message(checkpoint, r.config_hash(), config_hash(model.config_)));
  if (expected && config_hash(*expected) != r.config_hash())
    throw CheckpointError(mismatch_message(checkpoint, r.config_hash(), config_hash(*expected)));
  model.nets_ = std::make_unique<Networks>(model.config_.model, model.config_.train.seed);
  load_parameters(r, "g", model.nets_->generator_params(), nullptr);
  load_parameters(r, "d", model.nets_->discriminator_params(), nullptr);
  model.iteration_ = r.meta().value("iteration", std::int64_t{0});
  return model;
}

TranslationResult InferenceModel::translate(const Tensor<float>& x_a, const Tensor<float>& exemplar) {
  return translate_with(*nets_, config_, x_a, exemplar);
}

double reconstruction_l1(Trainer& trainer, const Dataset& data, std::uint64_t seed) {
  double total = 0;
  for (Index i = 0; i < data.size(); ++i) {
    AugmentationSpec spec = trainer.config().augment;
    spec.seed = RandomState(seed).derive({static_cast<std::uint64_t>(i)}).seed();
    const auto& x_b = data.x_b[static_cast<std::size_t>(i)];
    const auto exemplar = make_pseudo_pair(x_b, spec).first;
    const auto out = trainer.translate(data.x_a[static_cast<std::size_t>(i)], exemplar).output.value();
    total += (out.vec() - x_b.vec()).cwiseAbs().mean();
  }
  return total / static_cast<double>(data.size());
}

std::filesystem::path make_run_dir(const std::filesystem::path& root, const ExperimentConfig& config) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream name;
  name << hash_hex(config_hash(config)) << "-" << std::put_time(&utc, "%Y%m%dT%H%M%SZ");
  std::filesystem::path dir = root / name.str();
  for (int k = 2; std::filesystem::exists(dir); ++k) dir = root / (name.str() + "-" + std::to_string(k));
  return dir;
}

void run_training(Trainer& trainer, const RunOptions& options) {
  std::filesystem::create_directories(options.run_dir / "checkpoints");
  write_file_atomic(options.run_dir / "config.yaml", serialize(trainer.config()));
  std::ofstream log(options.run_dir / "train.jsonl", std::ios::app);
  while (trainer.iteration() < options.steps) {
    const LossReport report = trainer.train_step();
    log << report.to_json().dump() << "\n";
    log.flush();
    if (options.progress && (report.iteration % 50 == 0 || report.iteration == 1))
      *options.progress << report.to_json().dump() << "\n";
    if (options.checkpoint_every > 0 && report.iteration % options.checkpoint_every == 0)
      trainer.checkpoint(options.run_dir / "checkpoints" / ("step" + std::to_string(report.iteration) + ".ckpt"));
  }
  trainer.checkpoint(options.run_dir / "checkpoints" / "last.ckpt");
}

}  // namespace warpsynth
