// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "warpsynth/random.hpp"

namespace warpsynth {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Mask: return "mask";
    case TaskKind::Edge: return "edge";
    case TaskKind::Pose: return "pose";
  }
  return "mask";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "mask") return TaskKind::Mask;
  if (text == "edge") return TaskKind::Edge;
  if (text == "pose") return TaskKind::Pose;
  throw ConfigError("model.task: unknown task kind '" + text + "' (expected mask, edge or pose)");
}

std::string to_string(BackboneMode mode) {
  return mode == BackboneMode::DeterministicSmall ? "deterministic-small" : "pretrained-vgg19";
}

BackboneMode parse_backbone_mode(const std::string& text) {
  if (text == "deterministic-small") return BackboneMode::DeterministicSmall;
  if (text == "pretrained-vgg19") return BackboneMode::PretrainedVgg19;
  throw ConfigError("model.backbone: unknown mode '" + text + "'");
}

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key + ": " + message);
}

bool valid_layer_name(const std::string& name) {
  static const std::set<std::string> names = {"relu1_1", "relu1_2", "relu2_1", "relu2_2", "relu3_1",
                                              "relu3_2", "relu4_1", "relu4_2", "relu5_1", "relu5_2"};
  return names.count(name) > 0;
}

// ---- YAML reading -------------------------------------------------------

void reject_unknown(const YAML::Node& node, const std::string& section, const std::set<std::string>& known) {
  if (!node.IsMap()) throw ConfigError(section + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!known.count(key)) throw ConfigError((section.empty() ? "" : section + ".") + key + ": unknown key");
  }
}

template <typename V>
void read(const YAML::Node& node, const std::string& section, const char* key, V& out) {
  if (!node[key]) return;
  try {
    out = node[key].as<V>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(section + "." + key + ": " + e.msg);
  }
}

void read_model(const YAML::Node& n, ModelConfig& m) {
  const std::string s = "model";
  reject_unknown(n, s,
                 {"task", "input_channels", "aux_channels", "image_size", "corr_size", "feature_channels",
                  "adaptor_base_channels", "adaptor_resblocks", "shared_resblocks", "generator_layers",
                  "style_hidden_channels", "softmax_alpha", "pn_epsilon", "use_nonlocal", "spectral_norm",
                  "warmup_epochs", "disc_base_channels", "disc_layers", "disc_scales", "backbone",
                  "backbone_base_channels", "backbone_seed", "backbone_weights", "backbone_checksum"});
  if (n["task"]) m.task = parse_task_kind(n["task"].as<std::string>());
  read(n, s, "input_channels", m.input_channels);
  read(n, s, "aux_channels", m.aux_channels);
  read(n, s, "image_size", m.image_size);
  read(n, s, "corr_size", m.corr_size);
  read(n, s, "feature_channels", m.feature_channels);
  read(n, s, "adaptor_base_channels", m.adaptor_base_channels);
  read(n, s, "adaptor_resblocks", m.adaptor_resblocks);
  read(n, s, "shared_resblocks", m.shared_resblocks);
  if (n["generator_layers"]) {
    const auto& layers = n["generator_layers"];
    require(layers.IsSequence(), "model.generator_layers", "expected a list of [height, width, channels]");
    m.generator_layers.clear();
    for (const auto& entry : layers) {
      require(entry.IsSequence() && entry.size() == 3, "model.generator_layers",
              "each entry must be [height, width, channels]");
      m.generator_layers.push_back({entry[0].as<int>(), entry[1].as<int>(), entry[2].as<int>()});
    }
  }
  read(n, s, "style_hidden_channels", m.style_hidden_channels);
  read(n, s, "softmax_alpha", m.softmax_alpha);
  read(n, s, "pn_epsilon", m.pn_epsilon);
  read(n, s, "use_nonlocal", m.use_nonlocal);
  read(n, s, "spectral_norm", m.spectral_norm);
  read(n, s, "warmup_epochs", m.warmup_epochs);
  read(n, s, "disc_base_channels", m.disc_base_channels);
  read(n, s, "disc_layers", m.disc_layers);
  read(n, s, "disc_scales", m.disc_scales);
  if (n["backbone"]) m.backbone = parse_backbone_mode(n["backbone"].as<std::string>());
  read(n, s, "backbone_base_channels", m.backbone_base_channels);
  read(n, s, "backbone_seed", m.backbone_seed);
  read(n, s, "backbone_weights", m.backbone_weights);
  read(n, s, "backbone_checksum", m.backbone_checksum);
}

void read_loss(const YAML::Node& n, LossConfig& l) {
  const std::string s = "loss";
  reject_unknown(n, s,
                 {"psi", "warmup_ce_weight", "feat_layers", "lambda_feat", "perc_layer", "context_layers",
                  "omega_context", "context_bandwidth"});
  if (n["psi"]) {
    const auto& psi = n["psi"];
    reject_unknown(psi, "loss.psi", {"feat", "perc", "context", "adv", "domain", "reg"});
    read(psi, "loss.psi", "feat", l.psi_feat);
    read(psi, "loss.psi", "perc", l.psi_perc);
    read(psi, "loss.psi", "context", l.psi_context);
    read(psi, "loss.psi", "adv", l.psi_adv);
    read(psi, "loss.psi", "domain", l.psi_domain);
    read(psi, "loss.psi", "reg", l.psi_reg);
  }
  read(n, s, "warmup_ce_weight", l.warmup_ce_weight);
  read(n, s, "feat_layers", l.feat_layers);
  read(n, s, "lambda_feat", l.lambda_feat);
  read(n, s, "perc_layer", l.perc_layer);
  read(n, s, "context_layers", l.context_layers);
  read(n, s, "omega_context", l.omega_context);
  read(n, s, "context_bandwidth", l.context_bandwidth);
}

void read_train(const YAML::Node& n, TrainConfig& t) {
  const std::string s = "train";
  reject_unknown(n, s,
                 {"batch_size", "lr_g", "lr_d", "beta1", "beta2", "adam_epsilon", "pseudo_prob", "steps", "seed",
                  "deterministic", "checkpoint_every"});
  read(n, s, "batch_size", t.batch_size);
  read(n, s, "lr_g", t.lr_g);
  read(n, s, "lr_d", t.lr_d);
  read(n, s, "beta1", t.beta1);
  read(n, s, "beta2", t.beta2);
  read(n, s, "adam_epsilon", t.adam_epsilon);
  read(n, s, "pseudo_prob", t.pseudo_prob);
  read(n, s, "steps", t.steps);
  read(n, s, "seed", t.seed);
  read(n, s, "deterministic", t.deterministic);
  read(n, s, "checkpoint_every", t.checkpoint_every);
}

void read_augment(const YAML::Node& n, AugmentationSpec& a) {
  const std::string s = "augment";
  reject_unknown(n, s,
                 {"flip_prob", "rotation_deg", "translate_frac", "scale_min", "scale_max", "tps_jitter", "seed"});
  read(n, s, "flip_prob", a.flip_prob);
  read(n, s, "rotation_deg", a.rotation_deg);
  read(n, s, "translate_frac", a.translate_frac);
  read(n, s, "scale_min", a.scale_min);
  read(n, s, "scale_max", a.scale_max);
  read(n, s, "tps_jitter", a.tps_jitter);
  read(n, s, "seed", a.seed);
}

// ---- YAML writing -------------------------------------------------------

void emit_model(YAML::Emitter& out, const ModelConfig& m) {
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "task" << YAML::Value << to_string(m.task);
  out << YAML::Key << "input_channels" << YAML::Value << m.input_channels;
  out << YAML::Key << "aux_channels" << YAML::Value << m.aux_channels;
  out << YAML::Key << "image_size" << YAML::Value << m.image_size;
  out << YAML::Key << "corr_size" << YAML::Value << m.corr_size;
  out << YAML::Key << "feature_channels" << YAML::Value << m.feature_channels;
  out << YAML::Key << "adaptor_base_channels" << YAML::Value << m.adaptor_base_channels;
  out << YAML::Key << "adaptor_resblocks" << YAML::Value << m.adaptor_resblocks;
  out << YAML::Key << "shared_resblocks" << YAML::Value << m.shared_resblocks;
  out << YAML::Key << "generator_layers" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : m.generator_layers)
    out << YAML::Flow << YAML::BeginSeq << l.height << l.width << l.channels << YAML::EndSeq;
  out << YAML::EndSeq;
  out << YAML::Key << "style_hidden_channels" << YAML::Value << m.style_hidden_channels;
  out << YAML::Key << "softmax_alpha" << YAML::Value << m.softmax_alpha;
  out << YAML::Key << "pn_epsilon" << YAML::Value << m.pn_epsilon;
  out << YAML::Key << "use_nonlocal" << YAML::Value << m.use_nonlocal;
  out << YAML::Key << "spectral_norm" << YAML::Value << m.spectral_norm;
  out << YAML::Key << "warmup_epochs" << YAML::Value << m.warmup_epochs;
  out << YAML::Key << "disc_base_channels" << YAML::Value << m.disc_base_channels;
  out << YAML::Key << "disc_layers" << YAML::Value << m.disc_layers;
  out << YAML::Key << "disc_scales" << YAML::Value << m.disc_scales;
  out << YAML::Key << "backbone" << YAML::Value << to_string(m.backbone);
  out << YAML::Key << "backbone_base_channels" << YAML::Value << m.backbone_base_channels;
  out << YAML::Key << "backbone_seed" << YAML::Value << m.backbone_seed;
  out << YAML::Key << "backbone_weights" << YAML::Value << m.backbone_weights;
  out << YAML::Key << "backbone_checksum" << YAML::Value << m.backbone_checksum;
  out << YAML::EndMap;
}

void emit_loss(YAML::Emitter& out, const LossConfig& l) {
  out << YAML::Key << "loss" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "psi" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "feat" << YAML::Value << l.psi_feat;
  out << YAML::Key << "perc" << YAML::Value << l.psi_perc;
  out << YAML::Key << "context" << YAML::Value << l.psi_context;
  out << YAML::Key << "adv" << YAML::Value << l.psi_adv;
  out << YAML::Key << "domain" << YAML::Value << l.psi_domain;
  out << YAML::Key << "reg" << YAML::Value << l.psi_reg;
  out << YAML::EndMap;
  out << YAML::Key << "warmup_ce_weight" << YAML::Value << l.warmup_ce_weight;
  out << YAML::Key << "feat_layers" << YAML::Value << YAML::Flow << l.feat_layers;
  out << YAML::Key << "lambda_feat" << YAML::Value << YAML::Flow << l.lambda_feat;
  out << YAML::Key << "perc_layer" << YAML::Value << l.perc_layer;
  out << YAML::Key << "context_layers" << YAML::Value << YAML::Flow << l.context_layers;
  out << YAML::Key << "omega_context" << YAML::Value << YAML::Flow << l.omega_context;
  out << YAML::Key << "context_bandwidth" << YAML::Value << l.context_bandwidth;
  out << YAML::EndMap;
}

void emit_train(YAML::Emitter& out, const TrainConfig& t) {
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "lr_g" << YAML::Value << t.lr_g;
  out << YAML::Key << "lr_d" << YAML::Value << t.lr_d;
  out << YAML::Key << "beta1" << YAML::Value << t.beta1;
  out << YAML::Key << "beta2" << YAML::Value << t.beta2;
  out << YAML::Key << "adam_epsilon" << YAML::Value << t.adam_epsilon;
  out << YAML::Key << "pseudo_prob" << YAML::Value << t.pseudo_prob;
  out << YAML::Key << "steps" << YAML::Value << t.steps;
  out << YAML::Key << "seed" << YAML::Value << t.seed;
  out << YAML::Key << "deterministic" << YAML::Value << t.deterministic;
  out << YAML::Key << "checkpoint_every" << YAML::Value << t.checkpoint_every;
  out << YAML::EndMap;
}

void emit_augment(YAML::Emitter& out, const AugmentationSpec& a) {
  out << YAML::Key << "augment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "flip_prob" << YAML::Value << a.flip_prob;
  out << YAML::Key << "rotation_deg" << YAML::Value << a.rotation_deg;
  out << YAML::Key << "translate_frac" << YAML::Value << a.translate_frac;
  out << YAML::Key << "scale_min" << YAML::Value << a.scale_min;
  out << YAML::Key << "scale_max" << YAML::Value << a.scale_max;
  out << YAML::Key << "tps_jitter" << YAML::Value << a.tps_jitter;
  out << YAML::Key << "seed" << YAML::Value << a.seed;
  out << YAML::EndMap;
}

}  // namespace

void validate(const ModelConfig& m) {
  require(m.input_channels > 0, "model.input_channels", "must be positive");
  require(m.aux_channels >= 0, "model.aux_channels", "must be non-negative");
  require(is_power_of_two(m.image_size), "model.image_size", "must be a power of two");
  require(m.corr_size > 0 && m.image_size % m.corr_size == 0, "model.corr_size",
          std::to_string(m.corr_size) + " does not divide image_size " + std::to_string(m.image_size));
  require(is_power_of_two(m.image_size / m.corr_size), "model.corr_size",
          "image_size / corr_size must be a power of two");
  require(m.feature_channels >= 2, "model.feature_channels", "must be at least 2");
  require(m.adaptor_base_channels > 0, "model.adaptor_base_channels", "must be positive");
  require(m.adaptor_resblocks >= 1, "model.adaptor_resblocks", "must be at least 1");
  require(m.shared_resblocks >= 0, "model.shared_resblocks", "must be non-negative");
  require(m.generator_layers.size() == 7, "model.generator_layers", "exactly 7 modulated blocks are required");
  for (std::size_t i = 0; i < m.generator_layers.size(); ++i) {
    const auto& l = m.generator_layers[i];
    const std::string key = "model.generator_layers[" + std::to_string(i) + "]";
    require(l.height == l.width && is_power_of_two(l.height), key, "height and width must be equal powers of two");
    require(l.channels >= 2, key, "channels must be at least 2");
    if (i > 0) {
      const int prev = m.generator_layers[i - 1].height;
      require(l.height == prev || l.height == 2 * prev, key, "resolution may only stay or double between blocks");
    }
  }
  const int last = m.generator_layers.back().height;
  require(m.image_size == last || m.image_size == 2 * last, "model.generator_layers",
          "last block must reach image_size (equal or one doubling)");
  require(m.style_hidden_channels > 0, "model.style_hidden_channels", "must be positive");
  require(m.softmax_alpha > 0, "model.softmax_alpha", "must be positive");
  require(m.pn_epsilon > 0, "model.pn_epsilon", "must be positive");
  require(m.warmup_epochs >= 0, "model.warmup_epochs", "must be non-negative");
  require(m.disc_base_channels > 0, "model.disc_base_channels", "must be positive");
  require(m.disc_layers >= 1, "model.disc_layers", "must be at least 1");
  require(m.disc_scales >= 1, "model.disc_scales", "must be at least 1");
  require(m.backbone_base_channels > 0, "model.backbone_base_channels", "must be positive");
  require(m.image_size >> (m.disc_scales - 1 + m.disc_layers) >= 1, "model.disc_layers",
          "too many strided layers for image_size");
  if (m.backbone == BackboneMode::PretrainedVgg19)
    require(!m.backbone_weights.empty(), "model.backbone_weights", "required for pretrained-vgg19");
}

void validate(const LossConfig& l) {
  const double psi[] = {l.psi_feat, l.psi_perc, l.psi_context, l.psi_adv, l.psi_domain, l.psi_reg};
  const char* names[] = {"feat", "perc", "context", "adv", "domain", "reg"};
  bool any = false;
  for (int i = 0; i < 6; ++i) {
    require(psi[i] >= 0, std::string("loss.psi.") + names[i], "must be non-negative");
    any = any || psi[i] > 0;
  }
  require(any, "loss.psi", "at least one weight must be positive");
  require(l.warmup_ce_weight >= 0, "loss.warmup_ce_weight", "must be non-negative");
  require(l.feat_layers.size() == l.lambda_feat.size(), "loss.lambda_feat", "one weight per feat layer");
  require(l.context_layers.size() == l.omega_context.size(), "loss.omega_context", "one weight per context layer");
  for (double v : l.lambda_feat) require(v >= 0, "loss.lambda_feat", "must be non-negative");
  for (double v : l.omega_context) require(v >= 0, "loss.omega_context", "must be non-negative");
  for (const auto& name : l.feat_layers) require(valid_layer_name(name), "loss.feat_layers", "unknown layer " + name);
  for (const auto& name : l.context_layers)
    require(valid_layer_name(name), "loss.context_layers", "unknown layer " + name);
  require(valid_layer_name(l.perc_layer), "loss.perc_layer", "unknown layer " + l.perc_layer);
  require(l.context_bandwidth > 0, "loss.context_bandwidth", "must be positive");
}

void validate(const TrainConfig& t) {
  require(t.batch_size >= 1, "train.batch_size", "must be at least 1");
  require(t.lr_g >= 0, "train.lr_g", "must be non-negative");
  require(t.lr_d >= 0, "train.lr_d", "must be non-negative");
  require(t.beta1 >= 0 && t.beta1 < 1, "train.beta1", "must lie in [0, 1)");
  require(t.beta2 >= 0 && t.beta2 < 1, "train.beta2", "must lie in [0, 1)");
  require(t.adam_epsilon > 0, "train.adam_epsilon", "must be positive");
  require(t.pseudo_prob >= 0 && t.pseudo_prob <= 1, "train.pseudo_prob", "must lie in [0, 1]");
  require(t.steps >= 0, "train.steps", "must be non-negative");
  require(t.checkpoint_every >= 0, "train.checkpoint_every", "must be non-negative");
}

void validate(const AugmentationSpec& a) {
  require(a.flip_prob >= 0 && a.flip_prob <= 1, "augment.flip_prob", "must lie in [0, 1]");
  require(a.rotation_deg >= 0, "augment.rotation_deg", "must be non-negative");
  require(a.translate_frac >= 0, "augment.translate_frac", "must be non-negative");
  require(a.scale_min > 0 && a.scale_min <= a.scale_max, "augment.scale_min", "need 0 < scale_min <= scale_max");
  require(a.tps_jitter >= 0, "augment.tps_jitter", "must be non-negative");
}

void validate(const ExperimentConfig& c) {
  validate(c.model);
  validate(c.loss);
  validate(c.train);
  validate(c.augment);
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  ExperimentConfig c;
  if (root.IsNull()) {
    validate(c);
    return c;
  }
  reject_unknown(root, "", {"model", "loss", "train", "augment"});
  try {
    if (root["model"]) read_model(root["model"], c.model);
    if (root["loss"]) read_loss(root["loss"], c.loss);
    if (root["train"]) read_train(root["train"], c.train);
    if (root["augment"]) read_augment(root["augment"], c.augment);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  emit_model(out, c.model);
  emit_loss(out, c.loss);
  emit_train(out, c.train);
  emit_augment(out, c.augment);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  emit_model(out, c.model);
  emit_loss(out, c.loss);
  out << YAML::EndMap;
  return fnv1a(std::string(out.c_str()));
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

bool deterministic_from_env(bool fallback) {
  const char* v = std::getenv("WARPSYNTH_DETERMINISTIC");
  if (!v) return fallback;
  const std::string s(v);
  if (s == "0" || s == "false" || s == "off") return false;
  if (s == "1" || s == "true" || s == "on") return true;
  return fallback;
}

}  // namespace warpsynth
