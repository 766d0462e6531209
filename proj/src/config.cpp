#include "sslmatch/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace sslmatch {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto dbl = [](double TrainConfig::*field) {
      return [field](TrainConfig& c, const std::string& k, const std::string& v) { c.*field = parse_double(k, v); };
    };
    t["method"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.method = parse_method(v); };
    t["seed"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_int<std::uint64_t>(k, v); };
    t["n_labeled"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.n_labeled = parse_int<int>(k, v); };
    t["batch_size"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_int<int>(k, v); };
    t["n_batches"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.n_batches = parse_int<std::int64_t>(k, v); };
    t["epochs"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_int<std::int64_t>(k, v); };
    t["optimizer"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.optimizer = parse_optimizer(v); };
    t["lr"] = dbl(&TrainConfig::learning_rate);
    t["weight_decay"] = dbl(&TrainConfig::weight_decay);
    t["ema_decay"] = dbl(&TrainConfig::ema_decay);
    t["image_side"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.image_side = parse_int<int>(k, v); };

    t["model.arch"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.model.architecture = v; };
    t["model.width1"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.model.width1 = parse_int<int>(k, v); };
    t["model.width2"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.model.width2 = parse_int<int>(k, v); };

    t["mixmatch.k"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.mixmatch.k = parse_int<int>(k, v); };
    t["mixmatch.temperature"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.mixmatch.temperature = parse_double(k, v); };
    t["mixmatch.alpha"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.mixmatch.alpha = parse_double(k, v); };
    t["mixmatch.lambda_u"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.mixmatch.lambda_u_max = parse_double(k, v); };
    t["mixmatch.rampup_steps"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.mixmatch.rampup_steps = parse_int<std::int64_t>(k, v); };

    t["fixmatch.mu"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.fixmatch.mu = parse_int<int>(k, v); };
    t["fixmatch.tau"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.fixmatch.tau = parse_double(k, v); };
    t["fixmatch.lambda_u"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.fixmatch.lambda_u = parse_double(k, v); };

    t["augment.shift_fraction"] = [](TrainConfig& c, const std::string& k, const std::string& v) {
      const double f = parse_double(k, v);
      c.mixmatch.shift_fraction = f;
      c.fixmatch.weak.shift_fraction = f;
      c.fixmatch.strong.shift_fraction = f;
    };
    t["augment.strong_ops"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.fixmatch.strong.strong_ops = parse_strong_ops(v); };
    t["augment.ops_per_image"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.fixmatch.strong.ops_per_image = parse_int<int>(k, v); };

    t["transfer.regime"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.transfer.regime = parse_regime(v); };
    t["transfer.lr"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.transfer.learning_rate = parse_double(k, v); };
    t["transfer.weight_decay"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.transfer.weight_decay = parse_double(k, v); };
    t["transfer.epochs"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.transfer.epochs = parse_int<int>(k, v); };
    t["transfer.batch_size"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.transfer.batch_size = parse_int<int>(k, v); };
    t["transfer.patience"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.transfer.patience = parse_int<int>(k, v); };
    t["transfer.pretrained_path"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.transfer.pretrained_path = v; };
    t["transfer.pretrain_steps"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.transfer.pretrain_steps = parse_int<int>(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::mixmatch: return "mixmatch";
    case Method::fixmatch: return "fixmatch";
    case Method::transfer: return "transfer";
    case Method::supervised: return "supervised";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "mixmatch") return Method::mixmatch;
  if (name == "fixmatch") return Method::fixmatch;
  if (name == "transfer") return Method::transfer;
  if (name == "supervised") return Method::supervised;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected mixmatch, fixmatch, transfer or supervised)");
}

std::string_view to_string(Regime regime) {
  return regime == Regime::feature_extraction ? "feature_extraction" : "fine_tuning";
}

Regime parse_regime(std::string_view name) {
  if (name == "feature_extraction") return Regime::feature_extraction;
  if (name == "fine_tuning") return Regime::fine_tuning;
  throw ConfigError("unknown transfer regime '" + std::string(name) +
                    "' (expected feature_extraction or fine_tuning)");
}

void TransferConfig::validate() const {
  if (epochs < 1) throw ConfigError("transfer.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("transfer.batch_size must be >= 1");
  if (patience < 0 || patience > epochs) throw ConfigError("transfer.patience must lie in [0, epochs]");
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0)) {
    throw ConfigError("transfer learning rate and weight decay must be >= 0");
  }
}

void TrainConfig::validate() const {
  const bool ssl = method == Method::mixmatch || method == Method::fixmatch;
  // Baselines accept n_labeled = 0, meaning every training label.
  if (n_labeled < (ssl ? 1 : 0)) throw ConfigError("n_labeled must be >= 1 (0 = all labels for baselines)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("lr and weight_decay must be >= 0");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw ConfigError("ema_decay must lie in [0, 1]");
  if (image_side < 4) throw ConfigError("image_side must be >= 4");
  if (ssl) {
    if (n_batches < 1) throw ConfigError("n_batches must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (n_labeled < batch_size) {
      throw ConfigError("n_labeled (" + std::to_string(n_labeled) + ") is smaller than batch_size (" +
                        std::to_string(batch_size) + "); use a smaller batch or more labels");
    }
  }
  if (method == Method::mixmatch) mixmatch.validate();
  if (method == Method::fixmatch) fixmatch.validate();
  if (method == Method::transfer || method == Method::supervised) transfer.validate();
}

FlatConfig parse_flat_config(std::string_view text) {
  FlatConfig out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto key = trim(std::string_view(body).substr(0, eq));
    auto value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

FlatConfig read_flat_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_flat_config(buf.str());
}

std::string format_flat_config(const FlatConfig& flat) {
  std::string out;
  for (const auto& [key, value] : flat) out += key + " = " + value + "\n";
  return out;
}

void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

void apply_flat_config(TrainConfig& cfg, const FlatConfig& flat) {
  for (const auto& [key, value] : flat) apply_config_key(cfg, key, value);
}

FlatConfig to_flat(const TrainConfig& c) {
  FlatConfig f;
  f["method"] = std::string(to_string(c.method));
  f["seed"] = std::to_string(c.seed);
  f["n_labeled"] = std::to_string(c.n_labeled);
  f["batch_size"] = std::to_string(c.batch_size);
  f["n_batches"] = std::to_string(c.n_batches);
  f["epochs"] = std::to_string(c.epochs);
  f["optimizer"] = std::string(to_string(c.optimizer));
  f["lr"] = fmt_double(c.learning_rate);
  f["weight_decay"] = fmt_double(c.weight_decay);
  f["ema_decay"] = fmt_double(c.ema_decay);
  f["image_side"] = std::to_string(c.image_side);
  f["model.arch"] = c.model.architecture;
  f["model.width1"] = std::to_string(c.model.width1);
  f["model.width2"] = std::to_string(c.model.width2);
  f["mixmatch.k"] = std::to_string(c.mixmatch.k);
  f["mixmatch.temperature"] = fmt_double(c.mixmatch.temperature);
  f["mixmatch.alpha"] = fmt_double(c.mixmatch.alpha);
  f["mixmatch.lambda_u"] = fmt_double(c.mixmatch.lambda_u_max);
  f["mixmatch.rampup_steps"] = std::to_string(c.mixmatch.rampup_steps);
  f["fixmatch.mu"] = std::to_string(c.fixmatch.mu);
  f["fixmatch.tau"] = fmt_double(c.fixmatch.tau);
  f["fixmatch.lambda_u"] = fmt_double(c.fixmatch.lambda_u);
  f["augment.shift_fraction"] = fmt_double(c.fixmatch.weak.shift_fraction);
  f["augment.strong_ops"] = format_strong_ops(c.fixmatch.strong.strong_ops);
  f["augment.ops_per_image"] = std::to_string(c.fixmatch.strong.ops_per_image);
  f["transfer.regime"] = std::string(to_string(c.transfer.regime));
  f["transfer.lr"] = fmt_double(c.transfer.learning_rate);
  f["transfer.weight_decay"] = fmt_double(c.transfer.weight_decay);
  f["transfer.epochs"] = std::to_string(c.transfer.epochs);
  f["transfer.batch_size"] = std::to_string(c.transfer.batch_size);
  f["transfer.patience"] = std::to_string(c.transfer.patience);
  f["transfer.pretrained_path"] = c.transfer.pretrained_path;
  f["transfer.pretrain_steps"] = std::to_string(c.transfer.pretrain_steps);
  return f;
}

TrainConfig from_flat(const FlatConfig& flat) {
  TrainConfig cfg;
  apply_flat_config(cfg, flat);
  return cfg;
}

std::string content_hash(std::string_view text) {
  const std::string header = "blob " + std::to_string(text.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("content_hash: cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, text.data(), text.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("content_hash: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return os.str();
}

std::string config_hash(const TrainConfig& cfg) { return content_hash(format_flat_config(to_flat(cfg))); }

}  // namespace sslmatch
