#include "actgen/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "actgen/errors.hpp"
#include "actgen/vocab.hpp"

extern char** environ;

namespace actgen {

RunConfig::RunConfig() {
  classifier_sft.lm_weight = 0.0;
}

std::vector<std::string> RunConfig::violations() const {
  std::vector<std::string> v;
  if (task != "corpus" && task != "benchmark") v.push_back("task: must be 'corpus' or 'benchmark'");
  if (run_dir.empty()) v.push_back("run_dir: must not be empty");
  const double fr[3] = {split.train, split.validation, split.test};
  const char* fn[3] = {"split.train", "split.validation", "split.test"};
  for (int i = 0; i < 3; ++i) {
    if (!(fr[i] >= 0.0 && fr[i] <= 1.0)) v.push_back(std::string(fn[i]) + ": must lie in [0, 1]");
  }
  if (std::abs(split.train + split.validation + split.test - 1.0) > 1e-9) v.push_back("split: fractions must sum to 1");
  if (context_k == 0) v.push_back("context_k: must be positive");
  if (vocab_max_size < Vocabulary::kNumSpecial + 1) v.push_back("vocab.max_size: too small to hold any word");
  if (limits.max_response_words == 0) v.push_back("limits.max_response_words: must be positive");
  if (limits.max_response_words + 6 > limits.max_seq_len) {
    v.push_back("limits.max_seq_len: must exceed max_response_words + 5");
  }
  ModelConfig m = model;
  if (m.vocab_size == 0) m.vocab_size = 1;  // filled from the vocabulary at run time
  for (const auto& s : m.violations()) v.push_back("model." + s);
  if (static_cast<std::size_t>(model.max_seq_len) < limits.max_seq_len) {
    v.push_back("limits.max_seq_len: must not exceed model.max_seq_len");
  }
  auto sft_checks = [&](const SFTConfig& c, const std::string& p) {
    if (c.epochs < 0) v.push_back(p + ".epochs: must be non-negative");
    if (!(c.lr > 0.0)) v.push_back(p + ".lr: must be positive");
    if (c.batch <= 0) v.push_back(p + ".batch: must be positive");
    if (!(c.max_grad_norm > 0.0)) v.push_back(p + ".max_grad_norm: must be positive");
  };
  sft_checks(sft, "sft");
  sft_checks(classifier_sft, "classifier_sft");
  for (const auto& s : ppo.violations()) v.push_back(s);
  if (ppo.decoding.max_new_tokens + 6 > model.max_seq_len) {
    v.push_back("ppo.max_new_tokens: leaves no room for a prompt within model.max_seq_len");
  }
  if (eval_decoding.max_new_tokens <= 0) v.push_back("eval.max_new_tokens: must be positive");
  return v;
}

namespace {

struct Field {
  std::string name;
  std::function<std::string(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string parse_int(const std::string& s, T& out) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return "expected an integer, got '" + s + "'";
  out = v;
  return {};
}

std::string parse_double(const std::string& s, double& out) {
  if (s.empty()) return "expected a number, got ''";
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return "expected a number, got '" + s + "'";
  out = v;
  return {};
}

std::string parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
  } else if (s == "false" || s == "0" || s == "no") {
    out = false;
  } else {
    return "expected true/false, got '" + s + "'";
  }
  return {};
}

#define ACTGEN_INT(key, expr)                                                              \
  Field {                                                                                 \
    key, [](RunConfig& c, const std::string& s) { return parse_int(s, expr); },           \
        [](const RunConfig& c) { return std::to_string(expr); }                           \
  }
#define ACTGEN_DOUBLE(key, expr)                                                           \
  Field {                                                                                 \
    key, [](RunConfig& c, const std::string& s) { return parse_double(s, expr); },        \
        [](const RunConfig& c) { return fmt_double(expr); }                               \
  }
#define ACTGEN_BOOL(key, expr)                                                             \
  Field {                                                                                 \
    key, [](RunConfig& c, const std::string& s) { return parse_bool(s, expr); },          \
        [](const RunConfig& c) { return std::string((expr) ? "true" : "false"); }         \
  }
#define ACTGEN_STRING(key, expr)                                                           \
  Field {                                                                                 \
    key, [](RunConfig& c, const std::string& s) { expr = s; return std::string(); },      \
        [](const RunConfig& c) { return std::string(expr); }                              \
  }
#define ACTGEN_PATH(key, expr)                                                             \
  Field {                                                                                 \
    key, [](RunConfig& c, const std::string& s) { expr = s; return std::string(); },      \
        [](const RunConfig& c) { return (expr).string(); }                                \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      ACTGEN_STRING("task", c.task),
      ACTGEN_PATH("corpus", c.corpus),
      ACTGEN_PATH("run_dir", c.run_dir),
      ACTGEN_PATH("policy_checkpoint", c.policy_checkpoint),
      ACTGEN_PATH("classifier_checkpoint", c.classifier_checkpoint),
      ACTGEN_PATH("vocab", c.vocab),
      ACTGEN_DOUBLE("split.train", c.split.train),
      ACTGEN_DOUBLE("split.validation", c.split.validation),
      ACTGEN_DOUBLE("split.test", c.split.test),
      ACTGEN_INT("seed", c.seed),
      ACTGEN_INT("context_k", c.context_k),
      ACTGEN_INT("vocab.max_size", c.vocab_max_size),
      ACTGEN_INT("vocab.min_freq", c.vocab_min_freq),
      ACTGEN_INT("limits.max_seq_len", c.limits.max_seq_len),
      ACTGEN_INT("limits.max_response_words", c.limits.max_response_words),
      ACTGEN_INT("model.d_model", c.model.d_model),
      ACTGEN_INT("model.n_layers", c.model.n_layers),
      ACTGEN_INT("model.n_heads", c.model.n_heads),
      ACTGEN_INT("model.max_seq_len", c.model.max_seq_len),
      ACTGEN_INT("model.rac_gru_width", c.model.rac_gru_width),
      ACTGEN_INT("model.rac_attn_heads", c.model.rac_attn_heads),
      ACTGEN_DOUBLE("model.init_std", c.model.init_std),
      ACTGEN_INT("model.init_seed", c.model.init_seed),
      ACTGEN_INT("sft.epochs", c.sft.epochs),
      ACTGEN_DOUBLE("sft.lr", c.sft.lr),
      ACTGEN_INT("sft.batch", c.sft.batch),
      ACTGEN_DOUBLE("sft.act_weight", c.sft.act_weight),
      ACTGEN_DOUBLE("sft.max_grad_norm", c.sft.max_grad_norm),
      ACTGEN_INT("classifier_sft.epochs", c.classifier_sft.epochs),
      ACTGEN_DOUBLE("classifier_sft.lr", c.classifier_sft.lr),
      ACTGEN_INT("classifier_sft.batch", c.classifier_sft.batch),
      ACTGEN_DOUBLE("classifier_sft.max_grad_norm", c.classifier_sft.max_grad_norm),
      ACTGEN_DOUBLE("ppo.lr", c.ppo.lr),
      ACTGEN_INT("ppo.batch_size", c.ppo.batch_size),
      ACTGEN_INT("ppo.minibatch_size", c.ppo.minibatch_size),
      ACTGEN_INT("ppo.epochs", c.ppo.ppo_epochs),
      ACTGEN_DOUBLE("ppo.clip_eps", c.ppo.clip_eps),
      ACTGEN_DOUBLE("ppo.gamma", c.ppo.gamma),
      ACTGEN_DOUBLE("ppo.gae_lambda", c.ppo.gae_lambda),
      ACTGEN_DOUBLE("ppo.beta", c.ppo.beta),
      ACTGEN_BOOL("ppo.adaptive_beta", c.ppo.adaptive.enabled),
      ACTGEN_DOUBLE("ppo.target_kl", c.ppo.adaptive.target_kl),
      ACTGEN_DOUBLE("ppo.horizon", c.ppo.adaptive.horizon),
      ACTGEN_DOUBLE("ppo.re_scale", c.ppo.re_scale),
      ACTGEN_DOUBLE("reward.lambda1", c.ppo.weights.lambda1),
      ACTGEN_DOUBLE("reward.lambda2", c.ppo.weights.lambda2),
      ACTGEN_DOUBLE("reward.lambda3", c.ppo.weights.lambda3),
      ACTGEN_DOUBLE("reward.lambda4", c.ppo.weights.lambda4),
      ACTGEN_STRING("reward.rouge", c.ppo.rouge),
      ACTGEN_INT("ppo.total_steps", c.ppo.total_steps),
      ACTGEN_DOUBLE("ppo.value_coef", c.ppo.value_coef),
      ACTGEN_DOUBLE("ppo.act_coef", c.ppo.act_coef),
      ACTGEN_DOUBLE("ppo.max_grad_norm", c.ppo.max_grad_norm),
      ACTGEN_DOUBLE("ppo.temperature", c.ppo.decoding.temperature),
      ACTGEN_INT("ppo.top_k", c.ppo.decoding.top_k),
      ACTGEN_DOUBLE("ppo.top_p", c.ppo.decoding.top_p),
      ACTGEN_INT("ppo.max_new_tokens", c.ppo.decoding.max_new_tokens),
      ACTGEN_DOUBLE("ppo.divergence_factor", c.ppo.divergence_factor),
      ACTGEN_INT("ppo.divergence_patience", c.ppo.divergence_patience),
      ACTGEN_INT("ppo.checkpoint_every", c.ppo.checkpoint_every),
      ACTGEN_DOUBLE("eval.temperature", c.eval_decoding.temperature),
      ACTGEN_INT("eval.top_k", c.eval_decoding.top_k),
      ACTGEN_DOUBLE("eval.top_p", c.eval_decoding.top_p),
      ACTGEN_INT("eval.max_new_tokens", c.eval_decoding.max_new_tokens),
      ACTGEN_INT("eval.seed", c.eval_decoding.seed),
  };
  return f;
}

#undef ACTGEN_INT
#undef ACTGEN_DOUBLE
#undef ACTGEN_BOOL
#undef ACTGEN_STRING
#undef ACTGEN_PATH

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.name == key) return &f;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string env_name(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.name);
    return k;
  }();
  return keys;
}

std::string set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (f == nullptr) return "unknown key";
  return f->set(config, value);
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  const Field* f = find_field(key);
  if (f == nullptr) throw std::invalid_argument("unknown config key " + key);
  return f->get(config);
}

RunConfig load_run_config(const std::filesystem::path& file, const std::map<std::string, std::string>& environment,
                          const std::map<std::string, std::string>& overrides) {
  RunConfig c;
  std::vector<std::string> errors;
  auto apply = [&](const std::string& origin, const std::string& key, const std::string& value) {
    const std::string err = set_config_value(c, key, value);
    if (!err.empty()) errors.push_back(key + " (" + origin + "): " + err);
  };

  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      const std::string origin = file.filename().string() + ":" + std::to_string(n);
      if (eq == std::string::npos) {
        errors.push_back(origin + ": expected key = value");
        continue;
      }
      apply(origin, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }
  for (const auto& key : config_keys()) {
    const auto it = environment.find(env_name(key));
    if (it != environment.end()) apply(it->first, key, it->second);
  }
  for (const auto& [key, value] : overrides) apply("flag", key, value);

  for (const auto& v : c.violations()) errors.push_back(v);
  if (!errors.empty()) {
    std::string msg = "invalid configuration: ";
    for (std::size_t i = 0; i < errors.size(); ++i) msg += (i ? "; " : "") + errors[i];
    throw ConfigError(msg);
  }
  return c;
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> env;
  const std::string prefix = kEnvPrefix;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string kv = *e;
    if (kv.rfind(prefix, 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.name + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace actgen
