#include "ctcsim/config.hpp"

#include <array>
#include <cstdlib>
#include <sstream>

#include "ctcsim/io_util.hpp"

namespace ctcsim {

namespace {

// Canonical key table: section.key plus default. Order defines the snapshot
// layout; anything not listed here is rejected everywhere.
struct KeyDefault {
  const char* key;
  const char* value;
};

constexpr std::array<KeyDefault, 41> kKnownKeys{{
    {"core.vocab_size", "32"},
    {"core.seed", "42"},
    {"cli.workers", "1"},
    {"cli.gen_size", "2000"},
    {"cli.gen_len_min", "4"},
    {"cli.gen_len_max", "12"},
    {"ctc_ops.tau", "0.6"},
    {"align.bins", "0:6,10:40,50:150"},
    {"cps_baseline.alpha_lo", "0.6"},
    {"cps_baseline.alpha_hi", "0.95"},
    {"cps_baseline.p_del", "0.05"},
    {"cps_baseline.p_ins", "0.05"},
    {"cps_baseline.ins_blank_frac", "0.5"},
    {"teacher_oracle.eta", "0"},
    {"teacher_oracle.dur_min", "1"},
    {"teacher_oracle.dur_max", "3"},
    {"teacher_oracle.blank_gap_prob", "0.5"},
    {"teacher_oracle.peak_lo", "0.75"},
    {"teacher_oracle.peak_hi", "0.95"},
    {"teacher_oracle.variants", "7"},
    {"teacher_oracle.q_del", "0.5"},
    {"teacher_oracle.q_ins", "0.5"},
    {"teacher_oracle.eta_strata", "0:0.025,0.07:0.17,0.35:0.85"},
    {"teacher_oracle.confusion_band", "4"},
    {"teacher_oracle.confusion_decay", "2"},
    {"dataset.t_train", "64"},
    {"simulator.enc_layers", "2"},
    {"simulator.dec_layers", "2"},
    {"simulator.d_model", "64"},
    {"simulator.n_heads", "4"},
    {"simulator.d_ff", "128"},
    {"simulator.code_fusion", "prepend"},
    {"simulator.lambda_stop", "0.1"},
    {"train.lr", "5e-5"},
    {"train.epochs", "5"},
    {"train.batch_size", "16"},
    {"train.clip_norm", "1"},
    {"train.beta1", "0.9"},
    {"train.beta2", "0.999"},
    {"train.adam_eps", "1e-8"},
    {"train.weight_decay", "0.01"},
}};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<EtaRange> parse_strata(const std::string& text) {
  std::vector<EtaRange> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw UsageError("bad eta stratum '" + part + "', expected lo:hi");
    }
    EtaRange r;
    r.lo = std::stod(part.substr(0, colon));
    r.hi = std::stod(part.substr(colon + 1));
    out.push_back(r);
  }
  return out;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  for (const auto& kd : kKnownKeys) {
    cfg.values_.emplace(kd.key, kd.value);
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw UsageError("unknown configuration key: " + key);
  }
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw UsageError("unknown configuration key: " + key);
  }
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  try {
    return std::stoi(get(key));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("configuration key " + key + " is not an integer: " +
                     get(key));
  }
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("configuration key " + key + " is not a number: " +
                     get(key));
  }
}

uint64_t RunConfig::get_u64(const std::string& key) const {
  try {
    return std::stoull(get(key));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("configuration key " + key +
                     " is not an unsigned integer: " + get(key));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw UsageError(path + ":" + std::to_string(lineno) +
                         ": malformed section header: " + line);
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) +
                       ": expected key = value, got: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw UsageError(path + ":" + std::to_string(lineno) +
                       ": key outside any [section]: " + key);
    }
    set(section + "." + key, value);
  }
}

void RunConfig::apply_env() {
  for (auto& [key, value] : values_) {
    std::string env = "CTCSIM_";
    for (char c : key) {
      env += (c == '.') ? '_' : static_cast<char>(std::toupper(c));
    }
    if (const char* v = std::getenv(env.c_str())) {
      value = v;
    }
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw UsageError("override must be section.key=value, got: " + assignment);
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

Vocab RunConfig::vocab() const {
  Vocab v;
  v.size = get_int("core.vocab_size");
  v.blank_id = 0;  // fixed toolkit-wide
  v.validate();
  return v;
}

SeedSpec RunConfig::seed_spec() const { return {get_u64("core.seed")}; }

WerBinScheme RunConfig::scheme() const {
  auto s = WerBinScheme::parse(get("align.bins"));
  return s;
}

LsdConfig RunConfig::lsd() const {
  LsdConfig cfg;
  cfg.tau = get_double("ctc_ops.tau");
  cfg.validate();
  return cfg;
}

CpsConfig RunConfig::cps() const {
  CpsConfig cfg;
  cfg.alpha_lo = get_double("cps_baseline.alpha_lo");
  cfg.alpha_hi = get_double("cps_baseline.alpha_hi");
  cfg.p_del = get_double("cps_baseline.p_del");
  cfg.p_ins = get_double("cps_baseline.p_ins");
  cfg.ins_blank_frac = get_double("cps_baseline.ins_blank_frac");
  cfg.validate();
  return cfg;
}

TeacherConfig RunConfig::teacher() const {
  const Vocab v = vocab();
  TeacherConfig cfg;
  cfg.eta = get_double("teacher_oracle.eta");
  cfg.dur_min = get_int("teacher_oracle.dur_min");
  cfg.dur_max = get_int("teacher_oracle.dur_max");
  cfg.blank_gap_prob = get_double("teacher_oracle.blank_gap_prob");
  cfg.peak_lo = get_double("teacher_oracle.peak_lo");
  cfg.peak_hi = get_double("teacher_oracle.peak_hi");
  cfg.variants = get_int("teacher_oracle.variants");
  cfg.q_del = get_double("teacher_oracle.q_del");
  cfg.q_ins = get_double("teacher_oracle.q_ins");
  cfg.eta_strata = parse_strata(get("teacher_oracle.eta_strata"));
  cfg.confusion = banded_confusion(v, get_int("teacher_oracle.confusion_band"),
                                   get_double("teacher_oracle.confusion_decay"));
  cfg.validate(v);
  return cfg;
}

SimArch RunConfig::arch() const {
  SimArch a;
  a.enc_layers = get_int("simulator.enc_layers");
  a.dec_layers = get_int("simulator.dec_layers");
  a.d_model = get_int("simulator.d_model");
  a.n_heads = get_int("simulator.n_heads");
  a.d_ff = get_int("simulator.d_ff");
  a.max_t = t_train();
  a.vocab_size = get_int("core.vocab_size");
  a.code_count = scheme().count();
  const std::string fusion = get("simulator.code_fusion");
  if (fusion == "prepend") {
    a.fusion = SimArch::Fusion::kPrepend;
  } else if (fusion == "add") {
    a.fusion = SimArch::Fusion::kAdd;
  } else {
    throw UsageError("simulator.code_fusion must be 'prepend' or 'add', got " +
                     fusion);
  }
  a.validate();
  return a;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.lr = get_double("train.lr");
  cfg.epochs = get_int("train.epochs");
  cfg.batch_size = get_int("train.batch_size");
  cfg.seed = get_u64("core.seed");
  cfg.clip_norm = get_double("train.clip_norm");
  cfg.beta1 = get_double("train.beta1");
  cfg.beta2 = get_double("train.beta2");
  cfg.adam_eps = get_double("train.adam_eps");
  cfg.weight_decay = get_double("train.weight_decay");
  cfg.lambda_stop = get_double("simulator.lambda_stop");
  cfg.workers = workers();
  cfg.validate();
  return cfg;
}

int RunConfig::t_train() const {
  const int t = get_int("dataset.t_train");
  if (t < 1) {
    throw UsageError("dataset.t_train must be >= 1");
  }
  return t;
}

int RunConfig::workers() const {
  const int w = get_int("cli.workers");
  if (w < 1) {
    throw UsageError("cli.workers must be >= 1");
  }
  return w;
}

std::string RunConfig::snapshot() const {
  std::string out;
  std::string section;
  auto emit = [&](const char* key) {
    const std::string k = key;
    const auto dot = k.find('.');
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      if (!out.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += k.substr(dot + 1) + " = " + values_.at(k) + "\n";
  };
  for (const auto& kd : kKnownKeys) {
    emit(kd.key);
  }
  return out;
}

void write_config_snapshot(const RunConfig& cfg, const std::string& out_path) {
  write_text_file(out_path + ".config.ini", cfg.snapshot());
}

}  // namespace ctcsim
