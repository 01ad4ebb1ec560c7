#include "tvae/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tvae {

std::string to_string(PriorKind kind) {
  return kind == PriorKind::kGaussian ? "gaussian" : "student_t";
}

PriorKind prior_from_string(const std::string& name) {
  if (name == "gaussian") return PriorKind::kGaussian;
  if (name == "student_t") return PriorKind::kStudentT;
  throw std::invalid_argument("unknown prior: " + name);
}

void TrainConfig::validate() const {
  if (encoder_layers.empty() || decoder_layers.empty()) {
    throw std::invalid_argument("config: encoder_layers and decoder_layers required");
  }
  for (int n : encoder_layers) {
    if (n < 1) throw std::invalid_argument("config: encoder layer sizes must be >= 1");
  }
  for (int n : decoder_layers) {
    if (n < 1) throw std::invalid_argument("config: decoder layer sizes must be >= 1");
  }
  if (decoder_layers.front() != encoder_layers.back()) {
    throw std::invalid_argument(
        "config: decoder_layers[0] (" + std::to_string(decoder_layers.front()) +
        ") must equal the latent dim encoder_layers[last] (" +
        std::to_string(encoder_layers.back()) + ")");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("config: val_fraction must be in (0,1)");
  }
  if (!(nu_min >= 0.0)) throw std::invalid_argument("config: nu_min must be >= 0");
  if (kl_mc_samples < 1) {
    throw std::invalid_argument("config: kl_mc_samples must be >= 1");
  }
  if (!(kl_weight >= 0.0)) throw std::invalid_argument("config: kl_weight must be >= 0");
  if (masking) ising.validate();
}

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw std::invalid_argument("config: empty entry in " + key);
    std::size_t pos = 0;
    const long v = std::stol(t, &pos);
    if (pos != t.size()) {
      throw std::invalid_argument("config: bad integer '" + t + "' in " + key);
    }
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw std::invalid_argument("config: " + key + " is empty");
  return out;
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number '" + value + "' for " + key);
  }
}

long parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer '" + value + "' for " + key);
  }
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad unsigned '" + value + "' for " + key);
  }
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw std::invalid_argument("config: bad flag '" + value + "' for " + key);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_int_list(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw std::invalid_argument("config: duplicate key " + key);
    }

    if (key == "prior") {
      cfg.prior = prior_from_string(value);
    } else if (key == "encoder_layers") {
      cfg.encoder_layers = parse_int_list(value, key);
    } else if (key == "decoder_layers") {
      cfg.decoder_layers = parse_int_list(value, key);
    } else if (key == "activation") {
      cfg.activation = ad::activation_from_string(value);
    } else if (key == "lr") {
      cfg.lr = parse_double(value, key);
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(parse_int(value, key));
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(parse_int(value, key));
    } else if (key == "seed") {
      cfg.seed = parse_u64(value, key);
    } else if (key == "val_fraction") {
      cfg.val_fraction = parse_double(value, key);
    } else if (key == "nu_min") {
      cfg.nu_min = parse_double(value, key);
    } else if (key == "kl_mc_samples") {
      cfg.kl_mc_samples = static_cast<int>(parse_int(value, key));
    } else if (key == "kl_weight") {
      cfg.kl_weight = parse_double(value, key);
    } else if (key == "masking") {
      cfg.masking = parse_bool(value, key);
    } else if (key == "ising_coupling") {
      cfg.ising.coupling = parse_double(value, key);
    } else if (key == "ising_field") {
      cfg.ising.field = parse_double(value, key);
    } else if (key == "ising_sweeps") {
      cfg.ising.sweeps = static_cast<int>(parse_int(value, key));
    } else if (key == "ising_target_fraction") {
      cfg.ising.target_fraction = parse_double(value, key);
    } else {
      throw std::invalid_argument("config: unknown key " + key);
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_text(const TrainConfig& cfg) {
  std::string out;
  out += "prior = " + to_string(cfg.prior) + "\n";
  out += "encoder_layers = " + format_int_list(cfg.encoder_layers) + "\n";
  out += "decoder_layers = " + format_int_list(cfg.decoder_layers) + "\n";
  out += "activation = " + ad::to_string(cfg.activation) + "\n";
  out += "lr = " + format_double(cfg.lr) + "\n";
  out += "batch_size = " + std::to_string(cfg.batch_size) + "\n";
  out += "epochs = " + std::to_string(cfg.epochs) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "val_fraction = " + format_double(cfg.val_fraction) + "\n";
  out += "nu_min = " + format_double(cfg.nu_min) + "\n";
  out += "kl_mc_samples = " + std::to_string(cfg.kl_mc_samples) + "\n";
  out += "kl_weight = " + format_double(cfg.kl_weight) + "\n";
  out += std::string("masking = ") + (cfg.masking ? "on" : "off") + "\n";
  out += "ising_coupling = " + format_double(cfg.ising.coupling) + "\n";
  out += "ising_field = " + format_double(cfg.ising.field) + "\n";
  out += "ising_sweeps = " + std::to_string(cfg.ising.sweeps) + "\n";
  out += "ising_target_fraction = " + format_double(cfg.ising.target_fraction) + "\n";
  return out;
}

}  // namespace tvae
