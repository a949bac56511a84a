//
// Copyright 2026 The SecGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Experiment configuration and its flat text encoding.
//
// Grammar, one entry per line:
//   line    := blank | comment | entry
//   comment := optional spaces, '#', anything
//   entry   := key spaces* '=' spaces* value spaces*
//   key     := [a-z_]+   (each key at most once; unknown keys are errors)
// Values are integers, decimals (any form std::from_chars accepts), or
// lowercase words. Keys missing from a file take their defaults.
//
// FormatConfig writes every key in ascending order as "key = value\n" with
// numbers in shortest round-trip form, so Format(Parse(Format(c))) is
// byte-identical to Format(c).

#ifndef SECGD_EXPERIMENT_CONFIG_H_
#define SECGD_EXPERIMENT_CONFIG_H_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "secgd/client.h"
#include "secgd/dataset.h"
#include "secgd/errors.h"
#include "secgd/mixnet.h"
#include "secgd/protocol.h"

namespace secgd {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class TransportKind { kInProcess, kTcpLoopback };

struct ExperimentConfig {
  // Protocol.
  int clients = 4;                   // N
  int dim = 8;                       // d
  int m_tilde = 20;
  int fraction_bits = 10;            // f
  int masks = 0;                     // K; 0 means ceil(d*m/2)
  int seed_bits = 0;                 // q; 0 means derived from collision_p
  double collision_p = 1e-10;
  double round_length_s = 10.0;
  int hash_checks = kDefaultHashChecks;
  int min_m_tilde = kDefaultMinMTilde;

  // Training.
  int rounds = 50;                   // T
  double eta = 0.05;
  double eta_decay = 0.0;
  double lambda = 0.0;
  Regularizer regularizer = Regularizer::kNone;
  int retry_limit = 3;

  // Data.
  ModelKind dataset = ModelKind::kLinear;
  int samples_per_client = 32;
  double feature_scale = 1.0;
  double label_noise = 0.1;
  std::uint64_t data_seed = 1;

  // Differential privacy.
  bool dp = false;
  double dp_epsilon = 1.0;
  double dp_delta = 1e-5;
  double dp_clip = 1.0;              // L2 clip bound = sensitivity
  int dp_honest = 2;                 // N_tilde

  // Network.
  TransportKind transport = TransportKind::kInProcess;
  LatencyModel latency_model = LatencyModel::kUniform;
  double latency_s = 0.5;
  double drop_probability = 0.0;

  // Adversary scenarios.
  bool attack_recovery = false;
  bool equivocate = false;

  std::uint64_t seed = 1;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

namespace internal {

inline std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T ParseNumber(std::string_view key, std::string_view text) {
  T value{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("bad value for '" + std::string(key) + "': '" +
                      std::string(text) + "'");
  }
  return value;
}

template <typename E>
struct EnumNames {
  std::vector<std::pair<E, std::string>> names;

  std::string Format(E e) const {
    for (const auto& [v, n] : names) {
      if (v == e) return n;
    }
    throw ConfigError("unnamed enum value");
  }
  E Parse(std::string_view key, std::string_view text) const {
    for (const auto& [v, n] : names) {
      if (n == text) return v;
    }
    throw ConfigError("bad value for '" + std::string(key) + "': '" +
                      std::string(text) + "'");
  }
};

struct Field {
  std::function<std::string(const ExperimentConfig&)> format;
  std::function<void(ExperimentConfig&, std::string_view)> parse;
};

template <typename T>
Field NumberField(T ExperimentConfig::*member) {
  return {[member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return FormatDouble(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          },
          [member](ExperimentConfig& c, std::string_view v) {
            c.*member = ParseNumber<T>("", v);
          }};
}

inline Field BoolField(bool ExperimentConfig::*member) {
  return {[member](const ExperimentConfig& c) {
            return std::string(c.*member ? "on" : "off");
          },
          [member](ExperimentConfig& c, std::string_view v) {
            if (v == "on" || v == "true") {
              c.*member = true;
            } else if (v == "off" || v == "false") {
              c.*member = false;
            } else {
              throw ConfigError("expected on/off, got '" + std::string(v) + "'");
            }
          }};
}

template <typename E>
Field EnumField(E ExperimentConfig::*member, EnumNames<E> names) {
  return {[member, names](const ExperimentConfig& c) {
            return names.Format(c.*member);
          },
          [member, names](ExperimentConfig& c, std::string_view v) {
            c.*member = names.Parse("", v);
          }};
}

// "auto" <-> 0 for derived integer parameters.
inline Field AutoIntField(int ExperimentConfig::*member) {
  return {[member](const ExperimentConfig& c) {
            return c.*member == 0 ? std::string("auto")
                                  : std::to_string(c.*member);
          },
          [member](ExperimentConfig& c, std::string_view v) {
            c.*member = v == "auto" ? 0 : ParseNumber<int>("", v);
          }};
}

inline const std::map<std::string, Field>& ConfigFields() {
  using C = ExperimentConfig;
  static const std::map<std::string, Field> fields = {
      {"attack_recovery", BoolField(&C::attack_recovery)},
      {"clients", NumberField(&C::clients)},
      {"collision_p", NumberField(&C::collision_p)},
      {"data_seed", NumberField(&C::data_seed)},
      {"dataset", EnumField(&C::dataset,
                            EnumNames<ModelKind>{{{ModelKind::kLinear, "linear"},
                                                  {ModelKind::kLogistic,
                                                   "logistic"}}})},
      {"dim", NumberField(&C::dim)},
      {"dp", BoolField(&C::dp)},
      {"dp_clip", NumberField(&C::dp_clip)},
      {"dp_delta", NumberField(&C::dp_delta)},
      {"dp_epsilon", NumberField(&C::dp_epsilon)},
      {"dp_honest", NumberField(&C::dp_honest)},
      {"drop_probability", NumberField(&C::drop_probability)},
      {"equivocate", BoolField(&C::equivocate)},
      {"eta", NumberField(&C::eta)},
      {"eta_decay", NumberField(&C::eta_decay)},
      {"feature_scale", NumberField(&C::feature_scale)},
      {"fraction_bits", NumberField(&C::fraction_bits)},
      {"hash_checks", NumberField(&C::hash_checks)},
      {"label_noise", NumberField(&C::label_noise)},
      {"lambda", NumberField(&C::lambda)},
      {"latency_model",
       EnumField(&C::latency_model,
                 EnumNames<LatencyModel>{
                     {{LatencyModel::kUniform, "uniform"},
                      {LatencyModel::kExponential, "exponential"}}})},
      {"latency_s", NumberField(&C::latency_s)},
      {"m_tilde", NumberField(&C::m_tilde)},
      {"masks", AutoIntField(&C::masks)},
      {"min_m_tilde", NumberField(&C::min_m_tilde)},
      {"regularizer",
       EnumField(&C::regularizer,
                 EnumNames<Regularizer>{{{Regularizer::kNone, "none"},
                                         {Regularizer::kL2, "l2"}}})},
      {"retry_limit", NumberField(&C::retry_limit)},
      {"round_length_s", NumberField(&C::round_length_s)},
      {"rounds", NumberField(&C::rounds)},
      {"samples_per_client", NumberField(&C::samples_per_client)},
      {"seed", NumberField(&C::seed)},
      {"seed_bits", AutoIntField(&C::seed_bits)},
      {"transport",
       EnumField(&C::transport,
                 EnumNames<TransportKind>{
                     {{TransportKind::kInProcess, "in-process"},
                      {TransportKind::kTcpLoopback, "tcp-loopback"}}})},
  };
  return fields;
}

inline std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace internal

inline std::string FormatConfig(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [key, field] : internal::ConfigFields()) {
    out += key + " = " + field.format(config) + "\n";
  }
  return out;
}

inline void ValidateConfig(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.clients >= 1, "clients must be >= 1");
  require(c.dim >= 1, "dim must be >= 1");
  require(c.masks >= 0, "masks must be >= 0 (0 = auto)");
  require(c.seed_bits >= 0 && c.seed_bits <= kMaxSeedBits,
          "seed_bits must be auto or in [1, 256]");
  require(c.rounds >= 0, "rounds must be >= 0");
  require(c.retry_limit >= 0, "retry_limit must be >= 0");
  require(c.hash_checks >= 0, "hash_checks must be >= 0");
  require(c.samples_per_client >= 1, "samples_per_client must be >= 1");
  require(c.round_length_s > 0, "round_length_s must be positive");
  require(c.collision_p > 0 && c.collision_p < 1,
          "collision_p must be in (0, 1)");
  require(c.drop_probability >= 0 && c.drop_probability <= 1,
          "drop_probability must be in [0, 1]");
  require(c.latency_s >= 0, "latency_s must be >= 0");
  try {
    QuantizationParams::Make(c.m_tilde, c.clients, c.fraction_bits);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (c.dp) {
    require(c.dp_clip > 0, "dp_clip must be positive");
    require(c.dp_honest >= 1 && c.dp_honest <= c.clients,
            "dp_honest must be in [1, clients]");
    require(c.dp_epsilon > 0, "dp_epsilon must be positive");
    require(c.dp_delta > 0 && c.dp_delta < 1, "dp_delta must be in (0, 1)");
  }
}

inline ExperimentConfig ParseConfig(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string> seen;
  const auto& fields = internal::ConfigFields();
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    line = internal::Trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(internal::Trim(line.substr(0, eq)));
    const std::string_view value = internal::Trim(line.substr(eq + 1));
    auto it = fields.find(key);
    if (it == fields.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" +
                        key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" +
                        key + "'");
    }
    try {
      it->second.parse(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + " (" + key +
                        "): " + e.what());
    }
  }
  ValidateConfig(config);
  return config;
}

inline ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

}  // namespace secgd

#endif  // SECGD_EXPERIMENT_CONFIG_H_
