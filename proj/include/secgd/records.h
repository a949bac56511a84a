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

// Newline-delimited JSON result records. Every record is one object with a
// "type" field; see README.md for the schema of each type. Wall-clock timings
// appear only when explicitly requested so that records stay reproducible.

#ifndef SECGD_RECORDS_H_
#define SECGD_RECORDS_H_

#include <ostream>
#include <string>

#include "json.hpp"
#include "secgd/adversary.h"
#include "secgd/dp.h"
#include "secgd/experiment_config.h"
#include "secgd/simulation.h"

namespace secgd {

using Json = nlohmann::ordered_json;

class RecordWriter {
 public:
  explicit RecordWriter(std::ostream& out) : out_(out) {}

  void Write(const Json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
  }

 private:
  std::ostream& out_;
};

inline Json ToJson(const RoundRecord& r) {
  return {{"type", "round"},
          {"t", r.t},
          {"wire_round", r.wire_round},
          {"attempts", r.attempts},
          {"loss_secgd", r.loss_secgd},
          {"loss_plain", r.loss_plain},
          {"linf_distance", r.linf_distance},
          {"exact", r.exact}};
}

inline Json ToJson(const CostReport& c, bool with_timing) {
  Json j = {{"uplink_bytes", c.uplink_bytes},
            {"request_bytes", c.request_bytes},
            {"downlink_bytes", c.downlink_bytes}};
  if (with_timing) {
    j["client_compute_s"] = c.client_compute_s;
    j["server_compute_s"] = c.server_compute_s;
  }
  return j;
}

inline Json ToJson(const NoiseAccounting& a) {
  return {{"per_client_variance", a.per_client_variance},
          {"honest_variance", a.honest_variance},
          {"all_clients_variance", a.all_clients_variance},
          {"colluders_full_variance", a.colluders_full_variance}};
}

inline Json SummaryJson(const ExperimentConfig& config,
                        const TrainingResult& res, bool with_timing) {
  Json j = {{"type", "summary"},
            {"rounds", res.rounds.size()},
            {"void_rounds", res.void_rounds},
            {"masks", res.setup.masks},
            {"seed_bits", res.setup.seed_bits},
            {"group_bits", res.setup.quant.total_bits()},
            {"w_secgd", res.w_secgd},
            {"w_plain", res.w_plain},
            {"w_star", res.w_star},
            {"final_linf_distance", LinfDistance(res.w_secgd, res.w_plain)}};
  Json cost = ToJson(res.cost, with_timing);
  cost["expected_uplink_bytes"] = ExpectedUplinkBytes(
      static_cast<std::size_t>(config.dim), res.setup.quant.total_bits(),
      res.setup.masks, res.setup.seed_bits);
  j["cost"] = cost;
  if (res.dp_sigma) {
    j["dp"] = {{"sigma", *res.dp_sigma},
               {"epsilon_per_round", config.dp_epsilon},
               {"epsilon_naive_total",
                ComposedEpsilon(config.dp_epsilon, config.rounds)},
               {"accounting", ToJson(*res.dp_accounting)}};
  }
  return j;
}

inline Json ToJson(const RecoveryRecord& r) {
  return {{"type", "recovery"},
          {"wire_round", r.wire_round},
          {"masked_messages", r.masked_messages},
          {"candidates", r.candidates},
          {"planted_found", r.planted_found}};
}

inline Json ToJson(const EquivocationRecord& r) {
  return {{"type", "equivocation"},
          {"victims", r.victims},
          {"victims_detected", r.victims_detected},
          {"bystanders_aborted", r.bystanders_aborted},
          {"round_void", r.round_void}};
}

inline Json ToJson(const InjectivityReport& r) {
  Json j = {{"type", "injectivity"},
            {"trials", r.trials},
            {"collisions", r.collisions},
            {"rate", r.rate},
            {"standard_error", r.standard_error}};
  j["bound"] = r.bound ? Json(*r.bound) : Json(nullptr);
  return j;
}

}  // namespace secgd

#endif  // SECGD_RECORDS_H_
