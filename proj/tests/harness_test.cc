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

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "secgd/dataset.h"
#include "secgd/experiment_config.h"
#include "secgd/records.h"
#include "secgd/simulation.h"

namespace secgd {
namespace {

ExperimentConfig DeskConfig() {
  ExperimentConfig c;
  c.clients = 3;
  c.dim = 4;
  c.m_tilde = 20;
  c.fraction_bits = 10;
  c.masks = 3;
  c.min_m_tilde = 16;
  c.rounds = 5;
  c.eta = 0.05;
  c.samples_per_client = 16;
  return c;
}

TEST(ConfigFileTest, RoundTripIsByteIdentical) {
  ExperimentConfig c = DeskConfig();
  c.eta = 0.1;  // not exactly representable
  c.collision_p = 1e-10;
  c.regularizer = Regularizer::kL2;
  c.lambda = 1.0 / 3;
  c.dataset = ModelKind::kLogistic;
  c.transport = TransportKind::kTcpLoopback;
  c.latency_model = LatencyModel::kExponential;
  c.dp = true;
  c.seed = 18446744073709551615ull;
  const std::string text = FormatConfig(c);
  const ExperimentConfig parsed = ParseConfig(text);
  EXPECT_EQ(parsed, c);
  EXPECT_EQ(FormatConfig(parsed), text);
  EXPECT_EQ(FormatConfig(ParseConfig(FormatConfig(ExperimentConfig{}))),
            FormatConfig(ExperimentConfig{}));
}

TEST(ConfigFileTest, KeysAreSortedAndAutoValuesNamed) {
  const std::string text = FormatConfig(ExperimentConfig{});
  std::istringstream in(text);
  std::string line, previous;
  while (std::getline(in, line)) {
    const std::string key = line.substr(0, line.find(" = "));
    EXPECT_LT(previous, key);
    previous = key;
  }
  EXPECT_NE(text.find("masks = auto\n"), std::string::npos);
  EXPECT_NE(text.find("seed_bits = auto\n"), std::string::npos);
}

TEST(ConfigFileTest, CommentsBlanksAndDefaults) {
  const ExperimentConfig c = ParseConfig(
      "# comment\n\n  clients = 6  \nmasks = auto\ndp = on\n"
      "dp_honest = 3\n");
  EXPECT_EQ(c.clients, 6);
  EXPECT_EQ(c.masks, 0);
  EXPECT_TRUE(c.dp);
  EXPECT_EQ(c.dim, ExperimentConfig{}.dim);
}

TEST(ConfigFileTest, RejectsBadInput) {
  EXPECT_THROW(ParseConfig("unknown = 1\n"), ConfigError);
  EXPECT_THROW(ParseConfig("clients = 2\nclients = 3\n"), ConfigError);
  EXPECT_THROW(ParseConfig("clients\n"), ConfigError);
  EXPECT_THROW(ParseConfig("clients = two\n"), ConfigError);
  EXPECT_THROW(ParseConfig("dp = maybe\n"), ConfigError);
  EXPECT_THROW(ParseConfig("dataset = cubic\n"), ConfigError);
  EXPECT_THROW(ParseConfig("clients = 0\n"), ConfigError);
  EXPECT_THROW(ParseConfig("fraction_bits = 20\n"), ConfigError);
  EXPECT_THROW(ParseConfig("drop_probability = 2\n"), ConfigError);
  EXPECT_THROW(LoadConfig("/nonexistent/x.cfg"), ConfigError);
}

TEST(ConfigFileTest, ShippedConfigLoads) {
  const ExperimentConfig c = LoadConfig(SECGD_CONFIG_DIR "/minimal.cfg");
  EXPECT_EQ(c.clients, 4);
  EXPECT_EQ(c.dim, 8);
  EXPECT_EQ(c.m_tilde, 20);
  EXPECT_EQ(c.fraction_bits, 10);
}

TEST(ResolveProtocolTest, DerivedParametersAndWarnings) {
  ExperimentConfig c = DeskConfig();
  c.masks = 0;
  c.seed_bits = 0;
  const ProtocolSetup auto_setup = ResolveProtocol(c);
  EXPECT_EQ(auto_setup.quant.total_bits(), 22);
  EXPECT_EQ(auto_setup.masks, 44u);
  EXPECT_EQ(auto_setup.seed_bits, SeedBits(44, 1e-10));
  EXPECT_TRUE(auto_setup.warnings.empty());

  c.masks = 3;
  c.hash_checks = 0;
  EXPECT_EQ(ResolveProtocol(c).warnings.size(), 2u);
}

TEST(DatasetTest, DeterministicInSeed) {
  DatasetSpec spec;
  const Dataset a = MakeDataset(spec);
  const Dataset b = MakeDataset(spec);
  EXPECT_EQ(a.w_star, b.w_star);
  for (std::size_t i = 0; i < a.clients.size(); ++i) {
    EXPECT_EQ(a.clients[i].features, b.clients[i].features);
    EXPECT_EQ(a.clients[i].labels, b.clients[i].labels);
  }
  spec.seed = 2;
  EXPECT_NE(MakeDataset(spec).w_star, a.w_star);
}

TEST(DatasetTest, SingleClientHoldsEverything) {
  DatasetSpec split;
  split.num_clients = 4;
  split.samples_per_client = 8;
  DatasetSpec whole = split;
  whole.num_clients = 1;
  whole.samples_per_client = 32;
  const Dataset a = MakeDataset(split);
  const Dataset b = MakeDataset(whole);
  ASSERT_EQ(b.clients.size(), 1u);
  std::vector<RealVector> features;
  RealVector labels;
  for (const auto& c : a.clients) {
    features.insert(features.end(), c.features.begin(), c.features.end());
    labels.insert(labels.end(), c.labels.begin(), c.labels.end());
  }
  EXPECT_EQ(b.clients[0].features, features);
  EXPECT_EQ(b.clients[0].labels, labels);
}

TEST(DatasetTest, GradientMatchesFiniteDifferences) {
  for (ModelKind kind : {ModelKind::kLinear, ModelKind::kLogistic}) {
    DatasetSpec spec;
    spec.kind = kind;
    spec.dim = 5;
    const Dataset ds = MakeDataset(spec);
    const RealVector w{0.3, -0.2, 0.1, 0.5, -0.4};
    const RealVector g = LocalGradient(kind, ds.clients[0], w);
    for (std::size_t j = 0; j < w.size(); ++j) {
      RealVector hi = w, lo = w;
      hi[j] += 1e-6;
      lo[j] -= 1e-6;
      const double fd = (LocalLoss(kind, ds.clients[0], hi) -
                         LocalLoss(kind, ds.clients[0], lo)) / 2e-6;
      EXPECT_NEAR(g[j], fd, 1e-5);
    }
    if (kind == ModelKind::kLogistic) {
      for (const auto& c : ds.clients) {
        for (double y : c.labels) EXPECT_TRUE(y == 0.0 || y == 1.0);
      }
    }
  }
}

TEST(DatasetTest, NoiselessBaselineConverges) {
  DatasetSpec spec;
  spec.label_noise = 0;
  const Dataset ds = MakeDataset(spec);
  ModelState s{RealVector(spec.dim, 0.0), 0, {0.1, 0.0}, 0.0,
               Regularizer::kNone};
  double loss = GlobalLoss(ModelKind::kLinear, ds, s.w);
  const double initial = LinfDistance(s.w, ds.w_star);
  for (int t = 0; t < 200; ++t) {
    RealVector g(spec.dim, 0.0);
    for (const auto& c : ds.clients) {
      const RealVector gi = LocalGradient(ModelKind::kLinear, c, s.w);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += gi[j];
    }
    s = UpdateModel(s, g, static_cast<int>(ds.clients.size()));
    const double next = GlobalLoss(ModelKind::kLinear, ds, s.w);
    EXPECT_LE(next, loss);
    loss = next;
  }
  EXPECT_LT(LinfDistance(s.w, ds.w_star), 0.05 * initial);
}

TEST(RunTrainingTest, TracksPlaintextBaseline) {
  const ExperimentConfig c = DeskConfig();
  const TrainingResult res = RunTraining(c);
  ASSERT_EQ(res.rounds.size(), 5u);
  for (const auto& r : res.rounds) {
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.attempts, 1);
  }
  EXPECT_LE(LinfDistance(res.w_secgd, res.w_plain),
            2 * c.rounds * c.eta * std::ldexp(1.0, -c.fraction_bits));
  EXPECT_EQ(res.void_rounds, 0u);
}

TEST(RunTrainingTest, ZeroLearningRateGivesIdenticalTrajectories) {
  ExperimentConfig c = DeskConfig();
  c.eta = 0;
  const TrainingResult res = RunTraining(c);
  for (const auto& r : res.rounds) EXPECT_EQ(r.linf_distance, 0.0);
  EXPECT_EQ(res.w_secgd, res.w_plain);
}

TEST(RunTrainingTest, DeterministicForFixedSeed) {
  ExperimentConfig c = DeskConfig();
  c.dp = true;
  c.dp_honest = 3;
  const TrainingResult a = RunTraining(c);
  const TrainingResult b = RunTraining(c);
  EXPECT_EQ(a.w_secgd, b.w_secgd);
  ASSERT_EQ(a.rounds.size(), b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    EXPECT_EQ(ToJson(a.rounds[i]).dump(), ToJson(b.rounds[i]).dump());
  }
  c.seed = 2;
  EXPECT_NE(RunTraining(c).w_secgd, a.w_secgd);
}

TEST(RunTrainingTest, DroppedMessagesVoidAndRetry) {
  ExperimentConfig c = DeskConfig();
  c.clients = 1;
  c.masks = 1;
  c.drop_probability = 0.5;
  c.retry_limit = 60;
  const TrainingResult res = RunTraining(c);
  EXPECT_EQ(res.rounds.size(), 5u);
  EXPECT_GT(res.void_rounds, 0u);
  for (const auto& r : res.rounds) EXPECT_TRUE(r.exact);
}

TEST(RunTrainingTest, RetriesExhausted) {
  ExperimentConfig c = DeskConfig();
  c.drop_probability = 1.0;
  c.retry_limit = 2;
  TrainingResult partial;
  try {
    RunTraining(c, &partial);
    FAIL() << "expected the retry limit to abort training";
  } catch (const ProtocolAbort& e) {
    EXPECT_EQ(e.reason(), ProtocolAbort::Reason::kRetriesExhausted);
  }
  EXPECT_TRUE(partial.rounds.empty());
}

TEST(RunTrainingTest, EquivocationAbortsTraining) {
  ExperimentConfig c = DeskConfig();
  c.equivocate = true;
  try {
    RunTraining(c);
    FAIL() << "expected an equivocation abort";
  } catch (const ProtocolAbort& e) {
    EXPECT_EQ(e.reason(), ProtocolAbort::Reason::kEquivocation);
  }
}

TEST(RunTrainingTest, EquivocationRoundDetectedByVictims) {
  const ExperimentConfig c = DeskConfig();
  const EquivocationRecord rec = RunEquivocationRound(c, {0, 2});
  EXPECT_EQ(rec.victims, 2u);
  EXPECT_EQ(rec.victims_detected, 2u);
  EXPECT_EQ(rec.bystanders_aborted, 0u);
  EXPECT_TRUE(rec.round_void);
}

TEST(RunTrainingTest, RecoveryScenarioFindsPlantedGradient) {
  ExperimentConfig c = DeskConfig();
  c.clients = 2;
  c.dim = 2;
  c.masks = 2;
  c.rounds = 1;
  c.attack_recovery = true;
  const TrainingResult res = RunTraining(c);
  ASSERT_TRUE(res.recovery.has_value());
  EXPECT_TRUE(res.recovery->planted_found);
  EXPECT_EQ(res.recovery->masked_messages, 2u);
}

TEST(CostReportTest, UplinkMatchesWireFormat) {
  EXPECT_EQ(ExpectedUplinkBytes(16, 12, 96, 16), 806u);
  ExperimentConfig c = DeskConfig();
  c.clients = 2;
  c.dim = 16;
  c.m_tilde = 11;
  c.fraction_bits = 5;
  c.min_m_tilde = 8;
  c.masks = 96;
  c.seed_bits = 16;
  Simulation sim(c);
  ASSERT_EQ(sim.setup().quant.total_bits(), 12);
  sim.RunRound();
  EXPECT_EQ(sim.cost().uplink_bytes, 806u);
  // One parameter request and three hash requests, each a bare header.
  EXPECT_EQ(sim.cost().request_bytes, 4 * kMessageHeaderBytes);
  const std::size_t config_bytes = EncodeConfig(*sim.server().current_config()).size();
  EXPECT_EQ(sim.cost().downlink_bytes, config_bytes + 3 * kDigestBytes);
}

TEST(RecordsTest, SummaryCarriesCostAndDp) {
  ExperimentConfig c = DeskConfig();
  c.rounds = 1;
  c.dp = true;
  const TrainingResult res = RunTraining(c);
  const Json j = SummaryJson(c, res, false);
  EXPECT_EQ(j["type"], "summary");
  EXPECT_EQ(j["cost"]["uplink_bytes"], j["cost"]["expected_uplink_bytes"]);
  EXPECT_FALSE(j["cost"].contains("client_compute_s"));
  EXPECT_TRUE(j.contains("dp"));
  EXPECT_GT(j["dp"]["sigma"].get<double>(), 0);
}

}  // namespace
}  // namespace secgd
