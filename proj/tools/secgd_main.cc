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

// secgd: simulate, attack, bench and dp-calc front end.
//
// Exit codes: 0 success, 1 usage or config error, 2 protocol abort,
// 3 training diverged.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "secgd/adversary.h"
#include "secgd/dp.h"
#include "secgd/errors.h"
#include "secgd/experiment_config.h"
#include "secgd/records.h"
#include "secgd/simulation.h"

namespace secgd {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitProtocolAbort = 2;
constexpr int kExitDiverged = 3;

std::string AbortReasonName(ProtocolAbort::Reason r) {
  switch (r) {
    case ProtocolAbort::Reason::kEquivocation:
      return "equivocation";
    case ProtocolAbort::Reason::kTimeout:
      return "timeout";
    case ProtocolAbort::Reason::kPolicy:
      return "policy";
    case ProtocolAbort::Reason::kRetriesExhausted:
      return "retries_exhausted";
  }
  return "unknown";
}

struct GlobalOptions {
  std::string out_path;
  std::uint64_t seed = 1;
  bool seed_given = false;
  bool timing = false;
};

int RunSimulate(const std::string& config_path, const GlobalOptions& g,
                RecordWriter& out) {
  ExperimentConfig config = LoadConfig(config_path);
  if (g.seed_given) config.seed = g.seed;
  out.Write({{"type", "config"}, {"text", FormatConfig(config)}});
  for (const auto& w : ResolveProtocol(config).warnings) {
    std::cerr << "warning: " << w << "\n";
    out.Write({{"type", "warning"}, {"message", w}});
  }
  TrainingResult partial;
  try {
    TrainingResult res = RunTraining(config, &partial);
    for (const auto& r : res.rounds) out.Write(ToJson(r));
    if (res.recovery) out.Write(ToJson(*res.recovery));
    if (res.equivocation) out.Write(ToJson(*res.equivocation));
    out.Write(SummaryJson(config, res, g.timing));
    return kExitOk;
  } catch (const ProtocolAbort& e) {
    if (partial.equivocation) out.Write(ToJson(*partial.equivocation));
    out.Write({{"type", "abort"},
               {"reason", AbortReasonName(e.reason())},
               {"message", e.what()}});
    std::cerr << "protocol abort: " << e.what() << "\n";
    return kExitProtocolAbort;
  } catch (const TrainingDiverged& e) {
    out.Write({{"type", "diverged"}, {"message", e.what()}});
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDiverged;
  }
}

struct AttackOptions {
  std::size_t dim = 2;
  int bits = 4;  // m (dsss, injectivity, quasirandomness); m_tilde for recovery
  std::size_t masks = 2;
  std::size_t trials = 1000;
  std::size_t items = 16;  // dsss: |B|
  int clients = 2;
  std::string solver = "auto";
  double gradient_minus = std::exp(-1.0) + std::exp(-2.0) - 2;
  double gradient_plus = std::exp(1.0) + std::exp(2.0) - 2;
};

DsssSolver ParseSolver(const std::string& s) {
  if (s == "exhaustive") return DsssSolver::kExhaustive;
  if (s == "mitm") return DsssSolver::kMeetInTheMiddle;
  return DsssSolver::kAuto;
}

int RunAttack(const std::string& kind, const AttackOptions& a,
              const GlobalOptions& g, RecordWriter& out) {
  ChaChaRng rng(g.seed, /*stream=*/0xa77ac);
  if (kind == "appendix-c") {
    const auto [x1, x2] =
        ReconstructTwoClientFeatures(a.gradient_minus, a.gradient_plus);
    out.Write({{"type", "appendix_c"},
               {"gradient_at_minus_one", a.gradient_minus},
               {"gradient_at_plus_one", a.gradient_plus},
               {"x1", x1},
               {"x2", x2}});
    // Human-readable line on whichever stream does not carry the records.
    std::ostream& human = g.out_path.empty() ? std::cerr : std::cout;
    human << std::fixed << std::setprecision(6) << "recovered features: {" << x1 << ", " << x2 << "}\n";
    return kExitOk;
  }
  if (kind == "dsss") {
    for (std::size_t t = 0; t < a.trials; ++t) {
      auto base = UniformVectors(a.items, a.dim, a.bits, rng);
      std::uint64_t chosen = 0;
      ForEachCombination(a.items, a.masks, [&](std::uint64_t s) {
        if (chosen == 0 || UniformBelow(rng, 4) == 0) chosen = s;
      });
      std::vector<GroupVector> picked;
      for (std::size_t i = 0; i < a.items; ++i) {
        if (chosen >> i & 1) picked.push_back(base[i]);
      }
      DsssInstance inst{base, Sum(picked, a.dim, a.bits), a.masks};
      const auto start = std::chrono::steady_clock::now();
      const DsssResult r = DsssDecide(inst, ParseSolver(a.solver));
      Json rec = {{"type", "dsss"},
                  {"trial", t},
                  {"items", a.items},
                  {"found", r.found},
                  {"witness", r.witness},
                  {"work", r.work}};
      if (g.timing) {
        rec["seconds"] = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
      }
      out.Write(rec);
    }
    return kExitOk;
  }
  if (kind == "injectivity") {
    out.Write(ToJson(
        InjectivityExperiment(a.dim, a.bits, a.masks, a.trials, rng)));
    return kExitOk;
  }
  if (kind == "quasirandomness") {
    const auto rep =
        QuasirandomnessExperiment(a.dim, a.bits, a.masks, a.trials, rng);
    for (std::size_t t = 0; t < rep.distances.size(); ++t) {
      out.Write({{"type", "quasirandomness_trial"},
                 {"rank", t},
                 {"tv_distance", rep.distances[t]}});
    }
    out.Write({{"type", "quasirandomness"},
               {"trials", a.trials},
               {"median_tv", rep.median},
               {"mean_tv", rep.mean}});
    return kExitOk;
  }
  if (kind == "recovery") {
    const auto rep = RecoveryExperiment(a.clients,
                                        static_cast<std::uint32_t>(a.masks),
                                        a.dim, a.bits, a.trials, rng);
    out.Write({{"type", "recovery_experiment"},
               {"trials", rep.trials},
               {"planted_found", rep.planted_found},
               {"false_positive_hits", rep.false_positive_hits},
               {"false_positive_queries", rep.false_positive_queries},
               {"false_positive_rate", rep.false_positive_rate()}});
    return kExitOk;
  }
  std::cerr << "unknown attack '" << kind << "'\n";
  return kExitUsage;
}

int RunBench(std::size_t max_items, const GlobalOptions& g, RecordWriter& out) {
  ChaChaRng rng(g.seed, /*stream=*/0xbe7c);
  // Solver scaling at the hard ratio 2K = dm with d = 2.
  for (std::size_t n = 8; n <= max_items; n += 4) {
    const std::size_t dim = 2;
    const int bits = static_cast<int>(n / dim);
    const std::size_t k = n / 2;
    auto base = UniformVectors(n, dim, bits, rng);
    std::vector<GroupVector> picked(base.begin(), base.begin() + k);
    DsssInstance inst{base, Sum(picked, dim, bits), k};
    for (DsssSolver solver :
         {DsssSolver::kExhaustive, DsssSolver::kMeetInTheMiddle}) {
      if (solver == DsssSolver::kExhaustive && n > kMaxExhaustiveItems) continue;
      const auto start = std::chrono::steady_clock::now();
      const DsssResult r = DsssDecide(inst, solver);
      out.Write({{"type", "bench_solver"},
                 {"solver", solver == DsssSolver::kExhaustive ? "exhaustive"
                                                              : "mitm"},
                 {"items", n},
                 {"found", r.found},
                 {"work", r.work},
                 {"seconds", std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start)
                                 .count()}});
    }
  }
  // Communication per client per round against the baseline of sending the
  // plain gradient (d * m_tilde bits up, 32 d bits down).
  for (std::size_t dim : {16u, 256u, 4096u}) {
    for (int m_tilde : {16, 24}) {
      for (int clients : {4, 64}) {
        const auto quant = QuantizationParams::Make(m_tilde, clients);
        const int bits = quant.total_bits();
        const std::uint32_t masks = RecommendedNumMasks(dim, bits);
        const int q = SeedBits(masks, 1e-10);
        out.Write({{"type", "bench_cost"},
                   {"dim", dim},
                   {"m_tilde", m_tilde},
                   {"clients", clients},
                   {"group_bits", bits},
                   {"masks", masks},
                   {"seed_bits", q},
                   {"uplink_bytes", ExpectedUplinkBytes(dim, bits, masks, q)},
                   {"baseline_bytes", (dim * m_tilde + 7) / 8}});
      }
    }
  }
  return kExitOk;
}

int RunDpCalc(const DpParams& p, RecordWriter& out) {
  const double sigma = GaussianSigma(p);
  Json rec = {{"type", "dp_calc"},
              {"epsilon", p.epsilon},
              {"delta", p.delta},
              {"l2_sensitivity", p.l2_sensitivity},
              {"clients", p.num_clients},
              {"honest", p.num_honest},
              {"variance_bound", GaussianVarianceBound(p)},
              {"sigma", sigma}};
  rec["accounting"] = ToJson(AccountNoise(sigma, p));
  out.Write(rec);
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"SecGD secure-summation simulator and toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--out", g.out_path, "Write result records to this file");
  auto* seed_opt = app.add_option("--seed", g.seed, "Global random seed");
  app.add_flag("--timing", g.timing, "Include wall-clock timings in records");

  std::string config_path;
  auto* simulate = app.add_subcommand("simulate", "Run SecGD training");
  simulate->add_option("--config", config_path, "Experiment config file")
      ->required();

  std::string attack_kind;
  AttackOptions attack;
  auto* attack_cmd = app.add_subcommand("attack", "Adversary experiments");
  attack_cmd
      ->add_option("kind", attack_kind,
                   "dsss | injectivity | quasirandomness | recovery | "
                   "appendix-c")
      ->required();
  attack_cmd->add_option("--dim", attack.dim);
  attack_cmd->add_option("--bits", attack.bits,
                         "m; m_tilde for recovery");
  attack_cmd->add_option("--masks", attack.masks, "K");
  attack_cmd->add_option("--trials", attack.trials);
  attack_cmd->add_option("--items", attack.items, "|B| for dsss");
  attack_cmd->add_option("--clients", attack.clients, "N for recovery");
  attack_cmd->add_option("--solver", attack.solver, "auto | exhaustive | mitm");
  attack_cmd->add_option("--gradient-minus", attack.gradient_minus,
                         "appendix-c: global gradient at w = -1");
  attack_cmd->add_option("--gradient-plus", attack.gradient_plus,
                         "appendix-c: global gradient at w = 1");

  std::size_t bench_items = 32;
  auto* bench = app.add_subcommand("bench", "Solver scaling and cost sweep");
  bench->add_option("--max-items", bench_items);

  DpParams dp;
  auto* dp_calc = app.add_subcommand("dp-calc", "Gaussian noise calibration");
  dp_calc->add_option("--epsilon", dp.epsilon)->required();
  dp_calc->add_option("--delta", dp.delta)->required();
  dp_calc->add_option("--sensitivity", dp.l2_sensitivity)->required();
  dp_calc->add_option("--clients", dp.num_clients);
  dp_calc->add_option("--honest", dp.num_honest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0;

  std::ofstream file;
  if (!g.out_path.empty()) {
    file.open(g.out_path, std::ios::binary | std::ios::trunc);
    if (!file) {
      std::cerr << "cannot write '" << g.out_path << "'\n";
      return kExitUsage;
    }
  }
  RecordWriter out(g.out_path.empty() ? std::cout : file);

  try {
    if (*simulate) return RunSimulate(config_path, g, out);
    if (*attack_cmd) return RunAttack(attack_kind, attack, g, out);
    if (*bench) return RunBench(bench_items, g, out);
    if (*dp_calc) return RunDpCalc(dp, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace secgd

int main(int argc, char** argv) { return secgd::Main(argc, argv); }
