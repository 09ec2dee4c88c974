// Copyright 2026 The FedNN Authors.
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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fednn/baselines.hpp"
#include "fednn/error.hpp"
#include "fednn/experiment.hpp"
#include "fednn/federation.hpp"
#include "fednn/memstore.hpp"
#include "fednn/privacy.hpp"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fednn::ConfigError("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated nearest-neighbour translation toolkit"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Write synthetic domain corpora");
  std::size_t gen_domains = 3, gen_size = 2000, gen_vocab = 64;
  std::uint64_t gen_seed = 1, gen_world = 2023;
  std::string gen_out = ".";
  gen->add_option("--domains", gen_domains, "Number of domains")->check(CLI::PositiveNumber);
  gen->add_option("--size", gen_size, "Pairs per domain");
  gen->add_option("--seed", gen_seed, "Sampling seed");
  gen->add_option("--world-seed", gen_world, "Domain construction seed");
  gen->add_option("--vocab", gen_vocab, "Vocabulary size");
  gen->add_option("--out", gen_out, "Output directory");

  // build-datastore
  auto* bds = app.add_subcommand("build-datastore", "Build an FNDS datastore from a corpus");
  std::string bds_corpus, bds_out;
  std::size_t bds_dim = 32, bds_vocab = 64;
  std::uint64_t bds_embed = 7;
  bds->add_option("--corpus", bds_corpus, "Corpus file")->required();
  bds->add_option("--out", bds_out, "Output datastore")->required();
  bds->add_option("--dim", bds_dim, "Model dimension");
  bds->add_option("--vocab", bds_vocab, "Vocabulary size");
  bds->add_option("--embedding-seed", bds_embed, "Embedding seed");

  // run
  auto* run = app.add_subcommand("run", "Run an experiment config and write its JSON report");
  std::string run_config, run_output;
  run->add_option("--config", run_config, "Config file")->required();
  run->add_option("--output", run_output, "Report path (overrides the config's output key)");

  // costs
  auto* costs = app.add_subcommand("costs", "Evaluate the closed-form communication cost in GB");
  std::string cost_method;
  double cost_m = 0.0, cost_d = 0.0;
  std::size_t cost_n = 0, cost_r = 1;
  costs->add_option("--method", cost_method, "fedavg | ft-ensemble | fednn")->required();
  costs->add_option("--m-mb", cost_m, "Model size M in MB")->required();
  costs->add_option("--n", cost_n, "Number of clients N")->required();
  costs->add_option("--r", cost_r, "Rounds R (fedavg)");
  costs->add_option("--d-mb", cost_d, "Total datastore size D in MB (fednn)");

  // privacy-eval
  auto* priv = app.add_subcommand("privacy-eval", "Paired raw/encoded nearest-neighbour attack");
  fednn::PrivacyEvalOptions popts;
  std::string priv_output;
  priv->add_option("--defender", popts.defender_domain, "Defender domain id");
  priv->add_option("--attacker-domain", popts.attacker_domain, "Domain of the attacker's own data");
  priv->add_option("--size", popts.size, "Defender pairs");
  priv->add_option("--attacker-size", popts.attacker_size, "Attacker-owned pairs");
  priv->add_option("--overlap", popts.overlap, "Fraction of defender pairs the attacker holds");
  priv->add_option("--tau", popts.tau, "Dictionary ratio threshold");
  priv->add_option("--seed", popts.seed, "Seed");
  priv->add_option("--output", priv_output, "Report path");

  // report
  auto* rep = app.add_subcommand("report", "Summarise a JSON report");
  std::string rep_input;
  rep->add_option("--input", rep_input, "Report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      std::filesystem::create_directories(gen_out);
      fednn::DomainOptions opts;
      opts.vocab_size = gen_vocab;
      opts.world_seed = gen_world;
      for (std::size_t d = 0; d < gen_domains; ++d) {
        auto corpus = fednn::make_domain_corpus(d, gen_size, gen_seed, opts);
        const auto path = (std::filesystem::path(gen_out) / ("domain" + std::to_string(d) + ".tsv")).string();
        fednn::save_corpus(path, corpus);
        std::cout << path << "\t" << corpus.size() << "\n";
      }
    } else if (*bds) {
      fednn::ToyModelConfig mc;
      mc.dim = bds_dim;
      mc.vocab_size = bds_vocab;
      mc.embedding_seed = bds_embed;
      fednn::ToyModel model(mc);
      auto corpus = fednn::load_corpus(bds_corpus);
      auto store = fednn::build_datastore(model, corpus);
      fednn::save_datastore(bds_out, store);
      std::cout << bds_out << "\t" << store.size() << "\n";
    } else if (*run) {
      auto config = fednn::load_config(run_config);
      const std::string out = run_output.empty() ? config.output : run_output;
      auto report = fednn::run_experiment(config);
      write_text(out, report.dump(2) + "\n");
    } else if (*costs) {
      const auto method = fednn::parse_comm_method(cost_method);
      const double gb = fednn::closed_form_comm(method, cost_m, cost_n, cost_r, cost_d);
      std::printf("%.2f\n", gb);
    } else if (*priv) {
      auto r = fednn::run_privacy_eval(popts);
      nlohmann::ordered_json j = nlohmann::ordered_json::array({r.raw.to_json(), r.encoded.to_json()});
      write_text(priv_output, j.dump(2) + "\n");
    } else if (*rep) {
      std::ifstream in(rep_input);
      if (!in) throw fednn::ConfigError("cannot open " + rep_input);
      auto report = nlohmann::ordered_json::parse(in);
      std::cout << fednn::report_text(report);
    }
  } catch (const fednn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fednn::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fednn::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
