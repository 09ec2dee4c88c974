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

#include "fednn/experiment.hpp"

#include <sodium.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "fednn/error.hpp"
#include "fednn/federation.hpp"
#include "fednn/memstore.hpp"
#include "fednn/random.hpp"
#include "fednn/sealing.hpp"

namespace fednn {

namespace {

const std::set<std::string> kMethods = {"public", "centralized", "fedavg", "ft_ensemble", "fednn"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

bool parse_size(const std::string& text, std::size_t& out) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) return false;
  out = static_cast<std::size_t>(v);
  return true;
}

bool parse_u64(const std::string& text, std::uint64_t& out) {
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && end == text.data() + text.size();
}

bool parse_double(const std::string& text, double& out) {
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && end == text.data() + text.size() && std::isfinite(out);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

using Setter = std::function<bool(ExperimentConfig&, const std::string&)>;

Setter size_field(std::size_t ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& v) { return parse_size(v, c.*field); };
}
Setter u64_field(std::uint64_t ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& v) { return parse_u64(v, c.*field); };
}
Setter double_field(double ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.*field); };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"scenario",
       [](ExperimentConfig& c, const std::string& v) {
         try {
           c.scenario = parse_partition_mode(v);
           return true;
         } catch (const InvalidArgument&) {
           return false;
         }
       }},
      {"n_domains", size_field(&ExperimentConfig::n_domains)},
      {"n_clients", size_field(&ExperimentConfig::n_clients)},
      {"alpha", double_field(&ExperimentConfig::alpha)},
      {"beta", double_field(&ExperimentConfig::beta)},
      {"vocab_size", size_field(&ExperimentConfig::vocab_size)},
      {"domain_vocab", size_field(&ExperimentConfig::domain_vocab)},
      {"train_size", size_field(&ExperimentConfig::train_size)},
      {"test_size", size_field(&ExperimentConfig::test_size)},
      {"public_size", size_field(&ExperimentConfig::public_size)},
      {"vertical_size", size_field(&ExperimentConfig::vertical_size)},
      {"world_seed", u64_field(&ExperimentConfig::world_seed)},
      {"data_seed", u64_field(&ExperimentConfig::data_seed)},
      {"model_dim", size_field(&ExperimentConfig::model_dim)},
      {"embedding_seed", u64_field(&ExperimentConfig::embedding_seed)},
      {"train_seed", u64_field(&ExperimentConfig::train_seed)},
      {"public_epochs", size_field(&ExperimentConfig::public_epochs)},
      {"learning_rate", double_field(&ExperimentConfig::learning_rate)},
      {"pq_n_coarse", [](ExperimentConfig& c, const std::string& v) { return parse_size(v, c.pq.n_coarse); }},
      {"pq_m", [](ExperimentConfig& c, const std::string& v) { return parse_size(v, c.pq.m); }},
      {"pq_bits", [](ExperimentConfig& c, const std::string& v) { return parse_size(v, c.pq.bits); }},
      {"pq_n_probe", [](ExperimentConfig& c, const std::string& v) { return parse_size(v, c.pq.n_probe); }},
      {"pq_kmeans_iters", [](ExperimentConfig& c, const std::string& v) { return parse_size(v, c.pq.kmeans_iters); }},
      {"pq_seed", [](ExperimentConfig& c, const std::string& v) { return parse_u64(v, c.pq.seed); }},
      {"meta_max_k", [](ExperimentConfig& c, const std::string& v) { return parse_size(v, c.meta.max_k); }},
      {"meta_hidden", [](ExperimentConfig& c, const std::string& v) { return parse_size(v, c.meta.hidden); }},
      {"meta_temperature", [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.meta.temperature); }},
      {"meta_normalize_distances",
       [](ExperimentConfig& c, const std::string& v) {
         if (v != "true" && v != "false") return false;
         c.meta.normalize_distances = v == "true";
         return true;
       }},
      {"meta_pad_distance", [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.meta.pad_distance); }},
      {"meta_epochs", size_field(&ExperimentConfig::meta_epochs)},
      {"meta_seed", u64_field(&ExperimentConfig::meta_seed)},
      {"methods",
       [](ExperimentConfig& c, const std::string& v) {
         c.methods = split_list(v);
         return true;
       }},
      {"fedavg_rounds", size_field(&ExperimentConfig::fedavg_rounds)},
      {"fedavg_frequency", size_field(&ExperimentConfig::fedavg_frequency)},
      {"ft_epochs", size_field(&ExperimentConfig::ft_epochs)},
      {"protocol_seed", u64_field(&ExperimentConfig::protocol_seed)},
      {"key_seed", u64_field(&ExperimentConfig::key_seed)},
      {"m_mb",
       [](ExperimentConfig& c, const std::string& v) {
         if (v.empty()) {
           c.m_mb.reset();
           return true;
         }
         double x;
         if (!parse_double(v, x)) return false;
         c.m_mb = x;
         return true;
       }},
      {"d_mb",
       [](ExperimentConfig& c, const std::string& v) {
         if (v.empty()) {
           c.d_mb.reset();
           return true;
         }
         double x;
         if (!parse_double(v, x)) return false;
         c.d_mb = x;
         return true;
       }},
      {"output",
       [](ExperimentConfig& c, const std::string& v) {
         c.output = v;
         return true;
       }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  return {
      {"scenario", to_string(scenario)},
      {"n_domains", std::to_string(n_domains)},
      {"n_clients", std::to_string(n_clients)},
      {"alpha", format_double(alpha)},
      {"beta", format_double(beta)},
      {"vocab_size", std::to_string(vocab_size)},
      {"domain_vocab", std::to_string(domain_vocab)},
      {"train_size", std::to_string(train_size)},
      {"test_size", std::to_string(test_size)},
      {"public_size", std::to_string(public_size)},
      {"vertical_size", std::to_string(vertical_size)},
      {"world_seed", std::to_string(world_seed)},
      {"data_seed", std::to_string(data_seed)},
      {"model_dim", std::to_string(model_dim)},
      {"embedding_seed", std::to_string(embedding_seed)},
      {"train_seed", std::to_string(train_seed)},
      {"public_epochs", std::to_string(public_epochs)},
      {"learning_rate", format_double(learning_rate)},
      {"pq_n_coarse", std::to_string(pq.n_coarse)},
      {"pq_m", std::to_string(pq.m)},
      {"pq_bits", std::to_string(pq.bits)},
      {"pq_n_probe", std::to_string(pq.n_probe)},
      {"pq_kmeans_iters", std::to_string(pq.kmeans_iters)},
      {"pq_seed", std::to_string(pq.seed)},
      {"meta_max_k", std::to_string(meta.max_k)},
      {"meta_hidden", std::to_string(meta.hidden)},
      {"meta_temperature", format_double(meta.temperature)},
      {"meta_normalize_distances", meta.normalize_distances ? "true" : "false"},
      {"meta_pad_distance", format_double(meta.pad_distance)},
      {"meta_epochs", std::to_string(meta_epochs)},
      {"meta_seed", std::to_string(meta_seed)},
      {"methods", join(methods)},
      {"fedavg_rounds", std::to_string(fedavg_rounds)},
      {"fedavg_frequency", std::to_string(fedavg_frequency)},
      {"ft_epochs", std::to_string(ft_epochs)},
      {"protocol_seed", std::to_string(protocol_seed)},
      {"key_seed", std::to_string(key_seed)},
      {"m_mb", opt(m_mb)},
      {"d_mb", opt(d_mb)},
      {"output", output},
  };
}

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  if (methods.empty()) bad.push_back("methods");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!kMethods.count(m) || !seen.insert(m).second) {
      bad.push_back("methods");
      break;
    }
  }
  PartitionSpec spec{scenario, n_clients, alpha, beta, data_seed};
  try {
    spec.validate(n_domains);
  } catch (const InvalidArgument& e) {
    bad.push_back(std::string("scenario (") + e.what() + ")");
  }
  try {
    SyntheticDomain probe(0, DomainOptions{vocab_size, domain_vocab, 4, 10, 0.9, world_seed});
  } catch (const InvalidArgument&) {
    bad.push_back("vocab_size/domain_vocab");
  }
  if (model_dim == 0) bad.push_back("model_dim");
  try {
    pq.validate(model_dim);
  } catch (const InvalidArgument&) {
    bad.push_back("pq_*");
  }
  try {
    meta.validate();
  } catch (const InvalidArgument&) {
    bad.push_back("meta_*");
  }
  if (fedavg_rounds == 0) bad.push_back("fedavg_rounds");
  if (!(learning_rate > 0.0)) bad.push_back("learning_rate");
  if (public_size == 0) bad.push_back("public_size");
  if (vertical_size < 2) bad.push_back("vertical_size");
  if (m_mb && !(*m_mb > 0.0)) bad.push_back("m_mb");
  if (d_mb && !(*d_mb > 0.0)) bad.push_back("d_mb");
  if (!bad.empty()) {
    std::string msg = "invalid config keys:";
    for (const auto& k : bad) msg += " " + k;
    throw ConfigError(msg);
  }
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::vector<std::string> unknown, invalid;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      invalid.push_back("line " + std::to_string(line_no));
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = setters();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
    if (it == table.end()) {
      unknown.push_back(key);
    } else if (!it->second(config, value)) {
      invalid.push_back(key);
    }
  }
  if (!unknown.empty() || !invalid.empty()) {
    std::string msg;
    if (!unknown.empty()) msg += "unknown config keys: " + join(unknown);
    if (!invalid.empty()) msg += std::string(msg.empty() ? "" : "; ") + "invalid values for: " + join(invalid);
    throw ConfigError(msg);
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

std::string content_hash(const ExperimentConfig& config) {
  if (sodium_init() < 0) throw Error("libsodium failed to initialise");
  std::string text;
  for (const auto& [k, v] : config.entries()) text += k + "=" + v + "\n";
  unsigned char out[32];
  crypto_generichash(out, sizeof out, reinterpret_cast<const unsigned char*>(text.data()), text.size(),
                     nullptr, 0);
  std::ostringstream hex;
  for (unsigned char b : out) hex << std::hex << std::setw(2) << std::setfill('0') << int(b);
  return hex.str();
}

NextTokenFn model_fn(const SequenceModel& model) {
  return [&model](std::span<const TokenId> src, std::span<const TokenId> prefix) {
    return model.next_token_dist(src, prefix);
  };
}

MetaKNetwork train_shared_meta_k(const SequenceModel& model, const PQModel& pq,
                                 const ParallelCorpus& vertical, const ParallelCorpus& off_domain,
                                 const MetaKConfig& meta, std::size_t epochs, std::uint64_t seed) {
  if (vertical.size() < 2) throw InvalidArgument("Meta-k training needs at least two pairs");
  const std::size_t half = vertical.size() / 2;
  ParallelCorpus store_part, query_part;
  store_part.pairs.assign(vertical.pairs.begin(), vertical.pairs.begin() + static_cast<std::ptrdiff_t>(half));
  query_part.pairs.assign(vertical.pairs.begin() + static_cast<std::ptrdiff_t>(half), vertical.pairs.end());

  PQIndex index(pq);
  index.add(encode_datastore(pq, build_datastore(model, store_part)));

  for (std::size_t i = 0; i < off_domain.size() && i < half; ++i) {
    query_part.pairs.push_back(off_domain.pairs[i]);
  }

  std::vector<MetaKExample> examples;
  for (const auto& pair : query_part.pairs) {
    for (std::size_t t = 0; t < pair.target.size(); ++t) {
      std::span<const TokenId> prefix(pair.target.data(), t);
      auto base = model.next_token_dist(pair.source, prefix);
      auto retrieval = RetrievalSet::from(index.search(model.context(pair.source, prefix), meta.max_k, pq.config().n_probe));
      examples.push_back(make_meta_k_example(base, retrieval, pair.target[t], meta));
    }
  }
  MetaKNetwork net(meta, seed);
  MetaKTrainOptions opts;
  opts.epochs = epochs;
  opts.seed = rnd::derive_seed(seed, 1);
  train_meta_k(net, examples, opts);
  return net;
}

DomainOptions public_domain_options(const DomainOptions& base) {
  DomainOptions o = base;
  o.domain_vocab = base.vocab_size - vocab::kFirstContent;
  return o;
}

World build_world(const ExperimentConfig& config) {
  config.validate();
  World w;
  w.config = config;
  w.domain_options = DomainOptions{config.vocab_size, config.domain_vocab, 4, 10, 0.9, config.world_seed};
  const auto seed = config.data_seed;
  for (std::size_t d = 0; d < config.n_domains; ++d) {
    SyntheticDomain dom(d, w.domain_options);
    w.domain_train.push_back(dom.sample(config.train_size, rnd::derive_seed(seed, 10)));
    w.domain_test.push_back(dom.sample(config.test_size, rnd::derive_seed(seed, 11)));
  }
  SyntheticDomain pub(kPublicDomain, public_domain_options(w.domain_options));
  w.public_train = pub.sample(config.public_size, rnd::derive_seed(seed, 20));
  w.public_test = pub.sample(config.test_size, rnd::derive_seed(seed, 21));
  w.vertical = SyntheticDomain(kVerticalDomain, w.domain_options)
                   .sample(config.vertical_size, rnd::derive_seed(seed, 30));

  PartitionSpec spec{config.scenario, config.n_clients, config.alpha, config.beta,
                     rnd::derive_seed(seed, 40)};
  w.client_train = partition(w.domain_train, spec);
  for (std::size_t c = 0; c < config.n_clients; ++c) {
    if (config.scenario == PartitionMode::kIid) {
      ParallelCorpus all;
      all.domain = "iid";
      for (const auto& t : w.domain_test) all.pairs.insert(all.pairs.end(), t.pairs.begin(), t.pairs.end());
      w.client_test.push_back(std::move(all));
    } else {
      const std::size_t per = config.n_clients / config.n_domains;
      w.client_test.push_back(w.domain_test[c / per]);
    }
  }

  ToyModelConfig mc;
  mc.vocab_size = config.vocab_size;
  mc.dim = config.model_dim;
  mc.embedding_seed = config.embedding_seed;
  mc.train_seed = config.train_seed;
  w.public_model = std::make_unique<ToyModel>(mc);
  w.public_model->train_steps(w.public_train,
                              config.public_epochs * w.public_model->steps_per_epoch(w.public_train),
                              config.learning_rate);

  Datastore pq_sample = build_datastore(*w.public_model, w.public_train);
  Datastore vertical_store = build_datastore(*w.public_model, w.vertical);
  for (std::size_t i = 0; i < vertical_store.size(); ++i) {
    pq_sample.push_back(vertical_store.key(i), vertical_store.value(i));
  }
  w.pq = train_pq(pq_sample, config.pq);
  w.meta_k = std::make_unique<MetaKNetwork>(train_shared_meta_k(
      *w.public_model, w.pq, w.vertical, w.public_train, config.meta, config.meta_epochs, config.meta_seed));
  return w;
}

FedNNOutcome run_fednn(const World& world) {
  std::vector<FedNNClient> clients;
  for (std::size_t c = 0; c < world.client_train.size(); ++c) {
    clients.push_back({static_cast<NodeId>(c + 1), world.client_train[c]});
  }
  FedNNOutcome out;
  out.round = run_fednn_round(*world.public_model, world.pq, clients, keygen(world.config.key_seed),
                              world.config.protocol_seed);
  for (const auto& store : out.round.global_stores) {
    auto index = std::make_unique<PQIndex>(world.pq);
    index->add(store);
    out.indexes.push_back(std::move(index));
  }
  return out;
}

namespace {

using Json = nlohmann::ordered_json;

std::string client_name(std::size_t c) { return "client_" + std::to_string(c + 1); }

Json accuracy_section(const World& w, const std::function<NextTokenFn(std::size_t)>& fn_for_client,
                      const NextTokenFn& server_fn) {
  Json acc;
  double sum = 0.0;
  for (std::size_t c = 0; c < w.client_test.size(); ++c) {
    const double a = token_accuracy(fn_for_client(c), w.client_test[c]);
    acc[client_name(c)] = a;
    sum += a;
  }
  acc["mean_client"] = w.client_test.empty() ? 0.0 : sum / static_cast<double>(w.client_test.size());
  acc["server"] = token_accuracy(server_fn, w.public_test);
  return acc;
}

std::vector<FederatedClient> federated_clients(const World& w) {
  std::vector<FederatedClient> clients;
  for (std::size_t c = 0; c < w.client_train.size(); ++c) {
    clients.push_back({static_cast<NodeId>(c + 1), w.client_train[c]});
  }
  return clients;
}

Json cost_section(const CostLedger& ledger, CommMethod method, const ExperimentConfig& config,
                  bool with_store) {
  Json j = ledger_report(ledger, method, config.m_mb, with_store ? config.d_mb : std::nullopt).to_json();
  return j;
}

}  // namespace

nlohmann::ordered_json run_experiment(const ExperimentConfig& config) {
  World w = build_world(config);
  Json report;
  report["report_version"] = kReportVersion;
  Json cfg = Json::object();
  for (const auto& [k, v] : config.entries()) cfg[k] = v;
  report["config"] = cfg;
  report["input_hash"] = content_hash(config);
  Json sizes;
  for (std::size_t c = 0; c < w.client_train.size(); ++c) sizes[client_name(c)] = w.client_train[c].size();
  report["client_train_pairs"] = sizes;

  Json methods = Json::object();
  const auto& model = *w.public_model;
  for (const auto& name : config.methods) {
    Json section;
    if (name == "public") {
      section["accuracy"] = accuracy_section(w, [&](std::size_t) { return model_fn(model); }, model_fn(model));
    } else if (name == "centralized") {
      auto central = model.clone();
      ParallelCorpus all;
      for (const auto& c : w.client_train) all.pairs.insert(all.pairs.end(), c.pairs.begin(), c.pairs.end());
      if (!all.empty()) {
        central->train_steps(all, config.public_epochs * central->steps_per_epoch(all), config.learning_rate);
      }
      section["accuracy"] =
          accuracy_section(w, [&](std::size_t) { return model_fn(*central); }, model_fn(*central));
    } else if (name == "fedavg") {
      FedAvgOptions opts;
      opts.rounds = config.fedavg_rounds;
      opts.frequency = config.fedavg_frequency;
      opts.learning_rate = config.learning_rate;
      auto clients = federated_clients(w);
      auto result = fedavg_run(model, clients, opts);
      const SequenceModel& global = *result.model;
      section["accuracy"] =
          accuracy_section(w, [&](std::size_t) { return model_fn(global); }, model_fn(global));
      section["final_loss"] = result.final_loss;
      section["aggregations"] = result.aggregations;
      section["cost"] = cost_section(result.ledger, CommMethod::kFedAvg, config, false);
    } else if (name == "ft_ensemble") {
      FTEnsembleOptions opts;
      opts.epochs = config.ft_epochs;
      opts.learning_rate = config.learning_rate;
      auto clients = federated_clients(w);
      auto result = ft_ensemble_run(model, clients, opts);
      std::vector<const SequenceModel*> members;
      for (const auto& m : result.models) members.push_back(m.get());
      NextTokenFn fn = [&members](std::span<const TokenId> src, std::span<const TokenId> prefix) {
        return ft_ensemble_predict(members, src, prefix, EnsembleMode::kMean);
      };
      section["accuracy"] = accuracy_section(w, [&](std::size_t) { return fn; }, fn);
      section["cost"] = cost_section(result.ledger, CommMethod::kFTEnsemble, config, false);
    } else if (name == "fednn") {
      auto outcome = run_fednn(w);
      std::vector<KnnPredictor> predictors;
      for (const auto& index : outcome.indexes) {
        predictors.emplace_back(model, *index, *w.meta_k, config.pq.n_probe);
      }
      auto fn_for = [&](std::size_t c) -> NextTokenFn {
        const KnnPredictor* p = &predictors[c];
        return [p](std::span<const TokenId> src, std::span<const TokenId> prefix) { return (*p)(src, prefix); };
      };
      section["accuracy"] = accuracy_section(w, fn_for, fn_for(0));
      Json by_domain;
      for (std::size_t c = 0; c < predictors.size(); ++c) {
        Json row;
        for (std::size_t d = 0; d < w.domain_test.size(); ++d) {
          row["domain_" + std::to_string(d)] = token_accuracy(fn_for(c), w.domain_test[d]);
        }
        by_domain[client_name(c)] = row;
      }
      section["domain_accuracy"] = by_domain;
      section["global_store_records"] = outcome.round.global_stores.empty() ? 0 : outcome.round.global_stores.front().size();
      section["cost"] = cost_section(outcome.round.ledger, CommMethod::kFedNN, config, true);
    }
    methods[name] = section;
  }
  report["methods"] = methods;
  return report;
}

std::string report_text(const nlohmann::ordered_json& report) {
  if (!report.contains("report_version") || report["report_version"] != kReportVersion) {
    throw FormatError(FormatErrc::kVersionMismatch, "unsupported report_version");
  }
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "input_hash " << report.value("input_hash", std::string()) << "\n";
  out << std::left << std::setw(14) << "method" << std::right << std::setw(12) << "mean_acc"
      << std::setw(12) << "server_acc" << std::setw(14) << "measured_gb" << std::setw(16)
      << "closed_form_gb" << "\n";
  for (const auto& [name, section] : report.at("methods").items()) {
    out << std::left << std::setw(14) << name << std::right;
    const auto& acc = section.at("accuracy");
    out << std::setw(12) << acc.at("mean_client").get<double>() << std::setw(12)
        << acc.at("server").get<double>();
    if (section.contains("cost")) {
      out << std::setw(14) << section["cost"].at("measured_gb").get<double>() << std::setw(16)
          << std::setprecision(2) << section["cost"].at("closed_form_gb").get<double>()
          << std::setprecision(4);
    } else {
      out << std::setw(14) << "-" << std::setw(16) << "-";
    }
    out << "\n";
  }
  return out.str();
}

PrivacyEvalResult run_privacy_eval(const PrivacyEvalOptions& o) {
  if (o.overlap < 0.0 || o.overlap > 1.0) throw InvalidArgument("overlap must be in [0, 1]");
  SyntheticDomain defender(o.defender_domain, o.domain);
  SyntheticDomain attacker(o.attacker_domain, o.domain);
  const ParallelCorpus priv = defender.sample(o.size, rnd::derive_seed(o.seed, 1));
  const ParallelCorpus pub =
      SyntheticDomain(kPublicDomain, public_domain_options(o.domain)).sample(o.public_size, rnd::derive_seed(o.seed, 2));

  ParallelCorpus aux = attacker.sample(o.attacker_size, rnd::derive_seed(o.seed, 3));
  if (o.attacker_domain == o.defender_domain) {
    const auto shared = static_cast<std::size_t>(std::floor(o.overlap * static_cast<double>(priv.size())));
    aux.pairs.insert(aux.pairs.end(), priv.pairs.begin(), priv.pairs.begin() + static_cast<std::ptrdiff_t>(shared));
  }

  ToyModelConfig mc;
  mc.vocab_size = o.domain.vocab_size;
  mc.dim = o.model_dim;
  ToyModel model(mc);
  const PQModel pq = train_pq(build_datastore(model, pub), o.pq);

  const auto raw = build_threat_dataset(priv, model, false);
  const auto coded = build_threat_dataset(priv, model, true, &pq);
  const auto dict = extract_privacy_dictionary(priv, pub, o.tau);
  NearestNeighborAttacker nn(build_threat_dataset(aux, model, false));
  const std::string name = "domain_" + std::to_string(o.defender_domain);
  PrivacyEvalResult r;
  r.raw = evaluate_attack(nn, raw, dict, nullptr, name);
  r.encoded = evaluate_attack(nn, coded, dict, &pq, name);
  return r;
}

}  // namespace fednn
