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

#include <string>

#include "fednn/error.hpp"
#include "gtest/gtest.h"

namespace fednn {
namespace {

const char* kSmall = R"(# small world
train_size = 36
test_size = 6
public_size = 200
vertical_size = 40
public_epochs = 1
meta_epochs = 2
pq_n_coarse = 8
pq_n_probe = 4
pq_kmeans_iters = 5
)";

ExperimentConfig small(const std::string& extra) { return parse_config_text(std::string(kSmall) + extra); }

TEST(ConfigTest, DefaultsAndOverrides) {
  auto c = parse_config_text("n_clients = 3\nalpha = 0.25 # trailing comment\nscenario = alpha_mix\n"
                             "methods = public, fednn, fedavg\nm_mb = 414\n");
  EXPECT_EQ(c.scenario, PartitionMode::kAlphaMix);
  EXPECT_EQ(c.alpha, 0.25);
  EXPECT_EQ(c.methods, (std::vector<std::string>{"public", "fednn", "fedavg"}));
  EXPECT_EQ(c.m_mb, 414.0);
  EXPECT_FALSE(c.d_mb.has_value());
  EXPECT_EQ(c.pq.n_coarse, PQConfig{}.n_coarse);
}

TEST(ConfigTest, UnknownAndInvalidKeysAreNamed) {
  try {
    parse_config_text("n_clinets = 3\nalpha = lots\nbeta = 0.5\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("n_clinets"), std::string::npos);
    EXPECT_NE(msg.find("alpha"), std::string::npos);
    EXPECT_EQ(msg.find("beta"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("methods = fednn, controller\n"), ConfigError);
  EXPECT_THROW(parse_config_text("methods =\n"), ConfigError);
  EXPECT_THROW(parse_config_text("n_clients = 4\n"), ConfigError);
  EXPECT_THROW(parse_config_text("meta_max_k = 6\n"), ConfigError);
  EXPECT_THROW(parse_config_text("no equals sign\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/fednn.cfg"), ConfigError);
}

TEST(ConfigTest, EntriesRoundTrip) {
  auto c = parse_config_text("alpha = 0.5\nscenario = alpha_mix\nd_mb = 1978\nmethods = fedavg\n");
  std::string text;
  for (const auto& [k, v] : c.entries()) text += k + " = " + v + "\n";
  auto back = parse_config_text(text);
  EXPECT_EQ(back.entries(), c.entries());
  EXPECT_EQ(content_hash(back), content_hash(c));
  EXPECT_NE(content_hash(parse_config_text("alpha = 0.4\nscenario = alpha_mix\n")), content_hash(c));
  std::vector<std::string> keys;
  for (const auto& [k, v] : c.entries()) keys.push_back(k);
  EXPECT_EQ(keys, config_keys());
}

TEST(RunExperimentTest, PublicOnlyHasOneSection) {
  auto report = run_experiment(small("methods = public\n"));
  EXPECT_EQ(report["report_version"], kReportVersion);
  ASSERT_EQ(report["methods"].size(), 1u);
  EXPECT_TRUE(report["methods"].contains("public"));
  const auto& acc = report["methods"]["public"]["accuracy"];
  EXPECT_TRUE(acc.contains("mean_client"));
  EXPECT_TRUE(acc.contains("server"));
  EXPECT_EQ(report["config"]["methods"], "public");
}

TEST(RunExperimentTest, ReportsAreByteIdentical) {
  auto c = small("methods = public, fednn, fedavg, ft_ensemble, centralized\nfedavg_rounds = 2\nft_epochs = 1\n");
  const std::string a = run_experiment(c).dump(2);
  const std::string b = run_experiment(c).dump(2);
  EXPECT_EQ(a, b);
  auto report = nlohmann::ordered_json::parse(a);
  EXPECT_EQ(report["methods"].size(), 5u);
  EXPECT_EQ(report["input_hash"], content_hash(c));
  EXPECT_FALSE(report_text(report).empty());
  report["report_version"] = 2;
  EXPECT_THROW(report_text(report), FormatError);
}

TEST(RunExperimentTest, ClientScaleClosedFormCosts) {
  const std::pair<int, double> expect[] = {{3, 5.08}, {6, 12.08}, {12, 26.10}, {18, 40.12}};
  for (const auto& [n, gb] : expect) {
    auto c = small("scenario = client_scale\nmethods = fednn\nm_mb = 414\nd_mb = 1978\nn_clients = " +
                   std::to_string(n) + "\n");
    auto report = run_experiment(c);
    const auto& cost = report["methods"]["fednn"]["cost"];
    EXPECT_EQ(cost["N"], n);
    EXPECT_DOUBLE_EQ(cost["closed_form_gb"].get<double>(), gb) << "N=" << n;
    EXPECT_EQ(report["client_train_pairs"].size(), static_cast<std::size_t>(n));
  }
}

TEST(RunExperimentTest, FedNNStoresAreShared) {
  auto report = run_experiment(small("methods = fednn\n"));
  const auto& fednn = report["methods"]["fednn"];
  std::size_t total = 0;
  for (const auto& [k, v] : report["client_train_pairs"].items()) total += v.get<std::size_t>();
  EXPECT_GE(fednn["global_store_records"].get<std::size_t>(), total);
  const auto& dom = fednn["domain_accuracy"];
  ASSERT_EQ(dom.size(), 3u);
  // every client queries the same global store, so per-domain accuracy agrees
  auto first = dom.begin().value();
  for (const auto& [k, v] : dom.items()) EXPECT_EQ(v, first);
}

}  // namespace
}  // namespace fednn
