#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "fixtures.hpp"
#include "syntaxshap/attribution.hpp"
#include "syntaxshap/oracle.hpp"
#include "syntaxshap/wire.hpp"

using namespace syntaxshap;

namespace {

ValueRequest full_request(std::size_t n, std::vector<TokenId> targets, std::size_t top_k = 0) {
  ValueRequest r;
  for (std::size_t i = 0; i < n; ++i) r.tokens.push_back(static_cast<TokenId>(3 * i + 1));
  r.keep.assign(n, true);
  r.targets = std::move(targets);
  r.top_k = top_k;
  return r;
}

// In-process scoring service backed by a toy model.
class ScoreServer {
 public:
  explicit ScoreServer(OraclePtr model) : model_(std::move(model)) {
    server_.Get("/v1/meta", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(to_json(model_->metadata()).dump(), "application/json");
    });
    server_.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      last_auth = req.get_header_value("Authorization");
      if (fail_first > 0) {
        --fail_first;
        res.status = 503;
        return;
      }
      auto request = request_from_json(nlohmann::json::parse(req.body));
      auto response = model_->evaluate(request);
      if (corrupt) response.target_probs[0] = 1.5;
      res.set_content(to_json(response).dump(), "application/json");
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScoreServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  int port = 0;
  std::atomic<int> calls{0};
  std::atomic<int> fail_first{0};
  std::atomic<bool> corrupt{false};
  std::string last_auth;

 private:
  OraclePtr model_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace

TEST(ToyOracle, PureAndNormalized) {
  auto lm = toy_hash_lm(1, 50);
  auto req = full_request(5, {0, 7, 49}, 50);
  auto a = lm->evaluate(req);
  auto b = lm->evaluate(req);
  EXPECT_EQ(a, b);
  validate_response(req, a);
  double sum = 0.0;
  for (double p : lm->distribution(req)) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(a.top.size(), 50u);
  EXPECT_EQ(lm->metadata().vocab_size, 50u);
  EXPECT_THROW(toy_hash_lm(1, 1), std::invalid_argument);
}

TEST(ToyOracle, EveryKeepBitMatters) {
  auto lm = toy_hash_lm(2, 40);
  for (auto strategy : {MaskStrategy::kZeroAttention, MaskStrategy::kRandomReplace}) {
    for (std::uint64_t mask = 0; mask < 32; ++mask) {
      auto req = full_request(5, {0, 1, 2, 3});
      req.strategy = strategy;
      for (int i = 0; i < 5; ++i) req.keep[i] = (mask >> i) & 1U;
      auto base = lm->evaluate(req).target_probs;
      for (int i = 0; i < 5; ++i) {
        auto flipped = req;
        flipped.keep[i] = !flipped.keep[i];
        EXPECT_NE(lm->evaluate(flipped).target_probs, base) << "mask " << mask << " bit " << i;
      }
    }
  }
}

TEST(ToyOracle, Tokenize) {
  auto lm = toy_hash_lm(0, 100);
  std::vector<std::string> words = {"mom", "unhappiness"};
  auto t = lm->tokenize(words);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].size(), 1u);
  EXPECT_EQ(t[1].size(), 3u);
  EXPECT_EQ(t[1][0].text, "unha");
}

TEST(Oracle, ValidateResponse) {
  auto req = full_request(2, {1}, 2);
  EXPECT_THROW(validate_response(req, {{0.5, 0.5}, {}}), ProtocolError);
  EXPECT_THROW(validate_response(req, {{1.5}, {}}), ProtocolError);
  EXPECT_NO_THROW(validate_response(req, {{1.5}, {}}, true));
  EXPECT_THROW(validate_response(req, {{0.5}, {{1, 0.1}, {2, 0.2}}}), ProtocolError);
  EXPECT_THROW(validate_response(req, {{0.5}, {{1, 0.1}, {2, 0.1}, {3, 0.0}}}), ProtocolError);
  EXPECT_NO_THROW(validate_response(req, {{0.5}, {{1, 0.2}, {2, 0.2}}}));
  auto bad = req;
  bad.keep.pop_back();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Oracle, IgnoreAndSum) {
  auto lm = toy_hash_lm(3, 20);
  auto ignoring = ignore_token_lm(lm, 1);
  auto req = full_request(3, {4});
  auto masked = req;
  masked.keep[1] = false;
  EXPECT_EQ(ignoring->evaluate(req), lm->evaluate(masked));
  auto both = sum_oracle(lm, lm);
  EXPECT_DOUBLE_EQ(both->evaluate(req).target_probs[0], 2 * lm->evaluate(req).target_probs[0]);
}

TEST(Oracle, MemoCountsThreeChain) {
  auto memo = memoized(toy_hash_lm(4, 30));
  auto tree = fixtures::tokens_from_heads({0, 1, 2});
  auto r = syntaxshap::syntaxshap(tree, *memo, 2);
  EXPECT_EQ(r.oracle_calls.pairs, 6u);
  EXPECT_EQ(memo->total(), 12u);
  EXPECT_EQ(memo->unique(), r.oracle_calls.unique);
  EXPECT_EQ(r.oracle_calls.unique, 7u);  // {}, {1}, {2}, {3}, {1,2}, {1,3}, {1,2,3}
  memo->clear();
  EXPECT_EQ(memo->total(), 0u);
}

TEST(Oracle, MemoDoesNotCacheErrors) {
  std::atomic<int> calls{0};
  auto flaky = std::make_shared<fixtures::FunctionOracle>([&](const std::vector<bool>&) -> double {
    if (calls++ == 0) throw std::runtime_error("transient");
    return 0.5;
  });
  auto memo = memoized(flaky);
  auto req = full_request(2, {1});
  EXPECT_THROW(memo->evaluate(req), std::runtime_error);
  EXPECT_EQ(memo->evaluate(req).target_probs[0], 0.5);
  EXPECT_EQ(memo->unique(), 1u);
  EXPECT_EQ(memo->total(), 2u);
}

TEST(Wire, RoundTrip) {
  auto req = full_request(3, {5, 6}, 2);
  req.keep[1] = false;
  req.strategy = MaskStrategy::kRandomReplace;
  req.seed = 9;
  EXPECT_EQ(request_from_json(to_json(req)), req);
  ValueResponse resp{{0.25, 0.125}, {{3, 0.5}, {1, 0.25}}};
  EXPECT_EQ(response_from_json(to_json(resp)), resp);
  EXPECT_THROW(response_from_json(nlohmann::json{{"top", nlohmann::json::array()}}), ProtocolError);
}

TEST(Remote, MetaAndScore) {
  auto lm = toy_hash_lm(5, 30);
  ScoreServer server(lm);
  RemoteOptions options;
  options.auth_token = "secret";
  auto remote = remote_oracle(server.url(), options);
  EXPECT_EQ(remote->metadata().model, lm->metadata().model);
  EXPECT_EQ(remote->metadata().vocab_size, 30u);
  auto req = full_request(4, {2, 3}, 5);
  req.keep[0] = false;
  EXPECT_EQ(remote->evaluate(req), lm->evaluate(req));
  EXPECT_EQ(server.last_auth, "Bearer secret");

  auto tree = fixtures::tokens_from_heads({0, 1, 1});
  auto a = syntaxshap::syntaxshap(tree, *remote, 2);
  auto b = syntaxshap::syntaxshap(tree, *lm, 2);
  EXPECT_EQ(a.values, b.values);
}

TEST(Remote, RetriesThenFails) {
  ScoreServer server(toy_hash_lm(6, 30));
  RemoteOptions options;
  options.retries = 2;
  options.timeout = std::chrono::milliseconds(2000);
  auto remote = remote_oracle(server.url(), options);
  auto req = full_request(2, {1});
  server.fail_first = 2;
  EXPECT_NO_THROW(remote->evaluate(req));
  EXPECT_EQ(server.calls.load(), 3);
  server.fail_first = 10;
  EXPECT_THROW(remote->evaluate(req), TransportError);
}

TEST(Remote, RejectsOutOfRangeProbability) {
  ScoreServer server(toy_hash_lm(7, 30));
  server.corrupt = true;
  auto remote = remote_oracle(server.url());
  EXPECT_THROW(remote->evaluate(full_request(2, {1})), ProtocolError);
}

TEST(Remote, UnreachableEndpoint) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  RemoteOptions options;
  options.retries = 1;
  options.timeout = std::chrono::milliseconds(500);
  auto remote = remote_oracle("http://127.0.0.1:" + std::to_string(port), options);
  EXPECT_THROW(remote->evaluate(full_request(2, {1})), TransportError);
  EXPECT_THROW(remote_oracle("https://example.com"), std::invalid_argument);
}
