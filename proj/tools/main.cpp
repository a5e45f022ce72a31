#include <CLI11.hpp>

#include <iostream>

#include "syntaxshap/cli.hpp"

int main(int argc, char** argv) {
  syntaxshap::cli::RunConfig config;
  std::vector<std::string> methods, seeds;
  std::string strategy = std::string(syntaxshap::to_string(config.metric.strategy));

  CLI::App app{"Syntax-aware Shapley attributions for next-token predictions"};
  app.set_config("--config", "", "TOML key = value file; flags override its values");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--dataset", config.dataset, "JSONL of {\"id\", \"sentence\"}");
  app.add_option("--conllu", config.conllu, "CoNLL-U parses");
  app.add_option("--pairs", config.pairs, "JSONL pair or alignment records");
  app.add_option("--explanations", config.explanations, "directory written by explain");
  app.add_option("--oracle", config.oracle, "toy or http://host:port")->capture_default_str();
  app.add_option("--toy-seed", config.toy_seed)->capture_default_str();
  app.add_option("--toy-vocab", config.toy_vocab)->capture_default_str();
  app.add_option("--methods", methods, "syntaxshap, syntaxshap_w, exact_shapley, random")
      ->delimiter(',');
  app.add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');
  app.add_option("--t", config.metric.t, "fraction of tokens kept")->capture_default_str();
  app.add_option("--k", config.metric.k, "top-K size")->capture_default_str();
  app.add_option("--strategy", strategy, "zero_attention or random_replace")
      ->capture_default_str();
  app.add_option("--max-tokens", config.filter.max_tokens)->capture_default_str();
  app.add_option("--min-tokens", config.filter.min_tokens)->capture_default_str();
  app.add_option("--punctuation", config.filter.punctuation, "characters that reject a sentence");
  app.add_option("--out", config.out, "output directory")->capture_default_str();
  app.add_option("--workers", config.workers)->capture_default_str();
  app.add_option("--timeout-ms", config.timeout_ms)->capture_default_str();
  app.add_option("--retries", config.retries)->capture_default_str();

  app.add_subcommand("explain", "write one attribution file per sentence, method and seed")
      ->fallthrough();
  app.add_subcommand("evaluate", "Fid, Fid_rand, div@K and acc@K per seed plus mean and variance")
      ->fallthrough();
  app.add_subcommand("pairs", "rank coherency over sentence pairs")->fallthrough();
  app.add_subcommand("align", "rank of the negation token")->fallthrough();
  app.add_subcommand("counts", "predicted and observed oracle evaluations")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    config.command = app.get_subcommands().front()->get_name();
    if (!methods.empty()) {
      config.methods.clear();
      for (const auto& m : methods) config.methods.push_back(syntaxshap::parse_method(m));
    }
    if (!seeds.empty()) {
      config.seeds.clear();
      for (const auto& s : seeds) config.seeds.push_back(std::stoull(s));
    }
    config.metric.strategy = syntaxshap::parse_mask_strategy(strategy);
    return syntaxshap::cli::run(config, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
