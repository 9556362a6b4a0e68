#include "coderoute/tools/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <iomanip>
#include <ostream>
#include <thread>

#include "coderoute/difficulty.hpp"
#include "coderoute/router.hpp"
#include "coderoute/tools/pipeline.hpp"
#include "coderoute/tools/service.hpp"

namespace coderoute::tools {

namespace fs = std::filesystem;

namespace {

template <typename E>
CLI::Validator enum_validator(std::optional<E> (*parse)(std::string_view), std::string name) {
  return CLI::Validator(
      [parse](std::string& v) { return parse(v) ? std::string() : "unknown value '" + v + "'"; },
      std::move(name));
}

std::optional<PassOneTokens> parse_pass1(std::string_view v) {
  if (v == "mean") return PassOneTokens::MeanPerResponse;
  if (v == "first") return PassOneTokens::FirstResponse;
  return std::nullopt;
}

// First positional token, when it names no subcommand.
std::optional<std::string> unknown_subcommand(const CLI::App& app, int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "-w" || a == "--workdir") {
      ++i;
      continue;
    }
    if (a.empty() || a.front() == '-') continue;
    for (const auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
      if (sub->check_name(std::string(a))) return std::nullopt;
    }
    return std::string(a);
  }
  return std::nullopt;
}

int serve(const fs::path& config_path, std::ostream& out) {
  auto config = load_gateway_config(config_path);
  apply_env_overrides(config, {});

  // Signals are taken by a watcher thread so the handler never touches the
  // server from async-signal context.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  GatewayService service(std::move(config));
  if (service.bind() < 0) {
    throw DataError(ErrorCode::IoError, "cannot bind " + service.config().host + ":" +
                                            std::to_string(service.config().port));
  }
  std::thread listener([&] { service.run(); });
  try {
    service.warm();
  } catch (...) {
    service.stop();
    listener.join();
    throw;
  }
  out << "serving on " << service.config().host << ":" << service.config().port << "\n" << std::flush;

  std::thread watcher([&service, set] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  watcher.detach();
  listener.join();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cost-aware routing of coding prompts across a pool of LLMs", "coderoute"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", "coderoute 0.1.0");

  std::string workdir = ".";
  app.add_option("-w,--workdir", workdir, "Pipeline working directory")->capture_default_str();

  // ingest
  IngestOptions ingest;
  std::string cots_path;
  auto* c_ingest = app.add_subcommand("ingest", "Validate a corpus and store it in the working directory");
  c_ingest->add_option("--problems", ingest.problems, "problems.jsonl")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--responses", ingest.responses, "responses.jsonl")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--cots", cots_path, "cots.jsonl")->check(CLI::ExistingFile);
  c_ingest->add_option("--pricing", ingest.pricing, "pricing.json")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--samples", ingest.sample_count, "Samples per (problem, model)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // synth
  std::string spec_path;
  std::uint64_t synth_seed = 42;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus with a known optimum");
  c_synth->add_option("--spec", spec_path, "Synthetic spec JSON (default: built-in 3-tier spec)")
      ->check(CLI::ExistingFile);
  c_synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();

  // rank
  RankingConfig rank;
  std::string rank_tokens = "completion";
  auto* c_rank = app.add_subcommand("rank", "Label every problem with its cost-aware optimal model");
  c_rank->add_option("--tokens", rank_tokens, "completion|total")
      ->capture_default_str()
      ->check(enum_validator<TokenAccounting>(parse_token_accounting, "ACCOUNTING"));
  c_rank->add_option("--price-scale", rank.price_scale, "Multiplier on $/Mtok prices")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // cot-aggregate
  std::string reasoning_model;
  auto* c_cot = app.add_subcommand("cot-aggregate", "Reduce CoT samples to one length per problem");
  c_cot->add_option("--reasoning-model", reasoning_model, "Reasoning model id (default: the only one)");

  // cluster
  int k = 3;
  auto* c_cluster = app.add_subcommand("cluster", "Fit optimal 1-D k-means over CoT lengths");
  c_cluster->add_option("--k", k, "Number of difficulty tiers")->capture_default_str()->check(CLI::PositiveNumber);

  // train-embedding
  EmbeddingStageOptions emb;
  std::string provider = "hashed";
  std::string embeddings_path;
  auto* c_emb = app.add_subcommand("train-embedding", "Train the projection head with difficulty triplets");
  c_emb->add_option("--provider", provider, "hashed|imported")
      ->capture_default_str()
      ->check(enum_validator<EmbedderProvider>(parse_provider, "PROVIDER"));
  c_emb->add_option("--embeddings", embeddings_path, "Portable embedding file (imported provider)")
      ->check(CLI::ExistingFile);
  c_emb->add_option("--dim", emb.dim, "Hashed embedding dimension")->capture_default_str()->check(CLI::PositiveNumber);
  c_emb->add_option("--max-tokens", emb.max_tokens, "Prompt truncation")->capture_default_str()->check(CLI::PositiveNumber);
  c_emb->add_option("--proj-dim", emb.proj_dim, "Projection dimension")->capture_default_str()->check(CLI::PositiveNumber);
  c_emb->add_option("--margin", emb.margin, "Triplet margin")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_emb->add_option("--epochs", emb.train.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_emb->add_option("--lr", emb.train.lr, "SGD learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  c_emb->add_option("--batch", emb.train.batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  c_emb->add_option("--seed", emb.train.seed, "Triplet sampling and shuffle seed")->capture_default_str();
  c_emb->add_option("--triplets", emb.triplets, "Triplet count (0: eight per anchor)")->capture_default_str();
  c_emb->add_option("--split", emb.split, "Train fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_emb->add_option("--split-seed", emb.split_seed, "Train/test split seed")->capture_default_str();
  c_emb->add_flag("--untrained", emb.untrained, "Keep the identity-slice projection");

  // train-classifier
  ClassifierStageOptions clf;
  auto* c_clf = app.add_subcommand("train-classifier", "Fit the boosted-tree model selector");
  c_clf->add_option("--rounds", clf.boosting.rounds, "Boosting rounds")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_clf->add_option("--depth", clf.boosting.max_depth, "Maximum tree depth")->capture_default_str()->check(CLI::PositiveNumber);
  c_clf->add_option("--eta", clf.boosting.learning_rate, "Learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  c_clf->add_option("--min-leaf", clf.boosting.min_samples_leaf, "Minimum samples per leaf")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_clf->add_option("--split", clf.split, "Train fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_clf->add_option("--seed", clf.split_seed, "Train/test split seed")->capture_default_str();
  c_clf->add_flag("--tier-model", clf.tier_model, "Also fit an embedding -> difficulty tier classifier");

  // evaluate
  EvaluateOptions ev;
  std::string eval_tokens = "completion";
  std::string pass1 = "mean";
  std::string csv_path;
  auto* c_eval = app.add_subcommand("evaluate", "Compare routing policies on the test split");
  c_eval->add_option("--policy", ev.policies, "learned|oracle|random|fixed:<model> (repeatable)");
  c_eval->add_option("--tokens", eval_tokens, "completion|total")
      ->capture_default_str()
      ->check(enum_validator<TokenAccounting>(parse_token_accounting, "ACCOUNTING"));
  c_eval->add_option("--pass1-tokens", pass1, "mean|first")
      ->capture_default_str()
      ->check(enum_validator<PassOneTokens>(parse_pass1, "MODE"));
  c_eval->add_option("--random-seed", ev.random_seed, "Seed of the random policy")->capture_default_str();
  c_eval->add_option("--csv", csv_path, "Also write the table as CSV");

  // route
  std::string prompt;
  std::string problem_id;
  std::string route_provider;
  auto* c_route = app.add_subcommand("route", "Route one prompt with the trained artifacts");
  c_route->add_option("--prompt", prompt, "Prompt text")->required();
  c_route->add_option("--problem-id", problem_id, "Known problem id (imported vectors)");
  c_route->add_option("--provider", route_provider, "Override the embedding provider")
      ->check(enum_validator<EmbedderProvider>(parse_provider, "PROVIDER"));

  // serve
  std::string config_path;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP routing gateway");
  c_serve->add_option("--config", config_path, "Gateway config JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (auto unknown = unknown_subcommand(app, argc, argv)) {
      err << "unknown subcommand '" << *unknown << "'\n" << app.help();
      return kExitUsage;
    }
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const fs::path dir(workdir);
  try {
    if (c_ingest->parsed()) {
      if (!cots_path.empty()) ingest.cots = fs::path(cots_path);
      const auto corpus = run_ingest(dir, ingest);
      out << "ingested " << corpus.problems().size() << " problems, " << corpus.responses().size()
          << " responses, " << corpus.cots().size() << " CoT records over " << corpus.pool().size()
          << " models\n";
    } else if (c_synth->parsed()) {
      SynthSpec spec = default_synth_spec();
      if (!spec_path.empty()) spec = synth_spec_from_json(read_json_file(spec_path), spec_path);
      const auto corpus = run_synth(dir, spec, synth_seed);
      out << "generated " << corpus.problems().size() << " problems over " << corpus.pool().size()
          << " models\n";
    } else if (c_rank->parsed()) {
      rank.tokens = *parse_token_accounting(rank_tokens);
      const auto ds = run_rank(dir, rank);
      out << "ranked " << ds.ranked.size() << " problems, skipped " << ds.skipped.size() << "\n";
    } else if (c_cot->parsed()) {
      const auto agg = run_cot_aggregate(
          dir, reasoning_model.empty() ? std::nullopt : std::optional<std::string>(reasoning_model));
      out << "aggregated " << agg.lengths.size() << " problems for " << agg.reasoning_model_id << ", excluded "
          << agg.exclusions.size() << "\n";
    } else if (c_cluster->parsed()) {
      const auto model = run_cluster(dir, k);
      out << "centroids";
      for (std::size_t t = 0; t < model.centroids().size(); ++t) {
        out << " " << tier_name(model.k(), static_cast<int>(t)) << "=" << std::setprecision(6)
            << model.centroids()[t];
      }
      out << "\n";
    } else if (c_emb->parsed()) {
      emb.provider = *parse_provider(provider);
      if (!embeddings_path.empty()) emb.embeddings = fs::path(embeddings_path);
      const auto head = run_train_embedding(dir, emb);
      out << "projection " << head.input_dim() << " -> " << head.output_dim() << ", " << head.meta.triplets
          << " triplets";
      if (!head.meta.loss_curve.empty()) {
        out << ", loss " << head.meta.loss_curve.front() << " -> " << head.meta.loss_curve.back();
      }
      out << "\n";
    } else if (c_clf->parsed()) {
      clf.boosting.seed = clf.split_seed;
      const auto forest = run_train_classifier(dir, clf);
      out << "classifier over " << forest.num_classes() << " models, " << forest.trees.size() << " trees\n";
    } else if (c_eval->parsed()) {
      ev.eval.tokens = *parse_token_accounting(eval_tokens);
      ev.eval.pass1_tokens = *parse_pass1(pass1);
      if (!csv_path.empty()) ev.csv = fs::path(csv_path);
      const auto report = run_evaluate(dir, ev);
      out << report.table;
      if (report.size_performance) out << "size/pass@1 pearson r = " << *report.size_performance << "\n";
    } else if (c_route->parsed()) {
      std::optional<EmbedderProvider> p;
      if (!route_provider.empty()) p = parse_provider(route_provider);
      const auto router = Router::load(RouterArtifactPaths::in_directory(dir), p);
      const auto decision = router.route(
          prompt, problem_id.empty() ? std::nullopt : std::optional<std::string_view>(problem_id));
      out << to_json(decision).dump(2) << "\n";
    } else if (c_serve->parsed()) {
      return serve(config_path, out);
    }
  } catch (const DataError& e) {
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace coderoute::tools
