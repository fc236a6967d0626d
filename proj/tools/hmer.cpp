// Command-line front end: train, recognize, evaluate, gen-synth,
// extract-paths, serve.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <random>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hmer/checkpoint.hpp"
#include "hmer/dataset.hpp"
#include "hmer/error.hpp"
#include "hmer/evaluate.hpp"
#include "hmer/pipeline.hpp"
#include "hmer/service.hpp"
#include "hmer/synthetic.hpp"
#include "hmer/train.hpp"

// After Eigen: resolv.h defines a _res macro that clashes with Eigen internals.
#include <httplib.h>

namespace {

using nlohmann::json;

json path_json(const hmer::LabeledPath& path) {
  json nodes = json::array();
  for (const auto& n : path.nodes) nodes.push_back({{"label", n.label}, {"strokes", n.strokes}});
  json relations = json::array();
  for (auto r : path.relations) relations.push_back(hmer::relation_name(r));
  return {{"nodes", nodes}, {"relations", relations}};
}

hmer::Recognizer load_recognizer(const std::string& model, const std::string& grammar, std::optional<int> beam) {
  const hmer::Checkpoint ck = hmer::load_checkpoint(model);
  hmer::Grammar g = hmer::parse_grammar(hmer::read_file(grammar));
  for (const auto& w : g.warnings) std::cerr << "warning: " << w << "\n";
  hmer::RecognizerConfig cfg = hmer::recognizer_config_from(ck.train_config);
  if (beam) cfg.cyk.beam = *beam;
  return hmer::Recognizer(ck.model, ck.inventory, std::move(g), cfg);
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online handwritten math expression recognizer"};
  app.require_subcommand(1);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic corpus directory");
  std::string spec_path;
  std::string gen_out;
  std::uint64_t gen_seed = 1;
  std::optional<int> gen_count;
  gen->add_option("--spec", spec_path, "Corpus spec JSON (default built-in glyphs)");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--count", gen_count, "Override the number of expressions");

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset directory");
  std::string train_data;
  std::string train_out;
  std::string train_cfg_path;
  tr->add_option("--data", train_data, "Dataset directory")->required();
  tr->add_option("--out", train_out, "Checkpoint path")->required();
  tr->add_option("--config", train_cfg_path, "Training config JSON");
  std::string train_grammar;
  tr->add_option("--grammar", train_grammar, "Grammar file; checked against the dataset's symbols");
  std::optional<int> o_epochs, o_layers, o_hidden, o_random, o_batch;
  std::optional<double> o_lr, o_momentum, o_lambda, o_clip, o_epsilon;
  std::optional<std::uint64_t> o_seed;
  tr->add_option("--epochs", o_epochs);
  tr->add_option("--layers", o_layers);
  tr->add_option("--hidden", o_hidden);
  tr->add_option("--lr", o_lr);
  tr->add_option("--momentum", o_momentum);
  tr->add_option("--lambda", o_lambda);
  tr->add_option("--seed", o_seed);
  tr->add_option("--epsilon", o_epsilon);
  tr->add_option("--random-paths", o_random);
  tr->add_option("--batch", o_batch);
  tr->add_option("--clip", o_clip);

  // recognize
  auto* rec = app.add_subcommand("recognize", "Recognize one ink file");
  std::string model_path;
  std::string grammar_path = "data/toy.grammar";
  std::string ink_path;
  std::string ink_format = "native";
  int topk = 5;
  std::optional<int> beam;
  bool with_lattice = false;
  rec->add_option("--model", model_path, "Checkpoint")->required();
  rec->add_option("--grammar", grammar_path, "Grammar file");
  rec->add_option("--ink", ink_path, "Ink file")->required();
  rec->add_option("--format", ink_format, "native or inkml");
  rec->add_option("--topk", topk);
  rec->add_option("--beam", beam, "CYK beam (0 = unbounded)");
  rec->add_flag("--lattice", with_lattice, "Include the candidate lattice");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a model on a dataset directory");
  std::string eval_data;
  std::string report_path;
  hmer::EvalConfig eval_cfg;
  ev->add_option("--model", model_path)->required();
  ev->add_option("--grammar", grammar_path);
  ev->add_option("--data", eval_data)->required();
  ev->add_option("--report", report_path, "Write the report here instead of stdout");
  ev->add_option("--relation-paths", eval_cfg.relation_paths);
  ev->add_option("--seed", eval_cfg.seed);
  ev->add_option("--beam", beam);

  // extract-paths
  auto* ex = app.add_subcommand("extract-paths", "Print labeled paths of a tree");
  std::string srt_path;
  std::string mode = "all";
  int path_count = 1;
  std::uint64_t path_seed = 1;
  ex->add_option("--srt", srt_path)->required();
  ex->add_option("--method", mode)->check(CLI::IsMember({"all", "order", "random"}));
  ex->add_option("--count", path_count);
  ex->add_option("--seed", path_seed);

  // serve
  auto* sv = app.add_subcommand("serve", "Run the HTTP recognition service");
  std::string host = "127.0.0.1";
  int port = 8080;
  hmer::ServiceOptions svc;
  sv->add_option("--model", model_path)->required();
  sv->add_option("--grammar", grammar_path);
  sv->add_option("--host", host);
  sv->add_option("--port", port);
  sv->add_option("--max-strokes", svc.max_strokes);
  sv->add_option("--max-points", svc.max_points);
  sv->add_option("--beam", beam);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"kind", "usage_error"}, {"message", e.what()}}}}.dump() << "\n";
    return 64;
  }

  try {
    if (gen->parsed()) {
      hmer::CorpusSpec spec =
          spec_path.empty() ? hmer::default_corpus_spec() : hmer::parse_corpus_spec(hmer::read_file(spec_path));
      if (gen_count) spec.count = *gen_count;
      const auto samples = hmer::generate_corpus(spec, gen_seed);
      hmer::save_dataset(samples, gen_out);
      std::cout << json{{"samples", samples.size()}, {"out", gen_out}}.dump() << "\n";
    } else if (tr->parsed()) {
      json cfg = train_cfg_path.empty() ? json::object() : json::parse(hmer::read_file(train_cfg_path));
      auto set = [&](const char* key, const auto& v) {
        if (v) cfg[key] = *v;
      };
      set("epochs", o_epochs);
      set("layers", o_layers);
      set("hidden", o_hidden);
      set("learning_rate", o_lr);
      set("momentum", o_momentum);
      set("lambda", o_lambda);
      set("seed", o_seed);
      set("random_paths", o_random);
      set("batch_size", o_batch);
      set("clip_norm", o_clip);
      set("epsilon", o_epsilon);
      const auto config = hmer::TrainConfig::from_json(cfg);
      const auto samples = hmer::load_dataset(train_data);
      if (!train_grammar.empty()) {
        const hmer::Grammar g = hmer::parse_grammar(hmer::read_file(train_grammar));
        const auto terminals = g.terminals();
        for (const auto& s : hmer::dataset_symbols(samples)) {
          if (!terminals.count(s)) std::cerr << "warning: symbol '" << s << "' is not a terminal of the grammar\n";
        }
      }
      hmer::TrainHooks hooks;
      hooks.on_warning = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
      hooks.on_epoch = [](const hmer::EpochLog& e, const hmer::Model&) {
        std::cout << json{{"epoch", e.epoch},       {"ctc", e.mean_ctc},         {"constraint", e.mean_constraint},
                          {"loss", e.mean_combined}, {"steps", e.steps},          {"skipped", e.skipped},
                          {"rejected", e.rejected_updates}, {"seconds", e.seconds}}
                         .dump()
                  << std::endl;
        return true;
      };
      const auto result = hmer::train(samples, config, hooks);
      hmer::save_checkpoint(result.checkpoint, train_out);
    } else if (rec->parsed()) {
      const auto recognizer = load_recognizer(model_path, grammar_path, beam);
      const hmer::Ink ink = hmer::parse_ink(hmer::read_file(ink_path), hmer::ink_format_from_string(ink_format));
      const hmer::Recognition r = recognizer.recognize(ink, topk);
      json out = hmer::recognition_to_json(r, 0.0);
      out.erase("timing_ms");
      out["candidates"] = out["alternatives"];
      out.erase("alternatives");
      if (with_lattice) out["lattice"] = json::parse(hmer::lattice_to_json(r.lattice));
      std::cout << out.dump(2) << "\n";
    } else if (ev->parsed()) {
      const auto recognizer = load_recognizer(model_path, grammar_path, beam);
      const auto samples = hmer::load_dataset(eval_data);
      const hmer::EvalReport r = hmer::evaluate(recognizer, samples, eval_cfg);
      const std::string report = r.to_json().dump(2) + "\n";
      if (report_path.empty()) {
        std::cout << report;
      } else {
        hmer::write_file(report_path, report);
        std::cout << hmer::format_confusion_table(r.confusion);
      }
    } else if (ex->parsed()) {
      const hmer::SrtNode tree = hmer::parse_srt(hmer::read_file(srt_path));
      json out = json::array();
      if (mode == "all") {
        for (const auto& p : hmer::derive_paths_all(tree)) out.push_back(path_json(p));
      } else if (mode == "order") {
        out.push_back(path_json(hmer::derive_path_writing_order(tree)));
      } else {
        std::mt19937_64 rng(path_seed);
        for (int i = 0; i < path_count; ++i) out.push_back(path_json(hmer::extract_random_path(tree, rng)));
      }
      std::cout << out.dump(2) << "\n";
    } else if (sv->parsed()) {
      svc.model_version = hmer::model_version_of(hmer::read_file(model_path));
      auto recognizer = std::make_shared<const hmer::Recognizer>(load_recognizer(model_path, grammar_path, beam));
      hmer::RecognitionService service(recognizer, svc);
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) throw hmer::Error("io_error", "cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const hmer::Error& e) {
    std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << json{{"error", {{"kind", "parse_error"}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  }
  return 0;
}
