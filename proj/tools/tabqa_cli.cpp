// tabqa command-line front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tabqa/corpus.hpp"
#include "tabqa/neural.hpp"
#include "tabqa/pipeline.hpp"
#include "tabqa/schema.hpp"
#include "tabqa/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tabqa;

namespace {

enum Exit { kOk = 0, kInput = 2, kUnanswerable = 3, kTraining = 4, kInternal = 5 };

int exit_code(const Error& e) {
  const auto& k = e.kind();
  if (k == "Unanswerable" || k == "SearchError" || k == "DecomposeError" || k == "DeadlineExceeded") return kUnanswerable;
  if (k == "TrainError") return kTraining;
  if (k == "ProviderError") return kInternal;
  return kInput;
}

int fail(int code, const std::string& kind, const std::string& message, json extra = json::object()) {
  json j = {{"error", kind}, {"message", message}, {"exit", code}};
  j.update(extra);
  std::cerr << j.dump() << '\n';
  return code;
}

DataTable read_table(const std::string& path) {
  if (!fs::exists(path)) throw EmptyInput("no such file: " + path);
  return load_table_file(path);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmptyInput("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EmptyInput("cannot write " + path);
  out << content;
}

std::vector<DataTable> read_tables(const std::string& dir) {
  if (!fs::is_directory(dir)) throw EmptyInput("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyInput("no .csv files in " + dir);
  std::vector<DataTable> out;
  for (const auto& f : files) out.push_back(load_table_file(f));
  return out;
}

corpus::Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmptyInput("cannot open " + path);
  return corpus::from_jsonl(in);
}

std::unique_ptr<neural::NeuralDecomposer> load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw ParseError(0, "model file is not JSON: " + std::string(e.what()));
  }
  return std::make_unique<neural::NeuralDecomposer>(neural::state_from_json(j));
}

std::vector<neural::TrainingPair> training_pairs(const corpus::Corpus& c) {
  std::vector<neural::TrainingPair> out;
  for (const auto& e : c.entries) {
    if (e.input.empty()) throw SchemaError("corpus entry has no input tokens");
    out.push_back({e.input, corpus::method_class(e.method), text::tokenize(e.sub_questions[0]),
                   text::tokenize(e.sub_questions[1])});
  }
  return out;
}

void print_dashboard(const AskResult& r) {
  std::cout << "Q: " << r.dashboard.title << '\n';
  std::size_t i = 0;
  for (const auto& s : r.dashboard.sections) {
    std::cout << '[' << ++i << "] " << s.sub_question << '\n';
    for (const auto& c : s.charts) {
      std::string kinds;
      for (const auto& a : c.spec.annotations) kinds += (kinds.empty() ? "" : ",") + a.kind;
      char rel[32];
      std::snprintf(rel, sizeof rel, "%.4f", c.spec.relevance);
      std::cout << "    " << c.spec.base << (kinds.empty() ? "" : "+" + kinds) << " (" << rel << ") "
                << c.spec.caption << '\n';
    }
  }
  for (const auto& u : r.unanswered) std::cout << "unanswered: " << u.question << " (" << u.reason << ")\n";
}

void print_tree(const TreeNode& n, int depth = 0) {
  std::cout << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "- " << n.question << " [" << to_string(n.cls)
            << (n.backend.empty() ? "" : ", " + n.backend) << (n.forced ? ", forced" : "") << "]\n";
  for (const auto& c : n.children) print_tree(c, depth + 1);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Question answering over tables with annotated chart dashboards"};
  app.require_subcommand(1);
  app.set_config("--defaults", "", "INI/TOML file with flag defaults");
  std::uint64_t seed = 42;
  bool as_json = false;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_flag("--json", as_json, "Print JSON on stdout");

  std::string table, question, backend = "rule", model, out;
  std::size_t beam = 5, k = 5, max_depth = 3;

  auto* ask = app.add_subcommand("ask", "Answer a question with a dashboard");
  ask->add_option("--table", table, "CSV file")->required();
  ask->add_option("question", question, "Question")->required();
  ask->add_option("--beam", beam, "Beam width")->check(CLI::PositiveNumber);
  ask->add_option("--backend", backend, "Decomposer backend")->check(CLI::IsMember({"rule", "neural"}));
  ask->add_option("--model", model, "Checkpoint for the neural backend");
  ask->add_option("--max-depth", max_depth, "Decomposition depth limit")->check(CLI::PositiveNumber);
  ask->add_option("--out", out, "Write the dashboard JSON here");

  auto* dec = app.add_subcommand("decompose", "Print the decomposition tree");
  dec->add_option("--table", table, "CSV file")->required();
  dec->add_option("question", question, "Question")->required();
  dec->add_option("--backend", backend, "Decomposer backend")->check(CLI::IsMember({"rule", "neural"}));
  dec->add_option("--model", model, "Checkpoint for the neural backend");

  auto* facts = app.add_subcommand("facts", "Top-k data facts for a simple question");
  facts->add_option("--table", table, "CSV file")->required();
  facts->add_option("question", question, "Simple question")->required();
  facts->add_option("--k", k, "Number of facts")->check(CLI::PositiveNumber);

  std::string column;
  auto* sug = app.add_subcommand("suggest", "Template questions for a table");
  sug->add_option("--table", table, "CSV file")->required();
  sug->add_option("--column", column, "Restrict to one column");

  auto* corp = app.add_subcommand("corpus", "Complex-question corpus tools");
  corp->require_subcommand(1);
  std::string tables_dir, corpus_in;
  std::size_t per_method = corpus::GenerateOptions{}.max_per_method;
  auto* gen = corp->add_subcommand("generate", "Generate a corpus");
  gen->add_option("--tables", tables_dir, "Directory of CSV tables")->required();
  gen->add_option("--out", out, "Output JSONL")->required();
  gen->add_option("--max-per-method", per_method, "Entries per (table, method)");
  auto* val = corp->add_subcommand("validate", "Validate a corpus");
  val->add_option("--in", corpus_in, "Corpus JSONL")->required();
  val->add_option("--tables", tables_dir, "Tables for the classification check");

  std::string config_path, loss_log;
  std::size_t epochs = 0, limit = 0;
  bool toy = false;
  auto* train = app.add_subcommand("train", "Train the neural decomposer");
  train->add_option("--corpus", corpus_in, "Corpus JSONL");
  train->add_flag("--toy", toy, "Use the built-in 32-pair toy corpus");
  train->add_option("--config", config_path, "Model config JSON");
  train->add_option("--epochs", epochs, "Epochs (overrides the config)");
  train->add_option("--limit", limit, "Use only the first N entries");
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--loss-log", loss_log, "Loss CSV (default: <out>.loss.csv)");

  std::string candidates;
  auto* ev = app.add_subcommand("eval", "BLEU and meteor_lite of decompositions");
  ev->add_option("--corpus", corpus_in, "Reference corpus JSONL")->required();
  auto* ev_model = ev->add_option("--model", model, "Checkpoint to decode with");
  ev->add_option("--candidates", candidates, "Candidate corpus JSONL aligned with --corpus")->excludes(ev_model);
  ev->add_option("--limit", limit, "Evaluate only the first N entries");

  service::Config scfg = service::Config::from_env();
  std::size_t ttl_s = static_cast<std::size_t>(scfg.ttl.count());
  std::string spill;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--port", scfg.port, "Port")->capture_default_str();
  serve->add_option("--host", scfg.host, "Bind address")->capture_default_str();
  serve->add_option("--max-upload", scfg.max_upload, "Upload limit in bytes")->capture_default_str();
  serve->add_option("--ttl", ttl_s, "Session TTL in seconds")->capture_default_str();
  serve->add_option("--beam", scfg.beam_width, "Default beam width")->capture_default_str();
  serve->add_option("--model", model, "Checkpoint for the neural backend");
  serve->add_option("--spill-dir", spill, "Directory for spilled tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kInput, "UsageError", e.what());
  }

  try {
    if (*ask) {
      auto x = read_table(table);
      AskOptions opt;
      opt.search.beam_width = beam;
      opt.max_depth = max_depth;
      std::unique_ptr<neural::NeuralDecomposer> nd;
      if (backend == "neural") {
        if (model.empty()) throw PreconditionError("--backend neural needs --model");
        nd = load_model(model);
        opt.backend = nd.get();
      }
      auto r = tabqa::ask(question, x, opt);
      auto j = to_json(r);
      if (!out.empty()) write_file(out, j.dump(2) + "\n");
      if (as_json) std::cout << j.dump(2) << '\n';
      else print_dashboard(r);
    } else if (*dec) {
      auto x = read_table(table);
      ResolveOptions ro;
      std::unique_ptr<neural::NeuralDecomposer> nd;
      if (backend == "neural") {
        if (model.empty()) throw PreconditionError("--backend neural needs --model");
        nd = load_model(model);
        ro.backend = nd.get();
      }
      auto tree = resolve(question, x, ro);
      if (as_json) std::cout << to_json(tree).dump(2) << '\n';
      else print_tree(tree);
    } else if (*facts) {
      auto x = read_table(table);
      SearchConfig cfg;
      cfg.beam_width = std::max(k, cfg.beam_width);
      auto found = answer(question, x, cfg);
      if (found.size() > k) found.resize(k);
      json arr = json::array();
      for (const auto& s : found) arr.push_back(to_json(s));
      if (as_json) {
        std::cout << arr.dump(2) << '\n';
      } else {
        for (const auto& s : found) {
          char score[32];
          std::snprintf(score, sizeof score, "%.6f", s.score);
          std::cout << score << "  " << canonical(s.fact) << '\n';
        }
      }
    } else if (*sug) {
      auto x = read_table(table);
      auto qs = suggestions(x, column.empty() ? std::nullopt : std::optional<std::string>(column));
      if (as_json) std::cout << json(qs).dump(2) << '\n';
      else
        for (const auto& q : qs) std::cout << q << '\n';
    } else if (*gen) {
      auto tables = read_tables(tables_dir);
      std::vector<const DataTable*> ptrs;
      for (const auto& t : tables) ptrs.push_back(&t);
      corpus::GenerateOptions opt;
      opt.seed = seed;
      opt.max_per_method = per_method;
      auto c = corpus::generate(ptrs, opt);
      write_file(out, corpus::to_jsonl(c));
      std::cout << "wrote " << c.entries.size() << " entries to " << out << " (type-1 "
                << c.header["counts"].value("type-1", 0) << ", type-2 " << c.header["counts"].value("type-2", 0)
                << ")\n";
    } else if (*val) {
      auto c = read_corpus(corpus_in);
      std::map<std::string, DataTable> tables;
      if (!tables_dir.empty())
        for (auto& t : read_tables(tables_dir)) tables.emplace(t.name(), std::move(t));
      std::size_t bad = 0, n = 0;
      for (const auto& e : c.entries) {
        ++n;
        std::vector<std::string> problems;
        if (corpus::validate_pair(e.complex_question, e.complex_question, ReferenceProvider()).accepted)
          problems.push_back("validate_pair accepts an exact copy");
        auto it = tables.find(e.table_id);
        if (it != tables.end()) {
          auto v = corpus::entry_violations(e, it->second);
          problems.insert(problems.end(), v.begin(), v.end());
        } else if (!tables.empty()) {
          problems.push_back("unknown table " + e.table_id);
        }
        for (const auto& p : problems) std::cerr << json{{"entry", n}, {"problem", p}}.dump() << '\n';
        bad += !problems.empty();
      }
      std::cout << n << " entries, " << bad << " invalid\n";
      if (bad) return fail(kInput, "InvalidCorpus", std::to_string(bad) + " invalid entries");
    } else if (*train) {
      std::vector<neural::TrainingPair> pairs;
      if (toy) pairs = neural::toy_corpus(seed);
      else if (!corpus_in.empty()) pairs = training_pairs(read_corpus(corpus_in));
      else throw PreconditionError("train needs --corpus or --toy");
      if (limit && pairs.size() > limit) pairs.resize(limit);
      json cj = config_path.empty() ? json::object() : json::parse(slurp(config_path));
      auto cfg = neural::config_from_json(cj);
      cfg.seed = seed;
      neural::TrainOptions topt;
      topt.epochs = epochs ? epochs : cj.value("epochs", topt.epochs);
      auto r = neural::train(pairs, cfg, topt);
      write_file(out, neural::to_json(r.state).dump() + "\n");
      write_file(loss_log.empty() ? out + ".loss.csv" : loss_log, neural::loss_csv(r.log));
      const auto& last = r.log.empty() ? neural::EpochLog{} : r.log.back();
      std::cout << "trained " << pairs.size() << " pairs for " << r.log.size() << " epochs; loss " << last.loss
                << ", token accuracy " << last.token_accuracy << '\n';
    } else if (*ev) {
      auto ref = read_corpus(corpus_in);
      std::vector<std::array<std::string, 2>> cand;
      if (!candidates.empty()) {
        auto c = read_corpus(candidates);
        if (c.entries.size() != ref.entries.size()) throw PreconditionError("candidate corpus size differs");
        for (const auto& e : c.entries) cand.push_back(e.sub_questions);
      } else if (!model.empty()) {
        auto nd = load_model(model);
        for (std::size_t i = 0; i < ref.entries.size() && (!limit || i < limit); ++i) {
          const auto& e = ref.entries[i];
          auto [a, b] = neural::decode_pair(nd->state(), e.input, corpus::method_class(e.method));
          cand.push_back({text::join(a, " "), text::join(b, " ")});
        }
      } else {
        throw PreconditionError("eval needs --model or --candidates");
      }
      double bleu = 0, meteor = 0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < cand.size() && (!limit || i < limit); ++i)
        for (int s = 0; s < 2; ++s) {
          const auto& c = cand[i][static_cast<std::size_t>(s)];
          const auto& r = ref.entries[i].sub_questions[static_cast<std::size_t>(s)];
          ++n;
          if (text::tokenize(c).empty()) continue;
          bleu += corpus::bleu(c, {r});
          meteor += corpus::meteor_lite(c, r);
        }
      if (n == 0) throw EmptyInput("nothing to evaluate");
      char line[128];
      std::snprintf(line, sizeof line, "BLEU %.4f\nmeteor_lite %.4f\nsub-questions %zu\n", bleu / static_cast<double>(n),
                    meteor / static_cast<double>(n), n);
      std::cout << line;
    } else if (*serve) {
      scfg.ttl = std::chrono::seconds(ttl_s);
      if (!spill.empty()) scfg.spill_dir = spill;
      service::Service svc(scfg);
      if (!model.empty()) svc.set_neural(std::shared_ptr<const neural::NeuralDecomposer>(load_model(model)));
      httplib::Server srv;
      service::bind(srv, svc);
      std::cout << "listening on " << scfg.host << ':' << scfg.port << std::endl;
      if (!srv.listen(scfg.host, scfg.port)) return fail(kInput, "BindError", "cannot listen on port " + std::to_string(scfg.port));
    }
  } catch (const Unanswerable& e) {
    return fail(kUnanswerable, e.kind(), e.what(), {{"reasons", e.reasons()}});
  } catch (const ParseError& e) {
    return fail(kInput, e.kind(), e.what(), {{"row", e.row()}});
  } catch (const Error& e) {
    return fail(exit_code(e), e.kind(), e.what());
  } catch (const json::exception& e) {
    return fail(kInput, "JsonError", e.what());
  } catch (const std::exception& e) {
    return fail(kInternal, "Internal", e.what());
  }
  return kOk;
}
