// Copyright 2026 The fbmine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// fbmine: command-line front end for the feedback mining pipeline.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error,
// 3 partial failure (details in the skip ledger next to the output).

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fbmine/annotate_server.hpp"
#include "fbmine/fbmine.hpp"

namespace {

using namespace fbmine;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string cache_dir;
  std::optional<std::size_t> concurrency;
};

// Precedence: defaults < config file < flags < environment.
RunConfig load_config(const GlobalOptions& g) {
  RunConfig config;
  if (!g.config_path.empty()) apply_config_file(config, g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kConfigError, "--set expects KEY=VALUE, got '" + kv + "'");
    apply_config_value(config, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  if (g.seed) config.seed = *g.seed;
  if (!g.cache_dir.empty()) config.cache_dir = g.cache_dir;
  if (g.concurrency) config.concurrency = *g.concurrency;
  apply_environment(config);
  if (config.concurrency == 0) fail(ErrorCode::kConfigError, "concurrency must be at least 1");
  return config;
}

void require_endpoint(const RunConfig& config, std::string_view name, const std::string& url) {
  if (url.empty()) fail(ErrorCode::kConfigError, std::string(name) + ".base_url is not configured");
  if (!is_mock_url(url) && !config.api_key) {
    fail(ErrorCode::kConfigError, "FF_API_KEY is not set (needed for " + std::string(name) + ")");
  }
}

std::shared_ptr<Gateway> make_gateway(const RunConfig& config) {
  Gateway::Options options;
  options.cache = std::make_shared<ResponseCache>(config.cache_dir);
  options.max_in_flight = config.concurrency;
  options.api_key = config.api_key;
  return std::make_shared<Gateway>(std::move(options));
}

std::string sidecar_path(const std::string& out) { return out + ".meta.json"; }

// No timestamps, so reruns produce identical sidecars.
void write_meta(const std::string& out, const std::string& command, const RunConfig& config, ojson extra = {}) {
  ojson meta;
  meta["command"] = command;
  meta["version"] = FBMINE_VERSION;
  meta["seed"] = config.seed;
  meta["config_hash"] = config.hash();
  meta["config"] = config.to_json();
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  }
  write_file(sidecar_path(out), meta.dump(2) + "\n");
}

void write_skips(const std::string& out, const std::vector<SkipEntry>& skips) {
  write_file(out + ".skips.jsonl", skip_ledger_jsonl(skips));
}

CorpusFormat corpus_format(const std::string& name) {
  const auto f = parse_corpus_format(name);
  if (!f) fail(ErrorCode::kConfigError, "unknown format '" + name + "'");
  return *f;
}

LabelSet label_set(const std::string& name) {
  const auto s = parse_label_set(name);
  if (!s) fail(ErrorCode::kConfigError, "unknown label set '" + name + "'");
  return *s;
}

// Exit code for a batch: total failure only when nothing succeeded.
int batch_status(std::size_t succeeded, std::size_t failed) {
  if (failed == 0) return kExitOk;
  return succeeded == 0 ? kExitRuntime : kExitPartial;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string input, format = "canonical", out, language;
  std::size_t min_user_turns = 1;
  std::optional<std::size_t> max_records;
};

int cmd_ingest(const IngestArgs& a, const RunConfig& config) {
  StreamFilters filters;
  filters.min_user_turns = a.min_user_turns;
  filters.max_records = a.max_records;
  if (!a.language.empty()) filters.language = a.language;
  CorpusReader reader(a.input, corpus_format(a.format), filters);
  auto out = open_for_write(a.out);
  while (auto conv = reader.next()) out << to_canonical_line(*conv);
  out.close();
  if (!out) fail(ErrorCode::kIoError, "short write to '" + a.out + "'");
  const ojson stats = to_json(reader.stats());
  std::cout << stats.dump(2) << "\n";
  write_meta(a.out, "ingest", config, ojson{{"input", a.input}, {"format", a.format}, {"stats", stats}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
  std::string input, out, mode = "sparse", detector = "rule", format = "canonical";
};

int cmd_detect(const DetectArgs& a, const RunConfig& config) {
  const auto mode = parse_detection_mode(a.mode);
  if (!mode) fail(ErrorCode::kConfigError, "unknown mode '" + a.mode + "'");
  if (a.detector != "llm" && a.detector != "rule") fail(ErrorCode::kConfigError, "unknown detector '" + a.detector + "'");
  std::unique_ptr<GeneratorClient> model;
  if (a.detector == "llm") {
    require_endpoint(config, "judge", config.judge.base_url);
    model = std::make_unique<GeneratorClient>(config.judge, make_gateway(config));
  }

  const auto corpus = read_corpus(a.input, corpus_format(a.format));
  std::vector<SkipEntry> skips;
  std::vector<const Conversation*> eligible;
  for (const auto& conv : corpus) {
    if (conv.user_turn_count() < 2) {
      skips.push_back({conv.id(), "eligibility", "fewer than two user turns; nothing to label"});
    } else {
      eligible.push_back(&conv);
    }
  }

  auto outcomes = parallel_map(
      eligible,
      [&](const Conversation* conv) {
        return model ? detect(*conv, *model, *mode) : detect_rule_based(*conv);
      },
      model ? config.concurrency : 1);

  std::string labels;
  std::size_t ok = 0, failed = 0;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    if (outcomes[i].ok()) {
      labels += to_line(*outcomes[i].value);
      ++ok;
    } else {
      skips.push_back({eligible[i]->id(), "detect", outcomes[i].error});
      ++failed;
    }
  }
  write_file(a.out, labels);
  write_skips(a.out, skips);
  write_meta(a.out, "detect", config,
             ojson{{"input", a.input},
                   {"mode", a.mode},
                   {"detector", a.detector},
                   {"prompt_version", std::string(kDetectionPromptVersion)},
                   {"labelled", ok},
                   {"failed", failed},
                   {"skipped", skips.size() - failed}});
  std::cerr << "labelled " << ok << ", failed " << failed << ", skipped " << (skips.size() - failed) << "\n";
  return batch_status(ok, failed);
}

// ---------------------------------------------------------------------------
// eval-detect

struct EvalArgs {
  std::string gold, pred, set = "binary", out;
};

int cmd_eval_detect(const EvalArgs& a, const RunConfig& config) {
  const LabelSet set = label_set(a.set);
  const ClassReport report = classification_report(read_label_file(a.gold), read_label_file(a.pred), set);
  std::cout << format_table(report);
  if (!a.out.empty()) {
    write_file(a.out, to_json(report).dump(2) + "\n");
    write_meta(a.out, "eval-detect", config, ojson{{"gold", a.gold}, {"pred", a.pred}, {"label_set", a.set}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::string input, labels, out, set = "fine", scorer = "endpoint", raw_csv, field = "response";
  std::size_t k = 100;
  double constant = 0.0;
  bool judge = false;
};

// Without a label file the rule detector labels the corpus, as build splits does.
std::map<std::string, LabelVector> load_label_index(const std::string& path, const std::vector<Conversation>& corpus) {
  if (!path.empty()) return index_by_id(read_label_file(path));
  std::map<std::string, LabelVector> out;
  for (const auto& c : corpus) {
    if (c.user_turn_count() >= 2) out.insert_or_assign(c.id(), detect_rule_based(c));
  }
  return out;
}

void emit(const std::string& out, const ojson& body, const std::string& command, const RunConfig& config,
          ojson extra) {
  if (out.empty()) {
    std::cout << body.dump(2) << "\n";
    return;
  }
  write_file(out, body.dump(2) + "\n");
  write_meta(out, command, config, std::move(extra));
}

ojson group_json(const GroupSample& g) {
  return ojson{{"population", g.population}, {"sampled", g.utterances.size()}, {"insufficient", g.insufficient}};
}

int cmd_analyze_turns(const AnalyzeArgs& a, const RunConfig& config) {
  if (a.labels.empty()) fail(ErrorCode::kConfigError, "--labels is required");
  const auto h = turn_histogram(read_label_file(a.labels), label_set(a.set));
  emit(a.out, to_json(h), "analyze turns", config, ojson{{"labels", a.labels}});
  return kExitOk;
}

int cmd_analyze_toxicity(const AnalyzeArgs& a, const RunConfig& config) {
  std::unique_ptr<ScalarScorer> scorer;
  if (a.scorer == "constant") {
    scorer = std::make_unique<ConstantScorer>(a.constant);
  } else if (a.scorer == "length") {
    scorer = std::make_unique<NormalizedLengthScorer>();
  } else if (a.scorer == "endpoint") {
    require_endpoint(config, "toxicity", config.toxicity.base_url);
    scorer = std::make_unique<HttpScalarScorer>(config.toxicity, make_gateway(config));
  } else {
    fail(ErrorCode::kConfigError, "unknown scorer '" + a.scorer + "'");
  }
  const auto corpus = read_corpus(a.input);
  const auto groups = sample_groups(corpus, load_label_index(a.labels, corpus), a.k, config.seed);
  const auto summary = toxicity_summary(groups, *scorer, config.concurrency);
  ojson body;
  std::size_t scored = 0, failed = 0;
  for (const GroupSample* g : groups.all()) {
    ojson row = group_json(*g);
    row["scores"] = to_json(summary.groups.at(g->group));
    scored += summary.groups.at(g->group).scored;
    failed += summary.groups.at(g->group).failed;
    body[g->group] = std::move(row);
  }
  if (!a.raw_csv.empty()) write_file(a.raw_csv, raw_scores_csv(summary.raw));
  emit(a.out, body, "analyze toxicity", config, ojson{{"input", a.input}, {"k", a.k}, {"scorer", a.scorer}});
  return batch_status(scored, failed);
}

int cmd_analyze_quality(const AnalyzeArgs& a, const RunConfig& config) {
  require_endpoint(config, "judge", config.judge.base_url);
  GeneratorClient judge(config.judge, make_gateway(config));
  const auto corpus = read_corpus(a.input);
  const auto groups = sample_groups(corpus, load_label_index(a.labels, corpus), a.k, config.seed);
  ojson body;
  std::size_t ok = 0, failed = 0;
  for (const GroupSample* g : groups.all()) {
    auto outcomes = parallel_map(
        g->utterances, [&](const Utterance& u) { return score_prompt_quality(u.text, judge); }, config.concurrency);
    std::array<double, kQualityAspects.size()> sums{};
    std::size_t n = 0;
    for (const auto& o : outcomes) {
      if (!o.ok()) {
        ++failed;
        continue;
      }
      for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += o.value->aspects[i];
      ++n;
    }
    ok += n;
    ojson row = group_json(*g);
    row["scored"] = n;
    ojson aspects = ojson::object();
    double total = 0;
    for (std::size_t i = 0; i < sums.size(); ++i) {
      aspects[std::string(kQualityAspects[i])] = n ? ojson(sums[i] / n) : ojson(nullptr);
      total += sums[i];
    }
    row["aspects"] = std::move(aspects);
    row["mean"] = n ? ojson(total / (n * static_cast<double>(sums.size()))) : ojson(nullptr);
    body[g->group] = std::move(row);
  }
  emit(a.out, body, "analyze quality", config,
       ojson{{"input", a.input}, {"k", a.k}, {"prompt_version", std::string(kQualityPromptVersion)}});
  return batch_status(ok, failed);
}

int cmd_analyze_refusal(const AnalyzeArgs& a, const RunConfig& config) {
  std::vector<std::string> responses;
  for (const json& obj : read_jsonl(a.input)) {
    const auto it = obj.find(a.field);
    if (it == obj.end() || !it->is_string()) {
      fail(ErrorCode::kMalformedJson, "record lacks string field '" + a.field + "'");
    }
    responses.push_back(it->get<std::string>());
  }
  RefusalResult r;
  if (a.judge) {
    require_endpoint(config, "judge", config.judge.base_url);
    GeneratorClient judge(config.judge, make_gateway(config));
    r = refusal_rate(responses, JudgeRefusalPredicate(judge));
  } else {
    r = refusal_rate(responses);
  }
  ojson body{{"total", r.total}, {"refusals", r.refusals}, {"rate", r.rate ? ojson(*r.rate) : ojson(nullptr)}};
  if (!r.rate) body["warning"] = "no responses";
  emit(a.out, body, "analyze refusal", config,
       ojson{{"input", a.input}, {"predicate", a.judge ? "judge" : "phrase-list"}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// build

struct BuildArgs {
  std::string input, labels, splits, regen, out, method = "scratch", variants = "scratch,semantic";
  std::string split_filter;
  std::size_t k = 1000;
};

int cmd_build_splits(const BuildArgs& a, const RunConfig& config) {
  std::vector<SkipEntry> skips;
  FeedbackSplits splits;
  CorpusReader reader(a.input, CorpusFormat::kCanonical);
  const auto next = [&] { return reader.next(); };
  if (a.labels.empty()) {
    splits = build_feedback_splits(next, [](const Conversation& c) { return detect_rule_based(c); }, a.k,
                                   config.seed, &skips, a.input);
  } else {
    const auto table = index_by_id(read_label_file(a.labels));
    splits = build_feedback_splits(next, labels_from(table), a.k, config.seed, &skips, a.input);
  }
  write_file(a.out, splits_jsonl(splits));
  write_skips(a.out, skips);
  write_meta(a.out, "build splits", config,
             ojson{{"input", a.input},
                   {"labels", a.labels.empty() ? ojson("rule") : ojson(a.labels)},
                   {"k", a.k},
                   {"sizes", ojson{{"neg", splits.neg.size()}, {"pos", splits.pos.size()}, {"rand", splits.rand.size()}}}});
  std::cout << "neg " << splits.neg.size() << "\npos " << splits.pos.size() << "\nrand " << splits.rand.size() << "\n";
  return skips.empty() ? kExitOk : kExitPartial;
}

int cmd_build_regen(const BuildArgs& a, const RunConfig& config) {
  RegenOptions options;
  options.scratch = a.variants.find("scratch") != std::string::npos;
  options.semantic = a.variants.find("semantic") != std::string::npos;
  options.workers = config.concurrency;
  require_endpoint(config, "generator", config.generator.base_url);
  GeneratorClient model(config.generator, make_gateway(config));
  auto rows = read_splits(a.splits);
  if (!a.split_filter.empty()) {
    std::erase_if(rows, [&](const SplitRow& r) { return r.split != a.split_filter; });
  }
  std::vector<SkipEntry> skips;
  const auto records = regenerate_all(rows, model, options, &skips);
  write_file(a.out, regen_records_jsonl(records));
  write_skips(a.out, skips);
  write_meta(a.out, "build regen", config,
             ojson{{"splits", a.splits},
                   {"variants", a.variants},
                   {"template_version", std::string(kRegenTemplateVersion)},
                   {"prompt_hash", regen_prompt_hash()},
                   {"generator_id", model.id()}});
  return batch_status(records.size(), skips.size());
}

int cmd_build_export_sft(const BuildArgs& a, const RunConfig& config) {
  const auto variant = parse_regen_variant(a.method);
  if (!variant) fail(ErrorCode::kConfigError, "unknown method '" + a.method + "'");
  write_file(a.out, export_sft(read_regen_records(a.regen), *variant));
  write_meta(a.out, "build export-sft", config, ojson{{"regen", a.regen}, {"method", a.method}});
  return kExitOk;
}

int cmd_build_export_kto(const BuildArgs& a, const RunConfig& config) {
  std::vector<SubConversation> pos, neg;
  for (const auto& row : read_splits(a.splits)) {
    if (row.split == "pos") pos.push_back(row.sub);
    if (row.split == "neg") neg.push_back(row.sub);
  }
  const KtoExport kto = export_kto(pos, neg);
  for (const auto& w : kto.warnings) std::cerr << "warning: " << w << "\n";
  write_file(a.out, kto.jsonl);
  write_meta(a.out, "build export-kto", config,
             ojson{{"splits", a.splits}, {"positive", pos.size()}, {"negative", neg.size()}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// winrate

struct WinrateArgs {
  std::string records, spec, setting = "without-fb", tie = "split", out;
  bool check_antisymmetry = false;
};

int cmd_winrate(const WinrateArgs& a, const RunConfig& config) {
  const auto setting = parse_eval_setting(a.setting);
  if (!setting) fail(ErrorCode::kConfigError, "unknown setting '" + a.setting + "'");
  const auto tie = parse_tie_policy(a.tie);
  if (!tie) fail(ErrorCode::kConfigError, "unknown tie policy '" + a.tie + "'");
  const auto specs = parse_comparison_specs(read_file(a.spec), *setting);
  if (specs.empty()) fail(ErrorCode::kConfigError, "spec file has no comparisons");
  require_endpoint(config, "reward", config.reward.base_url);
  RewardClient rm(config.reward, make_gateway(config));
  const auto records = read_regen_records(a.records);
  const WinrateReport report = compare_methods(records, specs, rm, *tie, config.concurrency);
  std::cout << format_table(report);

  ojson body = to_json(report);
  bool antisymmetric = true;
  if (a.check_antisymmetry) {
    std::vector<ComparisonSpec> reversed;
    for (const auto& s : specs) reversed.push_back({s.method_b, s.method_a, s.setting});
    const WinrateReport back = compare_methods(records, reversed, rm, *tie, config.concurrency);
    ojson checks = ojson::array();
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& f = report.rows[i].winrate_pct;
      const auto& b = back.rows[i].winrate_pct;
      ojson c{{"method_a", specs[i].method_a}, {"method_b", specs[i].method_b}};
      if (f && b) {
        // Exact under the split policy; exclude keeps the identity too because
        // ties drop out of both directions.
        const bool holds = std::abs(*f + *b - 100.0) < 1e-9;
        c["sum"] = *f + *b;
        c["holds"] = holds;
        antisymmetric = antisymmetric && holds;
      } else {
        c["holds"] = nullptr;
      }
      checks.push_back(std::move(c));
    }
    body["antisymmetry"] = std::move(checks);
    std::cout << "antisymmetry " << (antisymmetric ? "holds" : "VIOLATED") << "\n";
  }
  if (!a.out.empty()) {
    write_file(a.out, body.dump(2) + "\n");
    write_skips(a.out, report.failures);
    write_meta(a.out, "winrate", config,
               ojson{{"records", a.records}, {"spec", a.spec}, {"setting", a.setting}, {"tie", a.tie}});
  }
  if (!antisymmetric) return kExitRuntime;
  std::size_t ok = 0, bad = 0;
  for (const auto& row : report.rows) (row.winrate_pct ? ok : bad) += 1;
  if (!report.failures.empty() && bad == 0) bad = 1;
  return batch_status(ok, bad);
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
  std::string host = "127.0.0.1", store_dir = "store", ui_dir, import, import_labels, import_annotator, primary;
  int port = 8080;
  std::size_t required_annotators = 1;
};

AnnotationServer* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const ServeArgs& a, const RunConfig&) {
  AnnotationStore::Options options;
  if (!a.primary.empty()) options.primary_annotator = a.primary;
  AnnotationStore store(a.store_dir, options);
  if (!a.import.empty()) {
    for (const auto& conv : read_corpus(a.import)) {
      if (conv.user_turn_count() >= 2) store.add_task(conv, a.required_annotators);
    }
  }
  if (!a.import_labels.empty()) {
    if (a.import_annotator.empty()) fail(ErrorCode::kConfigError, "--import-labels needs --annotator");
    store.import_labels(read_label_file(a.import_labels), a.import_annotator);
  }
  std::optional<std::filesystem::path> ui;
  if (!a.ui_dir.empty()) ui = a.ui_dir;
  AnnotationServer server(store, ui);
  const int port = server.bind(a.host, a.port);
  g_server = &server;
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  std::cout << "listening on " << a.host << ":" << port << std::endl;
  server.serve();
  g_server = nullptr;
  return kExitOk;
}

// Runs fn, mapping library errors onto exit codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfigError ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mine implicit user feedback from conversation logs.", "fbmine"};
  app.set_version_flag("--version", std::string(FBMINE_VERSION));
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "Key-value config file")->check(CLI::ExistingFile);
  app.add_option("--set", global.overrides, "Override a config key (KEY=VALUE), repeatable");
  app.add_option("--seed", global.seed, "Random seed (default 42)");
  app.add_option("--cache-dir", global.cache_dir, "Response cache directory");
  app.add_option("--concurrency", global.concurrency, "Maximum in-flight model calls");

  std::function<int(const RunConfig&)> action;

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Normalize a raw corpus to canonical JSONL");
  c_ingest->add_option("--input", ingest.input)->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--format", ingest.format)->check(CLI::IsMember({"canonical", "lmsys_raw", "wildchat_raw"}));
  c_ingest->add_option("--out", ingest.out)->required();
  c_ingest->add_option("--min-user-turns", ingest.min_user_turns);
  c_ingest->add_option("--max-records", ingest.max_records);
  c_ingest->add_option("--language", ingest.language);
  c_ingest->callback([&] { action = [&](const RunConfig& c) { return cmd_ingest(ingest, c); }; });

  DetectArgs det;
  auto* c_detect = app.add_subcommand("detect", "Label user turns with feedback patterns");
  c_detect->add_option("--input", det.input)->required()->check(CLI::ExistingFile);
  c_detect->add_option("--out", det.out)->required();
  c_detect->add_option("--mode", det.mode)->check(CLI::IsMember({"sparse", "dense"}));
  c_detect->add_option("--detector", det.detector)->check(CLI::IsMember({"llm", "rule"}));
  c_detect->add_option("--format", det.format)->check(CLI::IsMember({"canonical", "lmsys_raw", "wildchat_raw"}));
  c_detect->callback([&] { action = [&](const RunConfig& c) { return cmd_detect(det, c); }; });

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval-detect", "Score predicted labels against gold labels");
  c_eval->add_option("--gold", eval.gold)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--pred", eval.pred)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--label-set", eval.set)->check(CLI::IsMember({"binary", "three", "fine"}));
  c_eval->add_option("--out", eval.out);
  c_eval->callback([&] { action = [&](const RunConfig& c) { return cmd_eval_detect(eval, c); }; });

  AnalyzeArgs an;
  auto* c_analyze = app.add_subcommand("analyze", "Corpus analyses");
  c_analyze->require_subcommand(1);
  auto* a_turns = c_analyze->add_subcommand("turns", "Feedback counts by user-turn position");
  a_turns->add_option("--labels", an.labels)->required()->check(CLI::ExistingFile);
  a_turns->add_option("--label-set", an.set)->check(CLI::IsMember({"binary", "three", "fine"}));
  a_turns->add_option("--out", an.out);
  a_turns->callback([&] { action = [&](const RunConfig& c) { return cmd_analyze_turns(an, c); }; });

  auto* a_tox = c_analyze->add_subcommand("toxicity", "Toxicity of sampled user turns per group");
  a_tox->add_option("--input", an.input)->required()->check(CLI::ExistingFile);
  a_tox->add_option("--labels", an.labels)->check(CLI::ExistingFile);
  a_tox->add_option("--k", an.k);
  a_tox->add_option("--scorer", an.scorer)->check(CLI::IsMember({"endpoint", "length", "constant"}));
  a_tox->add_option("--constant", an.constant);
  a_tox->add_option("--raw-csv", an.raw_csv);
  a_tox->add_option("--out", an.out);
  a_tox->callback([&] { action = [&](const RunConfig& c) { return cmd_analyze_toxicity(an, c); }; });

  auto* a_quality = c_analyze->add_subcommand("quality", "Prompt quality rubric per group");
  a_quality->add_option("--input", an.input)->required()->check(CLI::ExistingFile);
  a_quality->add_option("--labels", an.labels)->check(CLI::ExistingFile);
  a_quality->add_option("--k", an.k);
  a_quality->add_option("--out", an.out);
  a_quality->callback([&] { action = [&](const RunConfig& c) { return cmd_analyze_quality(an, c); }; });

  auto* a_refusal = c_analyze->add_subcommand("refusal", "Refusal rate of responses");
  a_refusal->add_option("--input", an.input)->required()->check(CLI::ExistingFile);
  a_refusal->add_option("--field", an.field, "JSON field holding the response");
  a_refusal->add_flag("--judge", an.judge, "Ask the judge model instead of matching phrases");
  a_refusal->add_option("--out", an.out);
  a_refusal->callback([&] { action = [&](const RunConfig& c) { return cmd_analyze_refusal(an, c); }; });

  BuildArgs b;
  auto* c_build = app.add_subcommand("build", "Build feedback-derived datasets");
  c_build->require_subcommand(1);
  auto* b_splits = c_build->add_subcommand("splits", "Select neg/pos/rand sub-conversations");
  b_splits->add_option("--input", b.input)->required()->check(CLI::ExistingFile);
  b_splits->add_option("--labels", b.labels, "Label file; rule detector when omitted")->check(CLI::ExistingFile);
  b_splits->add_option("--k", b.k);
  b_splits->add_option("--out", b.out)->required();
  b_splits->callback([&] { action = [&](const RunConfig& c) { return cmd_build_splits(b, c); }; });

  auto* b_regen = c_build->add_subcommand("regen", "Regenerate answers for split rows");
  b_regen->add_option("--splits", b.splits)->required()->check(CLI::ExistingFile);
  b_regen->add_option("--split", b.split_filter)->check(CLI::IsMember({"neg", "pos", "rand"}));
  b_regen->add_option("--variants", b.variants, "scratch, semantic or both");
  b_regen->add_option("--out", b.out)->required();
  b_regen->callback([&] { action = [&](const RunConfig& c) { return cmd_build_regen(b, c); }; });

  auto* b_sft = c_build->add_subcommand("export-sft", "Export regenerated answers as SFT JSONL");
  b_sft->add_option("--regen", b.regen)->required()->check(CLI::ExistingFile);
  b_sft->add_option("--method", b.method)->check(CLI::IsMember({"scratch", "semantic"}));
  b_sft->add_option("--out", b.out)->required();
  b_sft->callback([&] { action = [&](const RunConfig& c) { return cmd_build_export_sft(b, c); }; });

  auto* b_kto = c_build->add_subcommand("export-kto", "Export pos/neg splits as KTO JSONL");
  b_kto->add_option("--splits", b.splits)->required()->check(CLI::ExistingFile);
  b_kto->add_option("--out", b.out)->required();
  b_kto->callback([&] { action = [&](const RunConfig& c) { return cmd_build_export_kto(b, c); }; });

  WinrateArgs w;
  auto* c_win = app.add_subcommand("winrate", "Reward-model winrates between answer methods");
  c_win->add_option("--records", w.records)->required()->check(CLI::ExistingFile);
  c_win->add_option("--spec", w.spec)->required()->check(CLI::ExistingFile);
  c_win->add_option("--setting", w.setting)->check(CLI::IsMember({"with-fb", "without-fb"}));
  c_win->add_option("--tie", w.tie)->check(CLI::IsMember({"split", "exclude"}));
  c_win->add_flag("--check-antisymmetry", w.check_antisymmetry);
  c_win->add_option("--out", w.out);
  c_win->callback([&] { action = [&](const RunConfig& c) { return cmd_winrate(w, c); }; });

  ServeArgs s;
  auto* c_serve = app.add_subcommand("serve", "Run the annotation service");
  c_serve->add_option("--port", s.port, "0 picks a free port");
  c_serve->add_option("--host", s.host);
  c_serve->add_option("--store-dir", s.store_dir);
  c_serve->add_option("--ui-dir", s.ui_dir);
  c_serve->add_option("--import", s.import, "Corpus whose conversations become tasks")->check(CLI::ExistingFile);
  c_serve->add_option("--import-labels", s.import_labels)->check(CLI::ExistingFile);
  c_serve->add_option("--annotator", s.import_annotator, "Annotator id for --import-labels");
  c_serve->add_option("--primary", s.primary, "Annotator exported when several completed a task");
  c_serve->add_option("--required-annotators", s.required_annotators);
  c_serve->callback([&] { action = [&](const RunConfig& c) { return cmd_serve(s, c); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  return guarded([&] {
    const RunConfig config = load_config(global);
    return action(config);
  });
}
