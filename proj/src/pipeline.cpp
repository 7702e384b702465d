#include "megclass/pipeline.hpp"

#include "megclass/binary_io.hpp"
#include "megclass/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#ifndef MEGCLASS_TOOLS_DIR
#define MEGCLASS_TOOLS_DIR "tools"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace megclass {

PipelineOptions pipeline_options(const RunConfig& config, int resolved_iterations) {
  PipelineOptions o;
  o.keyword_count = config.keyword_count;
  o.feedback = config.feedback_config(resolved_iterations);
  o.delta = config.delta;
  o.classifier.epochs = config.classifier_epochs;
  o.classifier.lr = config.classifier_lr;
  o.zero_inclusion = config.macro_zero_inclusion;
  o.threads = config.threads;
  return o;
}

namespace {

bool any_labeled(const Selection& sel, const GoldLabels& gold) {
  for (const auto& [cls, ids] : sel) {
    for (const auto& id : ids) {
      if (gold.contains(id)) return true;
    }
  }
  return false;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<Document>& docs, const std::vector<ClassSpec>& classes,
                            const std::vector<DocTokens>& tokens, const StaticWordTable& table,
                            const GoldLabels* gold, const PipelineOptions& options,
                            const IterationObserver& observer) {
  if (docs.size() != tokens.size()) throw DataError("documents and token matrices misaligned");
  const int num_classes = static_cast<int>(classes.size());
  PipelineResult result;
  result.initial_models = expand_keywords(classes, table, options.keyword_count);
  for (const auto& m : result.initial_models) {
    spdlog::info("class '{}': {} keywords", m.name, m.keywords.size());
  }
  result.doc_ids.reserve(docs.size());
  for (const auto& d : docs) result.doc_ids.push_back(d.doc_id);
  result.sentences = sentence_matrices(tokens, class_vectors(result.initial_models), options.threads);

  IterationObserver wrapped = [&](const IterationResult& it) {
    spdlog::info("iteration {}: final epoch loss {:.6f}", it.iteration,
                 it.epoch_losses.empty() ? 0.0 : it.epoch_losses.back());
    if (gold) {
      IterationMetrics m;
      m.iteration = it.iteration;
      m.reduced = f1_scores(*gold, restrict_to(to_predictions(it.scores), *gold), num_classes,
                            options.zero_inclusion, "iteration-" + std::to_string(it.iteration));
      m.raw = f1_scores(*gold, restrict_to(to_predictions(it.raw_scores), *gold), num_classes,
                        options.zero_inclusion, "iteration-" + std::to_string(it.iteration) + "-raw");
      if (any_labeled(it.selection, *gold)) {
        m.topk = topk_accuracy(it.scores, *gold, options.feedback.k, num_classes, options.zero_inclusion);
      }
      m.final_loss = it.epoch_losses.empty() ? 0.0 : it.epoch_losses.back();
      spdlog::info("iteration {}: micro-F1 {:.4f} macro-F1 {:.4f}", it.iteration, m.reduced.micro_f1,
                   m.reduced.macro_f1);
      result.metrics.push_back(std::move(m));
    }
    if (observer) observer(it);
  };

  if (gold) {
    // Placeholder for the initial ensemble; filled once the targets exist.
    result.metrics.push_back({});
  }
  result.feedback = run_iterations(result.doc_ids, result.sentences, result.initial_models, options.feedback,
                                   wrapped);
  if (gold) {
    IterationMetrics& init = result.metrics.front();
    init.iteration = 0;
    init.reduced = f1_scores(*gold, restrict_to(argmax_predictions(result.feedback.initial_targets), *gold),
                             num_classes, options.zero_inclusion, "MEG-Init");
  }

  result.pseudo_set = build_pseudo_dataset(result.feedback.final_scores(), docs, options.delta, num_classes);
  if (options.train_classifier) {
    auto features = std::make_shared<const MeanPooledFeatures>(docs, tokens);
    LogisticRegressionTrainer trainer(features, options.classifier);
    result.classifier_predictions = train_and_label(trainer, result.pseudo_set, docs, num_classes);
    if (gold) {
      result.classifier_report = f1_scores(*gold, restrict_to(result.classifier_predictions, *gold), num_classes,
                                           options.zero_inclusion, "final-classifier");
    }
  }
  return result;
}

RunDirLock::RunDirLock(const fs::path& run_dir) {
  fs::create_directories(run_dir);
  const auto path = run_dir / ".lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error("cannot open lock file " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error("run directory " + run_dir.string() + " is in use by another megclass process");
  }
}

RunDirLock::~RunDirLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

namespace {

fs::path stamp_path(const RunConfig& c, const std::string& stage) { return fs::path(c.run_dir) / "stages" / (stage + ".json"); }

void write_stamp(const RunConfig& c, const std::string& stage, std::uint64_t hash) {
  fs::create_directories(fs::path(c.run_dir) / "stages");
  const json j = {{"stage", stage}, {"hash", hex64(hash)}};
  write_file_atomic(stamp_path(c, stage), j.dump() + "\n");
}

std::optional<std::string> read_stamp(const RunConfig& c, const std::string& stage) {
  const auto p = stamp_path(c, stage);
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file(p)).at("hash").get<std::string>();
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void require_stage(const RunConfig& c, const std::string& stage, std::uint64_t expected) {
  const auto stamp = read_stamp(c, stage);
  if (!stamp) throw PrerequisiteError("no `" + stage + "` output in " + c.run_dir + "; run `" + stage + "` first");
  if (*stamp != hex64(expected)) {
    throw PrerequisiteError("`" + stage + "` output in " + c.run_dir +
                            " was produced from different inputs or settings; run `" + stage + "` again");
  }
}

void require_paths(const RunConfig& c, std::initializer_list<std::pair<const char*, const std::string*>> keys) {
  for (const auto& [name, value] : keys) {
    if (value->empty()) throw ConfigError(std::string("config key '") + name + "' is required");
  }
  (void)c;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(1) + "\n"); }

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  write_file_atomic(path, out);
}

struct Prepared {
  std::vector<Document> docs;
  std::vector<ClassSpec> classes;
  std::optional<GoldLabels> gold;
};

Prepared load_prepared(const RunConfig& c) {
  const fs::path dir(c.run_dir);
  Prepared p;
  p.docs = read_segmented_corpus(dir / "corpus.jsonl");
  const json names = json::parse(read_file(dir / "classes.json"));
  p.classes = make_classes(names.get<std::vector<std::string>>());
  if (fs::exists(dir / "labels.json")) {
    p.gold = json::parse(read_file(dir / "labels.json")).get<GoldLabels>();
  }
  return p;
}

struct Embedded {
  std::vector<DocTokens> tokens;
  StaticWordTable table;
};

Embedded load_embedded(const RunConfig& c, const std::vector<Document>& docs) {
  const fs::path dir(c.run_dir);
  for (const char* f : {"tokens.bin", "static.bin"}) {
    if (!fs::exists(dir / f)) throw PrerequisiteError(std::string("missing ") + f + " in " + c.run_dir + "; run `embed` first");
  }
  const std::uint64_t fp = corpus_fingerprint(docs);
  Embedded e;
  e.tokens = read_token_cache(dir / "tokens.bin", fp);
  e.table = read_static_cache(dir / "static.bin", fp);
  return e;
}

bool any_phrase(const std::vector<ClassSpec>& classes) {
  return std::any_of(classes.begin(), classes.end(), [](const ClassSpec& c) { return c.is_phrase(); });
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') out += "'\\''";
    else out += ch;
  }
  return out + "'";
}

PrecomputedProvider encoder_provider(const RunConfig& c) {
  const std::string model = c.provider.substr(3);
  const fs::path out = fs::path(c.run_dir) / "encoder";
  const std::string script = c.encoder_script.empty() ? std::string(MEGCLASS_TOOLS_DIR) + "/hf_encode.py" : c.encoder_script;
  if (!fs::exists(script)) throw PrerequisiteError("encoder script not found: " + script);
  const std::string cmd = shell_quote(c.python) + " " + shell_quote(script) + " --corpus " +
                          shell_quote((fs::path(c.run_dir) / "corpus.jsonl").string()) + " --model " +
                          shell_quote(model) + " --layer " + std::to_string(c.encoder_layer) + " --out " +
                          shell_quote(out.string());
  spdlog::info("running encoder: {}", cmd);
  const int status = std::system(cmd.c_str());
  if (status != 0) throw ProviderError("", -1, "encoder script failed with status " + std::to_string(status));
  return PrecomputedProvider::load(out);
}

json scores_row(const ScoredDoc& s, const ScoredDoc& raw, bool selected) {
  return {{"id", s.doc_id},
          {"pseudo_label", s.pseudo_label},
          {"confidence", s.confidence},
          {"raw_label", raw.pseudo_label},
          {"raw_confidence", raw.confidence},
          {"selected", selected}};
}

void write_scores(const fs::path& path, const IterationResult& it) {
  std::set<std::string> selected;
  for (const auto& [cls, ids] : it.selection) selected.insert(ids.begin(), ids.end());
  std::vector<json> rows;
  for (std::size_t i = 0; i < it.scores.size(); ++i) {
    rows.push_back(scores_row(it.scores[i], it.raw_scores[i], selected.contains(it.scores[i].doc_id)));
  }
  write_jsonl(path, rows);
}

std::vector<ScoredDoc> read_scores(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PrerequisiteError("missing " + path.string() + "; run `run` first");
  std::vector<ScoredDoc> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    out.push_back({j.at("id").get<std::string>(), j.at("pseudo_label").get<int>(), j.at("confidence").get<double>()});
  }
  return out;
}

json class_sets_json(const IterationResult& it) {
  json out = json::array();
  for (const auto& m : it.updated_models) {
    const auto sel = it.selection.find(m.class_id);
    out.push_back({{"class_id", m.class_id},
                   {"name", m.name},
                   {"documents", sel == it.selection.end() ? std::vector<std::string>{} : sel->second},
                   {"set_size", m.class_set.size()}});
  }
  return out;
}

void write_distributions(const fs::path& path, const std::vector<ClassDistribution>& dists,
                         const std::vector<std::vector<SentenceVote>>* votes) {
  std::vector<json> rows;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    rows.push_back(distribution_to_json(dists[i], votes ? (*votes)[i] : std::vector<SentenceVote>{}));
  }
  write_jsonl(path, rows);
}

std::string fmt6(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << v;
  return ss.str();
}

json metrics_json(const IterationMetrics& m) {
  json j = {{"iteration", m.iteration}, {"metrics", report_to_json(m.reduced)}, {"final_loss", m.final_loss}};
  if (m.raw) j["metrics_raw"] = report_to_json(*m.raw);
  if (m.topk) j["metrics_topk"] = report_to_json(*m.topk);
  return j;
}

std::string metrics_csv(const std::vector<IterationMetrics>& metrics) {
  std::string out = "iteration,micro_f1,macro_f1,micro_f1_raw,macro_f1_raw,topk_micro_f1,topk_macro_f1,final_loss\n";
  for (const auto& m : metrics) {
    out += std::to_string(m.iteration) + "," + fmt6(m.reduced.micro_f1) + "," + fmt6(m.reduced.macro_f1) + ",";
    out += (m.raw ? fmt6(m.raw->micro_f1) + "," + fmt6(m.raw->macro_f1) : std::string(",")) + ",";
    out += (m.topk ? fmt6(m.topk->micro_f1) + "," + fmt6(m.topk->macro_f1) : std::string(",")) + ",";
    out += (m.iteration == 0 ? std::string() : fmt6(m.final_loss)) + "\n";
  }
  return out;
}

}  // namespace

fs::path run_output_dir(const RunConfig& config) {
  return fs::path(config.run_dir) / "runs" / hex64(config.run_hash());
}

void stage_prepare(const RunConfig& c, bool force) {
  require_paths(c, {{"corpus", &c.corpus}, {"classes", &c.classes}, {"run_dir", &c.run_dir}});
  const std::uint64_t hash = c.prepare_hash();
  const fs::path dir(c.run_dir);
  if (!force && read_stamp(c, "prepare") == hex64(hash) && fs::exists(dir / "corpus.jsonl")) {
    spdlog::info("prepare: up to date");
    return;
  }
  SegmenterOptions seg;
  seg.max_sentence_len = c.max_sentence_len;
  const auto docs = load_corpus(c.corpus, parse_corpus_format(c.corpus_format), seg);
  if (docs.empty()) throw DataError(c.corpus + ": no usable documents");
  const auto classes = load_classes(c.classes);
  fs::create_directories(dir);
  fs::remove(stamp_path(c, "prepare"));
  write_segmented_corpus(dir / "corpus.jsonl", docs);
  json names = json::array();
  for (const auto& cls : classes) names.push_back(cls.surface_name);
  write_json(dir / "classes.json", names);
  if (!c.labels.empty()) {
    write_json(dir / "labels.json", json(load_gold_labels(c.labels, docs, classes)));
  } else {
    fs::remove(dir / "labels.json");
  }
  write_file_atomic(dir / "config.txt", c.to_text());
  std::size_t n_sent = 0;
  for (const auto& d : docs) n_sent += d.sentences.size();
  spdlog::info("prepare: {} documents, {} sentences, {} classes", docs.size(), n_sent, classes.size());
  write_stamp(c, "prepare", hash);
}

void stage_embed(const RunConfig& c, bool force) {
  require_paths(c, {{"run_dir", &c.run_dir}});
  require_stage(c, "prepare", c.prepare_hash());
  const std::uint64_t hash = c.embed_hash();
  const fs::path dir(c.run_dir);
  if (!force && read_stamp(c, "embed") == hex64(hash) && fs::exists(dir / "tokens.bin") &&
      fs::exists(dir / "static.bin")) {
    spdlog::info("embed: up to date");
    return;
  }
  const Prepared p = load_prepared(c);
  std::optional<PrecomputedProvider> provider;
  if (c.provider == "precomputed") {
    if (c.embeddings_dir.empty()) throw ConfigError("provider 'precomputed' needs embeddings_dir");
    provider.emplace(PrecomputedProvider::load(c.embeddings_dir));
  } else {
    provider.emplace(encoder_provider(c));
  }
  fs::remove(stamp_path(c, "embed"));
  const auto tokens = embed_corpus(p.docs, *provider, c.threads);
  const auto table = build_static_table(p.docs, tokens, static_cast<std::uint64_t>(c.min_count));
  const CacheHeader header{corpus_fingerprint(p.docs), provider->dim(), provider->id()};
  write_token_cache(dir / "tokens.bin", header, tokens);
  write_static_cache(dir / "static.bin", header, table);
  spdlog::info("embed: dim {}, vocabulary {}", provider->dim(), table.size());
  write_stamp(c, "embed", hash);
}

fs::path stage_run(const RunConfig& c) {
  require_paths(c, {{"run_dir", &c.run_dir}});
  require_stage(c, "prepare", c.prepare_hash());
  require_stage(c, "embed", c.embed_hash());
  const Prepared p = load_prepared(c);
  const Embedded e = load_embedded(c, p.docs);
  const int iterations = c.resolve_iterations(any_phrase(p.classes));
  const PipelineOptions options = pipeline_options(c, iterations);

  const fs::path out = run_output_dir(c);
  fs::remove(stamp_path(c, "run"));
  fs::remove_all(out);
  fs::create_directories(out);
  write_file_atomic(out / "config.txt", c.to_text());

  std::vector<json> iteration_log;
  IterationObserver observer = [&](const IterationResult& it) {
    const std::string t = std::to_string(it.iteration);
    save_checkpoint(out / ("attn_iter" + t + ".ckpt"), it.params);
    write_scores(out / ("scores_iter" + t + ".jsonl"), it);
    write_json(out / ("class_sets_iter" + t + ".json"), class_sets_json(it));
    write_distributions(out / ("distributions_iter" + t + ".jsonl"), it.targets, nullptr);
    std::string curve = "epoch,loss\n";
    for (std::size_t ep = 0; ep < it.epoch_losses.size(); ++ep) {
      curve += std::to_string(ep + 1) + "," + fmt6(it.epoch_losses[ep]) + "\n";
    }
    write_file_atomic(out / ("train_curve_iter" + t + ".csv"), curve);
    json sizes = json::object();
    for (const auto& [cls, ids] : it.selection) sizes[p.classes[static_cast<std::size_t>(cls)].surface_name] = ids.size();
    iteration_log.push_back({{"iteration", it.iteration},
                             {"epoch_losses", it.epoch_losses},
                             {"pca_dims", it.pca_dims},
                             {"selected", sizes}});
  };

  const GoldLabels* gold = p.gold ? &*p.gold : nullptr;
  const PipelineResult r = run_pipeline(p.docs, p.classes, e.tokens, e.table, gold, options, observer);

  write_json(out / "keywords.json", keywords_to_json(r.initial_models));
  // Iteration 1 trains on the initial ensemble; keep its sentence votes too.
  write_distributions(out / "distributions_iter0.jsonl", r.feedback.initial_targets, &r.feedback.initial_votes);
  std::vector<json> final_rows;
  write_scores(out / "scores_final.jsonl", r.feedback.iterations.back());
  write_pseudo_dataset(out / "pseudo_dataset.jsonl", r.pseudo_set);
  write_predictions(out / "predictions.jsonl", p.docs, r.classifier_predictions, p.classes);

  json report = {{"num_docs", p.docs.size()},
                 {"num_classes", p.classes.size()},
                 {"iterations", iteration_log},
                 {"pseudo_set_size", r.pseudo_set.size()},
                 {"config_hash", hex64(c.run_hash())}};
  if (gold) {
    json m = json::array();
    for (const auto& im : r.metrics) m.push_back(metrics_json(im));
    report["metrics"] = m;
    if (r.classifier_report) report["classifier"] = report_to_json(*r.classifier_report);
    write_file_atomic(out / "metrics.csv", metrics_csv(r.metrics));
  }
  write_json(out / "report.json", report);
  write_file_atomic(fs::path(c.run_dir) / "latest_run", hex64(c.run_hash()) + "\n");
  write_stamp(c, "run", c.run_hash());
  spdlog::info("run: outputs in {}", out.string());
  return out;
}

fs::path stage_export(const RunConfig& c) {
  require_paths(c, {{"run_dir", &c.run_dir}});
  require_stage(c, "run", c.run_hash());
  const Prepared p = load_prepared(c);
  const Embedded e = load_embedded(c, p.docs);
  const fs::path run_out = run_output_dir(c);
  const auto scores = read_scores(run_out / "scores_final.jsonl");
  const int num_classes = static_cast<int>(p.classes.size());
  const auto pseudo = build_pseudo_dataset(scores, p.docs, c.delta, num_classes);
  auto features = std::make_shared<const MeanPooledFeatures>(p.docs, e.tokens);
  LogisticConfig lc;
  lc.epochs = c.classifier_epochs;
  lc.lr = c.classifier_lr;
  const auto predictions = train_and_label(LogisticRegressionTrainer(features, lc), pseudo, p.docs, num_classes);
  const fs::path out = fs::path(c.run_dir) / "export";
  fs::create_directories(out);
  write_pseudo_dataset(out / "pseudo_dataset.jsonl", pseudo);
  write_predictions(out / "predictions.jsonl", p.docs, predictions, p.classes);
  if (p.gold) {
    const auto rep = f1_scores(*p.gold, restrict_to(predictions, *p.gold), num_classes, c.macro_zero_inclusion,
                               "final-classifier");
    write_json(out / "classifier_report.json", report_to_json(rep));
    spdlog::info("export: classifier micro-F1 {:.4f} macro-F1 {:.4f}", rep.micro_f1, rep.macro_f1);
  }
  spdlog::info("export: {} pseudo-labeled documents written to {}", pseudo.size(), out.string());
  return out;
}

fs::path stage_ablate(const RunConfig& c) {
  require_paths(c, {{"run_dir", &c.run_dir}});
  require_stage(c, "prepare", c.prepare_hash());
  require_stage(c, "embed", c.embed_hash());
  const Prepared p = load_prepared(c);
  if (!p.gold) throw ConfigError("ablate needs gold labels; set 'labels' and re-run `prepare`");
  const Embedded e = load_embedded(c, p.docs);
  const int num_classes = static_cast<int>(p.classes.size());
  const fs::path out = fs::path(c.run_dir) / "ablate";
  fs::create_directories(out);

  PipelineOptions one = pipeline_options(c, 1);
  one.train_classifier = false;
  const PipelineResult first = run_pipeline(p.docs, p.classes, e.tokens, e.table, &*p.gold, one);
  const EvalReport init = ablation(AblationStage::kMegInit, first.feedback, *p.gold, num_classes, c.macro_zero_inclusion);
  const EvalReport cx = ablation(AblationStage::kMegCx, first.feedback, *p.gold, num_classes, c.macro_zero_inclusion);
  spdlog::info("ablate: MEG-Init micro-F1 {:.4f}, MEG-CX micro-F1 {:.4f}", init.micro_f1, cx.micro_f1);

  const int iterations = c.resolve_iterations(any_phrase(p.classes));
  json modes = json::array();
  std::string csv = "weight_mode,init_micro_f1,init_macro_f1,final_micro_f1,final_macro_f1\n";
  for (WeightMode mode : {WeightMode::kEqual, WeightMode::kCentrality, WeightMode::kDiscriminative, WeightMode::kBoth}) {
    PipelineOptions o = pipeline_options(c, iterations);
    o.feedback.weight_mode = mode;
    o.train_classifier = false;
    const PipelineResult r = run_pipeline(p.docs, p.classes, e.tokens, e.table, &*p.gold, o);
    const EvalReport& fin = r.metrics.back().reduced;
    const EvalReport& ini = r.metrics.front().reduced;
    spdlog::info("ablate: weight mode {} -> micro-F1 {:.4f}", to_string(mode), fin.micro_f1);
    modes.push_back({{"weight_mode", to_string(mode)}, {"initial", report_to_json(ini)}, {"final", report_to_json(fin)}});
    csv += to_string(mode) + "," + fmt6(ini.micro_f1) + "," + fmt6(ini.macro_f1) + "," + fmt6(fin.micro_f1) + "," +
           fmt6(fin.macro_f1) + "\n";
  }
  write_json(out / "ablation.json",
             {{"meg_init", report_to_json(init)}, {"meg_cx", report_to_json(cx)}, {"weight_modes", modes}});
  write_file_atomic(out / "weight_modes.csv", csv);
  return out;
}

namespace {

struct Series {
  std::string name;
  std::vector<double> xs, ys;
};

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
  const double w = 480, h = 300, left = 50, right = 120, top = 30, bottom = 40;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (double x : s.xs) xmin = std::min(xmin, x), xmax = std::max(xmax, x);
    for (double y : s.ys) ymin = std::min(ymin, y), ymax = std::max(ymax, y);
  }
  if (xmin > xmax) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax - ymin < 1e-9) ymin -= 0.5, ymax += 0.5;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (w - left - right); };
  auto py = [&](double y) { return h - bottom - (y - ymin) / (ymax - ymin) * (h - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">" << title << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << left - 4 << "\" y=\"" << py(ymax) + 4 << "\" text-anchor=\"end\">" << fmt6(ymax).substr(0, 5) << "</text>\n";
  s << "<text x=\"" << left - 4 << "\" y=\"" << py(ymin) + 4 << "\" text-anchor=\"end\">" << fmt6(ymin).substr(0, 5) << "</text>\n";
  s << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 8 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& se = series[i];
    const char* color = colors[i % 6];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < se.xs.size(); ++j) s << px(se.xs[j]) << "," << py(se.ys[j]) << " ";
    s << "\"/>\n";
    s << "<text x=\"" << w - right + 8 << "\" y=\"" << top + 14 * (i + 1) << "\" fill=\"" << color << "\">" << se.name << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

fs::path stage_report(const RunConfig& c) {
  require_paths(c, {{"run_dir", &c.run_dir}});
  require_stage(c, "run", c.run_hash());
  const fs::path run_out = run_output_dir(c);
  const json run_report = json::parse(read_file(run_out / "report.json"));
  const fs::path out = fs::path(c.run_dir) / "report";
  fs::create_directories(out);

  json summary = {{"run", run_report}};
  std::string csv = "stage,micro_f1,macro_f1\n";
  if (run_report.contains("metrics")) {
    Series micro{"micro-F1", {}, {}}, macro{"macro-F1", {}, {}}, topk{"top-k micro-F1", {}, {}};
    for (const auto& m : run_report.at("metrics")) {
      const int t = m.at("iteration").get<int>();
      const auto& r = m.at("metrics");
      micro.xs.push_back(t), micro.ys.push_back(r.at("micro_f1").get<double>());
      macro.xs.push_back(t), macro.ys.push_back(r.at("macro_f1").get<double>());
      if (m.contains("metrics_topk")) {
        topk.xs.push_back(t), topk.ys.push_back(m.at("metrics_topk").at("micro_f1").get<double>());
      }
      csv += r.at("stage").get<std::string>() + "," + fmt6(r.at("micro_f1").get<double>()) + "," +
             fmt6(r.at("macro_f1").get<double>()) + "\n";
    }
    if (run_report.contains("classifier")) {
      const auto& r = run_report.at("classifier");
      csv += "final-classifier," + fmt6(r.at("micro_f1").get<double>()) + "," + fmt6(r.at("macro_f1").get<double>()) + "\n";
    }
    write_file_atomic(out / "f1_by_iteration.svg", svg_line_chart("F1 by iteration", "iteration", {micro, macro, topk}));
  }
  std::vector<Series> losses;
  for (const auto& it : run_report.at("iterations")) {
    Series s{"iteration " + std::to_string(it.at("iteration").get<int>()), {}, {}};
    const auto ls = it.at("epoch_losses").get<std::vector<double>>();
    for (std::size_t i = 0; i < ls.size(); ++i) s.xs.push_back(static_cast<double>(i + 1)), s.ys.push_back(ls[i]);
    losses.push_back(std::move(s));
  }
  write_file_atomic(out / "training_loss.svg", svg_line_chart("Training loss", "epoch", losses));

  const fs::path ablation_path = fs::path(c.run_dir) / "ablate" / "ablation.json";
  if (fs::exists(ablation_path)) {
    const json ab = json::parse(read_file(ablation_path));
    summary["ablation"] = ab;
    for (const char* key : {"meg_init", "meg_cx"}) {
      const auto& r = ab.at(key);
      csv += r.at("stage").get<std::string>() + "," + fmt6(r.at("micro_f1").get<double>()) + "," +
             fmt6(r.at("macro_f1").get<double>()) + "\n";
    }
    Series init{"initial", {}, {}}, fin{"final", {}, {}};
    std::string labels;
    double x = 0;
    for (const auto& m : ab.at("weight_modes")) {
      init.xs.push_back(x), init.ys.push_back(m.at("initial").at("micro_f1").get<double>());
      fin.xs.push_back(x), fin.ys.push_back(m.at("final").at("micro_f1").get<double>());
      labels += (labels.empty() ? "" : " / ") + m.at("weight_mode").get<std::string>();
      x += 1;
    }
    write_file_atomic(out / "weight_modes.svg", svg_line_chart("micro-F1 by weight mode", labels, {init, fin}));
  }
  write_json(out / "summary.json", summary);
  write_file_atomic(out / "summary.csv", csv);
  spdlog::info("report: written to {}", out.string());
  return out;
}

}  // namespace megclass
