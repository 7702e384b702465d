#include "megclass/config.hpp"

#include "megclass/binary_io.hpp"
#include "megclass/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace megclass {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(value, &used));
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
    }
  } else {
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
      throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': '" + value + "' is not a boolean");
}

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

void hash_entries(Fnv1a& h, const RunConfig& c, std::initializer_list<const char*> keys) {
  const auto entries = c.entries();
  for (const char* key : keys) {
    for (const auto& [k, v] : entries) {
      if (k == key) {
        h.update(k);
        h.update("=");
        h.update(v);
        h.update(";");
      }
    }
  }
}

void hash_file(Fnv1a& h, const std::string& path) {
  if (path.empty()) {
    h.update("<none>");
    return;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    h.update("<missing:" + path + ">");
    return;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  h.update(ss.str());
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  static const std::map<std::string, std::function<void(RunConfig&, const std::string&, const std::string&)>>
      setters = {
          {"corpus", [](RunConfig& c, auto&, auto& v) { c.corpus = v; }},
          {"corpus_format", [](RunConfig& c, auto&, auto& v) { c.corpus_format = v; }},
          {"classes", [](RunConfig& c, auto&, auto& v) { c.classes = v; }},
          {"labels", [](RunConfig& c, auto&, auto& v) { c.labels = v; }},
          {"run_dir", [](RunConfig& c, auto&, auto& v) { c.run_dir = v; }},
          {"provider", [](RunConfig& c, auto&, auto& v) { c.provider = v; }},
          {"embeddings_dir", [](RunConfig& c, auto&, auto& v) { c.embeddings_dir = v; }},
          {"encoder_layer", [](RunConfig& c, auto& k, auto& v) { c.encoder_layer = parse_number<int>(k, v); }},
          {"encoder_script", [](RunConfig& c, auto&, auto& v) { c.encoder_script = v; }},
          {"python", [](RunConfig& c, auto&, auto& v) { c.python = v; }},
          {"T", [](RunConfig& c, auto& k, auto& v) { c.keyword_count = parse_number<int>(k, v); }},
          {"max_sentence_len", [](RunConfig& c, auto& k, auto& v) { c.max_sentence_len = parse_number<int>(k, v); }},
          {"min_count", [](RunConfig& c, auto& k, auto& v) { c.min_count = parse_number<int>(k, v); }},
          {"heads", [](RunConfig& c, auto& k, auto& v) { c.heads = parse_number<int>(k, v); }},
          {"tau", [](RunConfig& c, auto& k, auto& v) { c.tau = parse_number<double>(k, v); }},
          {"lr", [](RunConfig& c, auto& k, auto& v) { c.lr = parse_number<double>(k, v); }},
          {"epochs", [](RunConfig& c, auto& k, auto& v) { c.epochs = parse_number<int>(k, v); }},
          {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.batch_size = parse_number<int>(k, v); }},
          {"k", [](RunConfig& c, auto& k, auto& v) { c.k = parse_number<double>(k, v); }},
          {"delta", [](RunConfig& c, auto& k, auto& v) { c.delta = parse_number<double>(k, v); }},
          {"iterations",
           [](RunConfig& c, auto& k, auto& v) { c.iterations = v == "auto" ? 0 : parse_number<int>(k, v); }},
          {"pca_dims", [](RunConfig& c, auto& k, auto& v) { c.pca_dims = parse_number<int>(k, v); }},
          {"use_pca", [](RunConfig& c, auto& k, auto& v) { c.use_pca = parse_bool(k, v); }},
          {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
          {"weight_mode", [](RunConfig& c, auto&, auto& v) { c.weight_mode = v; }},
          {"threads", [](RunConfig& c, auto& k, auto& v) { c.threads = parse_number<int>(k, v); }},
          {"macro_zero_inclusion", [](RunConfig& c, auto& k, auto& v) { c.macro_zero_inclusion = parse_bool(k, v); }},
          {"classifier_epochs", [](RunConfig& c, auto& k, auto& v) { c.classifier_epochs = parse_number<int>(k, v); }},
          {"classifier_lr", [](RunConfig& c, auto& k, auto& v) { c.classifier_lr = parse_number<double>(k, v); }},
      };
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(!corpus.empty(), "corpus is required");
  require(!classes.empty(), "classes is required");
  require(!run_dir.empty(), "run_dir is required");
  require(provider != "precomputed" || !embeddings_dir.empty(), "provider 'precomputed' needs embeddings_dir");
  parse_corpus_format(corpus_format);
  parse_weight_mode(weight_mode);
  require(keyword_count >= 1, "T must be >= 1");
  require(max_sentence_len >= 1, "max_sentence_len must be >= 1");
  require(min_count >= 1, "min_count must be >= 1");
  require(heads >= 1, "heads must be >= 1");
  require(tau > 0.0, "tau must be > 0");
  require(lr > 0.0, "lr must be > 0");
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(k > 0.0 && k <= 1.0, "k must lie in (0, 1]");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(iterations >= 0, "iterations must be >= 1 (or auto)");
  require(pca_dims >= 1, "pca_dims must be >= 1");
  require(threads >= 1, "threads must be >= 1");
  require(classifier_epochs >= 1 && classifier_lr > 0.0, "classifier settings must be positive");
  require(provider == "precomputed" || provider.rfind("hf:", 0) == 0,
          "provider must be 'precomputed' or 'hf:<model>'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  return {{"corpus", corpus},
          {"corpus_format", corpus_format},
          {"classes", classes},
          {"labels", labels},
          {"run_dir", run_dir},
          {"provider", provider},
          {"embeddings_dir", embeddings_dir},
          {"encoder_layer", std::to_string(encoder_layer)},
          {"encoder_script", encoder_script},
          {"python", python},
          {"T", std::to_string(keyword_count)},
          {"max_sentence_len", std::to_string(max_sentence_len)},
          {"min_count", std::to_string(min_count)},
          {"heads", std::to_string(heads)},
          {"tau", fmt_double(tau)},
          {"lr", fmt_double(lr)},
          {"epochs", std::to_string(epochs)},
          {"batch_size", std::to_string(batch_size)},
          {"k", fmt_double(k)},
          {"delta", fmt_double(delta)},
          {"iterations", iterations == 0 ? std::string("auto") : std::to_string(iterations)},
          {"pca_dims", std::to_string(pca_dims)},
          {"use_pca", use_pca ? "true" : "false"},
          {"seed", std::to_string(seed)},
          {"weight_mode", weight_mode},
          {"threads", std::to_string(threads)},
          {"macro_zero_inclusion", macro_zero_inclusion ? "true" : "false"},
          {"classifier_epochs", std::to_string(classifier_epochs)},
          {"classifier_lr", fmt_double(classifier_lr)}};
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t RunConfig::prepare_hash() const {
  Fnv1a h;
  hash_entries(h, *this, {"corpus_format", "max_sentence_len"});
  hash_file(h, corpus);
  hash_file(h, classes);
  hash_file(h, labels);
  return h.digest();
}

std::uint64_t RunConfig::embed_hash() const {
  Fnv1a h;
  h.update_u64(prepare_hash());
  hash_entries(h, *this, {"provider", "encoder_layer", "min_count"});
  if (provider == "precomputed") hash_file(h, (std::filesystem::path(embeddings_dir) / "manifest.json").string());
  return h.digest();
}

std::uint64_t RunConfig::run_hash() const {
  Fnv1a h;
  h.update_u64(embed_hash());
  hash_entries(h, *this,
               {"T", "heads", "tau", "lr", "epochs", "batch_size", "k", "delta", "iterations", "pca_dims", "use_pca",
                "seed", "weight_mode", "threads", "macro_zero_inclusion", "classifier_epochs", "classifier_lr"});
  return h.digest();
}

void RunConfig::resolve_paths(const std::filesystem::path& base) {
  for (std::string* p : {&corpus, &classes, &labels, &run_dir, &embeddings_dir, &encoder_script}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
}

int RunConfig::resolve_iterations(bool any_phrase_label) const {
  if (iterations > 0) return iterations;
  return any_phrase_label ? 2 : 4;
}

FeedbackConfig RunConfig::feedback_config(int resolved_iterations) const {
  FeedbackConfig fc;
  fc.iterations = resolved_iterations;
  fc.k = k;
  fc.pca_dims = pca_dims;
  fc.use_pca = use_pca;
  fc.weight_mode = parse_weight_mode(weight_mode);
  fc.seed = seed;
  fc.attention.heads = heads;
  fc.attention.tau = tau;
  fc.attention.lr = lr;
  fc.attention.epochs = epochs;
  fc.attention.batch_size = batch_size;
  fc.attention.threads = threads;
  return fc;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str());
  cfg.resolve_paths(std::filesystem::absolute(path).parent_path());
  return cfg;
}

}  // namespace megclass
