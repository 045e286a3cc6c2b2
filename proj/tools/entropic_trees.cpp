/* Copyright 2026 The Entropic Trees Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line driver: ingest threads, build coding trees, train and score
// the recursive model, and summarise reply-delay distributions.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "entropic_trees/construction.hpp"
#include "entropic_trees/entropy.hpp"
#include "entropic_trees/error.hpp"
#include "entropic_trees/features.hpp"
#include "entropic_trees/pipeline.hpp"
#include "entropic_trees/propagation.hpp"
#include "entropic_trees/rvnn.hpp"
#include "entropic_trees/stats.hpp"
#include "entropic_trees/tensor_io.hpp"

namespace etrees::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Bad flags or configuration values.
class UsageError : public Error {
 public:
  using Error::Error;
};

template <typename... Args>
[[noreturn]] void usage_fail(Args&&... args) {
  throw UsageError(detail::concat(std::forward<Args>(args)...));
}

// ---- files ---------------------------------------------------------------

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(detail::concat("cannot read '", path.string(), "'"));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError(detail::concat("'", path.string(), "': ", e.what()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError(detail::concat("cannot write '", path.string(), "'"));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError(detail::concat("cannot create directory '", dir.string(), "'"));
}

// File-name-safe form of a thread id. Ids that needed changes get a hash
// suffix so distinct ids never collide.
std::string file_stem(const std::string& id) {
  std::string out;
  for (unsigned char c : id) out += (std::isalnum(c) || c == '-' || c == '_' || c == '.') ? static_cast<char>(c) : '_';
  if (out != id || out.empty() || out.front() == '.') {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(thread_seed(0, id)));
    out += std::string("-") + hex;
  }
  return out;
}

std::vector<fs::path> json_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(detail::concat("'", dir.string(), "' is not a directory"));
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Threads from JSONL files, sorted by id. With strict set, any rejected line
// is an input error; otherwise it is reported and skipped.
std::vector<ThreadRecord> read_threads(const std::vector<std::string>& paths, bool strict,
                                       std::size_t* skipped = nullptr) {
  std::vector<ThreadRecord> threads;
  std::size_t bad = 0;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(detail::concat("cannot read '", path, "'"));
    ParseResult r = parse_threads(in);
    for (const auto& d : r.diagnostics)
      std::cerr << path << ":" << d.line << ": " << (d.thread_id.empty() ? "" : d.thread_id + ": ") << d.message
                << "\n";
    bad += r.diagnostics.size();
    for (auto& t : r.threads) threads.push_back(std::move(t));
  }
  if (strict && bad) throw IoError(detail::concat(bad, " thread(s) could not be read"));
  if (skipped) *skipped = bad;
  std::sort(threads.begin(), threads.end(),
            [](const ThreadRecord& a, const ThreadRecord& b) { return a.thread_id < b.thread_id; });
  for (std::size_t i = 1; i < threads.size(); ++i)
    if (threads[i].thread_id == threads[i - 1].thread_id)
      throw IoError(detail::concat("duplicate thread id '", threads[i].thread_id, "'"));
  return threads;
}

// ---- configuration -------------------------------------------------------

std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) return v.substr(1, v.size() - 2);
  return v;
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf" || v == "none") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) usage_fail("'", key, "' expects a number, got '", v, "'");
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (!std::isfinite(x) || x != std::floor(x)) usage_fail("'", key, "' expects an integer, got '", v, "'");
  return static_cast<long long>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  usage_fail("'", key, "' expects true or false, got '", v, "'");
}

void set_config_value(PipelineConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = unquote(raw);
  try {
    if (key == "K" || key == "k") c.k = static_cast<int>(to_integer(key, v));
    else if (key == "min_weight") c.min_weight = to_double(key, v);
    else if (key == "max_dims") c.max_dims = static_cast<std::size_t>(std::max(0LL, to_integer(key, v)));
    else if (key == "hidden" || key == "d") c.d = static_cast<int>(to_integer(key, v));
    else if (key == "weighted") c.weighted = to_bool(key, v);
    else if (key == "coding_mode") c.coding_mode = parse_coding_mode(v);
    else if (key == "pool") c.pool = parse_pool(v);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_integer(key, v));
    else if (key == "split") c.split = parse_split(v);
    else if (key == "learning_rate") c.train.learning_rate = to_double(key, v);
    else if (key == "warmup") c.train.warmup = to_double(key, v);
    else if (key == "weight_decay") c.train.weight_decay = to_double(key, v);
    else if (key == "epochs") c.train.epochs = static_cast<int>(to_integer(key, v));
    else if (key == "batch_size") c.train.batch_size = static_cast<int>(to_integer(key, v));
    else if (key == "deadline") c.deadline = to_double(key, v);
    else usage_fail("unknown configuration key '", key, "'");
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  c.train.seed = c.seed;
}

// TOML subset: "key = value" lines, '#' comments, [section] headers (their
// names are ignored; keys are unique across sections).
void apply_config_file(PipelineConfig& c, const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) usage_fail(path.string(), ":", lineno, ": expected 'key = value'");
    set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_json(PipelineConfig& c, const json& j) {
  for (const auto& [key, value] : j.items()) {
    if (value.is_null()) set_config_value(c, key, "inf");
    else if (value.is_string()) set_config_value(c, key, value.get<std::string>());
    else set_config_value(c, key, value.dump());
  }
}

std::string config_to_toml(const PipelineConfig& c) {
  std::string out = "# resolved configuration\n";
  const json j = config_to_json(c);
  for (const auto& [key, value] : j.items()) {
    out += key + " = ";
    out += value.is_null() ? std::string("inf") : value.dump();
    out += "\n";
  }
  return out;
}

struct ConfigOptions {
  std::string file;
  std::vector<std::string> sets;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o) {
  cmd->add_option("-c,--config", o.file, "configuration file (key = value lines)");
  cmd->add_option("--set", o.sets, "override one key, e.g. --set K=5 (repeatable)");
}

PipelineConfig resolve_config(const ConfigOptions& o) {
  PipelineConfig c;
  if (!o.file.empty()) apply_config_file(c, o.file);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) usage_fail("--set expects key=value, got '", s, "'");
    set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

// ---- ingest --------------------------------------------------------------

struct IngestOptions {
  ConfigOptions config;
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_ingest(const IngestOptions& o) {
  const PipelineConfig c = resolve_config(o.config);
  std::size_t skipped = 0;
  const auto threads = read_threads(o.inputs, false, &skipped);
  const fs::path out = o.out;
  make_dir(out / "trees");
  const json cfg = config_to_json(c);
  std::string jsonl;
  for (const auto& t : threads) {
    jsonl += thread_to_json(t).dump() + "\n";
    const PropagationTree g = build_propagation_tree(t, c.tree_options());
    json j = tree_to_json(g);
    j["thread_id"] = t.thread_id;
    j["event"] = t.event;
    j["label"] = std::string(to_string(t.label));
    j["clamped_edges"] = g.clamped_edges;
    j["config"] = cfg;
    write_json(out / "trees" / (file_stem(t.thread_id) + ".json"), j);
  }
  write_text(out / "threads.jsonl", jsonl);
  json report = {{"config", cfg}, {"audit", audit_to_json(audit_threads(threads, c.tree_options()))},
                 {"skipped_lines", skipped}};
  write_json(out / "audit.json", report);
  write_text(out / "config.toml", config_to_toml(c));
  std::cout << report["audit"].dump(2) << "\n";
  return kExitOk;
}

// ---- encode --------------------------------------------------------------

struct EncodeOptions {
  ConfigOptions config;
  std::string trees;
  std::string out;
};

int cmd_encode(const EncodeOptions& o) {
  const PipelineConfig c = resolve_config(o.config);
  const auto files = json_files(o.trees);
  const fs::path out = o.out;
  make_dir(out);
  struct Encoded {
    std::optional<json> doc;
    std::string error;
  };
  const json cfg = config_to_json(c);
  const auto results = parallel_map(files, [&](const fs::path& path) {
    Encoded r;
    try {
      const json tj = read_json(path);
      const PropagationTree g = tree_from_json(tj);
      const std::string id = tj.value("thread_id", path.stem().string());
      const EncodedTree enc = encode_tree(g, c.k, c.coding_mode, thread_seed(c.seed, id));
      json j = coding_tree_to_json(enc.tree, g, c.k);
      j["thread_id"] = id;
      j["mode"] = std::string(to_string(c.coding_mode));
      j["entropy_before"] = enc.entropy_star;
      j["entropy"] = enc.entropy;
      j["config"] = cfg;
      r.doc = std::move(j);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  });
  std::size_t skipped = 0;
  std::string log = "thread_id\tleaves\tentropy_before\tentropy\n";
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!results[i].doc) {
      std::cerr << files[i].string() << ": skipped: " << results[i].error << "\n";
      ++skipped;
      continue;
    }
    const json& j = *results[i].doc;
    std::size_t leaves = 0;
    for (const auto& n : j["nodes"]) leaves += !n["leaf_post"].is_null();
    std::ostringstream row;
    row.precision(17);
    row << j["thread_id"].get<std::string>() << "\t" << leaves << "\t" << j["entropy_before"].get<double>() << "\t"
        << j["entropy"].get<double>() << "\n";
    log += row.str();
    write_json(out / files[i].filename(), j);
  }
  write_text(out / "entropy.tsv", log);
  write_text(out / "config.toml", config_to_toml(c));
  std::cerr << "encoded " << files.size() - skipped << " tree(s), skipped " << skipped << "\n";
  return skipped ? kExitFailure : kExitOk;
}

// ---- entropy audit -------------------------------------------------------

struct AuditOptions {
  ConfigOptions config;
  std::string trees;
  std::string coding;
  std::string out;
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text(path, text);
}

// Recomputes entropies from scratch: from the stored coding trees when given,
// otherwise by building greedy trees at height K.
int cmd_entropy_audit(const AuditOptions& o) {
  const PipelineConfig c = resolve_config(o.config);
  std::ostringstream out;
  out.precision(17);
  bool mismatch = false;
  if (o.coding.empty()) {
    out << "thread_id\tnodes\tentropy_before\tentropy\n";
    for (const auto& path : json_files(o.trees)) {
      const json tj = read_json(path);
      const PropagationTree g = tree_from_json(tj);
      const EncodedTree enc = encode_tree(g, c.k, CodingMode::EntropyGreedy, 0);
      out << tj.value("thread_id", path.stem().string()) << "\t" << g.size() << "\t" << enc.entropy_star << "\t"
          << (g.degenerate() ? 0.0 : structural_entropy(g, enc.tree)) << "\n";
    }
  } else {
    out << "thread_id\tlogged\trecomputed\tabs_diff\n";
    for (const auto& path : json_files(o.coding)) {
      const json cj = read_json(path);
      const fs::path tree_path = fs::path(o.trees) / path.filename();
      const PropagationTree g = tree_from_json(read_json(tree_path));
      const LoadedCodingTree loaded = coding_tree_from_json(cj, g);
      const double logged = cj.at("entropy").get<double>();
      const double fresh = g.degenerate() ? 0.0 : structural_entropy(g, loaded.tree);
      const double diff = std::abs(logged - fresh);
      mismatch |= diff > 1e-9 * std::max(1.0, std::abs(fresh));
      out << cj.value("thread_id", path.stem().string()) << "\t" << logged << "\t" << fresh << "\t" << diff << "\n";
    }
  }
  emit(o.out, out.str());
  if (mismatch) std::cerr << "logged entropies disagree with recomputation\n";
  return mismatch ? kExitFailure : kExitOk;
}

// ---- train / eval --------------------------------------------------------

// Prepared threads from encoded coding trees instead of fresh construction.
std::vector<PreparedThread> load_prepared(const std::vector<ThreadRecord>& threads, const fs::path& dir,
                                          const PipelineConfig& c) {
  return parallel_map(threads, [&](const ThreadRecord& t) {
    const fs::path path = dir / (file_stem(t.thread_id) + ".json");
    const json j = read_json(path);
    const PropagationTree g = build_propagation_tree(t, c.tree_options());
    const LoadedCodingTree loaded = coding_tree_from_json(j, g);
    if (loaded.k != c.k)
      throw UsageError(detail::concat("'", path.string(), "' has K=", loaded.k, " but the configuration has K=", c.k));
    PreparedThread p;
    p.thread_id = t.thread_id;
    p.event = t.event;
    p.label = t.label;
    for (const Post& post : t.posts) p.texts.push_back(post.text);
    p.tree = layer_tree(loaded.tree, c.k);
    p.entropy = j.value("entropy", 0.0);
    return p;
  });
}

TensorFile checkpoint(const RvnnParams& p, const Vocabulary& v, const PipelineConfig& c) {
  TensorFile f = params_to_tensors(p);
  f.meta["config"] = config_to_json(c);
  f.meta["vocabulary"] = vocabulary_to_json(v);
  return f;
}

std::string prediction_rows(const FoldResult& f, const std::map<std::string, const ThreadRecord*>& by_id) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < f.predictions.size(); ++i) {
    const ThreadRecord& t = *by_id.at(f.thread_ids[i]);
    const Prediction& p = f.predictions[i];
    out << t.thread_id << "\t" << t.event << "\t" << to_string(t.label) << "\t" << to_string(p.label);
    for (double x : p.probs) out << "\t" << x;
    out << "\n";
  }
  return out.str();
}

json fold_json(const FoldResult& f) {
  return {{"name", f.name},
          {"train_size", f.train_size},
          {"test_size", f.predictions.size()},
          {"metrics", metrics_to_json(f.metrics)}};
}

std::string history_rows(const FoldResult& f) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& s : f.history)
    out << f.name << "\t" << s.epoch << "\t" << s.loss << "\t" << s.accuracy << "\t" << s.learning_rate << "\n";
  return out.str();
}

constexpr const char* kPredictionHeader = "thread_id\tevent\tlabel\tpredicted\tp_TR\tp_FR\tp_UR\n";
constexpr const char* kHistoryHeader = "fold\tepoch\tloss\taccuracy\tlearning_rate\n";

struct TrainOptions {
  ConfigOptions config;
  std::vector<std::string> data;
  std::vector<std::string> train_files;
  std::vector<std::string> test_files;
  std::string coding;
  std::string out;
  std::optional<double> deadline;
};

void log_epoch(const std::string& fold, const EpochStats& s, int epochs) {
  if (s.epoch % 10 == 0 || s.epoch == epochs)
    std::cerr << "[" << fold << "] epoch " << s.epoch << "/" << epochs << " loss " << s.loss << " acc " << s.accuracy
              << "\n";
}

int cmd_train(TrainOptions o) {
  PipelineConfig c = resolve_config(o.config);
  if (o.deadline) {
    if (!(*o.deadline >= 0)) usage_fail("--deadline must be >= 0");
    c.deadline = *o.deadline;
  }
  const fs::path out = o.out;
  const json cfg = config_to_json(c);
  const auto prepare = [&](const std::vector<ThreadRecord>& threads) {
    return o.coding.empty() ? prepare_threads(threads, c) : load_prepared(threads, o.coding, c);
  };
  const auto prepare_test = [&](const std::vector<ThreadRecord>& threads, const std::vector<PreparedThread>& full) {
    return std::isfinite(c.deadline) ? prepare_threads(threads, c, c.deadline) : full;
  };

  json metrics = {{"config", cfg}, {"split", std::string(to_string(c.split))}};
  std::string predictions = kPredictionHeader;
  std::string history = kHistoryHeader;
  if (c.split == SplitMode::LeaveOneEventOut) {
    if (o.data.empty()) usage_fail("leave_one_event_out needs --data");
    const auto threads = read_threads(o.data, true);
    std::map<std::string, const ThreadRecord*> by_id;
    for (const auto& t : threads) by_id[t.thread_id] = &t;
    const auto full = prepare(threads);
    const auto test = prepare_test(threads, full);
    make_dir(out / "folds");
    const auto cv = leave_one_event_out(
        full, test, c, [&](const std::string& ev, const EpochStats& s) { log_epoch(ev, s, c.train.epochs); },
        [&](const FoldResult& f, const RvnnParams& p, const Vocabulary& v) {
          save_tensors((out / "folds" / (file_stem(f.name) + ".etz")).string(), checkpoint(p, v, c));
        });
    json folds = json::array();
    for (const auto& f : cv.folds) {
      folds.push_back(fold_json(f));
      predictions += prediction_rows(f, by_id);
      history += history_rows(f);
    }
    metrics["folds"] = folds;
    metrics["aggregate"] = {{"macro_f1", cv.macro_f1}, {"accuracy", cv.accuracy}};
  } else {
    if (o.train_files.empty() || o.test_files.empty()) usage_fail("fixed_files needs --train and --test");
    const auto train_threads = read_threads(o.train_files, true);
    const auto test_threads = read_threads(o.test_files, true);
    std::map<std::string, const ThreadRecord*> by_id;
    for (const auto& t : test_threads) by_id[t.thread_id] = &t;
    const auto train_set = prepare(train_threads);
    const auto test_full = prepare(test_threads);
    const auto test_set = prepare_test(test_threads, test_full);
    std::vector<const PreparedThread*> tr, te;
    for (const auto& t : train_set) tr.push_back(&t);
    for (const auto& t : test_set) te.push_back(&t);
    RvnnParams model;
    Vocabulary vocab;
    FoldResult f = run_fold(tr, te, c, [&](const EpochStats& s) { log_epoch("test", s, c.train.epochs); }, &model, &vocab);
    f.name = "test";
    make_dir(out);
    save_tensors((out / "model.etz").string(), checkpoint(model, vocab, c));
    metrics["folds"] = json::array({fold_json(f)});
    metrics["aggregate"] = {{"macro_f1", f.metrics.macro_f1}, {"accuracy", f.metrics.accuracy}};
    predictions += prediction_rows(f, by_id);
    history += history_rows(f);
  }
  write_json(out / "metrics.json", metrics);
  write_text(out / "predictions.tsv", predictions);
  write_text(out / "history.tsv", history);
  write_text(out / "config.toml", config_to_toml(c));
  std::cout << metrics["aggregate"].dump() << "\n";
  return kExitOk;
}

struct EvalOptions {
  std::string model;
  std::vector<std::string> data;
  std::string out;
  std::optional<double> deadline;
};

int cmd_eval(const EvalOptions& o) {
  const TensorFile f = load_tensors(o.model);
  const RvnnParams params = params_from_tensors(f);
  PipelineConfig c;
  Vocabulary vocab;
  try {
    apply_config_json(c, f.meta.at("config"));
    vocab = vocabulary_from_json(f.meta.at("vocabulary"));
  } catch (const json::exception& e) {
    throw IoError(detail::concat("'", o.model, "': ", e.what()));
  } catch (const UsageError& e) {
    throw IoError(detail::concat("'", o.model, "': ", e.what()));
  }
  if (o.deadline) {
    if (!(*o.deadline >= 0)) usage_fail("--deadline must be >= 0");
    c.deadline = *o.deadline;
  }
  const auto threads = read_threads(o.data, true);
  const auto prepared = prepare_threads(threads, c, c.deadline);
  std::vector<const PreparedThread*> ptrs;
  for (const auto& t : prepared) ptrs.push_back(&t);
  const auto examples = make_examples(ptrs, vocab);
  FoldResult fold;
  fold.name = "eval";
  fold.metrics = evaluate(params, examples);
  fold.predictions = predict_all(params, examples);
  for (const auto& ex : examples) fold.thread_ids.push_back(ex.thread_id);
  std::map<std::string, const ThreadRecord*> by_id;
  for (const auto& t : threads) by_id[t.thread_id] = &t;
  const fs::path out = o.out;
  make_dir(out);
  json metrics = {{"config", config_to_json(c)}, {"model", o.model}, {"metrics", metrics_to_json(fold.metrics)}};
  write_json(out / "metrics.json", metrics);
  write_text(out / "predictions.tsv", std::string(kPredictionHeader) + prediction_rows(fold, by_id));
  write_text(out / "config.toml", config_to_toml(c));
  std::cout << json({{"macro_f1", fold.metrics.macro_f1}, {"accuracy", fold.metrics.accuracy}}).dump() << "\n";
  return kExitOk;
}

// ---- stats ---------------------------------------------------------------

struct StatsOptions {
  std::vector<std::string> data;
  std::string event;
  std::vector<std::string> labels;
  std::string out;
};

std::vector<Label> selected_labels(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllLabels.begin(), kAllLabels.end()};
  std::vector<Label> out;
  for (const auto& n : names) {
    const auto l = parse_label(n);
    if (!l) usage_fail("unknown label '", n, "'");
    out.push_back(*l);
  }
  return out;
}

int cmd_stats_ecdf(const StatsOptions& o) {
  const auto threads = read_threads(o.data, true);
  const auto labels = selected_labels(o.labels);
  const DelaysByLabel delays = delays_by_label(threads, o.event);
  std::ostringstream out;
  out.precision(17);
  out << "delay\tF\tlabel\n";
  for (Label l : kAllLabels) {
    const auto& s = delays[static_cast<std::size_t>(l)];
    if (s.empty() || std::find(labels.begin(), labels.end(), l) == labels.end()) continue;
    for (const auto& p : ecdf(s)) out << p.x << "\t" << p.f << "\t" << to_string(l) << "\n";
  }
  emit(o.out, out.str());
  return kExitOk;
}

int cmd_stats_adtest(const StatsOptions& o) {
  const auto threads = read_threads(o.data, true);
  const EventAnalysis a = analyze_event(threads, o.event, selected_labels(o.labels));
  json j = ad_to_json(a.test);
  json labels = json::array(), sizes = json::object();
  const DelaysByLabel delays = delays_by_label(threads, o.event);
  for (Label l : a.labels) {
    labels.push_back(std::string(to_string(l)));
    sizes[std::string(to_string(l))] = delays[static_cast<std::size_t>(l)].size();
  }
  j["event"] = o.event.empty() ? json(nullptr) : json(o.event);
  j["labels"] = labels;
  j["sample_sizes"] = sizes;
  j["reject_at_0.05"] = a.test.rejects(0.05);
  emit(o.out, j.dump(2) + "\n");
  return kExitOk;
}

// ---- synth ---------------------------------------------------------------

struct SynthOptions {
  SynthConfig config;
  std::string out;
  std::string label_a = "TR";
  std::string label_b = "FR";
};

int cmd_synth(SynthOptions o) {
  const auto a = parse_label(o.label_a), b = parse_label(o.label_b);
  if (!a || !b || *a == *b) usage_fail("--label-a and --label-b must be two different labels");
  o.config.label_a = *a;
  o.config.label_b = *b;
  std::vector<ThreadRecord> threads;
  try {
    threads = generate_synth(o.config);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::string jsonl;
  for (const auto& t : threads) jsonl += thread_to_json(t).dump() + "\n";
  emit(o.out, jsonl);
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Coding-tree rumor detection: propagation trees, structural entropy, recursive classifier"};
  app.require_subcommand(1);
  int rc = kExitOk;

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "parse JSONL threads; write propagation trees and an audit");
  add_config_options(c_ingest, ingest.config);
  c_ingest->add_option("inputs", ingest.inputs, "JSONL thread files")->required();
  c_ingest->add_option("-o,--out", ingest.out, "output directory")->required();
  c_ingest->callback([&] { rc = cmd_ingest(ingest); });

  EncodeOptions encode;
  auto* c_encode = app.add_subcommand("encode", "build a height-K coding tree per propagation tree");
  add_config_options(c_encode, encode.config);
  c_encode->add_option("--trees", encode.trees, "directory of propagation-tree JSON files")->required();
  c_encode->add_option("-o,--out", encode.out, "output directory")->required();
  c_encode->callback([&] { rc = cmd_encode(encode); });

  AuditOptions audit;
  auto* c_entropy = app.add_subcommand("entropy", "structural entropy tools");
  c_entropy->require_subcommand(1);
  auto* c_audit = c_entropy->add_subcommand("audit", "recompute structural entropies");
  add_config_options(c_audit, audit.config);
  c_audit->add_option("--trees", audit.trees, "directory of propagation-tree JSON files")->required();
  c_audit->add_option("--coding", audit.coding, "directory of coding-tree JSON files to check");
  c_audit->add_option("-o,--out", audit.out, "output TSV (default stdout)");
  c_audit->callback([&] { rc = cmd_entropy_audit(audit); });

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "train and score (leave-one-event-out or fixed files)");
  add_config_options(c_train, train.config);
  c_train->add_option("--data", train.data, "JSONL threads for leave-one-event-out");
  c_train->add_option("--train", train.train_files, "JSONL training threads for fixed_files");
  c_train->add_option("--test", train.test_files, "JSONL test threads for fixed_files");
  c_train->add_option("--coding", train.coding, "use coding trees from this directory");
  c_train->add_option("--deadline", train.deadline, "score on posts within this many seconds of the claim");
  c_train->add_option("-o,--out", train.out, "output directory")->required();
  c_train->callback([&] { rc = cmd_train(train); });

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "score a checkpoint on labelled threads");
  c_eval->add_option("--model", eval.model, "checkpoint written by train")->required();
  c_eval->add_option("--data", eval.data, "JSONL threads")->required();
  c_eval->add_option("--deadline", eval.deadline, "keep posts within this many seconds of the claim");
  c_eval->add_option("-o,--out", eval.out, "output directory")->required();
  c_eval->callback([&] { rc = cmd_eval(eval); });

  StatsOptions ecdf_opts, ad_opts;
  auto* c_stats = app.add_subcommand("stats", "reply-delay statistics");
  c_stats->require_subcommand(1);
  auto* c_ecdf = c_stats->add_subcommand("ecdf", "per-label ECDF of reply delays as TSV");
  auto* c_ad = c_stats->add_subcommand("adtest", "k-sample Anderson-Darling test across labels as JSON");
  for (auto [cmd, opts] : {std::pair{c_ecdf, &ecdf_opts}, std::pair{c_ad, &ad_opts}}) {
    cmd->add_option("--data", opts->data, "JSONL threads")->required();
    cmd->add_option("--event", opts->event, "restrict to one event (default: all threads)");
    cmd->add_option("--labels", opts->labels, "labels to compare, e.g. --labels TR FR");
    cmd->add_option("-o,--out", opts->out, "output file (default stdout)");
  }
  c_ecdf->callback([&] { rc = cmd_stats_ecdf(ecdf_opts); });
  c_ad->callback([&] { rc = cmd_stats_adtest(ad_opts); });

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "generate paired synthetic threads differing only in reply delays");
  c_synth->add_option("--threads", synth.config.threads, "number of threads (even)");
  c_synth->add_option("--min-posts", synth.config.min_posts, "fewest posts per thread");
  c_synth->add_option("--max-posts", synth.config.max_posts, "most posts per thread");
  c_synth->add_option("--rate-a", synth.config.rate_a, "reply-delay rate of the first class, 1/s");
  c_synth->add_option("--rate-b", synth.config.rate_b, "reply-delay rate of the second class, 1/s");
  c_synth->add_option("--label-a", synth.label_a, "label of the first class");
  c_synth->add_option("--label-b", synth.label_b, "label of the second class");
  c_synth->add_option("--events", synth.config.events, "number of events");
  c_synth->add_option("--vocabulary", synth.config.vocabulary, "distinct words in post texts");
  c_synth->add_option("--seed", synth.config.seed, "random seed");
  c_synth->add_option("-o,--out", synth.out, "output JSONL (default stdout)");
  c_synth->callback([&] { rc = cmd_synth(synth); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return rc;
}

}  // namespace
}  // namespace etrees::cli

int main(int argc, char** argv) { return etrees::cli::run(argc, argv); }
