// SPDX-License-Identifier: Apache-2.0
#include "daggru/studies.hpp"

#include <algorithm>
#include <cctype>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace daggru {

using nlohmann::json;

ScoreTable aggregate(std::span<const RunResult> runs) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_model;
  for (const auto& r : runs) {
    auto [it, inserted] = by_model.try_emplace(r.model);
    if (inserted) order.push_back(r.model);
    it->second.first.push_back(r.dev_f1);
    it->second.second.push_back(r.test_f1);
  }
  ScoreTable table;
  for (const auto& name : order) {
    const auto& [dev, test] = by_model.at(name);
    ScoreRow row;
    row.model = name;
    row.dev_mean = summarize(dev).mean;
    row.test = summarize(test);
    table.push_back(std::move(row));
  }
  return table;
}

namespace {

struct Job {
  const NamedModel* model;
  const CorpusSplit* split;
  std::string split_id;
  std::uint64_t seed;
  std::string study;
};

std::string checkpoint_name(const Job& job) {
  std::string name = job.model->name + "-seed" + std::to_string(job.seed) + "-" + job.split_id;
  for (auto& c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return name + ".ckpt.json";
}

StudyOutput run_jobs(const Corpus& corpus, const std::vector<Job>& jobs, const TrainConfig& base,
                     const StudyOptions& options) {
  std::vector<std::optional<RunResult>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      TrainConfig config = base;
      config.seed = job.seed;
      TrainOptions topts;
      topts.model_name = job.model->name;
      topts.split_id = job.split_id;
      try {
        TrainOutput out = train(corpus, *job.split, job.model->config, config, topts);
        out.result.study = job.study;
        if (!options.checkpoint_dir.empty()) {
          const auto path =
              (std::filesystem::path(options.checkpoint_dir) / checkpoint_name(job)).string();
          save_checkpoint(out.best, path);
          out.result.checkpoint = path;
        }
        results[i] = std::move(out.result);
        if (options.on_run) {
          std::lock_guard lock(callback_mutex);
          options.on_run(*results[i]);
        }
      } catch (const TrainingDiverged& e) {
        errors[i] = job.model->name + " split " + job.split_id + ": " + e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(options.jobs, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  StudyOutput out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (results[i]) {
      out.runs.push_back(std::move(*results[i]));
    } else if (!errors[i].empty()) {
      out.failures.push_back(errors[i]);
    }
  }
  out.table = aggregate(out.runs);
  return out;
}

}  // namespace

StudyOutput seed_study(const Corpus& corpus, const CorpusSplit& split, const NamedModel& model,
                       const TrainConfig& config, std::size_t n_seeds,
                       const StudyOptions& options) {
  if (n_seeds < 2) throw std::invalid_argument("seed_study: n_seeds must be >= 2");
  std::vector<Job> jobs;
  for (std::uint64_t s = 1; s <= n_seeds; ++s) jobs.push_back(Job{&model, &split, "standard", s, "seed"});
  return run_jobs(corpus, jobs, config, options);
}

StudyOutput split_study(const Corpus& corpus, const std::vector<NamedModel>& models,
                        const TrainConfig& config, std::size_t n_splits, SplitCounts counts,
                        const StudyOptions& options) {
  if (n_splits < 1) throw std::invalid_argument("split_study: n_splits must be >= 1");
  if (models.empty()) throw std::invalid_argument("split_study: no models");
  std::vector<CorpusSplit> splits;
  for (std::uint64_t s = 1; s <= n_splits; ++s) splits.push_back(random_split(corpus, s, counts));
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < splits.size(); ++s)
    for (const auto& m : models)
      jobs.push_back(Job{&m, &splits[s], "split-" + std::to_string(s + 1), config.seed, "split"});
  return run_jobs(corpus, jobs, config, options);
}

std::string to_json_line(const RunResult& r) {
  json trace = json::array();
  for (const auto& e : r.trace) {
    trace.push_back(json{{"epoch", e.epoch},
                         {"lr", e.lr},
                         {"train_loss", e.train_loss},
                         {"dev_f1", e.dev_f1},
                         {"grad_norm", e.grad_norm}});
  }
  const json j{{"model", r.model},       {"study", r.study},           {"seed", r.seed},
               {"split_id", r.split_id}, {"best_epoch", r.best_epoch}, {"epochs_run", r.epochs_run},
               {"dev_f1", r.dev_f1},     {"test_f1", r.test_f1},       {"trace", std::move(trace)},
               {"checkpoint", r.checkpoint}};
  return j.dump();
}

RunResult run_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  RunResult r;
  r.model = j.at("model").get<std::string>();
  r.study = j.value("study", std::string());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.split_id = j.value("split_id", std::string());
  r.best_epoch = j.value("best_epoch", 0);
  r.epochs_run = j.value("epochs_run", 0);
  r.dev_f1 = j.at("dev_f1").get<double>();
  r.test_f1 = j.at("test_f1").get<double>();
  if (j.contains("trace")) {
    for (const auto& e : j.at("trace")) {
      r.trace.push_back(EpochTrace{e.at("epoch").get<int>(), e.at("lr").get<double>(),
                                   e.at("train_loss").get<double>(), e.at("dev_f1").get<double>(),
                                   e.at("grad_norm").get<double>()});
    }
  }
  r.checkpoint = j.value("checkpoint", std::string());
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(r.dev_f1) || !in_unit(r.test_f1)) throw std::runtime_error("ledger: F1 outside [0, 1]");
  if (r.best_epoch > r.epochs_run) throw std::runtime_error("ledger: best_epoch exceeds epochs_run");
  return r;
}

void append_ledger(const std::string& path, std::span<const RunResult> runs) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot open ledger '" + path + "' for append");
  for (const auto& r : runs) out << to_json_line(r) << '\n';
}

std::vector<RunResult> load_ledger(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ledger '" + path + "'");
  std::vector<RunResult> runs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      runs.push_back(run_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed run: " + e.what());
    }
  }
  return runs;
}

std::vector<BootstrapRow> bootstrap_by_model(std::span<const RunResult> runs, std::size_t k,
                                             std::size_t reps, std::uint64_t seed) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<ScorePair>> pairs;
  for (const auto& r : runs) {
    auto [it, inserted] = pairs.try_emplace(r.model);
    if (inserted) order.push_back(r.model);
    it->second.push_back(ScorePair{r.dev_f1, r.test_f1});
  }
  std::vector<BootstrapRow> rows;
  for (const auto& name : order) {
    rows.push_back(BootstrapRow{name, bootstrap_selection(pairs.at(name), k, reps, seed)});
  }
  return rows;
}

namespace {

std::string pct(double fraction, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f%%", decimals, 100.0 * fraction);
  return buf;
}

std::string num(double fraction, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, 100.0 * fraction);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

using Grid = std::vector<std::vector<std::string>>;

Grid table_grid(const ScoreTable& table, TableKind kind) {
  Grid g;
  if (kind == TableKind::SeedStudy) {
    g.push_back({"Model", "Dev Mean", "Mean", "Min", "Max", "Std. Dev.", "Published"});
  } else {
    g.push_back({"Method", "Dev Mean", "Mean", "Min", "Max", "Std. Dev."});
  }
  for (const auto& r : table) {
    std::vector<std::string> row{r.model, pct(r.dev_mean, 1),
                                 pct(r.test.mean, 1) + " ± " + num(r.test.ci, 2),
                                 pct(r.test.min, 1), pct(r.test.max, 1), pct(r.test.std_dev, 2)};
    if (kind == TableKind::SeedStudy) row.push_back("-");
    g.push_back(std::move(row));
  }
  return g;
}

Grid bootstrap_grid(std::span<const BootstrapRow> rows) {
  Grid g{{"Model", "Dev Mean", "Mean", "Std. Dev."}};
  for (const auto& r : rows) {
    g.push_back({r.model, pct(r.result.dev_mean, 1),
                 pct(r.result.test_mean, 1) + " ± " + pct(r.result.ci, 2),
                 pct(r.result.test_std, 2)});
  }
  return g;
}

std::string grid_csv(const Grid& g) {
  std::ostringstream os;
  for (const auto& row : g) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(row[i]);
    os << '\n';
  }
  return os.str();
}

/// Display width in code points (the ± sign is two bytes in UTF-8).
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string grid_text(const Grid& g) {
  std::vector<std::size_t> width;
  for (const auto& row : g) {
    width.resize(std::max(width.size(), row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_width(row[i]));
  }
  std::ostringstream os;
  auto rule = [&] {
    for (std::size_t i = 0; i < width.size(); ++i) os << '+' << std::string(width[i] + 2, '-');
    os << "+\n";
  };
  rule();
  for (std::size_t r = 0; r < g.size(); ++r) {
    for (std::size_t i = 0; i < g[r].size(); ++i) {
      os << "| " << g[r][i] << std::string(width[i] - display_width(g[r][i]) + 1, ' ');
    }
    os << "|\n";
    if (r == 0) rule();
  }
  rule();
  return os.str();
}

const char* caption(TableKind kind) {
  switch (kind) {
    case TableKind::SeedStudy: return "Statistics over random initializations.";
    case TableKind::Bootstrap: return "Bootstrap estimates after dev-score model selection.";
    case TableKind::SplitStudy: return "Average results over randomized splits.";
  }
  return "";
}

}  // namespace

std::string render_csv(const ScoreTable& table, TableKind kind) {
  return grid_csv(table_grid(table, kind));
}

std::string render_text(const ScoreTable& table, TableKind kind) {
  return grid_text(table_grid(table, kind)) + caption(kind) + "\n";
}

std::string render_bootstrap_csv(std::span<const BootstrapRow> rows) {
  return grid_csv(bootstrap_grid(rows));
}

std::string render_bootstrap_text(std::span<const BootstrapRow> rows) {
  std::string text = grid_text(bootstrap_grid(rows)) + caption(TableKind::Bootstrap);
  if (!rows.empty()) {
    text += " (k = " + std::to_string(rows.front().result.k) +
            ", reps = " + std::to_string(rows.front().result.reps) + ")";
  }
  return text + "\n";
}

std::string render_runs_text(std::span<const RunResult> runs) {
  Grid g{{"Model", "Split", "Seed", "Best Epoch", "Dev F1", "Test F1"}};
  for (const auto& r : runs) {
    g.push_back({r.model, r.split_id, std::to_string(r.seed), std::to_string(r.best_epoch),
                 pct(r.dev_f1, 1), pct(r.test_f1, 1)});
  }
  return grid_text(g);
}

}  // namespace daggru
