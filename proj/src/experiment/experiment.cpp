#include "mose/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace mose {

// ---------------------------------------------------------------- methods

MethodSpec parse_method(const std::string& name, int W, int default_w, int baseline_grad_steps) {
  static const std::regex re(R"(^(mose|causal-mose|window)(?:\((\d+|full)\))?$)");
  MethodSpec m;
  m.grad_steps = baseline_grad_steps;
  if (name == "dag") {
    m.mode = FeatureMode::dag();
    return m;
  }
  if (name == "reward-parents") {
    m.mode = FeatureMode::reward_parents();
    return m;
  }
  std::smatch match;
  if (!std::regex_match(name, match, re)) throw std::invalid_argument("unknown method '" + name + "'");
  const std::string head = match[1];
  int order = default_w;
  if (match[2].matched)
    order = match[2] == "full" ? W - 1 : std::stoi(match[2]);
  else if (head == "window")
    throw std::invalid_argument("window needs an order, e.g. window(0)");
  if (order < 0 || order > W - 1)
    throw std::invalid_argument(name + ": order " + std::to_string(order) + " outside [0, " + std::to_string(W - 1) +
                                "]");
  if (head == "window") {
    m.mode = FeatureMode::window(order);
  } else {
    m.kind = head == "mose" ? MethodKind::Mose : MethodKind::CausalMose;
    m.w = order;
  }
  return m;
}

std::string method_name(const MethodSpec& m) {
  switch (m.kind) {
    case MethodKind::Mose: return "mose(" + std::to_string(m.w) + ")";
    case MethodKind::CausalMose: return "causal-mose(" + std::to_string(m.w) + ")";
    case MethodKind::Baseline: return mode_name(m.mode);
  }
  return "?";
}

// ---------------------------------------------------------------- config

std::vector<MethodSpec> ExperimentConfig::resolved_methods() const {
  std::vector<MethodSpec> out;
  for (const auto& name : methods) out.push_back(parse_method(name, W, mose_order(), baseline_grad_steps()));
  return out;
}

void check_config(const ExperimentConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  need(c.m >= 1, "m must be >= 1");
  need(c.T >= 0, "T must be >= 0");
  need(c.W >= 1, "W must be >= 1");
  need(c.density >= 0.0 && c.density <= 1.0, "density must lie in [0, 1]");
  need(c.mose_order() >= 0 && c.mose_order() <= c.W - 1, "w must lie in [0, W-1]");
  need(c.episodes >= 1, "episodes must be >= 1");
  need(c.instances >= 1 && c.repetitions >= 1, "instances and repetitions must be >= 1");
  need(c.threads >= 1, "threads must be >= 1");
  need(c.smoothing >= 1 && c.final_window >= 1, "smoothing and final_window must be >= 1");
  need(!c.methods.empty(), "no methods requested");
  try {
    family_from_name(c.family);
  } catch (const std::exception& e) {
    throw std::invalid_argument(e.what());
  }
  std::set<std::string> seen;
  for (const auto& m : c.resolved_methods())
    need(seen.insert(method_name(m)).second, "method " + method_name(m) + " requested twice");
  const auto& a = c.agent;
  need(a.hidden >= 1 && a.hidden_layers >= 0 && a.batch >= 1, "bad network or batch size");
  need(a.replay_capacity >= c.T + 1, "replay must hold an episode");
  need(a.target_interval >= 1, "target_interval must be >= 1");
  need(a.eps_start >= 0 && a.eps_start <= 1 && a.eps_end >= 0 && a.eps_end <= 1, "epsilon outside [0, 1]");
}

Json config_to_json(const ExperimentConfig& c) {
  return Json{{"family", c.family},
              {"m", c.m},
              {"T", c.T},
              {"W", c.W},
              {"density", c.density},
              {"w", c.w},
              {"mose_order", c.mose_order()},
              {"methods", c.methods},
              {"episodes", c.episodes},
              {"instances", c.instances},
              {"repetitions", c.repetitions},
              {"seed", c.seed},
              {"output", c.output.string()},
              {"matched_grad_steps", c.matched_grad_steps},
              {"baseline_grad_steps", c.baseline_grad_steps()},
              {"threads", c.threads},
              {"save_checkpoints", c.save_checkpoints},
              {"smoothing", c.smoothing},
              {"final_window", c.final_window},
              {"agent", agent_config_to_json(c.agent)}};
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "family") c.family = v.get<std::string>();
      else if (key == "m") c.m = v.get<int>();
      else if (key == "T") c.T = v.get<int>();
      else if (key == "W") c.W = v.get<int>();
      else if (key == "density") c.density = v.get<double>();
      else if (key == "w") c.w = v.get<int>();
      else if (key == "methods") c.methods = v.get<std::vector<std::string>>();
      else if (key == "episodes") c.episodes = v.get<long>();
      else if (key == "instances") c.instances = v.get<int>();
      else if (key == "repetitions") c.repetitions = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "output") c.output = v.get<std::string>();
      else if (key == "matched_grad_steps") c.matched_grad_steps = v.get<bool>();
      else if (key == "threads") c.threads = v.get<int>();
      else if (key == "save_checkpoints") c.save_checkpoints = v.get<bool>();
      else if (key == "smoothing") c.smoothing = v.get<int>();
      else if (key == "final_window") c.final_window = v.get<long>();
      else if (key == "agent") c.agent = agent_config_from_json(v);
      else if (key == "mose_order" || key == "baseline_grad_steps") continue;  // derived, written for readers
      else throw std::invalid_argument("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------- seeds

namespace {

std::uint64_t derive(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace

CellSeeds cell_seeds(std::uint64_t base, int instance, int repetition) {
  const auto i = static_cast<std::uint64_t>(instance), r = static_cast<std::uint64_t>(repetition);
  return {derive({base, 1, i}), derive({base, 2, i}), derive({base, 3, i, r})};
}

std::uint64_t episode_seed(std::uint64_t agent_seed, long episode) {
  return derive({agent_seed, 4, static_cast<std::uint64_t>(episode)});
}

// ---------------------------------------------------------------- cells

CellResult run_cell(const ExperimentConfig& c, const MethodSpec& method, int instance, int repetition,
                    const std::filesystem::path& checkpoint) {
  CellResult r;
  r.method = method_name(method);
  r.instance = instance;
  r.repetition = repetition;
  r.seeds = cell_seeds(c.seed, instance, repetition);
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto graph = generate_random_graph({c.m, c.T, c.W, c.density}, r.seeds.graph);
    const auto spec = sample_spec(graph, family_from_name(c.family), r.seeds.spec);
    Environment env(spec);
    AgentConfig ac = c.agent;
    ac.w_max = c.W - 1;
    ac.total_episodes = c.episodes;
    Agent agent(ac, c.m, c.T, spec.action_arity, &graph, r.seeds.agent);
    r.rewards.reserve(c.episodes);
    for (long e = 0; e < c.episodes; ++e) {
      const auto es = episode_seed(r.seeds.agent, e);
      r.rewards.push_back(method.kind == MethodKind::Baseline
                              ? agent.train_episode_baseline(env, method.mode, method.grad_steps, e, es)
                              : agent.train_episode_mose(env, method.w, method.kind == MethodKind::CausalMose, e, es));
    }
    if (!checkpoint.empty()) agent.save(checkpoint);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ---------------------------------------------------------------- summary

Summary summarize(const RewardTable& rows, long final_window, int smoothing) {
  Summary s;
  std::map<std::string, std::vector<const std::vector<double>*>> by_method;
  for (const auto& [key, rewards] : rows) {
    if (rewards.empty()) continue;
    by_method[std::get<0>(key)].push_back(&rewards);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(final_window), rewards.size());
    double tail = 0.0;
    for (std::size_t e = rewards.size() - k; e < rewards.size(); ++e) tail += rewards[e];
    s.cell_final[key] = tail / static_cast<double>(k);
  }
  for (const auto& [name, series] : by_method) {
    MethodSummary ms;
    ms.cells = series.size();
    std::size_t len = series.front()->size();
    for (const auto* r : series) len = std::min(len, r->size());
    ms.curve.assign(len, 0.0);
    for (const auto* r : series)
      for (std::size_t e = 0; e < len; ++e) ms.curve[e] += (*r)[e];
    for (auto& v : ms.curve) v /= static_cast<double>(series.size());
    double running = 0.0, total = 0.0;
    ms.smoothed.resize(len);
    for (std::size_t e = 0; e < len; ++e) {
      running += ms.curve[e];
      if (e >= static_cast<std::size_t>(smoothing)) running -= ms.curve[e - smoothing];
      ms.smoothed[e] = running / static_cast<double>(std::min<std::size_t>(e + 1, smoothing));
      total += ms.curve[e];
    }
    ms.overall_mean = total / static_cast<double>(len);
    std::vector<double> finals;
    for (const auto& [key, v] : s.cell_final)
      if (std::get<0>(key) == name) finals.push_back(v);
    const auto st = size_stats_from_means(finals);
    ms.final_mean = st.mean;
    ms.final_ci_low = st.ci95_low;
    ms.final_ci_high = st.ci95_high;
    s.methods[name] = std::move(ms);
  }
  return s;
}

Json summary_to_json(const Summary& s, long final_window, int smoothing) {
  Json methods = Json::object();
  for (const auto& [name, m] : s.methods)
    methods[name] = {{"cells", m.cells},
                     {"final_mean", m.final_mean},
                     {"final_ci95", {m.final_ci_low, m.final_ci_high}},
                     {"overall_mean", m.overall_mean},
                     {"episodes", m.curve.size()}};
  Json cells = Json::array();
  for (const auto& [key, v] : s.cell_final)
    cells.push_back({{"method", std::get<0>(key)},
                     {"instance", std::get<1>(key)},
                     {"repetition", std::get<2>(key)},
                     {"final_mean", v}});
  return {{"final_window", final_window},
          {"smoothing", smoothing},
          {"ci", "normal approximation over per-cell final means"},
          {"methods", methods},
          {"cells", cells}};
}

double summary_distance(const Summary& a, const Summary& b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (a.methods.size() != b.methods.size() || a.cell_final.size() != b.cell_final.size()) return inf;
  double worst = 0.0;
  auto track = [&](double x, double y) { worst = std::max(worst, std::abs(x - y)); };
  for (const auto& [name, m] : a.methods) {
    const auto it = b.methods.find(name);
    if (it == b.methods.end() || it->second.curve.size() != m.curve.size()) return inf;
    const auto& o = it->second;
    if (o.cells != m.cells) return inf;
    track(m.final_mean, o.final_mean);
    track(m.final_ci_low, o.final_ci_low);
    track(m.final_ci_high, o.final_ci_high);
    track(m.overall_mean, o.overall_mean);
    for (std::size_t e = 0; e < m.curve.size(); ++e) {
      track(m.curve[e], o.curve[e]);
      track(m.smoothed[e], o.smoothed[e]);
    }
  }
  for (const auto& [key, v] : a.cell_final) {
    const auto it = b.cell_final.find(key);
    if (it == b.cell_final.end()) return inf;
    track(v, it->second);
  }
  return worst;
}

// ---------------------------------------------------------------- CSV

void write_reward_rows(std::ostream& os, const CellResult& r) {
  const std::string prefix = r.method + "," + std::to_string(r.instance) + "," + std::to_string(r.repetition) + "," +
                             std::to_string(r.seeds.graph) + "," + std::to_string(r.seeds.spec) + "," +
                             std::to_string(r.seeds.agent) + ",";
  char buf[64];
  for (std::size_t e = 0; e < r.rewards.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, r.rewards[e]);
    os << prefix << buf;
  }
}

RewardTable read_reward_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kRewardCsvHeader) throw std::runtime_error("unexpected reward CSV header");
  RewardTable table;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw std::runtime_error("reward CSV line " + std::to_string(lineno) + " has " +
                                                std::to_string(f.size()) + " fields");
    auto& series = table[{f[0], std::stoi(f[1]), std::stoi(f[2])}];
    if (std::stoul(f[6]) != series.size())
      throw std::runtime_error("reward CSV line " + std::to_string(lineno) + " breaks the episode order");
    series.push_back(std::stod(f[7]));
  }
  return table;
}

// ---------------------------------------------------------------- runner

std::size_t ExperimentRecord::failed_cells() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.error.empty(); }));
}

namespace {

std::string file_stem(std::string name) {
  for (auto& ch : name)
    if (ch == '(' || ch == ')') ch = '_';
  return name;
}

}  // namespace

ExperimentRecord run_experiment(const ExperimentConfig& config, bool write,
                                const std::function<void(const CellResult&)>& progress) {
  check_config(config);
  const auto methods = config.resolved_methods();
  struct Job {
    std::size_t method;
    int instance, repetition;
  };
  std::vector<Job> jobs;
  for (int i = 0; i < config.instances; ++i)
    for (int r = 0; r < config.repetitions; ++r)
      for (std::size_t k = 0; k < methods.size(); ++k) jobs.push_back({k, i, r});

  ExperimentRecord rec;
  rec.config = config;
  rec.cells.resize(jobs.size());

  std::ofstream csv;
  if (write) {
    std::filesystem::create_directories(config.output);
    write_text_file(config.output / "config.json", config_to_json(config).dump(2) + "\n");
    csv.open(config.output / "rewards.csv");
    if (!csv) throw std::runtime_error("cannot write " + (config.output / "rewards.csv").string());
    csv << kRewardCsvHeader << "\n";
  }

  std::mutex writer;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) {
      const auto& job = jobs[k];
      std::filesystem::path ckpt;
      if (write && config.save_checkpoints)
        ckpt = config.output / "checkpoints" /
               (file_stem(method_name(methods[job.method])) + "_i" + std::to_string(job.instance) + "_r" +
                std::to_string(job.repetition) + ".bin");
      auto result = run_cell(config, methods[job.method], job.instance, job.repetition, ckpt);
      const std::lock_guard lock(writer);
      if (write && result.error.empty()) {
        write_reward_rows(csv, result);
        csv.flush();
      }
      if (progress) progress(result);
      rec.cells[k] = std::move(result);
    }
  };
  const int n_threads = std::min<int>(config.threads, static_cast<int>(jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  RewardTable table;
  for (const auto& c : rec.cells) {
    rec.method_seconds[c.method] += c.seconds;
    if (c.error.empty()) table[{c.method, c.instance, c.repetition}] = c.rewards;
  }
  rec.summary = summarize(table, config.final_window, config.smoothing);

  if (write) {
    auto j = summary_to_json(rec.summary, config.final_window, config.smoothing);
    j["method_seconds"] = rec.method_seconds;
    Json failed = Json::array();
    for (const auto& c : rec.cells)
      if (!c.error.empty())
        failed.push_back({{"method", c.method}, {"instance", c.instance}, {"repetition", c.repetition}, {"error", c.error}});
    j["failed_cells"] = failed;
    write_text_file(config.output / "summary.json", j.dump(2) + "\n");
    std::ostringstream curves;
    curves << "method,episode,mean_reward,smoothed_reward\n";
    char buf[96];
    for (const auto& [name, m] : rec.summary.methods)
      for (std::size_t e = 0; e < m.curve.size(); ++e) {
        std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g\n", e, m.curve[e], m.smoothed[e]);
        curves << name << buf;
      }
    write_text_file(config.output / "curves.csv", curves.str());
  }
  return rec;
}

// ---------------------------------------------------------------- nodes per state

Table1Row table1_row(const GraphGenParams& p, int n_graphs, std::uint64_t seed) {
  if (n_graphs < 1) throw std::domain_error("need at least one graph");
  std::vector<double> means;
  for (int k = 0; k < n_graphs; ++k)
    means.push_back(mean_state_size(construct_minimal_states(generate_random_graph(p, derive({seed, 5, static_cast<std::uint64_t>(k)})))));
  return {p.order, p.density, size_stats_from_means(means)};
}

Calibration calibrate_density(GraphGenParams p, int n_graphs, std::uint64_t seed, double lo, double hi,
                              int max_iterations) {
  if (!(lo <= hi)) throw std::domain_error("empty calibration band");
  double a = 0.0, b = 1.0;
  Calibration c;
  for (c.iterations = 1; c.iterations <= max_iterations; ++c.iterations) {
    p.density = 0.5 * (a + b);
    c.row = table1_row(p, n_graphs, seed);
    c.density = p.density;
    const double mean = c.row.stats.mean;
    if (mean >= lo && mean <= hi) {
      c.hit = true;
      return c;
    }
    (mean < lo ? a : b) = p.density;
  }
  c.iterations = max_iterations;
  return c;
}

}  // namespace mose
