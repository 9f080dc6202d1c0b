#include "repmtl/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "repmtl/io.hpp"
#include "repmtl/losses.hpp"
#include "repmtl/mtl.hpp"
#include "repmtl/rank.hpp"
#include "repmtl/simbench.hpp"
#include "repmtl/stiefel.hpp"
#include "repmtl/tl.hpp"

namespace repmtl::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Read-only view of one JSON object that rejects keys outside `allowed`.
// A null value counts as absent.
class Fields {
 public:
  Fields(const json& j, std::string where, std::set<std::string> allowed)
      : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected a JSON object");
    for (const auto& item : j_.items()) {
      if (!allowed.contains(item.key())) fail("unknown key '" + item.key() + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const std::string& key) const { return j_.at(key); }
  std::string at(const std::string& key) const { return where_ + "." + key; }

  [[noreturn]] void fail(const std::string& msg) const { throw InputError(where_ + ": " + msg); }

  double number(const std::string& key) const {
    if (!has(key)) fail("missing required key '" + key + "'");
    if (!j_.at(key).is_number()) throw InputError(at(key) + ": expected a number");
    return j_.at(key).get<double>();
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  std::optional<double> maybe_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  long long integer(const std::string& key) const {
    if (!has(key)) fail("missing required key '" + key + "'");
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw InputError(at(key) + ": expected an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::string string(const std::string& key) const {
    if (!has(key)) fail("missing required key '" + key + "'");
    if (!j_.at(key).is_string()) throw InputError(at(key) + ": expected a string");
    return j_.at(key).get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw InputError(at(key) + ": expected true or false");
    return j_.at(key).get<bool>();
  }

 private:
  const json& j_;
  std::string where_;
};

struct LoadedConfig {
  json doc;
  fs::path dir;  // relative paths in the config resolve against this
};

LoadedConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open config");
  LoadedConfig out;
  try {
    out.doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": malformed JSON: " + e.what());
  }
  out.dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return out;
}

fs::path resolve(const LoadedConfig& cfg, const std::string& p) {
  const fs::path raw(p);
  return raw.is_absolute() ? raw : cfg.dir / raw;
}

fs::path output_dir(const Invocation& inv, const LoadedConfig& cfg, const Fields& top) {
  if (inv.out) return *inv.out;
  if (top.has("output_dir")) return resolve(cfg, top.string("output_dir"));
  throw InputError("no output directory: pass --out or set output_dir");
}

// Wraps library validation so that a bad value is reported as bad input.
template <class F>
void check(const std::string& where, F&& fn) {
  try {
    fn();
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(where + ": " + e.what());
  }
}

ModelFamily family_from(const Fields& f, const std::string& fallback = "linear") {
  const std::string name = f.string("family", fallback);
  try {
    return ModelFamily::from_name(name);
  } catch (const Error&) {
    throw InputError(f.at("family") + ": unknown family '" + name + "'");
  }
}

void read_mtl_controls(const json& j, const std::string& where, MtlConfig& cfg) {
  const Fields f(j, where,
                 {"max_outer_iters", "tol", "riemannian_step", "riemannian_substeps"});
  cfg.max_outer_iters = static_cast<int>(f.integer("max_outer_iters", cfg.max_outer_iters));
  cfg.tol = f.number("tol", cfg.tol);
  cfg.riemannian_step = f.number("riemannian_step", cfg.riemannian_step);
  cfg.riemannian_substeps =
      static_cast<int>(f.integer("riemannian_substeps", cfg.riemannian_substeps));
}

RankConfig read_rank(const json& j, const std::string& where) {
  const Fields f(j, where, {"t1", "t2", "radius", "r_bar"});
  RankConfig rc;
  rc.threshold_t1 = f.number("t1", rc.threshold_t1);
  rc.threshold_t2 = f.number("t2", rc.threshold_t2);
  rc.radius = f.number("radius", rc.radius);
  rc.r_bar = f.maybe_number("r_bar");
  check(where, [&] { rc.validate(); });
  return rc;
}

std::vector<TaskData> read_tasks(const LoadedConfig& cfg, const Fields& top,
                                 std::vector<std::string>& names) {
  if (!top.has("tasks") || !top.raw("tasks").is_array() || top.raw("tasks").empty()) {
    throw InputError(top.at("tasks") + ": expected a non-empty array of CSV paths");
  }
  std::vector<TaskData> tasks;
  for (const auto& entry : top.raw("tasks")) {
    if (!entry.is_string()) throw InputError(top.at("tasks") + ": expected strings");
    names.push_back(entry.get<std::string>());
    tasks.push_back(read_task_csv(resolve(cfg, names.back())));
    if (tasks.back().p() != tasks.front().p()) {
      throw InputError(names.back() + ": has p = " + std::to_string(tasks.back().p()) +
                       ", expected " + std::to_string(tasks.front().p()));
    }
  }
  return tasks;
}

double smallest_n(std::span<const TaskData> tasks) {
  Eigen::Index n = tasks.front().n();
  for (const auto& t : tasks) n = std::min(n, t.n());
  return static_cast<double>(n);
}

json profile_json(const RankProfile& prof) {
  json j;
  j["singular_values"] = to_json(prof.singular_values);
  j["threshold"] = prof.threshold;
  j["r_hat"] = prof.r_hat ? json(*prof.r_hat) : json(nullptr);
  return j;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string h_label(double h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "h_%g", h);
  return buf;
}

// Runs a command body and maps exceptions to exit codes.
template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const NoRankDetected& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNoRank;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace

unsigned resolve_threads(std::optional<unsigned> flag) {
  unsigned k = 1;
  if (flag) {
    k = *flag;
  } else if (const char* env = std::getenv("REPMTL_THREADS"); env && *env) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0') k = static_cast<unsigned>(v);
  }
  if (k == 0) k = std::max(1u, std::thread::hardware_concurrency());
  return k;
}

int cmd_simulate(const Invocation& inv) {
  return guarded([&] {
    const LoadedConfig cfg = load_config(inv.config);
    const Fields top(cfg.doc, "config",
                     {"simulation", "h_grid", "reps", "methods", "lambda", "gamma", "mtl", "rank",
                      "dump_datasets", "output_dir"});
    const fs::path out = output_dir(inv, cfg, top);

    if (!top.has("simulation")) top.fail("missing required key 'simulation'");
    const Fields sim(top.raw("simulation"), "config.simulation",
                     {"T", "n", "p", "r", "noise_sd", "master_seed", "theta_stars",
                      "outlier_tasks"});
    SimSpec spec;
    const auto positive = [&](const std::string& key, long long fallback) {
      const long long v = sim.integer(key, fallback);
      if (v < 1) throw InputError(sim.at(key) + ": must be >= 1");
      return v;
    };
    spec.T = static_cast<std::size_t>(positive("T", 6));
    spec.n = static_cast<Eigen::Index>(positive("n", 100));
    spec.p = static_cast<Eigen::Index>(positive("p", 20));
    spec.r = static_cast<Eigen::Index>(positive("r", 3));
    spec.noise_sd = sim.number("noise_sd", 1.0);
    const long long seed = sim.integer("master_seed", 0);
    if (seed < 0) throw InputError(sim.at("master_seed") + ": must be >= 0");
    spec.master_seed = static_cast<std::uint64_t>(seed);

    if (sim.has("outlier_tasks")) {
      if (!sim.raw("outlier_tasks").is_array()) {
        throw InputError(sim.at("outlier_tasks") + ": expected an array");
      }
      std::size_t i = 0;
      for (const auto& o : sim.raw("outlier_tasks")) {
        const Fields of(o, sim.at("outlier_tasks") + "[" + std::to_string(i++) + "]",
                        {"index", "low", "high"});
        const long long idx = of.integer("index");
        if (idx < 0) throw InputError(of.at("index") + ": must be >= 0");
        spec.outlier_tasks.push_back(
            OutlierTask{static_cast<std::size_t>(idx), of.number("low", -1.0), of.number("high", 1.0)});
      }
    }

    if (sim.has("theta_stars")) {
      const json& ts = sim.raw("theta_stars");
      if (!ts.is_array() || ts.size() != spec.T) {
        throw InputError(sim.at("theta_stars") + ": expected one vector per task");
      }
      for (std::size_t t = 0; t < spec.T; ++t) {
        const std::string where = sim.at("theta_stars") + "[" + std::to_string(t) + "]";
        spec.theta_stars.push_back(spec.is_outlier(t) && ts[t].is_null()
                                       ? Eigen::VectorXd::Zero(spec.r)
                                       : vector_from_json(ts[t], where));
      }
    } else {
      // The reference table fills the inlier tasks in order.
      const auto table = reference_theta_stars();
      const std::size_t inliers = spec.T - std::set<std::size_t>(
          [&] {
            std::set<std::size_t> s;
            for (const auto& o : spec.outlier_tasks) s.insert(o.index);
            return s;
          }()).size();
      if (spec.r != 3 || inliers != table.size()) {
        sim.fail("theta_stars is required unless r = 3 with 6 inlier tasks");
      }
      std::size_t next = 0;
      for (std::size_t t = 0; t < spec.T; ++t) {
        spec.theta_stars.push_back(spec.is_outlier(t) ? Eigen::VectorXd::Zero(3) : table[next++]);
      }
    }

    if (!top.has("h_grid") || !top.raw("h_grid").is_array() || top.raw("h_grid").empty()) {
      throw InputError(top.at("h_grid") + ": expected a non-empty array of numbers");
    }
    const Eigen::VectorXd h_grid = vector_from_json(top.raw("h_grid"), top.at("h_grid"));
    const long long reps = top.integer("reps");
    if (reps < 1) throw InputError(top.at("reps") + ": must be >= 1");

    std::vector<Method> methods;
    if (top.has("methods")) {
      if (!top.raw("methods").is_array() || top.raw("methods").empty()) {
        throw InputError(top.at("methods") + ": expected a non-empty array of method names");
      }
      for (const auto& m : top.raw("methods")) {
        if (!m.is_string()) throw InputError(top.at("methods") + ": expected strings");
        check(top.at("methods"), [&] { methods.push_back(method_from_string(m.get<std::string>())); });
      }
    } else {
      methods = all_methods();
    }

    BenchOptions opt;
    opt.lambda = top.maybe_number("lambda");
    opt.gamma = top.maybe_number("gamma");
    if (top.has("mtl")) read_mtl_controls(top.raw("mtl"), top.at("mtl"), opt.mtl);
    if (top.has("rank")) opt.rank = read_rank(top.raw("rank"), top.at("rank"));
    opt.threads = inv.threads;
    const bool dump = top.boolean("dump_datasets", false);

    for (Eigen::Index i = 0; i < h_grid.size(); ++i) {
      SimSpec s = spec;
      s.h = h_grid(i);
      check("config", [&] { s.validate(); });
      MtlConfig probe = opt.mtl;
      probe.r = spec.r;
      probe.lambda = opt.lambda.value_or(1.0);
      probe.gamma = opt.gamma.value_or(1.0);
      check("config", [&] { probe.validate(spec.p); });
    }

    // Compute everything first; files are written only once it all succeeded.
    std::vector<ReplicationRecord> records;
    for (Eigen::Index i = 0; i < h_grid.size(); ++i) {
      SimSpec s = spec;
      s.h = h_grid(i);
      auto batch = run_replications(s, methods, static_cast<std::size_t>(reps), opt);
      records.insert(records.end(), std::make_move_iterator(batch.begin()),
                     std::make_move_iterator(batch.end()));
    }
    const auto summary = summarize(records);

    std::string results = "method,h,rep,subset,error\n";
    std::string diagnostics = "method,h,rep,r_hat,failure\n";
    std::size_t failures = 0;
    for (const auto& rec : records) {
      const std::string prefix = to_string(rec.method) + "," + format_double(rec.h) + "," +
                                 std::to_string(rec.rep) + ",";
      diagnostics += prefix + (rec.r_hat ? std::to_string(*rec.r_hat) : "") + "," +
                     (rec.failure ? csv_quote(*rec.failure) : "") + "\n";
      if (rec.failure) {
        ++failures;
        continue;
      }
      results += prefix + to_string(Subset::Inliers) + "," + format_double(rec.inlier_error) + "\n";
      if (rec.outlier_error) {
        results += prefix + to_string(Subset::Outliers) + "," + format_double(*rec.outlier_error) + "\n";
      }
    }
    std::string summary_csv = "method,h,subset,mean,sd\n";
    for (const auto& row : summary) {
      summary_csv += to_string(row.method) + "," + format_double(row.h) + "," +
                     to_string(row.subset) + "," + format_double(row.mean) + "," +
                     format_double(row.sd) + "\n";
    }

    fs::create_directories(out);
    if (dump) {
      for (Eigen::Index i = 0; i < h_grid.size(); ++i) {
        for (long long k = 0; k < reps; ++k) {
          SimSpec s = spec;
          s.h = h_grid(i);
          s.master_seed = spec.master_seed + 10000ULL * static_cast<std::uint64_t>(k);
          const SimDataset ds = generate(s);
          const fs::path dir = out / "datasets" / h_label(s.h) / ("rep_" + std::to_string(k));
          json truth;
          truth["h"] = s.h;
          truth["master_seed"] = s.master_seed;
          truth["center"] = to_json(ds.truth.center_star.matrix());
          truth["beta_stars"] = json::array();
          for (const auto& b : ds.truth.beta_stars) truth["beta_stars"].push_back(to_json(b));
          truth["inliers"] = ds.truth.inlier_set;
          for (std::size_t t = 0; t < ds.tasks.size(); ++t) {
            write_task_csv(dir / ("task_" + std::to_string(t) + ".csv"), ds.tasks[t]);
          }
          atomic_write(dir / "truth.json", truth.dump(2) + "\n");
        }
      }
    }
    atomic_write(out / "results.csv", results);
    atomic_write(out / "diagnostics.csv", diagnostics);
    atomic_write(out / "summary.csv", summary_csv);
    if (failures > 0) {
      std::cerr << "warning: " << failures << " method runs failed; see diagnostics.csv\n";
    }
    return failures == records.size() ? int(kRuntimeFailure) : int(kOk);
  });
}

int cmd_fit(const Invocation& inv) {
  return guarded([&] {
    const LoadedConfig cfg = load_config(inv.config);
    const Fields top(cfg.doc, "config",
                     {"tasks", "family", "r", "lambda", "gamma", "mtl", "rank", "output_dir"});
    const fs::path out = output_dir(inv, cfg, top);
    const ModelFamily family = family_from(top);

    bool auto_r = false;
    long long r_fixed = 0;
    if (!top.has("r")) top.fail("missing required key 'r'");
    if (top.raw("r").is_string()) {
      if (top.string("r") != "auto") throw InputError(top.at("r") + ": expected an integer or \"auto\"");
      auto_r = true;
    } else {
      r_fixed = top.integer("r");
    }
    MtlConfig mcfg;
    if (top.has("mtl")) read_mtl_controls(top.raw("mtl"), top.at("mtl"), mcfg);
    RankConfig rcfg;
    if (top.has("rank")) rcfg = read_rank(top.raw("rank"), top.at("rank"));
    const auto lambda = top.maybe_number("lambda");
    const auto gamma = top.maybe_number("gamma");

    std::vector<std::string> names;
    const std::vector<TaskData> tasks = read_tasks(cfg, top, names);
    const Eigen::Index p = tasks.front().p();

    std::optional<RankProfile> profile;
    if (auto_r) {
      profile = rank_profile(tasks, family, rcfg, smallest_n(tasks));
      if (!profile->r_hat) throw NoRankDetected();
      mcfg.r = *profile->r_hat;
    } else {
      mcfg.r = static_cast<Eigen::Index>(r_fixed);
    }
    mcfg.lambda = lambda.value_or(default_lambda(mcfg.r, p, tasks.size()));
    mcfg.gamma = gamma.value_or(default_gamma(p, tasks.size()));
    check("config", [&] { mcfg.validate(p); });

    const MtlFit fit = rl_mtl(tasks, family, mcfg);

    json j;
    j["family"] = family.name();
    j["p"] = p;
    j["r"] = mcfg.r;
    j["num_tasks"] = tasks.size();
    j["lambda"] = mcfg.lambda;
    j["gamma"] = mcfg.gamma;
    j["center"] = to_json(fit.center.matrix());
    j["tasks"] = json::array();
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      json tj;
      tj["file"] = names[t];
      tj["n"] = tasks[t].n();
      tj["beta"] = to_json(fit.beta[t]);
      tj["step1_beta"] = to_json(fit.step1_beta[t]);
      tj["theta"] = to_json(fit.per_task_theta[t]);
      tj["basis"] = to_json(fit.per_task_basis[t].matrix());
      tj["distance_spectral"] = projector_distance_spectral(fit.per_task_basis[t], fit.center);
      tj["distance_frobenius"] = projector_distance_frobenius(fit.per_task_basis[t], fit.center);
      j["tasks"].push_back(std::move(tj));
    }
    j["objective_trace"] = fit.objective_trace;
    j["converged"] = fit.converged;
    j["r_hat"] = profile ? json(*profile->r_hat) : json(nullptr);
    if (profile) j["rank_profile"] = profile_json(*profile);

    fs::create_directories(out);
    atomic_write(out / "fit.json", j.dump(2) + "\n");
    return int(kOk);
  });
}

int cmd_transfer(const Invocation& inv) {
  return guarded([&] {
    const LoadedConfig cfg = load_config(inv.config);
    const Fields top(cfg.doc, "config", {"fit", "target", "gamma", "family", "output_dir"});
    const fs::path out = output_dir(inv, cfg, top);

    const fs::path fit_path = resolve(cfg, top.string("fit"));
    std::ifstream fin(fit_path);
    if (!fin) throw InputError(fit_path.string() + ": cannot open fit file");
    json fit;
    try {
      fit = json::parse(fin);
    } catch (const json::parse_error& e) {
      throw InputError(fit_path.string() + ": malformed JSON: " + e.what());
    }
    if (!fit.is_object() || !fit.contains("center")) {
      throw InputError(fit_path.string() + ": not a fit file (no center)");
    }
    const Eigen::MatrixXd c = matrix_from_json(fit["center"], fit_path.string() + ": center");
    std::optional<OrthoBasis> center;
    check(fit_path.string() + ": center", [&] { center.emplace(c); });

    const std::string fit_family =
        fit.contains("family") && fit["family"].is_string() ? fit["family"].get<std::string>()
                                                            : "linear";
    const ModelFamily family = family_from(top, fit_family);

    const TaskData target = read_task_csv(resolve(cfg, top.string("target")));
    if (target.p() != center->p()) {
      throw InputError("target has p = " + std::to_string(target.p()) + " but the fit has p = " +
                       std::to_string(center->p()));
    }
    std::size_t num_tasks = 1;
    if (fit.contains("num_tasks") && fit["num_tasks"].is_number_unsigned()) {
      num_tasks = std::max<std::size_t>(1, fit["num_tasks"].get<std::size_t>());
    }
    const double gamma = top.number("gamma", default_gamma(center->p(), num_tasks));
    if (!(gamma >= 0.0)) throw InputError(top.at("gamma") + ": must be >= 0");

    const TlFit res = rl_tl(target, family, *center, gamma);

    json j;
    j["family"] = family.name();
    j["gamma"] = gamma;
    j["n0"] = target.n();
    j["theta0"] = to_json(res.theta0);
    j["step1_beta0"] = to_json(res.step1_beta0);
    j["beta0"] = to_json(res.beta0);
    fs::create_directories(out);
    atomic_write(out / "transfer.json", j.dump(2) + "\n");
    return int(kOk);
  });
}

int cmd_rank(const Invocation& inv) {
  return guarded([&] {
    const LoadedConfig cfg = load_config(inv.config);
    const Fields top(cfg.doc, "config",
                     {"tasks", "family", "mode", "n0", "n", "t1", "t2", "radius", "r_bar",
                      "injected_B", "output_dir"});
    const fs::path out = output_dir(inv, cfg, top);

    RankConfig rc;
    rc.threshold_t1 = top.number("t1", rc.threshold_t1);
    rc.threshold_t2 = top.number("t2", rc.threshold_t2);
    rc.radius = top.number("radius", rc.radius);
    rc.r_bar = top.maybe_number("r_bar");
    rc.n0 = top.maybe_number("n0");
    const std::string mode = top.string("mode", "mtl");
    if (mode == "mtl") {
      rc.mode = RankMode::Mtl;
    } else if (mode == "tl") {
      rc.mode = RankMode::Tl;
    } else {
      throw InputError(top.at("mode") + ": expected \"mtl\" or \"tl\"");
    }
    check("config", [&] { rc.validate(); });

    RankProfile prof;
    json j;
    if (top.has("injected_B")) {
      // Test hook: profile a given p x T matrix instead of fitted tasks.
      if (top.has("tasks")) top.fail("'tasks' and 'injected_B' are mutually exclusive");
      const Eigen::MatrixXd b = matrix_from_json(top.raw("injected_B"), top.at("injected_B"));
      const double n = top.number("n");
      if (!(n > 0.0)) throw InputError(top.at("n") + ": must be > 0");
      check("config", [&] { prof = rank_profile(b, rc, n); });
      j["p"] = b.rows();
      j["num_tasks"] = b.cols();
      j["n"] = n;
    } else {
      const ModelFamily family = family_from(top);
      std::vector<std::string> names;
      const std::vector<TaskData> tasks = read_tasks(cfg, top, names);
      const double n = top.number("n", smallest_n(tasks));
      prof = rank_profile(tasks, family, rc, n);
      j["p"] = tasks.front().p();
      j["num_tasks"] = tasks.size();
      j["n"] = n;
      j["family"] = family.name();
    }
    j["mode"] = mode;
    j["r_bar"] = rc.resolved_r_bar(static_cast<std::size_t>(j["num_tasks"].get<long long>()),
                                   j["n"].get<double>());
    j.update(profile_json(prof));

    fs::create_directories(out);
    atomic_write(out / "rank.json", j.dump(2) + "\n");
    if (!prof.r_hat) {
      std::cout << "no rank detected\n";
      return int(kNoRank);
    }
    std::cout << "r_hat " << *prof.r_hat << "\n";
    return int(kOk);
  });
}

int run(int argc, char** argv) {
  CLI::App app{"Representation multi-task and transfer learning"};
  app.require_subcommand(1);

  Invocation inv;
  std::string config;
  std::string out;
  std::optional<unsigned> threads;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->add_option("--threads", threads, "worker threads, 0 = one per hardware thread");
  };
  CLI::App* sim = app.add_subcommand("simulate", "run the simulation benchmark");
  CLI::App* fit = app.add_subcommand("fit", "multi-task fit on task CSV files");
  CLI::App* tr = app.add_subcommand("transfer", "transfer a fitted center to a target task");
  CLI::App* rk = app.add_subcommand("rank", "estimate the shared dimension");
  for (CLI::App* sub : {sim, fit, tr, rk}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidInput;
  }

  inv.config = config;
  if (!out.empty()) inv.out = fs::path(out);
  inv.threads = resolve_threads(threads);

  if (sim->parsed()) return cmd_simulate(inv);
  if (fit->parsed()) return cmd_fit(inv);
  if (tr->parsed()) return cmd_transfer(inv);
  return cmd_rank(inv);
}

}  // namespace repmtl::cli
