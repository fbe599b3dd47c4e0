#include "wgpinn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace wgpinn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

class Section {
 public:
  Section(const json& node, std::string path, const std::string& origin)
      : node_(node), path_(std::move(path)), origin_(origin) {
    if (!node_.is_object()) fail(path_.empty() ? "top level" : path_, "expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) fail(join(key), "unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    return Section(node_.at(key), join(key), origin_);
  }

  void read(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number()) fail(join(key), "expected a number");
    out = v.get<double>();
  }

  void read(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_boolean()) fail(join(key), "expected true or false");
    out = v.get<bool>();
  }

  template <typename T>
    requires std::is_unsigned_v<T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number_unsigned()) fail(join(key), "expected a non-negative integer");
    out = v.get<T>();
  }

  void read(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) fail(join(key), "expected an integer");
    out = v.get<int>();
  }

  void read(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_string()) fail(join(key), "expected a string");
    out = v.get<std::string>();
  }

  void read(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_array()) fail(join(key), "expected an array of numbers");
    out.clear();
    for (const json& e : v) {
      if (!e.is_number()) fail(join(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  void read(const std::string& key, TaperPolynomial& out) {
    std::vector<double> c;
    if (!has(key)) return;
    read(key, c);
    if (c.size() != 3) fail(join(key), "expected three coefficients [c5, c4, c3]");
    out = {c[0], c[1], c[2]};
  }

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw ConfigError(origin_ + ": key '" + where + "': " + what);
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& node_;
  std::string path_;
  const std::string& origin_;
  std::set<std::string> seen_;
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hexfloat(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

std::string k_tag(double k) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", k);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }

  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  {
    Section top(root, "", origin);
    top.read("output_dir", cfg.output_dir);
    top.read("seed", t.seed);
    if (top.has("problem")) {
      Section s = top.sub("problem");
      std::string form = to_string(t.problem.formulation);
      s.read("formulation", form);
      try {
        t.problem.formulation = parse_formulation(form);
      } catch (const ContractViolation& e) {
        s.fail(s.join("formulation"), e.what());
      }
      s.read("k", t.problem.k);
      s.read("b", t.problem.b);
      s.read("n_modes", t.problem.n_modes);
      s.read("taper_coefficients", t.problem.taper);
    }
    if (top.has("network")) {
      Section s = top.sub("network");
      s.read("hidden_layers", t.hidden_layers);
      s.read("width", t.width);
      s.read("alpha0", t.alpha0);
    }
    if (top.has("collocation")) {
      Section s = top.sub("collocation");
      s.read("grid_x", t.grid_x);
      s.read("grid_z", t.grid_z);
      s.read("n_b", t.n_b);
    }
    if (top.has("training")) {
      Section s = top.sub("training");
      s.read("steps", t.total_steps);
      s.read("eval_every", t.eval_every);
      s.read("learning_rate", t.lr.lr0);
      s.read("decay_rate", t.lr.decay_rate);
      s.read("decay_steps", t.lr.decay_steps);
      s.read("staircase", t.lr.staircase);
      s.read("beta1", t.adam.beta1);
      s.read("beta2", t.adam.beta2);
      s.read("epsilon", t.adam.epsilon);
    }
    if (top.has("evaluation")) {
      Section s = top.sub("evaluation");
      s.read("nx", t.eval_grid.nx);
      s.read("nz", t.eval_grid.nz);
    }
    if (top.has("matrix")) {
      Section s = top.sub("matrix");
      if (s.has("formulations")) {
        const json& arr = root.at("matrix").at("formulations");
        if (!arr.is_array()) s.fail("matrix.formulations", "expected an array of strings");
        cfg.formulations.clear();
        for (const json& e : arr) {
          if (!e.is_string()) s.fail("matrix.formulations", "expected an array of strings");
          try {
            cfg.formulations.push_back(parse_formulation(e.get<std::string>()));
          } catch (const ContractViolation& err) {
            s.fail("matrix.formulations", err.what());
          }
        }
      }
      s.read("k", cfg.ks);
    }
    if (top.has("verify")) {
      Section s = top.sub("verify");
      s.read("k", cfg.verify.ks);
      s.read("b", cfg.verify.b);
      s.read("taper_coefficients", cfg.verify.taper);
      s.read("n_b", cfg.verify.n_b);
      s.read("n_random", cfg.verify.n_random);
      s.read("seed", cfg.verify.seed);
      s.read("gradient_k", cfg.verify.gradient_k);
    }
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json j;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = t.seed;
  j["problem"] = {{"formulation", to_string(t.problem.formulation)},
                  {"k", t.problem.k},
                  {"b", t.problem.b},
                  {"n_modes", t.problem.n_modes},
                  {"taper_coefficients",
                   {t.problem.taper.c5, t.problem.taper.c4, t.problem.taper.c3}}};
  j["network"] = {{"hidden_layers", t.hidden_layers}, {"width", t.width}, {"alpha0", t.alpha0}};
  j["collocation"] = {{"grid_x", t.grid_x}, {"grid_z", t.grid_z}, {"n_b", t.n_b}};
  j["training"] = {{"steps", t.total_steps},          {"eval_every", t.eval_every},
                   {"learning_rate", t.lr.lr0},       {"decay_rate", t.lr.decay_rate},
                   {"decay_steps", t.lr.decay_steps}, {"staircase", t.lr.staircase},
                   {"beta1", t.adam.beta1},           {"beta2", t.adam.beta2},
                   {"epsilon", t.adam.epsilon}};
  j["evaluation"] = {{"nx", t.eval_grid.nx}, {"nz", t.eval_grid.nz}};
  json forms = json::array();
  for (Formulation f : cfg.formulations) forms.push_back(to_string(f));
  j["matrix"] = {{"formulations", forms}, {"k", cfg.ks}};
  j["verify"] = {{"k", cfg.verify.ks},
                 {"b", cfg.verify.b},
                 {"taper_coefficients", {cfg.verify.taper.c5, cfg.verify.taper.c4, cfg.verify.taper.c3}},
                 {"n_b", cfg.verify.n_b},
                 {"n_random", cfg.verify.n_random},
                 {"seed", cfg.verify.seed},
                 {"gradient_k", cfg.verify.gradient_k}};
  return j.dump(2) + "\n";
}

fs::path resolve_output_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
      return fs::path(root) / p;
    }
  }
  return p;
}

GridShape parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  GridShape g;
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    std::size_t used = 0;
    const unsigned long nx = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("trailing characters");
    const std::string rest = text.substr(x + 1);
    const unsigned long nz = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing characters");
    g.nx = nx;
    g.nz = nz;
  } catch (const std::exception&) {
    throw ConfigError("bad grid '" + text + "' (expected NXxNZ, e.g. 240x20)");
  }
  if (g.nx < 1 || g.nz < 1) throw ConfigError("grid dimensions must be >= 1");
  return g;
}

// ---------------------------------------------------------------------------
// CSV

void write_field_csv(std::ostream& out, const Matrix& points, const std::vector<Complex>& field) {
  out << "x,z,re,im\n";
  for (Index i = 0; i < points.cols(); ++i) {
    const Complex& v = field[static_cast<std::size_t>(i)];
    out << format_double(points(0, i)) << ',' << format_double(points(1, i)) << ','
        << format_double(v.real()) << ',' << format_double(v.imag()) << '\n';
  }
}

void write_trace_header(std::ostream& out) {
  out << "step,lr,loss_total,loss_residual,loss_bottom,loss_top,loss_minus,loss_plus,eps_real,eps_imag\n";
}

void write_trace_row(std::ostream& out, const TraceRecord& rec) {
  out << rec.step << ',' << format_double(rec.lr) << ',' << format_double(rec.loss.total) << ','
      << format_double(rec.loss.residual_term);
  for (double b : rec.loss.boundary_terms) out << ',' << format_double(b);
  out << ',' << format_double(rec.error.real) << ',' << format_double(rec.error.imag) << '\n';
}

void write_error_table(std::ostream& out, const ErrorTable& table) {
  out << "formulation,k,status,eps_real,eps_imag,eps_real_train,eps_imag_train,final_loss,wall_seconds\n";
  for (const ErrorRow& r : table.rows) {
    std::string status = r.status;
    for (char& c : status) {
      if (c == ',' || c == '"' || c == '\n') c = ' ';
    }
    out << to_string(r.formulation) << ',' << format_double(r.k) << ',' << status << ','
        << format_double(r.error.real) << ',' << format_double(r.error.imag) << ','
        << format_double(r.train_error.real) << ',' << format_double(r.train_error.imag) << ','
        << format_double(r.final_loss) << ',' << format_double(r.wall_seconds) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Runs

RunSummary run_to_directory(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    out << config_to_json(cfg);
  }

  const TrainConfig& t = cfg.train;
  std::ofstream trace(dir / "trace.csv");
  write_trace_header(trace);
  log << "training " << to_string(t.problem.formulation) << " k=" << t.problem.k << " for "
      << t.total_steps << " steps -> " << dir.string() << '\n';

  const auto start = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.dir = dir;
  summary.result = train(t, [&trace](const TraceRecord& rec) {
    write_trace_row(trace, rec);
    trace.flush();
  });
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const TrainResult& r = summary.result;

  const Matrix points = cell_center_grid(t.problem, t.eval_grid.nx, t.eval_grid.nz);
  {
    std::ofstream out(dir / "field.csv");
    try {
      write_field_csv(out, points, evaluate_field(r.params, t.problem, points));
    } catch (const NumericFailure& e) {
      log << "field evaluation failed: " << e.what() << '\n';
    }
  }

  const TaperPolynomial& c = t.problem.taper;
  save_checkpoint((dir / "checkpoint.txt").string(), r.params,
                  {{"formulation", to_string(t.problem.formulation)},
                   {"k", hexfloat(t.problem.k)},
                   {"b", hexfloat(t.problem.b)},
                   {"n_modes", std::to_string(t.problem.n_modes)},
                   {"taper", hexfloat(c.c5) + " " + hexfloat(c.c4) + " " + hexfloat(c.c3)},
                   {"seed", std::to_string(t.seed)},
                   {"steps_done", std::to_string(r.steps_done)}});

  json s;
  s["status"] = r.failed ? "failed" : "ok";
  if (r.failed) s["failure"] = r.failure;
  s["steps_done"] = r.steps_done;
  s["final_loss"] = r.final_loss.total;
  s["eps_real"] = r.final_error.real;
  s["eps_imag"] = r.final_error.imag;
  s["eps_real_train"] = r.final_train_error.real;
  s["eps_imag_train"] = r.final_train_error.imag;
  std::ofstream(dir / "summary.json") << s.dump(2) << '\n';

  if (r.failed) {
    log << "run failed: " << r.failure << '\n';
  } else {
    log << "done: eps_R=" << r.final_error.real << " eps_I=" << r.final_error.imag
        << " (training grid " << r.final_train_error.real << ", " << r.final_train_error.imag
        << ") in " << summary.wall_seconds << " s\n";
  }
  return summary;
}

int run_single(const fs::path& cfg_path, std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(cfg_path);
    cfg.train.validate();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const RunSummary s = run_to_directory(cfg, resolve_output_dir(cfg.output_dir), log);
  return s.result.failed ? kExitNumeric : kExitOk;
}

int run_matrix(const fs::path& cfg_path, std::ostream& log, ErrorTable* table_out) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(cfg_path);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (cfg.formulations.empty() || cfg.ks.empty()) {
    log << "error: matrix.formulations and matrix.k must be nonempty\n";
    return kExitUsage;
  }

  std::vector<std::pair<Formulation, double>> cells;
  for (Formulation f : cfg.formulations) {
    for (double k : cfg.ks) {
      const std::pair<Formulation, double> cell{f, k};
      if (std::find(cells.begin(), cells.end(), cell) != cells.end()) {
        log << "warning: duplicate cell (" << to_string(f) << ", k=" << k << ") skipped\n";
        continue;
      }
      cells.push_back(cell);
    }
  }

  const fs::path root = resolve_output_dir(cfg.output_dir);
  fs::create_directories(root);
  {
    std::ofstream out(root / "config.json");
    out << config_to_json(cfg);
  }

  ErrorTable table;
  bool any_failed = false;
  for (const auto& [form, k] : cells) {
    ExperimentConfig cell = cfg;
    cell.train.problem.formulation = form;
    cell.train.problem.k = k;
    const fs::path dir = root / (to_string(form) + "_k" + k_tag(k));
    cell.output_dir = dir.string();

    ErrorRow row;
    row.formulation = form;
    row.k = k;
    try {
      cell.train.validate();
      const RunSummary s = run_to_directory(cell, dir, log);
      row.ok = !s.result.failed;
      row.status = row.ok ? "ok" : "failed: " + s.result.failure;
      row.error = s.result.final_error;
      row.train_error = s.result.final_train_error;
      row.final_loss = s.result.final_loss.total;
      row.wall_seconds = s.wall_seconds;
    } catch (const std::exception& e) {
      row.ok = false;
      row.status = std::string("failed: ") + e.what();
      row.error = row.train_error = {std::nan(""), std::nan("")};
      row.final_loss = std::nan("");
      log << "cell (" << to_string(form) << ", k=" << k << ") failed: " << e.what() << '\n';
    }
    any_failed = any_failed || !row.ok;
    table.rows.push_back(row);
    std::ofstream out(root / "errors.csv");
    write_error_table(out, table);
  }
  if (table_out != nullptr) *table_out = table;
  return any_failed ? kExitNumeric : kExitOk;
}

int run_verify(const fs::path& cfg_path, std::ostream& log) {
  VerifyOptions options;
  if (!cfg_path.empty()) {
    try {
      options = load_config(cfg_path).verify;
    } catch (const std::exception& e) {
      log << "error: " << e.what() << '\n';
      return kExitUsage;
    }
  }
  const VerifyReport report = run_verification(options);
  print_report(log, report);
  return report.passed() ? kExitOk : kExitVerification;
}

int run_eval(const fs::path& checkpoint, const std::string& grid, std::ostream& out,
             std::ostream& log) {
  Checkpoint cp;
  GridShape shape;
  ProblemSpec spec;
  try {
    shape = parse_grid(grid);
    cp = load_checkpoint(checkpoint.string());
    auto meta = [&cp](const std::string& key) -> const std::string& {
      const auto it = cp.meta.find(key);
      if (it == cp.meta.end()) throw ConfigError("checkpoint lacks meta '" + key + "'");
      return it->second;
    };
    spec.formulation = parse_formulation(meta("formulation"));
    spec.k = std::strtod(meta("k").c_str(), nullptr);
    spec.b = std::strtod(meta("b").c_str(), nullptr);
    spec.n_modes = std::stoi(meta("n_modes"));
    std::istringstream taper_ss(meta("taper"));
    std::string c5, c4, c3;
    taper_ss >> c5 >> c4 >> c3;
    spec.taper = {std::strtod(c5.c_str(), nullptr), std::strtod(c4.c_str(), nullptr),
                  std::strtod(c3.c_str(), nullptr)};
    spec.validate();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    const Matrix points = cell_center_grid(spec, shape.nx, shape.nz);
    const std::vector<Complex> field = evaluate_field(cp.params, spec, points);
    write_field_csv(out, points, field);
    const RelativeError err = field_error(cp.params, spec, points);
    log << "eps_R=" << err.real << " eps_I=" << err.imag << '\n';
  } catch (const NumericFailure& e) {
    log << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace wgpinn
