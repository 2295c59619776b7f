// shapeconf command-line front end.
//
//   shapeconf project    --input y.txt --cone isotonic [--out fit.csv]
//   shapeconf ball       --input y.txt --cone convex --sigma 1 --alpha 0.05 [--tv] [--out center.csv]
//   shapeconf experiment --config run.cfg --out results/ [--workers 8] [--seed 7]
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "shapeconf/confidence.hpp"
#include "shapeconf/cones.hpp"
#include "shapeconf/geometry.hpp"
#include "shapeconf/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(std::size_t v) { return std::to_string(v); }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

template <typename Int>
bool parse_integer(std::string_view s, Int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_bool(std::string_view s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") return out = true, true;
  if (s == "false" || s == "0" || s == "no") return out = false, true;
  return false;
}

// One value per line, or a CSV whose header names a `y` column. Blank lines
// and lines starting with '#' are skipped.
shapeconf::Sequence read_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  shapeconf::Sequence y;
  std::optional<std::size_t> column;
  bool first = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = trim(line);
    if (row.empty() || row.front() == '#') continue;
    const auto fields = split(row, ',');
    if (first) {
      first = false;
      double probe = 0.0;
      if (fields.size() > 1 || !parse_double(fields[0], probe)) {
        for (std::size_t c = 0; c < fields.size(); ++c) {
          if (fields[c] == "y") column = c;
        }
        if (!column) throw InputError(path + ": header has no 'y' column");
        continue;
      }
    }
    const std::size_t c = column.value_or(0);
    if (!column && fields.size() != 1) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected one value per line");
    }
    double v = 0.0;
    if (c >= fields.size() || !parse_double(fields[c], v)) {
      throw InputError(path + ":" + std::to_string(lineno) + ": not a number");
    }
    y.push_back(v);
  }
  if (y.empty()) throw InputError(path + ": no data");
  return y;
}

// Key/value lines echoed as '# key=value' at the top of every CSV. The
// echoed lines form a valid config file for the same subcommand.
using Settings = std::vector<std::pair<std::string, std::string>>;

std::string header_block(const std::string& subcommand, const Settings& settings) {
  std::string out = "# subcommand=" + subcommand + "\n# version=" + std::string(shapeconf::kVersion) + "\n";
  for (const auto& [k, v] : settings) out += "# " + k + "=" + v + "\n";
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

std::string join_breakpoints(const std::vector<std::size_t>& points) {
  std::string s;
  for (std::size_t i = 0; i < points.size(); ++i) s += (i ? ";" : "") + std::to_string(points[i]);
  return s;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// project

int cmd_project(const std::string& input, const std::string& cone_name, const std::string& out_path) {
  const shapeconf::ConeKind cone = shapeconf::parse_cone(cone_name);
  const shapeconf::Sequence y = read_series(input);
  const shapeconf::Sequence fit = shapeconf::project(cone, y);
  const shapeconf::PieceCount pc = shapeconf::piece_count(cone, fit);

  Settings settings{{"cone", std::string(shapeconf::to_string(cone))},
                    {"input", input},
                    {"n", fmt(y.size())},
                    {"pieces", fmt(pc.count)},
                    {"breakpoints", join_breakpoints(pc.structure.breakpoints())}};
  std::string text = header_block("project", settings) + "index,fit,piece\n";
  std::size_t piece = 0;
  for (std::size_t i = 0; i < fit.size(); ++i) {
    while (i >= pc.structure.pieces[piece].end) ++piece;
    text += fmt(i) + "," + fmt(fit[i]) + "," + fmt(piece) + "\n";
  }
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ball

int cmd_ball(const std::string& input, const std::string& cone_name, double sigma, double alpha, bool tv,
             const std::string& out_path) {
  const shapeconf::ConeKind cone = shapeconf::parse_cone(cone_name);
  const shapeconf::Sequence y = read_series(input);
  const shapeconf::ConfidenceBall ball = shapeconf::confidence_ball(y, cone, shapeconf::NoiseModel(sigma), alpha, tv);

  json record;
  record["subcommand"] = "ball";
  record["version"] = shapeconf::kVersion;
  record["input"] = input;
  record["cone"] = shapeconf::to_string(cone);
  record["n"] = y.size();
  record["sigma"] = sigma;
  record["alpha"] = alpha;
  record["nominal_coverage"] = ball.nominal_coverage;
  record["pieces"] = ball.pieces;
  record["piece_radius"] = ball.piece_radius;
  if (ball.total_variation) {
    record["total_variation"] = *ball.total_variation;
    record["tv_radius"] = *ball.tv_radius;
  }
  record["squared_radius"] = ball.squared_radius;
  if (out_path.empty()) {
    record["center"] = ball.center;
  } else {
    Settings settings{{"cone", std::string(shapeconf::to_string(cone))},
                      {"input", input},
                      {"sigma", fmt(sigma)},
                      {"alpha", fmt(alpha)},
                      {"tv", tv ? "true" : "false"},
                      {"squared_radius", fmt(ball.squared_radius)}};
    std::string text = header_block("ball", settings) + "index,center\n";
    for (std::size_t i = 0; i < ball.center.size(); ++i) text += fmt(i) + "," + fmt(ball.center[i]) + "\n";
    write_file(out_path, text);
    record["center"] = out_path;
  }
  std::cout << record.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment

enum class ExperimentKind { Coverage, Adaptivity, Geometry };

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::Coverage;
  shapeconf::ExperimentConfig run;
  shapeconf::GeometryConfig geometry;
  std::vector<double> gammas{0.1, 0.05};
};

struct ConfigErrors {
  std::vector<std::string> messages;
  void add(std::string m) { messages.push_back(std::move(m)); }
};

bool parse_list(std::string_view value, std::vector<double>& out) {
  out.clear();
  for (const auto part : split(value, ',')) {
    double v = 0.0;
    if (!parse_double(part, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

std::string format_list(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + fmt(values[i]);
  return s;
}

ExperimentPlan parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");

  std::map<std::string, std::string> entries;
  ConfigErrors errors;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = trim(line);
    if (!row.empty() && row.front() == '#') {
      // Echoed headers ('# key=value') are accepted so artifacts can be re-run.
      row = trim(row.substr(1));
      if (row.find('=') == std::string_view::npos) continue;
    }
    if (row.empty()) continue;
    const auto eq = row.find('=');
    if (eq == std::string_view::npos) {
      errors.add("line " + std::to_string(lineno) + ": expected key=value");
      continue;
    }
    const std::string key(trim(row.substr(0, eq)));
    const std::string value(trim(row.substr(eq + 1)));
    if (!entries.emplace(key, value).second) errors.add("duplicate key '" + key + "'");
  }

  ExperimentPlan plan;
  const auto kind_it = entries.find("kind");
  if (kind_it == entries.end()) {
    errors.add("missing key 'kind'");
  } else if (kind_it->second == "coverage") {
    plan.kind = ExperimentKind::Coverage;
  } else if (kind_it->second == "adaptivity") {
    plan.kind = ExperimentKind::Adaptivity;
  } else if (kind_it->second == "geometry") {
    plan.kind = ExperimentKind::Geometry;
  } else {
    errors.add("invalid value for 'kind': '" + kind_it->second + "'");
  }

  const bool geometry = plan.kind == ExperimentKind::Geometry;
  bool signal_given = false;
  for (const auto& [key, value] : entries) {
    const auto bad = [&, &key = key, &value = value] {
      errors.add("invalid value for '" + key + "': '" + value + "'");
    };
    const auto wrong_kind = [&, &key = key] { errors.add("key '" + key + "' does not apply to this kind"); };
    auto& run = plan.run;
    auto& geo = plan.geometry;
    if (key == "kind" || key == "subcommand" || key == "version") {
      continue;
    } else if (key == "cone") {
      try {
        run.cone = geo.cone = shapeconf::parse_cone(value);
      } catch (const shapeconf::DomainError&) {
        bad();
      }
    } else if (key == "n") {
      std::size_t v = 0;
      if (!parse_integer(value, v)) bad();
      run.signal.n = geo.n = v;
    } else if (key == "replicates") {
      std::size_t v = 0;
      if (!parse_integer(value, v)) bad();
      run.replicates = geo.replicates = v;
    } else if (key == "seed") {
      std::uint64_t v = 0;
      if (!parse_integer(value, v)) bad();
      run.master_seed = geo.seed = v;
    } else if (geometry && key == "x_values") {
      if (!parse_list(value, geo.x_values)) bad();
    } else if (geometry && key == "alpha_values") {
      if (!parse_list(value, geo.alphas)) bad();
    } else if (geometry && (key == "signal" || key == "complexity" || key == "amplitude" || key == "signal_seed" ||
                            key == "sigma" || key == "alpha" || key == "tv" || key == "gammas")) {
      wrong_kind();
    } else if (!geometry && (key == "x_values" || key == "alpha_values")) {
      wrong_kind();
    } else if (key == "signal") {
      signal_given = true;
      try {
        run.signal.family = shapeconf::parse_signal_family(value);
      } catch (const shapeconf::DomainError&) {
        bad();
      }
    } else if (key == "complexity") {
      if (!parse_integer(value, run.signal.complexity)) bad();
    } else if (key == "amplitude") {
      if (!parse_double(value, run.signal.amplitude)) bad();
    } else if (key == "signal_seed") {
      if (!parse_integer(value, run.signal.seed)) bad();
    } else if (key == "sigma") {
      if (!parse_double(value, run.sigma)) bad();
    } else if (key == "alpha") {
      if (!parse_double(value, run.alpha)) bad();
    } else if (key == "tv") {
      if (!parse_bool(value, run.use_tv_combination)) bad();
    } else if (key == "gammas") {
      if (plan.kind != ExperimentKind::Adaptivity) {
        wrong_kind();
      } else if (!parse_list(value, plan.gammas)) {
        bad();
      }
    } else {
      errors.add("unknown key '" + key + "'");
    }
  }
  if (!geometry && !signal_given) {
    plan.run.signal.family = shapeconf::is_monotone(plan.run.cone) ? shapeconf::SignalFamily::PiecewiseConstantMonotone
                                                                   : shapeconf::SignalFamily::PiecewiseAffineConvex;
  }

  if (!errors.messages.empty()) {
    std::string msg = path + ": invalid config";
    for (const auto& m : errors.messages) msg += "\n  " + m;
    throw InputError(msg);
  }
  return plan;
}

// Fully resolved configuration in config-file syntax.
Settings resolved_settings(const ExperimentPlan& plan) {
  if (plan.kind == ExperimentKind::Geometry) {
    const auto& g = plan.geometry;
    return {{"kind", "geometry"},
            {"cone", std::string(shapeconf::to_string(g.cone))},
            {"n", fmt(g.n)},
            {"replicates", fmt(g.replicates)},
            {"seed", std::to_string(g.seed)},
            {"x_values", format_list(g.x_values)},
            {"alpha_values", format_list(g.alphas)}};
  }
  const auto& c = plan.run;
  Settings s{{"kind", plan.kind == ExperimentKind::Coverage ? "coverage" : "adaptivity"},
             {"cone", std::string(shapeconf::to_string(c.cone))},
             {"signal", std::string(shapeconf::to_string(c.signal.family))},
             {"n", fmt(c.signal.n)},
             {"complexity", fmt(c.signal.complexity)},
             {"amplitude", fmt(c.signal.amplitude)},
             {"signal_seed", std::to_string(c.signal.seed)},
             {"sigma", fmt(c.sigma)},
             {"alpha", fmt(c.alpha)},
             {"replicates", fmt(c.replicates)},
             {"seed", std::to_string(c.master_seed)},
             {"tv", c.use_tv_combination ? "true" : "false"}};
  if (plan.kind == ExperimentKind::Adaptivity) s.emplace_back("gammas", format_list(plan.gammas));
  return s;
}

std::string tail_rows(const std::string& check, const std::vector<shapeconf::TailCheck>& rows) {
  std::string text;
  for (const auto& r : rows) {
    text += check + "," + fmt(r.parameter) + "," + fmt(r.threshold) + "," + fmt(r.frequency) + "," + fmt(r.bound) +
            "," + fmt(r.std_error) + "," + (r.violated ? "1" : "0") + "\n";
  }
  return text;
}

const char* kTailHeader = "check,parameter,threshold,frequency,bound,std_error,violated\n";

std::vector<std::pair<std::string, std::string>> write_coverage(const fs::path& dir, const std::string& head,
                                                                const shapeconf::ExperimentReport& report) {
  std::string rows = head + "replicate,loss,sq_radius,pieces,covered\n";
  for (const auto& r : report.records) {
    rows += fmt(r.replicate) + "," + fmt(r.loss) + "," + fmt(r.sq_radius) + "," + fmt(r.pieces) + "," +
            (r.covered ? "1" : "0") + "\n";
  }
  const auto& s = report.summary;
  const std::string summary = head + "coverage,coverage_se,mean_sq_radius,q90_sq_radius,mean_pieces\n" +
                              fmt(s.coverage) + "," + fmt(s.coverage_se) + "," + fmt(s.mean_sq_radius) + "," +
                              fmt(s.q90_sq_radius) + "," + fmt(s.mean_pieces) + "\n";
  write_file(dir / "replicates.csv", rows);
  write_file(dir / "summary.csv", summary);
  return {{"replicates", (dir / "replicates.csv").string()}, {"summary", (dir / "summary.csv").string()}};
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir, unsigned workers,
                   std::optional<std::uint64_t> seed_override) {
  ExperimentPlan plan = parse_config(config_path);
  if (seed_override) plan.run.master_seed = plan.geometry.seed = *seed_override;

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + out_dir + "': " + ec.message());

  const Settings settings = resolved_settings(plan);
  const std::string head = header_block("experiment", settings);
  std::vector<std::pair<std::string, std::string>> outputs;
  json results;

  if (plan.kind == ExperimentKind::Geometry) {
    const shapeconf::GeometryReport report = shapeconf::run_geometry(plan.geometry, workers);
    std::string rows = head + "replicate,sq_norm,inner,face_dim\n";
    for (std::size_t r = 0; r < report.samples.size(); ++r) {
      const auto& s = report.samples[r];
      rows += fmt(r) + "," + fmt(s.squared_norm) + "," + fmt(s.inner) + "," + fmt(s.face_dimension) + "\n";
    }
    std::string summary = head + "dimension,dimension_se,exact_dimension,face_mean,face_se,zero_dimension_faces\n" +
                          fmt(report.dimension.mean) + "," + fmt(report.dimension.std_error) + "," +
                          (report.exact_dimension ? fmt(*report.exact_dimension) : std::string()) + "," +
                          fmt(report.face_mean) + "," + fmt(report.face_se) + "," +
                          fmt(report.zero_dimension_faces) + "\n";
    const std::string tails =
        head + kTailHeader + tail_rows("face_dimension", report.face_tail) + tail_rows("squared_norm", report.norm_tail);
    write_file(dir / "replicates.csv", rows);
    write_file(dir / "summary.csv", summary);
    write_file(dir / "tails.csv", tails);
    outputs = {{"replicates", (dir / "replicates.csv").string()},
               {"summary", (dir / "summary.csv").string()},
               {"tails", (dir / "tails.csv").string()}};
    results["dimension"] = report.dimension.mean;
    results["dimension_se"] = report.dimension.std_error;
    if (report.exact_dimension) results["exact_dimension"] = *report.exact_dimension;
    results["face_mean"] = report.face_mean;
  } else if (plan.kind == ExperimentKind::Coverage) {
    const shapeconf::ExperimentReport report = shapeconf::run_coverage(plan.run, workers);
    outputs = write_coverage(dir, head, report);
    results["coverage"] = report.summary.coverage;
    results["coverage_se"] = report.summary.coverage_se;
    results["nominal_coverage"] = report.summary.nominal_coverage;
    results["mean_pieces"] = report.summary.mean_pieces;
  } else {
    const shapeconf::AdaptivityReport report = shapeconf::run_adaptivity(plan.run, workers, plan.gammas);
    outputs = write_coverage(dir, head, report.coverage);
    const std::string adaptivity =
        head + "true_pieces,mean_pieces,pieces_se,expectation_bound,expectation_holds,mean_radius_ratio,radius_ratio_se\n" +
        fmt(report.coverage.summary.true_pieces) + "," + fmt(report.coverage.summary.mean_pieces) + "," +
        fmt(report.coverage.summary.pieces_se) + "," + fmt(report.expectation_bound) + "," +
        (report.expectation_holds ? "1" : "0") + "," + fmt(report.mean_radius_ratio) + "," +
        fmt(report.radius_ratio_se) + "\n";
    write_file(dir / "adaptivity.csv", adaptivity);
    outputs.emplace_back("adaptivity", (dir / "adaptivity.csv").string());
    if (!report.deviation.empty()) {
      write_file(dir / "deviation.csv", head + kTailHeader + tail_rows("pieces", report.deviation));
      outputs.emplace_back("deviation", (dir / "deviation.csv").string());
    }
    results["coverage"] = report.coverage.summary.coverage;
    results["mean_pieces"] = report.coverage.summary.mean_pieces;
    results["expectation_bound"] = report.expectation_bound;
    results["expectation_holds"] = report.expectation_holds;
  }

  json manifest;
  manifest["subcommand"] = "experiment";
  manifest["version"] = shapeconf::kVersion;
  manifest["timestamp"] = utc_timestamp();
  manifest["workers"] = workers;
  manifest["config_file"] = config_path;
  json config = json::object();
  for (const auto& [k, v] : settings) config[k] = v;
  manifest["config"] = config;
  json files = json::object();
  for (const auto& [k, v] : outputs) files[k] = v;
  files["manifest"] = (dir / "manifest.json").string();
  manifest["outputs"] = files;
  manifest["results"] = results;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << results.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape-constrained projections, adaptive confidence balls and Monte Carlo checks"};
  app.set_version_flag("--version", std::string(shapeconf::kVersion));
  app.require_subcommand(1);

  std::string input, cone = "isotonic", out, config;
  double sigma = 1.0, alpha = 0.05;
  bool tv = false;
  unsigned workers = 1;
  std::uint64_t seed = 0;

  auto* project = app.add_subcommand("project", "Project a series onto a shape cone");
  project->add_option("--input", input, "One-column file or CSV with a 'y' column")->required();
  project->add_option("--cone", cone, "isotonic, antitonic, convex or concave")->capture_default_str();
  project->add_option("--out", out, "Output CSV (default: stdout)");

  auto* ball = app.add_subcommand("ball", "Adaptive confidence ball around the projection");
  ball->add_option("--input", input, "One-column file or CSV with a 'y' column")->required();
  ball->add_option("--cone", cone, "isotonic, antitonic, convex or concave")->capture_default_str();
  ball->add_option("--sigma", sigma, "Noise standard deviation")->capture_default_str();
  ball->add_option("--alpha", alpha, "Level; the ball has coverage 1 - alpha")->capture_default_str();
  ball->add_flag("--tv", tv, "Also use the total-variation radius (monotone cones only)");
  ball->add_option("--out", out, "Write the center to this CSV instead of inlining it");

  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment from a config file");
  experiment->add_option("--config", config, "key=value config file")->required();
  experiment->add_option("--out", out, "Output directory")->required();
  experiment->add_option("--workers", workers, "Worker threads (0 = all cores)")->capture_default_str();
  auto* seed_opt = experiment->add_option("--seed", seed, "Override the master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*project) return cmd_project(input, cone, out);
    if (*ball) return cmd_ball(input, cone, sigma, alpha, tv, out);
    return cmd_experiment(config, out, workers, *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt);
  } catch (const shapeconf::ReplicateFailure& e) {
    std::cerr << "error: replicate " << e.replicate() << ": " << e.what() << "\n";
    return kExitNumerical;
  } catch (const shapeconf::NumericalFailure& e) {
    std::cerr << "error: numerical failure after " << e.iterations() << " iterations: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const shapeconf::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
