// Copyright 2026 The intrinsic-flow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "app.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "config.h"
#include "experiments.h"
#include "iflow/errors.h"
#include "output.h"

#ifndef IFLOW_VERSION
#define IFLOW_VERSION "unknown"
#endif

namespace iflow::cli {

namespace fs = std::filesystem;

namespace {

Json Versions() {
  return {
      {"intrinsic_flow", IFLOW_VERSION},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
      {"compiler", __VERSION__},
  };
}

Json ChecksJson(const std::vector<Check>& checks, const std::string& label) {
  Json out = Json::array();
  for (Check c : checks) {
    if (!label.empty()) c.name = label + "/" + c.name;
    out.push_back(CheckToJson(c));
  }
  return out;
}

// Worst case over sweep points: max for numbers (min for "min_" keys), all
// for booleans.
Json Aggregate(const std::vector<Json>& summaries) {
  Json out = Json::object();
  for (const Json& s : summaries) {
    for (auto it = s.begin(); it != s.end(); ++it) {
      const Json& v = it.value();
      const std::string& k = it.key();
      if (v.is_boolean()) {
        out[k] = out.contains(k) ? Json(out[k].get<bool>() && v.get<bool>()) : v;
      } else if (v.is_number()) {
        if (!out.contains(k)) {
          out[k] = v;
        } else if (out[k].is_number()) {
          const double a = out[k].get<double>(), b = v.get<double>();
          out[k] = k.rfind("min_", 0) == 0 ? std::min(a, b) : std::max(a, b);
        }
      }
    }
  }
  return out;
}

}  // namespace

int RunCommand(const std::string& config_path, std::ostream& out,
               std::ostream& err) {
  std::string text;
  try {
    text = ReadFile(config_path);
  } catch (const IoError& e) {
    err << "intrinsic-flow: " << e.what() << '\n';
    return kExitIo;
  }
  ConfigFile file;
  try {
    file = ParseConfigText(text);
  } catch (const SchemaError& e) {
    err << "intrinsic-flow: schema error: " << e.what() << '\n';
    return kExitSchema;
  }
  const ExperimentConfig& first = file.points.front();

  fs::path dir;
  Json manifest = {
      {"tool", "intrinsic-flow"},
      {"versions", Versions()},
      {"experiment", first.experiment},
      {"config_path", config_path},
      {"config_hash", ConfigHash(file.document)},
      {"seed", first.seed},
      {"config", file.document},
      {"output_dir", first.output.dir},
  };
  std::vector<Json> summaries;
  Json checks = Json::array();
  Json files = Json::array();
  Json points = Json::array();
  Json error = nullptr;
  bool all_pass = true;
  try {
    dir = ResolveOutputDir(first.output.dir);
    MakeDirs(dir);
    for (std::size_t i = 0; i < file.points.size(); ++i) {
      const ExperimentConfig& c = file.points[i];
      const std::string label = file.is_sweep ? "point_" + std::to_string(i) : "";
      const fs::path point_dir = label.empty() ? dir : dir / label;
      MakeDirs(point_dir);
      ExperimentResult result;
      try {
        RunExperiment(c, point_dir, result);
      } catch (const NumericalError& e) {
        error = {{"kind", "numerical"}, {"message", e.what()}};
        if (file.is_sweep) error["point"] = i;
      }
      for (const std::string& f : result.files) {
        files.push_back(label.empty() ? f : label + "/" + f);
      }
      summaries.push_back(result.summary);
      for (const Json& ch : ChecksJson(result.checks, label)) checks.push_back(ch);
      all_pass &= result.passed();
      if (file.is_sweep) {
        points.push_back({{"index", i},
                          {"patch", file.document["sweep"][i]},
                          {"summary", result.summary},
                          {"checks", ChecksJson(result.checks, "")},
                          {"verdict", result.passed() ? "pass" : "fail"}});
      }
      if (!error.is_null()) break;
    }
    const bool failed = !error.is_null();
    manifest["status"] = failed ? "numerical_failure" : "ok";
    manifest["error"] = error;
    manifest["summary"] =
        file.is_sweep ? Aggregate(summaries) : summaries.front();
    manifest["checks"] = checks;
    manifest["verdict"] = (!failed && all_pass) ? "pass" : "fail";
    manifest["files"] = files;
    if (file.is_sweep) manifest["points"] = points;
    WriteJson(dir / "manifest.json", manifest);
  } catch (const IoError& e) {
    err << "intrinsic-flow: " << e.what() << '\n';
    return kExitIo;
  }

  out << first.experiment << ": " << manifest["verdict"].get<std::string>()
      << " (" << (dir / "manifest.json").string() << ")\n";
  for (const Json& ch : checks) {
    out << "  " << (ch["pass"].get<bool>() ? "PASS" : "FAIL") << "  "
        << ch["name"].get<std::string>() << " = " << ch["value"].dump() << ' '
        << ch["op"].get<std::string>() << ' ' << ch["threshold"].dump() << '\n';
  }
  if (!error.is_null()) {
    err << "intrinsic-flow: numerical failure: "
        << error["message"].get<std::string>() << '\n';
    return kExitNumerical;
  }
  return all_pass ? kExitOk : kExitChecksFailed;
}

namespace {

struct ReportRow {
  std::vector<std::string> cells;
};

const std::vector<std::string>& ReportHeader() {
  static const std::vector<std::string> header = {
      "path",          "experiment",  "status",
      "verdict",       "checks_passed", "checks_total",
      "config_hash",   "seed",        "compare_error",
      "max_drift_relative", "empirical_order", "metrics"};
  return header;
}

std::string Scalar(const Json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return FormatDouble(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return "";
}

// Least-squares slope of log error against log size from a convergence table.
std::string OrderFromCsv(const fs::path& csv) {
  std::istringstream in(ReadFile(csv));
  std::string line;
  std::getline(in, line);
  std::vector<double> x, y;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string size, err;
    std::getline(row, size, ',');
    std::getline(row, err, ',');
    if (size.empty() || err.empty()) continue;
    x.push_back(std::log(std::stod(size)));
    y.push_back(std::log(std::stod(err)));
  }
  if (x.size() < 2) return "";
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return FormatDouble(-(n * sxy - sx * sy) / (n * sxx - sx * sx));
}

std::string CsvCell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

ReportRow MakeRow(const std::string& path, const Json& m) {
  int passed = 0, total = 0;
  for (const Json& c : m.value("checks", Json::array())) {
    ++total;
    if (c.value("pass", false)) ++passed;
  }
  const Json summary = m.value("summary", Json::object());
  std::string order;
  if (m.value("experiment", "") == "convergence") {
    for (const Json& f : m.value("files", Json::array())) {
      const std::string name = f.get<std::string>();
      if (name.size() >= 15 &&
          name.compare(name.size() - 15, 15, "convergence.csv") == 0) {
        order = OrderFromCsv(fs::path(path).parent_path() / name);
      }
    }
  }
  std::string metrics;
  for (auto it = summary.begin(); it != summary.end(); ++it) {
    if (it.value().is_array() || it.value().is_object() || it.value().is_null()) {
      continue;
    }
    metrics += (metrics.empty() ? "" : ";") + it.key() + "=" + Scalar(it.value());
  }
  return {{path, Scalar(m.value("experiment", Json(""))),
           Scalar(m.value("status", Json(""))),
           Scalar(m.value("verdict", Json(""))), std::to_string(passed),
           std::to_string(total), Scalar(m.value("config_hash", Json(""))),
           Scalar(m.value("seed", Json(""))),
           Scalar(summary.value("compare_error", Json(""))),
           Scalar(summary.value("max_drift_relative", Json(""))), order,
           metrics}};
}

}  // namespace

int ReportCommand(std::vector<std::string> manifests, const std::string& format,
                  const std::string& output, std::ostream& out,
                  std::ostream& err) {
  std::sort(manifests.begin(), manifests.end());
  std::vector<ReportRow> rows;
  try {
    for (const std::string& p : manifests) {
      Json m;
      try {
        m = Json::parse(ReadFile(p));
      } catch (const Json::parse_error& e) {
        err << "intrinsic-flow: " << p << " is not valid JSON: " << e.what()
            << '\n';
        return kExitSchema;
      }
      if (!m.is_object() || !m.contains("experiment")) {
        err << "intrinsic-flow: " << p << " is not a manifest\n";
        return kExitSchema;
      }
      rows.push_back(MakeRow(p, m));
    }
  } catch (const IoError& e) {
    err << "intrinsic-flow: " << e.what() << '\n';
    return kExitIo;
  }

  std::ostringstream table;
  const auto& header = ReportHeader();
  if (format == "markdown") {
    auto line = [&](const std::vector<std::string>& cells) {
      table << '|';
      for (const std::string& c : cells) table << ' ' << c << " |";
      table << '\n';
    };
    line(header);
    table << '|';
    for (std::size_t i = 0; i < header.size(); ++i) table << " --- |";
    table << '\n';
    for (const ReportRow& r : rows) line(r.cells);
  } else {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        table << (i ? "," : "") << CsvCell(cells[i]);
      }
      table << '\n';
    };
    line(header);
    for (const ReportRow& r : rows) line(r.cells);
  }
  if (output.empty()) {
    out << table.str();
    return kExitOk;
  }
  std::ofstream file(output);
  file << table.str();
  file.close();
  if (!file) {
    err << "intrinsic-flow: cannot write " << output << '\n';
    return kExitIo;
  }
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"Gradient flows in parameter space and their intrinsic "
               "counterparts in lifted space"};
  app.set_version_flag("--version", std::string(IFLOW_VERSION));
  app.require_subcommand(1);

  std::string config;
  CLI::App* run = app.add_subcommand("run", "Run the experiment in a JSON config");
  run->add_option("config", config, "Path to the config file")->required();

  std::vector<std::string> manifests;
  std::string format = "csv";
  std::string output;
  CLI::App* report =
      app.add_subcommand("report", "Summarize manifests as one row each");
  report->add_option("manifests", manifests, "manifest.json files");
  report->add_option("--format", format, "csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));
  report->add_option("-o,--output", output, "Write the table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitSchema;
  }
  if (run->parsed()) return RunCommand(config, std::cout, std::cerr);
  return ReportCommand(manifests, format, output, std::cout, std::cerr);
}

}  // namespace iflow::cli
