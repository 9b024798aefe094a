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

#include "config.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace iflow::cli {
namespace {

const std::set<std::string>& ToleranceNames() {
  static const std::set<std::string> names = {
      "compare_error",  "identity_error",  "drift",           "jacobian",
      "gradient",       "residual",        "recover_gram",    "flat_direction",
      "metric_floor",   "adjoint",         "euler_ratio_min", "euler_ratio_max",
      "drift_ratio_min", "drift_ratio_max", "order_min",      "gamma"};
  return names;
}

std::string Join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Typed access to one JSON object that remembers which keys were read.
class Fields {
 public:
  Fields(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(path_, "expected an object");
  }

  bool Has(const std::string& key) const { return obj_.contains(key); }

  const Json& Raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  std::string String(const std::string& key,
                      const std::optional<std::string>& def = std::nullopt) {
    if (!Has(key)) return Default(key, def);
    const Json& v = Raw(key);
    if (!v.is_string()) throw SchemaError(Join(path_, key), "expected a string");
    return v.get<std::string>();
  }

  std::string OneOf(const std::string& key, const std::vector<std::string>& ok,
                    const std::optional<std::string>& def = std::nullopt) {
    const std::string v = String(key, def);
    if (std::find(ok.begin(), ok.end(), v) == ok.end()) {
      std::string list;
      for (const auto& s : ok) list += (list.empty() ? "" : ", ") + s;
      throw SchemaError(Join(path_, key),
                        "unknown value \"" + v + "\" (expected one of " + list +
                            ")");
    }
    return v;
  }

  double Number(const std::string& key,
                const std::optional<double>& def = std::nullopt) {
    if (!Has(key)) return Default(key, def);
    return AsNumber(Raw(key), Join(path_, key));
  }

  double Positive(const std::string& key,
                  const std::optional<double>& def = std::nullopt) {
    const double v = Number(key, def);
    if (!(v > 0.0)) throw SchemaError(Join(path_, key), "must be positive");
    return v;
  }

  std::int64_t Integer(const std::string& key, std::int64_t lo,
                       const std::optional<std::int64_t>& def = std::nullopt) {
    if (!Has(key)) return Default(key, def);
    const std::int64_t v = AsInteger(Raw(key), Join(path_, key));
    if (v < lo) {
      throw SchemaError(Join(path_, key),
                        "must be at least " + std::to_string(lo));
    }
    return v;
  }

  bool Bool(const std::string& key, bool def) {
    if (!Has(key)) return def;
    const Json& v = Raw(key);
    if (!v.is_boolean()) throw SchemaError(Join(path_, key), "expected a boolean");
    return v.get<bool>();
  }

  std::vector<double> Numbers(const std::string& key) {
    if (!Has(key)) return {};
    const Json& v = Raw(key);
    const std::string p = Join(path_, key);
    if (!v.is_array()) throw SchemaError(p, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(AsNumber(v[i], p + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  std::vector<std::int64_t> Integers(const std::string& key, std::int64_t lo) {
    const Json& v = Raw(key);
    const std::string p = Join(path_, key);
    if (!v.is_array() || v.empty()) {
      throw SchemaError(p, "expected a non-empty array of integers");
    }
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string pi = p + "[" + std::to_string(i) + "]";
      out.push_back(AsInteger(v[i], pi));
      if (out.back() < lo) {
        throw SchemaError(pi, "must be at least " + std::to_string(lo));
      }
    }
    return out;
  }

  Fields Object(const std::string& key) { return Fields(Raw(key), Join(path_, key)); }

  const std::string& path() const { return path_; }

  // Every key of the object must have been read.
  void Done() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw SchemaError(Join(path_, it.key()), "unknown key");
      }
    }
  }

 private:
  template <typename T>
  T Default(const std::string& key, const std::optional<T>& def) const {
    if (!def) throw SchemaError(Join(path_, key), "missing required key");
    return *def;
  }

  static double AsNumber(const Json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw SchemaError(path, "must be finite");
    return x;
  }

  static std::int64_t AsInteger(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
    return v.get<std::int64_t>();
  }

  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

ModelSpec ParseModel(Fields f) {
  ModelSpec m;
  m.kind = f.OneOf("kind", {"linear_chain", "rank_one", "diag_path", "attention"});
  if (m.kind == "linear_chain") {
    const auto dims = f.Integers("dims", 1);
    if (dims.size() < 3) {
      throw SchemaError(Join(f.path(), "dims"),
                        "a chain needs at least two layers (three widths)");
    }
    m.dims.assign(dims.begin(), dims.end());
  } else if (m.kind == "rank_one") {
    m.n = f.Integer("n", 1);
    m.m = f.Integer("m", 1);
    m.r = f.Integer("r", 1);
  } else if (m.kind == "diag_path") {
    m.n = f.Integer("n", 1);
    m.m = f.Integer("m", 1);
  } else {
    m.d1 = f.Integer("d1", 1);
    m.dim = f.Integer("dim", 1);
  }
  f.Done();
  return m;
}

InitSpec ParseInit(Fields f) {
  InitSpec s;
  s.kind = f.OneOf("kind", {"random", "relaxed_balanced", "relaxed_diag_path"},
                   std::string("random"));
  if (s.kind == "random") {
    s.scale = f.Positive("scale", 1.0);
  } else {
    s.lambda = f.Numbers("lambda");
    if (s.kind == "relaxed_diag_path") s.mu = f.Numbers("mu");
    s.seed_scan = static_cast<int>(f.Integer("seed_scan", 1, 1000));
  }
  f.Done();
  return s;
}

Matrix ParseMatrix(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) {
    throw SchemaError(path, "expected a non-empty array of rows");
  }
  const std::size_t rows = v.size(), cols = v[0].size();
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) {
      throw SchemaError(path + "[" + std::to_string(i) + "]",
                        "rows must have equal length");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const Json& x = v[i][j];
      if (!x.is_number()) {
        throw SchemaError(
            path + "[" + std::to_string(i) + "][" + std::to_string(j) + "]",
            "expected a number");
      }
      out(i, j) = x.get<double>();
    }
  }
  return out;
}

LossSpec ParseLoss(Fields f) {
  LossSpec s;
  s.kind = f.OneOf("kind", {"quadratic", "attention"}, std::string("quadratic"));
  if (f.Has("target") && f.Raw("target").is_array()) {
    s.target = "matrix";
    s.matrix = ParseMatrix(f.Raw("target"), Join(f.path(), "target"));
  } else {
    s.target = f.OneOf("target", {"random", "identity_random"},
                       std::string("random"));
    s.target_scale = f.Positive("target_scale", 1.0);
  }
  if (s.kind == "attention") s.tokens = f.Integer("tokens", 1, 4);
  f.Done();
  return s;
}

LambdaSpec ParseLambda(Fields f) {
  LambdaSpec s;
  s.kind = f.OneOf("kind", {"constant", "linear", "quadratic", "sampled"});
  if (s.kind == "sampled") {
    s.values = f.Numbers("values");
    if (s.values.size() < 2) {
      throw SchemaError(Join(f.path(), "values"), "need at least two samples");
    }
  } else {
    s.c = f.Number("c");
  }
  f.Done();
  return s;
}

}  // namespace

bool IsMonomial(const ModelSpec& m) {
  if (m.kind == "rank_one" || m.kind == "diag_path") return true;
  if (m.kind != "linear_chain") return false;
  for (std::size_t i = 1; i + 1 < m.dims.size(); ++i) {
    if (m.dims[i] != 1) return false;
  }
  return true;
}

std::pair<Eigen::Index, Eigen::Index> TargetShape(const ModelSpec& m,
                                                  const LossSpec& loss) {
  if (m.kind == "linear_chain") return {m.dims.back(), m.dims.front()};
  if (m.kind == "rank_one") return {m.n * m.m, m.r};
  if (m.kind == "diag_path") return {m.n, m.m};
  return {loss.tokens, m.dim};
}

const std::vector<std::string>& ExperimentNames() {
  static const std::vector<std::string> names = {
      "run-flow", "compare-intrinsic", "check-criteria",
      "counterexample", "neural-ode", "convergence"};
  return names;
}

ExperimentConfig ParseConfig(const Json& doc) {
  Fields f(doc, "");
  ExperimentConfig c;
  c.raw = doc;
  c.experiment = f.OneOf("experiment", ExperimentNames());
  c.seed = static_cast<std::uint64_t>(f.Integer("seed", 0, 0));
  if (f.Has("model")) c.model = ParseModel(f.Object("model"));
  if (f.Has("init")) c.init = ParseInit(f.Object("init"));
  if (f.Has("loss")) c.loss = ParseLoss(f.Object("loss"));
  if (f.Has("integrator")) {
    Fields g = f.Object("integrator");
    c.integrator.dt = g.Positive("dt", 1e-3);
    c.integrator.t_final = g.Positive("t_final", 1.0);
    c.integrator.scheme = g.OneOf("scheme", {"rk4", "euler"}, std::string("rk4"));
    c.integrator.record_every =
        static_cast<int>(g.Integer("record_every", 1, 1));
    g.Done();
  }
  if (f.Has("intrinsic")) {
    c.intrinsic = f.OneOf(
        "intrinsic",
        {"auto", "scalar", "two_layer", "three_layer", "deep_linear"});
  }
  if (f.Has("tolerances")) {
    const Json& t = f.Raw("tolerances");
    if (!t.is_object()) throw SchemaError("tolerances", "expected an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      const std::string p = "tolerances." + it.key();
      if (!ToleranceNames().count(it.key())) throw SchemaError(p, "unknown key");
      if (!it.value().is_number()) throw SchemaError(p, "expected a number");
      c.tolerances[it.key()] = it.value().get<double>();
    }
  }
  {
    Fields o = f.Object("output");
    c.output.dir = o.String("dir");
    if (c.output.dir.empty()) throw SchemaError("output.dir", "must not be empty");
    c.output.prefix = o.String("prefix", std::string());
    if (c.output.prefix.find('/') != std::string::npos) {
      throw SchemaError("output.prefix", "must not contain '/'");
    }
    o.Done();
  }
  if (f.Has("criteria")) {
    Fields g = f.Object("criteria");
    c.criteria.points = static_cast<int>(g.Integer("points", 1, 20));
    c.criteria.min_abs = g.Positive("min_abs", 0.1);
    c.criteria.frobenius_depth =
        static_cast<int>(g.Integer("frobenius_depth", 1, 1));
    if (g.Has("expect")) {
      const Json& e = g.Raw("expect");
      if (!e.is_array()) throw SchemaError("criteria.expect", "expected an array");
      std::vector<std::string> list;
      for (const Json& x : e) {
        if (!x.is_string() || (x != "intersection_trivial" &&
                                x != "frobenius" && x != "dim_w")) {
          throw SchemaError("criteria.expect",
                            "entries must be intersection_trivial, frobenius "
                            "or dim_w");
        }
        list.push_back(x.get<std::string>());
      }
      c.criteria.expect = list;
    }
    g.Done();
  }
  if (f.Has("counterexample")) {
    Fields g = f.Object("counterexample");
    c.counterexample.n = g.Integer("n", 1, 3);
    c.counterexample.m = g.Integer("m", 1, 3);
    c.counterexample.r = g.Integer("r", 2, 2);
    c.counterexample.seeds = static_cast<int>(g.Integer("seeds", 1, 20));
    g.Done();
  }
  if (f.Has("neural_ode")) {
    Fields g = f.Object("neural_ode");
    c.neural_ode.field =
        g.OneOf("field", {"smooth", "relaxed"}, std::string("smooth"));
    c.neural_ode.size = static_cast<int>(g.Integer("size", 3, 16));
    c.neural_ode.dim = g.Integer("dim", 1, 2);
    c.neural_ode.field_scale = g.Positive("field_scale", 0.5);
    if (g.Has("lambda")) c.neural_ode.lambda = ParseLambda(g.Object("lambda"));
    c.neural_ode.euler_size = static_cast<int>(g.Integer("euler_size", 1, 32));
    c.neural_ode.fd_size = static_cast<int>(g.Integer("fd_size", 1, 8));
    g.Done();
  }
  if (f.Has("convergence")) {
    Fields g = f.Object("convergence");
    if (g.Has("sizes")) {
      const auto sizes = g.Integers("sizes", 1);
      c.convergence.sizes.assign(sizes.begin(), sizes.end());
      if (sizes.size() < 2) {
        throw SchemaError("convergence.sizes", "need at least two sizes");
      }
    }
    c.convergence.dim = g.Integer("dim", 1, 2);
    c.convergence.a0_scale = g.Positive("a0_scale", 0.5);
    c.convergence.quadrature_nodes =
        static_cast<int>(g.Integer("quadrature_nodes", 1, 32));
    if (g.Has("lambda")) c.convergence.lambda = ParseLambda(g.Object("lambda"));
    if (g.Has("gamma_probes")) {
      const Json& probes = g.Raw("gamma_probes");
      if (!probes.is_array()) {
        throw SchemaError("convergence.gamma_probes", "expected an array");
      }
      for (std::size_t i = 0; i < probes.size(); ++i) {
        Fields p(probes[i], "convergence.gamma_probes[" + std::to_string(i) + "]");
        GammaProbe probe;
        probe.name = p.String("name");
        probe.lambda = ParseLambda(p.Object("lambda"));
        probe.expect_zero = p.Bool("expect_zero", false);
        p.Done();
        c.convergence.gamma_probes.push_back(std::move(probe));
      }
    }
    g.Done();
  }
  f.Done();

  const bool needs_model = c.experiment == "run-flow" ||
                           c.experiment == "compare-intrinsic" ||
                           c.experiment == "check-criteria";
  if (needs_model && !c.model) {
    throw SchemaError("model", "required for " + c.experiment);
  }
  if ((c.experiment == "run-flow" || c.experiment == "compare-intrinsic") &&
      !c.loss) {
    throw SchemaError("loss", "required for " + c.experiment);
  }
  if (c.model) {
    const bool chain = c.model->kind == "linear_chain";
    if (c.init.kind == "relaxed_balanced") {
      if (!chain) {
        throw SchemaError("init.kind", "relaxed_balanced needs a linear_chain");
      }
      if (c.init.lambda.size() + 2 != c.model->dims.size()) {
        throw SchemaError("init.lambda",
                          "need one value per hidden interface (" +
                              std::to_string(c.model->dims.size() - 2) + ")");
      }
    }
    if (c.init.kind == "relaxed_diag_path") {
      if (c.model->kind != "diag_path") {
        throw SchemaError("init.kind", "relaxed_diag_path needs a diag_path model");
      }
      if (c.init.lambda.size() != static_cast<std::size_t>(c.model->n) ||
          c.init.mu.size() != static_cast<std::size_t>(c.model->m)) {
        throw SchemaError("init", "need n lambda values and m mu values");
      }
    }
    if (c.loss && c.loss->kind == "attention" && c.model->kind != "attention") {
      throw SchemaError("loss.kind", "attention loss needs an attention model");
    }
    if (c.loss && c.loss->kind == "quadratic" && c.model->kind == "attention") {
      throw SchemaError("loss.kind", "attention models take an attention loss");
    }
  }
  if (c.experiment == "compare-intrinsic") {
    const std::string& k = c.model->kind;
    const bool chain = k == "linear_chain";
    const std::size_t depth = chain ? c.model->dims.size() - 1 : 0;
    const bool scalar_ok = chain && depth == 2 && c.model->dims.front() == 1 &&
                           c.model->dims.back() == 1;
    std::string want = c.intrinsic;
    if (want == "auto") {
      if (scalar_ok) {
        want = "scalar";
      } else if (chain) {
        want = depth == 2 ? "two_layer" : "deep_linear";
      } else if (k == "diag_path") {
        want = "three_layer";
      } else {
        throw SchemaError("intrinsic", "no intrinsic flow for model " + k);
      }
    }
    const bool square =
        chain && std::all_of(c.model->dims.begin(), c.model->dims.end(),
                             [&](Eigen::Index d) { return d == c.model->dims[0]; });
    if (want == "deep_linear" && chain && !square) {
      throw SchemaError("intrinsic", "deep_linear needs equal widths");
    }
    const bool ok = (want == "scalar" && scalar_ok) ||
                    (want == "two_layer" && chain && depth == 2) ||
                    (want == "deep_linear" && square) ||
                    (want == "three_layer" && k == "diag_path");
    if (!ok) {
      throw SchemaError("intrinsic", want + " does not apply to model " + k);
    }
    c.intrinsic = want;
  }
  if (c.experiment == "compare-intrinsic" && c.integrator.scheme != "rk4") {
    throw SchemaError("integrator.scheme", "compare-intrinsic integrates with rk4");
  }
  if (c.model && c.loss && c.loss->target == "matrix") {
    const auto [rows, cols] = TargetShape(*c.model, *c.loss);
    if (c.loss->matrix.rows() != rows || c.loss->matrix.cols() != cols) {
      throw SchemaError("loss.target", "expected a " + std::to_string(rows) +
                                           " x " + std::to_string(cols) +
                                           " matrix");
    }
  }
  if (c.experiment == "neural-ode" || c.experiment == "convergence") {
    const Eigen::Index n = c.experiment == "neural-ode" ? c.neural_ode.dim
                                                        : c.convergence.dim;
    if (c.loss && c.loss->kind != "quadratic") {
      throw SchemaError("loss.kind", c.experiment + " takes a quadratic loss");
    }
    if (c.loss && c.loss->target == "matrix" &&
        (c.loss->matrix.rows() != n || c.loss->matrix.cols() != n)) {
      throw SchemaError("loss.target", "expected a " + std::to_string(n) +
                                           " x " + std::to_string(n) +
                                           " matrix");
    }
  }
  if (c.experiment == "check-criteria" && c.criteria.expect) {
    const bool needs_monomial =
        std::find(c.criteria.expect->begin(), c.criteria.expect->end(),
                  "frobenius") != c.criteria.expect->end();
    if (needs_monomial && !IsMonomial(*c.model)) {
      throw SchemaError("criteria.expect",
                        "frobenius needs a monomial model (rank_one, "
                        "diag_path or a chain with inner widths 1)");
    }
  }
  if (c.experiment == "counterexample" &&
      (c.counterexample.r > c.counterexample.n ||
       c.counterexample.r > c.counterexample.m)) {
    throw SchemaError("counterexample.r", "must not exceed n or m");
  }
  return c;
}

ConfigFile ParseConfigText(const std::string& text) {
  ConfigFile out;
  try {
    out.document = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  if (!out.document.is_object()) {
    throw SchemaError("", "top level must be an object");
  }
  if (!out.document.contains("sweep")) {
    out.points.push_back(ParseConfig(out.document));
    return out;
  }
  const Json& sweep = out.document["sweep"];
  if (!sweep.is_array() || sweep.empty()) {
    throw SchemaError("sweep", "expected a non-empty array of patches");
  }
  Json base = out.document;
  base.erase("sweep");
  out.is_sweep = true;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (!sweep[i].is_object()) {
      throw SchemaError("sweep[" + std::to_string(i) + "]",
                        "expected an object");
    }
    if (sweep[i].contains("output") || sweep[i].contains("experiment")) {
      throw SchemaError("sweep[" + std::to_string(i) + "]",
                        "a sweep point may not change output or experiment");
    }
    Json point = base;
    point.merge_patch(sweep[i]);
    try {
      out.points.push_back(ParseConfig(point));
    } catch (const SchemaError& e) {
      throw SchemaError(Join("sweep[" + std::to_string(i) + "]", e.path()),
                        e.message());
    }
  }
  return out;
}

std::string ConfigHash(const Json& doc) {
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace iflow::cli
