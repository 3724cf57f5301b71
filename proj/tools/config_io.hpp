#pragma once
//------------------------------------------------------------------------------
//
//   Copyright 2026 The sdcredit Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include "sdcredit/model.hpp"
#include "sdcredit/utility.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdcredit::cli {

using Json = nlohmann::json;

class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string const &path, std::string const &what)
    : std::runtime_error(path + ": " + what)
    , path_(path)
  {}

  std::string const &path() const noexcept
  {
    return path_;
  }

private:
  std::string path_;
};

struct Sweep
{
  std::optional<int> t_min;
  std::optional<int> t_max;
  std::vector<int>   n_list;
};

struct RunOptions
{
  int                section = 4;
  std::optional<int> delta1_index;  ///< zero-based
  std::optional<Sweep> sweep;
};

struct OutputOptions
{
  std::string dir = "out";
  bool        csv  = true;
  bool        json = true;
};

struct RunConfigDocument
{
  ModelConfig   model;
  RunOptions    run;
  OutputOptions output;
  std::vector<double> raw_p;  ///< as written, before renormalization
};

namespace detail {

inline void reject_unknown(Json const &obj, std::string const &path, std::initializer_list<char const *> allowed)
{
  if (!obj.is_object())
  {
    throw ConfigError(path, "expected an object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it)
  {
    bool known = false;
    for (char const *key : allowed)
    {
      known = known || it.key() == key;
    }
    if (!known)
    {
      throw ConfigError(path + "." + it.key(), "unknown key");
    }
  }
}

inline Json const &require(Json const &obj, std::string const &path, char const *key)
{
  auto it = obj.find(key);
  if (it == obj.end())
  {
    throw ConfigError(path + "." + key, "missing required key");
  }
  return *it;
}

inline double number(Json const &v, std::string const &path)
{
  if (!v.is_number())
  {
    throw ConfigError(path, "expected a number");
  }
  return v.get<double>();
}

inline int integer(Json const &v, std::string const &path)
{
  if (!v.is_number_integer())
  {
    throw ConfigError(path, "expected an integer");
  }
  return v.get<int>();
}

inline std::vector<double> numbers(Json const &v, std::string const &path)
{
  if (!v.is_array())
  {
    throw ConfigError(path, "expected an array of numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
  {
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::string text(Json const &v, std::string const &path)
{
  if (!v.is_string())
  {
    throw ConfigError(path, "expected a string");
  }
  return v.get<std::string>();
}

inline ModelConfig parse_model(Json const &m)
{
  std::string const path = "model";
  reject_unknown(m, path, {"T", "deltas", "p", "q", "R", "income", "utility"});
  ModelConfig cfg;
  cfg.T      = integer(require(m, path, "T"), path + ".T");
  cfg.deltas = numbers(require(m, path, "deltas"), path + ".deltas");
  cfg.p      = numbers(require(m, path, "p"), path + ".p");
  cfg.q      = numbers(require(m, path, "q"), path + ".q");
  cfg.R      = number(require(m, path, "R"), path + ".R");

  Json const &inc = require(m, path, "income");
  reject_unknown(inc, path + ".income", {"kind", "value"});
  std::string const kind = text(require(inc, path + ".income", "kind"), path + ".income.kind");
  if (kind == "total")
  {
    cfg.income.kind = IncomeKind::TotalNPV;
  }
  else if (kind == "perPeriod")
  {
    cfg.income.kind = IncomeKind::PerPeriod;
  }
  else
  {
    throw ConfigError(path + ".income.kind", "expected \"total\" or \"perPeriod\"");
  }
  cfg.income.value = number(require(inc, path + ".income", "value"), path + ".income.value");

  Json const &ut = require(m, path, "utility");
  reject_unknown(ut, path + ".utility", {"kind", "param"});
  std::string const ukind = text(require(ut, path + ".utility", "kind"), path + ".utility.kind");
  try
  {
    if (ukind == "sqrt")
    {
      double const a = ut.contains("param") ? number(ut["param"], path + ".utility.param") : 0.5;
      cfg.utility    = UtilitySpec::sqrt_power(a);
    }
    else if (ukind == "log")
    {
      cfg.utility = UtilitySpec::log();
    }
    else if (ukind == "isoelastic")
    {
      cfg.utility = UtilitySpec::isoelastic_bounded(
          number(require(ut, path + ".utility", "param"), path + ".utility.param"));
    }
    else
    {
      throw ConfigError(path + ".utility.kind", "expected \"sqrt\", \"log\" or \"isoelastic\"");
    }
  }
  catch (std::invalid_argument const &e)
  {
    throw ConfigError(path + ".utility.param", e.what());
  }
  return cfg;
}

}  // namespace detail

inline RunConfigDocument parse_document(Json const &doc)
{
  detail::reject_unknown(doc, "$", {"model", "run", "output"});
  RunConfigDocument out;
  out.model = detail::parse_model(detail::require(doc, "$", "model"));
  out.raw_p = out.model.p;

  if (doc.contains("run"))
  {
    Json const &run = doc["run"];
    detail::reject_unknown(run, "run", {"section", "delta1Index", "sweep"});
    if (run.contains("section"))
    {
      out.run.section = detail::integer(run["section"], "run.section");
      if (out.run.section != 3 && out.run.section != 4)
      {
        throw ConfigError("run.section", "expected 3 or 4");
      }
    }
    if (run.contains("delta1Index"))
    {
      int const k = detail::integer(run["delta1Index"], "run.delta1Index");
      if (k < 1 || k > static_cast<int>(out.model.deltas.size()))
      {
        throw ConfigError("run.delta1Index", "must lie in 1..N");
      }
      out.run.delta1_index = k - 1;
    }
    if (run.contains("sweep"))
    {
      Json const &sw = run["sweep"];
      detail::reject_unknown(sw, "run.sweep", {"tMin", "tMax", "nList"});
      Sweep s;
      if (sw.contains("tMin") || sw.contains("tMax"))
      {
        s.t_min = detail::integer(detail::require(sw, "run.sweep", "tMin"), "run.sweep.tMin");
        s.t_max = detail::integer(detail::require(sw, "run.sweep", "tMax"), "run.sweep.tMax");
      }
      if (sw.contains("nList"))
      {
        Json const &nl = sw["nList"];
        if (!nl.is_array())
        {
          throw ConfigError("run.sweep.nList", "expected an array of integers");
        }
        for (std::size_t i = 0; i < nl.size(); ++i)
        {
          s.n_list.push_back(detail::integer(nl[i], "run.sweep.nList[" + std::to_string(i) + "]"));
        }
      }
      if (!s.t_min && s.n_list.empty())
      {
        throw ConfigError("run.sweep", "expected tMin/tMax or nList");
      }
      out.run.sweep = s;
    }
  }

  if (doc.contains("output"))
  {
    Json const &o = doc["output"];
    detail::reject_unknown(o, "output", {"dir", "formats"});
    if (o.contains("dir"))
    {
      out.output.dir = detail::text(o["dir"], "output.dir");
    }
    if (o.contains("formats"))
    {
      Json const &f = o["formats"];
      if (!f.is_array())
      {
        throw ConfigError("output.formats", "expected an array");
      }
      out.output.csv  = false;
      out.output.json = false;
      for (std::size_t i = 0; i < f.size(); ++i)
      {
        std::string const v = detail::text(f[i], "output.formats[" + std::to_string(i) + "]");
        if (v == "csv")
        {
          out.output.csv = true;
        }
        else if (v == "json")
        {
          out.output.json = true;
        }
        else
        {
          throw ConfigError("output.formats[" + std::to_string(i) + "]", "expected \"csv\" or \"json\"");
        }
      }
    }
  }
  return out;
}

inline RunConfigDocument load_document(std::string const &file)
{
  std::ifstream in(file);
  if (!in)
  {
    throw ConfigError(file, "cannot open config file");
  }
  Json doc;
  try
  {
    doc = Json::parse(in);
  }
  catch (Json::parse_error const &e)
  {
    throw ConfigError(file, std::string("parse error: ") + e.what());
  }
  return parse_document(doc);
}

inline Json to_json(ModelConfig const &cfg)
{
  Json u = {{"kind", cfg.utility.name()}};
  if (cfg.utility.bounded())
  {
    u["param"] = cfg.utility.exponent();
  }
  return Json{{"T", cfg.T},
              {"deltas", cfg.deltas},
              {"p", cfg.p},
              {"q", cfg.q},
              {"R", cfg.R},
              {"income",
               {{"kind", cfg.income.kind == IncomeKind::TotalNPV ? "total" : "perPeriod"}, {"value", cfg.income.value}}},
              {"utility", u}};
}

//------------------------------------------------------------------------------
// CSV
//------------------------------------------------------------------------------

/// Twelve significant digits, shortest representation.
inline std::string fmt_number(double v)
{
  std::ostringstream out;
  out << std::setprecision(12) << v;
  return out.str();
}

class CsvWriter
{
public:
  explicit CsvWriter(std::vector<std::string> header)
    : columns_(header.size())
  {
    row_strings(header);
  }

  template <typename... Cells>
  void row(Cells const &...cells)
  {
    std::vector<std::string> out;
    (out.push_back(cell(cells)), ...);
    row_strings(out);
  }

  std::string str() const
  {
    return body_.str();
  }

  void save(std::string const &file) const
  {
    std::ofstream f(file, std::ios::binary);
    if (!f)
    {
      throw std::runtime_error("cannot write " + file);
    }
    f << body_.str();
  }

private:
  static std::string cell(double v)
  {
    return fmt_number(v);
  }
  static std::string cell(int v)
  {
    return std::to_string(v);
  }
  static std::string cell(std::size_t v)
  {
    return std::to_string(v);
  }
  static std::string cell(bool v)
  {
    return v ? "1" : "0";
  }
  static std::string cell(std::string const &v)
  {
    return v;
  }
  static std::string cell(char const *v)
  {
    return v;
  }

  void row_strings(std::vector<std::string> const &cells)
  {
    if (cells.size() != columns_)
    {
      throw std::logic_error("CSV row has the wrong number of cells");
    }
    for (std::size_t i = 0; i < cells.size(); ++i)
    {
      body_ << (i ? "," : "") << cells[i];
    }
    body_ << '\n';
  }

  std::size_t        columns_;
  std::ostringstream body_;
};

//------------------------------------------------------------------------------
// Policy documents
//------------------------------------------------------------------------------

/// Histories are written with one-based type indices.
inline Json policy_to_json(Policy const &pol, ModelConfig const &cfg)
{
  auto const &tree  = pol.tree();
  Json        nodes = Json::array();
  for (int date = 1; date <= pol.T(); ++date)
  {
    int const  len  = tree.history_length(date);
    auto const vals = pol.date_values(date);
    for (std::size_t i = 0; i < vals.size(); ++i)
    {
      auto h = tree.history(len, i);
      for (int &k : h)
      {
        k += 1;
      }
      Json node = {{"date", date}, {"history", h}, {"v", vals[i]}};
      node["c"] = eval_phi(cfg.utility, vals[i]);
      nodes.push_back(std::move(node));
    }
  }
  Json out = {{"T", pol.T()}, {"N", tree.N()}, {"nodes", nodes}};
  out["root"] = tree.root() ? Json(*tree.root() + 1) : Json(nullptr);
  return out;
}

inline Policy policy_from_json(Json const &doc)
{
  if (!doc.is_object())
  {
    throw ConfigError("policy", "expected an object");
  }
  detail::reject_unknown(doc, "policy", {"T", "N", "root", "nodes"});
  int const T = detail::integer(detail::require(doc, "policy", "T"), "policy.T");
  int const N = detail::integer(detail::require(doc, "policy", "N"), "policy.N");
  std::optional<int> root;
  if (doc.contains("root") && !doc["root"].is_null())
  {
    root = detail::integer(doc["root"], "policy.root") - 1;
  }
  Policy      pol(HistoryTree(T, N, root));
  Json const &nodes = detail::require(doc, "policy", "nodes");
  if (!nodes.is_array())
  {
    throw ConfigError("policy.nodes", "expected an array");
  }
  std::size_t seen = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
  {
    std::string const path = "policy.nodes[" + std::to_string(i) + "]";
    Json const       &node = nodes[i];
    detail::reject_unknown(node, path, {"date", "history", "v", "c"});
    int const   date = detail::integer(detail::require(node, path, "date"), path + ".date");
    auto const  raw  = detail::numbers(detail::require(node, path, "history"), path + ".history");
    TypeHistory h;
    for (double k : raw)
    {
      h.push_back(static_cast<int>(k) - 1);
    }
    try
    {
      pol.at(date, h) = detail::number(detail::require(node, path, "v"), path + ".v");
    }
    catch (std::out_of_range const &e)
    {
      throw ConfigError(path, e.what());
    }
    ++seen;
  }
  if (seen != pol.size())
  {
    throw ConfigError("policy.nodes", "expected one node per history and date");
  }
  return pol;
}

}  // namespace sdcredit::cli
