// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/metrics.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "dimcim/errors.hpp"
#include "dimcim/text.hpp"

namespace dimcim {

using io::Json;

std::vector<DimEntry> dim_attribute_scores(const std::vector<ScoreMatrix>& coarse_matrices) {
  std::vector<DimEntry> out;
  for (const auto& m : coarse_matrices) {
    for (const auto& s : score_all(m, ScoreKind::kCoarse)) {
      out.push_back({s.unit_id, s.concept_name, s.attribute_type, s.attribute, s.value, s.n_images});
    }
  }
  return out;
}

std::vector<CimEntry> cim_attribute_scores(const std::vector<ScoreMatrix>& dense_matrices,
                                           const BenchmarkDataset& dataset) {
  std::map<std::string, std::size_t> dense_index;
  for (std::size_t i = 0; i < dataset.dense_prompts.size(); ++i) {
    dense_index.emplace(dataset.dense_prompts[i].id, i);
  }
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<std::pair<std::size_t, PromptScore>>> groups;
  for (const auto& m : dense_matrices) {
    const auto it = dense_index.find(m.unit_id);
    if (it == dense_index.end()) throw OrphanMatrix(m.unit_id);
    const auto& dp = dataset.dense_prompts[it->second];
    const auto s = attribute_concept_score(m, dp.attribute, ScoreKind::kDense);
    groups[{dp.concept_name, dp.attribute_type, dp.attribute}].push_back(
        {it->second, {dp.id, s.value}});
  }

  std::vector<CimEntry> out;
  for (const auto& c : dataset.concepts) {
    for (const auto& t : c.attribute_types) {
      for (const auto& a : t.attributes) {
        auto g = groups.find({c.name, t.name, a});
        if (g == groups.end()) continue;
        auto& scores = g->second;
        std::sort(scores.begin(), scores.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        CimEntry e{c.name, t.name, a, 0.0, {}};
        double sum = 0.0;
        for (auto& [_, ps] : scores) {
          sum += ps.value;
          e.per_prompt.push_back(std::move(ps));
        }
        e.value = sum / static_cast<double>(e.per_prompt.size());
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

std::string_view to_string(DimAveraging averaging) {
  return averaging == DimAveraging::kEntry ? "entry" : "prompt_attribute";
}

DimAveraging dim_averaging_from_string(std::string_view s) {
  if (s == "entry") return DimAveraging::kEntry;
  if (s == "prompt_attribute") return DimAveraging::kPromptAttribute;
  throw ParseError("dim_averaging", "expected 'entry' or 'prompt_attribute', got '" + std::string(s) + "'");
}

double summary_dim(const std::vector<DimEntry>& entries) {
  if (entries.empty()) throw EmptyInput("summary DIM needs at least one entry");
  double sum = 0.0;
  for (const auto& e : entries) sum += std::abs(e.value);
  return 1.0 - sum / static_cast<double>(entries.size());
}

double summary_cim(const std::vector<CimEntry>& entries) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : entries) {
    for (const auto& p : e.per_prompt) {
      sum += p.value;
      ++n;
    }
  }
  if (n == 0) throw EmptyInput("summary CIM needs at least one dense prompt score");
  return sum / static_cast<double>(n);
}

namespace {

struct RollupAccumulator {
  double abs_dim = 0.0;
  double cim = 0.0;
  std::size_t n_dim = 0;
  std::size_t n_prompts = 0;

  Rollup finish() const {
    Rollup r;
    r.n_dim_entries = n_dim;
    r.n_prompts = n_prompts;
    r.dim = n_dim ? 1.0 - abs_dim / static_cast<double>(n_dim) : std::nan("");
    r.cim = n_prompts ? cim / static_cast<double>(n_prompts) : std::nan("");
    return r;
  }
};

std::map<std::string, Rollup> finish_all(const std::map<std::string, RollupAccumulator>& acc) {
  std::map<std::string, Rollup> out;
  for (const auto& [k, a] : acc) out[k] = a.finish();
  return out;
}

Json double_or_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

double double_from(const Json& j, const std::string& loc) {
  if (j.is_null()) return std::nan("");
  if (!j.is_number()) throw ParseError(loc, "expected a number");
  return j.get<double>();
}

const Json& require(const Json& obj, const char* key, const std::string& loc) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(loc, std::string("missing key '") + key + "'");
  return obj[key];
}

std::string string_at(const Json& obj, const char* key, const std::string& loc) {
  const auto& v = require(obj, key, loc);
  if (!v.is_string()) throw ParseError(loc + "." + key, "expected a string");
  return v.get<std::string>();
}

}  // namespace

MetricReport summarize(const std::vector<DimEntry>& dim_entries,
                       const std::vector<CimEntry>& cim_entries, const SummaryOptions& options) {
  if (dim_entries.empty()) throw EmptyInput("no DIM entries to summarize");
  if (cim_entries.empty()) throw EmptyInput("no CIM entries to summarize");
  MetricReport r;
  r.dim_entries = dim_entries;
  r.cim_entries = cim_entries;
  if (options.averaging == DimAveraging::kEntry) {
    r.summary_dim = summary_dim(dim_entries);
  } else {
    if (options.coarse_breakdown.empty()) {
      throw EmptyInput("prompt-attribute DIM averaging needs a coarse breakdown");
    }
    r.summary_dim = summary_dim(options.coarse_breakdown);
  }
  r.summary_cim = summary_cim(cim_entries);

  std::map<std::string, RollupAccumulator> by_concept, by_type;
  for (const auto& e : dim_entries) {
    for (auto* acc : {&by_concept[e.concept_name], &by_type[e.attribute_type]}) {
      acc->abs_dim += std::abs(e.value);
      ++acc->n_dim;
    }
  }
  for (const auto& e : cim_entries) {
    for (const auto& p : e.per_prompt) {
      for (auto* acc : {&by_concept[e.concept_name], &by_type[e.attribute_type]}) {
        acc->cim += p.value;
        ++acc->n_prompts;
      }
    }
  }
  r.concept_rollups = finish_all(by_concept);
  r.type_rollups = finish_all(by_type);
  return r;
}

// ---------------------------------------------------------------------------
// Report files

Json to_json(const MetricReport& r) {
  Json j = Json::object();
  j["model_id"] = r.model_id;
  j["dataset_hash"] = r.dataset_hash;
  j["config"] = r.config;
  j["summary"] = Json::object({{"dim", r.summary_dim}, {"cim", r.summary_cim}});
  Json dims = Json::array();
  for (const auto& e : r.dim_entries) {
    Json d = Json::object();
    d["unit_id"] = e.unit_id;
    d["concept"] = e.concept_name;
    d["attribute_type"] = e.attribute_type;
    d["attribute"] = e.attribute;
    d["value"] = e.value;
    d["n_images"] = e.n_images;
    dims.push_back(std::move(d));
  }
  j["dim_entries"] = std::move(dims);
  Json cims = Json::array();
  for (const auto& e : r.cim_entries) {
    Json c = Json::object();
    c["concept"] = e.concept_name;
    c["attribute_type"] = e.attribute_type;
    c["attribute"] = e.attribute;
    c["value"] = e.value;
    c["n_prompts"] = e.n_prompts();
    Json pp = Json::array();
    for (const auto& p : e.per_prompt) {
      pp.push_back(Json::object({{"dense_prompt_id", p.dense_prompt_id}, {"value", p.value}}));
    }
    c["per_prompt"] = std::move(pp);
    cims.push_back(std::move(c));
  }
  j["cim_entries"] = std::move(cims);
  auto rollups = [](const std::map<std::string, Rollup>& m) {
    Json o = Json::object();
    for (const auto& [k, v] : m) {
      o[k] = Json::object({{"dim", double_or_null(v.dim)},
                           {"cim", double_or_null(v.cim)},
                           {"n_dim_entries", v.n_dim_entries},
                           {"n_prompts", v.n_prompts}});
    }
    return o;
  };
  j["rollups"] = Json::object({{"concept", rollups(r.concept_rollups)},
                               {"attribute_type", rollups(r.type_rollups)}});
  return j;
}

MetricReport report_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("", "report must be a JSON object");
  MetricReport r;
  r.model_id = string_at(j, "model_id", "");
  r.dataset_hash = j.contains("dataset_hash") ? string_at(j, "dataset_hash", "") : "";
  if (j.contains("config")) r.config = j["config"];
  const auto& summary = require(j, "summary", "");
  r.summary_dim = double_from(require(summary, "dim", "summary"), "summary.dim");
  r.summary_cim = double_from(require(summary, "cim", "summary"), "summary.cim");

  if (j.contains("dim_entries")) {
    const auto& arr = j["dim_entries"];
    if (!arr.is_array()) throw ParseError("dim_entries", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string loc = "dim_entries[" + std::to_string(i) + "]";
      const auto& e = arr[i];
      DimEntry d;
      d.unit_id = e.contains("unit_id") ? string_at(e, "unit_id", loc) : coarse_pool_unit(string_at(e, "concept", loc));
      d.concept_name = string_at(e, "concept", loc);
      d.attribute_type = string_at(e, "attribute_type", loc);
      d.attribute = string_at(e, "attribute", loc);
      d.value = double_from(require(e, "value", loc), loc + ".value");
      d.n_images = e.value("n_images", std::size_t{0});
      r.dim_entries.push_back(std::move(d));
    }
  }
  if (j.contains("cim_entries")) {
    const auto& arr = j["cim_entries"];
    if (!arr.is_array()) throw ParseError("cim_entries", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string loc = "cim_entries[" + std::to_string(i) + "]";
      const auto& e = arr[i];
      CimEntry c;
      c.concept_name = string_at(e, "concept", loc);
      c.attribute_type = string_at(e, "attribute_type", loc);
      c.attribute = string_at(e, "attribute", loc);
      c.value = double_from(require(e, "value", loc), loc + ".value");
      if (e.contains("per_prompt")) {
        for (const auto& p : e["per_prompt"]) {
          c.per_prompt.push_back({string_at(p, "dense_prompt_id", loc + ".per_prompt"),
                                  double_from(require(p, "value", loc), loc + ".per_prompt.value")});
        }
      }
      r.cim_entries.push_back(std::move(c));
    }
  }
  if (j.contains("rollups")) {
    auto read = [](const Json& o, std::map<std::string, Rollup>& out, const std::string& loc) {
      if (!o.is_object()) throw ParseError(loc, "expected an object");
      for (const auto& [k, v] : o.items()) {
        Rollup ro;
        ro.dim = double_from(require(v, "dim", loc), loc + "." + k + ".dim");
        ro.cim = double_from(require(v, "cim", loc), loc + "." + k + ".cim");
        ro.n_dim_entries = v.value("n_dim_entries", std::size_t{0});
        ro.n_prompts = v.value("n_prompts", std::size_t{0});
        out[k] = ro;
      }
    };
    const auto& ro = j["rollups"];
    if (ro.contains("concept")) read(ro["concept"], r.concept_rollups, "rollups.concept");
    if (ro.contains("attribute_type")) read(ro["attribute_type"], r.type_rollups, "rollups.attribute_type");
  }
  return r;
}

std::string serialize(const MetricReport& report) { return to_json(report).dump(2) + "\n"; }

MetricReport load_report(const std::filesystem::path& path) {
  const std::string contents = io::read_file(path);
  try {
    return report_from_json(Json::parse(contents));
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + e.locator(), e.what());
  }
}

void save_report(const MetricReport& report, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize(report));
}

std::string report_csv(const MetricReport& r) {
  std::ostringstream os;
  os << "model,concept,attribute_type,attribute,kind,value,n\n";
  const auto model = text::csv_field(r.model_id);
  for (const auto& e : r.dim_entries) {
    os << model << ',' << text::csv_field(e.concept_name) << ',' << text::csv_field(e.attribute_type)
       << ',' << text::csv_field(e.attribute) << ",dim," << text::format_double(e.value) << ','
       << e.n_images << '\n';
  }
  for (const auto& e : r.cim_entries) {
    os << model << ',' << text::csv_field(e.concept_name) << ',' << text::csv_field(e.attribute_type)
       << ',' << text::csv_field(e.attribute) << ",cim," << text::format_double(e.value) << ','
       << e.n_prompts() << '\n';
  }
  return os.str();
}

std::string breakdown_csv(const std::string& model_id, const std::vector<DimEntry>& breakdown) {
  std::ostringstream os;
  os << "model,unit_id,concept,attribute_type,attribute,kind,value,n\n";
  for (const auto& e : breakdown) {
    os << text::csv_field(model_id) << ',' << text::csv_field(e.unit_id) << ','
       << text::csv_field(e.concept_name) << ',' << text::csv_field(e.attribute_type) << ','
       << text::csv_field(e.attribute) << ",dim," << text::format_double(e.value) << ','
       << e.n_images << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Comparison

ComparisonTable compare_reports(const std::vector<MetricReport>& reports) {
  if (reports.size() < 2) throw EmptyInput("comparison needs at least two reports");
  ComparisonTable table;
  table.dataset_hash = reports.front().dataset_hash;
  for (const auto& r : reports) {
    if (r.dataset_hash != table.dataset_hash) {
      throw DatasetMismatch("report '" + r.model_id + "' has dataset hash '" + r.dataset_hash +
                            "', expected '" + table.dataset_hash + "'");
    }
  }
  const auto& base = reports.front();
  for (const auto& r : reports) {
    table.rows.push_back({r.model_id, r.summary_dim, r.summary_cim, r.summary_dim - base.summary_dim,
                          r.summary_cim - base.summary_cim});
  }

  // Union of entry keys in first-seen order.
  using Key = std::tuple<std::string, std::string, std::string, ScoreKind>;
  std::vector<Key> order;
  std::set<Key> seen;
  std::vector<std::map<Key, double>> values(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    auto add = [&](Key k, double v) {
      if (seen.insert(k).second) order.push_back(k);
      values[i][k] = v;
    };
    for (const auto& e : reports[i].dim_entries) {
      if (is_coarse_pool_unit(e.unit_id)) {
        add({e.concept_name, e.attribute_type, e.attribute, ScoreKind::kCoarse}, e.value);
      }
    }
    for (const auto& e : reports[i].cim_entries) {
      add({e.concept_name, e.attribute_type, e.attribute, ScoreKind::kDense}, e.value);
    }
  }
  for (const auto& k : order) {
    EntryDelta d{std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), {}, {}};
    for (std::size_t i = 0; i < reports.size(); ++i) {
      auto it = values[i].find(k);
      d.values.push_back(it == values[i].end() ? std::nullopt : std::optional<double>(it->second));
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (d.values[i] && d.values[0]) {
        d.deltas.push_back(*d.values[i] - *d.values[0]);
      } else {
        d.deltas.push_back(std::nullopt);
      }
    }
    table.entries.push_back(std::move(d));
  }
  return table;
}

std::string comparison_csv(const ComparisonTable& table) {
  std::ostringstream os;
  os << "model,dim,cim,delta_dim,delta_cim\n";
  for (const auto& r : table.rows) {
    os << text::csv_field(r.model_id) << ',' << text::format_double(r.dim) << ','
       << text::format_double(r.cim) << ',' << text::format_double(r.delta_dim) << ','
       << text::format_double(r.delta_cim) << '\n';
  }
  return os.str();
}

std::string entry_delta_csv(const ComparisonTable& table) {
  std::ostringstream os;
  os << "concept,attribute_type,attribute,kind";
  for (const auto& r : table.rows) os << ',' << text::csv_field("value:" + r.model_id);
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    os << ',' << text::csv_field("delta:" + table.rows[i].model_id);
  }
  os << '\n';
  auto cell = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); };
  for (const auto& e : table.entries) {
    os << text::csv_field(e.concept_name) << ',' << text::csv_field(e.attribute_type) << ','
       << text::csv_field(e.attribute) << ',' << (e.kind == ScoreKind::kCoarse ? "dim" : "cim");
    for (const auto& v : e.values) os << ',' << cell(v);
    for (std::size_t i = 1; i < e.deltas.size(); ++i) os << ',' << cell(e.deltas[i]);
    os << '\n';
  }
  return os.str();
}

}  // namespace dimcim
