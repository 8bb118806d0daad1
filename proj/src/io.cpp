#include "irtlink/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

namespace irtlink {

namespace {

using nlohmann::json;

// 17 significant digits: enough to reproduce any double bit-exactly.
std::string float17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Shortest representation that parses back to the same double; used in CSVs.
std::string float_shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), "float formatting failed");
  return std::string(buf, ptr);
}

std::string escape_json(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '" + path + "' for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  require(out.good(), "write to '" + path + "' failed");
}

// Splits one CSV line on commas. No quoting: ids must not contain commas.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

// Reads lines, stripping one trailing \r (CRLF input) per line.
bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

[[noreturn]] void line_error(const std::string& path, int line,
                             const std::string& what) {
  throw Error(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& s, const std::string& path, int line,
                    const char* field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    line_error(path, line, std::string("invalid ") + field + " value '" + s + "'");
  }
}

long long parse_int(const std::string& s, const std::string& path, int line,
                    const char* field) {
  long long v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    line_error(path, line, std::string("invalid ") + field + " value '" + s + "'");
  }
  return v;
}

// --- state JSON validation helpers (errors carry a JSON-pointer path) ---

const json& expect(const json& node, const char* key, json::value_t type,
                   const std::string& path) {
  auto it = node.find(key);
  require(it != node.end(),
          "state JSON: " + path + "/" + key + ": missing field");
  const bool ok =
      it->type() == type ||
      (type == json::value_t::number_float && it->is_number()) ||
      (type == json::value_t::number_integer && it->is_number_integer()) ||
      (type == json::value_t::number_unsigned && it->is_number_integer());
  require(ok, "state JSON: " + path + "/" + key + ": unexpected type");
  return *it;
}

}  // namespace

ResponseMatrix load_responses(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  int lineno = 0;

  require(read_line(in, line), path + ": empty file, expected header");
  ++lineno;
  if (line != "model_id,item_id,dataset_id,correct") {
    line_error(path, lineno,
               "bad header '" + line +
                   "'; expected 'model_id,item_id,dataset_id,correct'");
  }

  std::vector<Response> records;
  std::map<std::string, std::string> item_dataset;
  std::set<std::pair<std::string, std::string>> seen;
  while (read_line(in, line)) {
    ++lineno;
    if (line.empty()) {
      // Allow a single trailing newline at end of file, nothing else.
      if (in.peek() == std::char_traits<char>::eof()) break;
      line_error(path, lineno, "empty line");
    }
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 4) {
      line_error(path, lineno, "expected 4 fields, got " +
                                   std::to_string(f.size()));
    }
    const std::string& model = f[0];
    const std::string& item = f[1];
    const std::string& dataset = f[2];
    const std::string& correct = f[3];
    if (model.empty() || item.empty() || dataset.empty()) {
      line_error(path, lineno, "empty id field");
    }
    if (correct != "0" && correct != "1") {
      line_error(path, lineno,
                 "correct must be 0 or 1, got '" + correct + "'");
    }
    if (!seen.emplace(model, item).second) {
      line_error(path, lineno, "duplicate response for model '" + model +
                                   "', item '" + item + "'");
    }
    auto [it, inserted] = item_dataset.emplace(item, dataset);
    if (!inserted && it->second != dataset) {
      line_error(path, lineno, "item '" + item + "' assigned to dataset '" +
                                   dataset + "' but previously to '" +
                                   it->second + "'");
    }
    records.push_back(Response{model, item, dataset, correct == "1" ? 1 : 0});
  }
  require(!records.empty(), path + ": no response records");
  return ResponseMatrix::from_records(records, item_dataset);
}

void save_responses(const ResponseMatrix& m, const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "model_id,item_id,dataset_id,correct\n";
  for (const auto& c : m.cells()) {
    out << m.model_ids()[static_cast<std::size_t>(c.model)] << ','
        << m.item_ids()[static_cast<std::size_t>(c.item)] << ','
        << m.dataset_of(c.item) << ',' << static_cast<int>(c.correct) << '\n';
  }
  finish_write(out, path);
}

void save_state(const CalibrationState& state, const std::string& path) {
  validate(state);
  std::ostringstream os;
  os << "{\n";
  os << "  \"format_version\": \"" << escape_json(state.format_version)
     << "\",\n";
  os << "  \"dimension\": " << state.dimension << ",\n";
  os << "  \"step\": " << state.step << ",\n";
  os << "  \"items\": [\n";
  {
    std::size_t i = 0;
    for (const auto& [id, item] : state.items) {
      os << "    {\"item_id\": \"" << escape_json(id) << "\", \"dataset_id\": \""
         << escape_json(item.dataset_id) << "\", \"a\": [";
      for (Eigen::Index k = 0; k < item.a.size(); ++k) {
        if (k) os << ", ";
        os << float17(item.a(k));
      }
      os << "], \"d\": " << float17(item.d)
         << ", \"frozen\": " << (item.frozen ? "true" : "false")
         << ", \"calibrated_at_step\": " << item.calibrated_at_step << "}";
      if (++i < state.items.size()) os << ",";
      os << "\n";
    }
  }
  os << "  ],\n";
  os << "  \"anchors\": {";
  {
    std::size_t i = 0;
    for (const auto& [ds, set] : state.anchors) {
      if (i++) os << ",";
      os << "\n    \"" << escape_json(ds) << "\": {\"budget\": " << set.budget
         << ", \"entries\": [";
      for (std::size_t e = 0; e < set.entries.size(); ++e) {
        if (e) os << ", ";
        os << "{\"item_id\": \"" << escape_json(set.entries[e].item_id)
           << "\", \"weight\": " << float17(set.entries[e].weight) << "}";
      }
      os << "]}";
    }
    if (!state.anchors.empty()) os << "\n  ";
  }
  os << "},\n";
  os << "  \"history\": [";
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    if (i) os << ",";
    os << "\n    {\"step\": " << state.history[i].step << ", \"dataset_id\": \""
       << escape_json(state.history[i].dataset_id)
       << "\", \"anchor_count\": " << state.history[i].anchor_count << "}";
  }
  if (!state.history.empty()) os << "\n  ";
  os << "]\n";
  os << "}\n";

  std::ofstream out = open_for_write(path);
  out << os.str();
  finish_write(out, path);
}

CalibrationState load_state(const std::string& path) {
  std::ifstream in = open_for_read(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("state JSON '" + path + "': " + e.what());
  }
  require(doc.is_object(), "state JSON: /: expected an object");

  CalibrationState s;
  const json& ver = expect(doc, "format_version", json::value_t::string, "");
  s.format_version = ver.get<std::string>();
  if (s.format_version != kStateFormatVersion) {
    throw Error("state format version '" + s.format_version +
                "' does not match engine version '" + kStateFormatVersion +
                "'");
  }
  s.dimension =
      expect(doc, "dimension", json::value_t::number_integer, "").get<int>();
  s.step = expect(doc, "step", json::value_t::number_integer, "").get<int>();

  const json& items = expect(doc, "items", json::value_t::array, "");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string p = "/items/" + std::to_string(i);
    const json& ji = items[i];
    require(ji.is_object(), "state JSON: " + p + ": expected an object");
    ItemParameters item;
    item.item_id = expect(ji, "item_id", json::value_t::string, p).get<std::string>();
    item.dataset_id =
        expect(ji, "dataset_id", json::value_t::string, p).get<std::string>();
    const json& a = expect(ji, "a", json::value_t::array, p);
    require(static_cast<int>(a.size()) == s.dimension,
            "state JSON: " + p + "/a: has " + std::to_string(a.size()) +
                " components, dimension is " + std::to_string(s.dimension));
    item.a.resize(s.dimension);
    for (std::size_t k = 0; k < a.size(); ++k) {
      require(a[k].is_number(),
              "state JSON: " + p + "/a/" + std::to_string(k) + ": expected a number");
      item.a(static_cast<Eigen::Index>(k)) = a[k].get<double>();
    }
    item.d = expect(ji, "d", json::value_t::number_float, p).get<double>();
    item.frozen = expect(ji, "frozen", json::value_t::boolean, p).get<bool>();
    item.calibrated_at_step =
        expect(ji, "calibrated_at_step", json::value_t::number_integer, p)
            .get<int>();
    require(s.items.emplace(item.item_id, item).second,
            "state JSON: " + p + ": duplicate item '" + item.item_id + "'");
  }

  const json& anchors = expect(doc, "anchors", json::value_t::object, "");
  for (auto it = anchors.begin(); it != anchors.end(); ++it) {
    const std::string p = "/anchors/" + it.key();
    const json& ja = it.value();
    require(ja.is_object(), "state JSON: " + p + ": expected an object");
    AnchorSet set;
    set.dataset_id = it.key();
    set.budget =
        expect(ja, "budget", json::value_t::number_integer, p).get<int>();
    const json& entries = expect(ja, "entries", json::value_t::array, p);
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const std::string pe = p + "/entries/" + std::to_string(e);
      const json& je = entries[e];
      require(je.is_object(), "state JSON: " + pe + ": expected an object");
      AnchorEntry entry;
      entry.item_id =
          expect(je, "item_id", json::value_t::string, pe).get<std::string>();
      entry.weight =
          expect(je, "weight", json::value_t::number_float, pe).get<double>();
      require(s.items.count(entry.item_id),
              "state JSON: " + pe + ": anchor entry references item '" +
                  entry.item_id + "' absent from items");
      set.entries.push_back(std::move(entry));
    }
    s.anchors.emplace(it.key(), std::move(set));
  }

  const json& history = expect(doc, "history", json::value_t::array, "");
  for (std::size_t i = 0; i < history.size(); ++i) {
    const std::string p = "/history/" + std::to_string(i);
    const json& jh = history[i];
    require(jh.is_object(), "state JSON: " + p + ": expected an object");
    HistoryEntry h;
    h.step = expect(jh, "step", json::value_t::number_integer, p).get<int>();
    h.dataset_id =
        expect(jh, "dataset_id", json::value_t::string, p).get<std::string>();
    h.anchor_count =
        expect(jh, "anchor_count", json::value_t::number_integer, p).get<int>();
    s.history.push_back(std::move(h));
  }

  validate(s);
  return s;
}

void save_truth(const std::vector<ItemParameters>& items,
                const std::vector<AbilityVector>& abilities, int dimension,
                const std::string& path) {
  std::ostringstream os;
  os << "{\n  \"dimension\": " << dimension << ",\n  \"items\": [\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    os << "    {\"item_id\": \"" << escape_json(items[i].item_id)
       << "\", \"dataset_id\": \"" << escape_json(items[i].dataset_id)
       << "\", \"a\": [";
    for (Eigen::Index k = 0; k < items[i].a.size(); ++k) {
      if (k) os << ", ";
      os << float17(items[i].a(k));
    }
    os << "], \"d\": " << float17(items[i].d) << "}"
       << (i + 1 < items.size() ? "," : "") << "\n";
  }
  os << "  ],\n  \"abilities\": [\n";
  for (std::size_t i = 0; i < abilities.size(); ++i) {
    os << "    {\"model_id\": \"" << escape_json(abilities[i].model_id)
       << "\", \"theta\": [";
    for (Eigen::Index k = 0; k < abilities[i].theta.size(); ++k) {
      if (k) os << ", ";
      os << float17(abilities[i].theta(k));
    }
    os << "]}" << (i + 1 < abilities.size() ? "," : "") << "\n";
  }
  os << "  ]\n}\n";

  std::ofstream out = open_for_write(path);
  out << os.str();
  finish_write(out, path);
}

void save_item_map(const std::vector<ItemMapRow>& rows,
                   const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "item_id,dataset_id,b,mdisc,is_anchor\n";
  for (const auto& r : rows) {
    out << r.item_id << ',' << r.dataset_id << ',';
    if (r.b.has_value()) out << float_shortest(*r.b);
    out << ',' << float_shortest(r.mdisc) << ',' << (r.is_anchor ? 1 : 0)
        << '\n';
  }
  finish_write(out, path);
}

std::vector<AggregateRow> aggregate_steps(const std::vector<StepMetrics>& rows) {
  require(!rows.empty(), "aggregation over zero step rows");
  std::map<std::tuple<int, std::string, int>,
           std::pair<std::vector<double>, std::vector<double>>>
      groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.step, to_string(r.strategy), r.n_anchors}];
    g.first.push_back(r.mae);
    g.second.push_back(r.spearman);
  }
  std::vector<AggregateRow> out;
  out.reserve(groups.size());
  for (const auto& [key, vals] : groups) {
    AggregateRow a;
    a.step = std::get<0>(key);
    a.strategy = strategy_from_string(std::get<1>(key));
    a.n_anchors = std::get<2>(key);
    a.mae = aggregate_ci(vals.first);
    a.spearman = aggregate_ci(vals.second);
    out.push_back(a);
  }
  return out;
}

namespace {

void write_aggregate_csv(const std::vector<StepMetrics>& rows,
                         const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "step,strategy,n_anchors,mae_mean,mae_ci95,spearman_mean,"
         "spearman_ci95\n";
  for (const auto& a : aggregate_steps(rows)) {
    out << a.step << ',' << to_string(a.strategy) << ',' << a.n_anchors << ','
        << float_shortest(a.mae.mean) << ','
        << float_shortest(a.mae.half_width) << ','
        << float_shortest(a.spearman.mean) << ','
        << float_shortest(a.spearman.half_width) << '\n';
  }
  finish_write(out, path);
}

}  // namespace

void emit_report(const ReportBundle& bundle, const std::string& dir) {
  require(!bundle.chains.empty(), "report bundle contains no chains");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir),
          "cannot create report directory '" + dir + "'");

  std::vector<StepMetrics> rows;
  for (const auto& chain : bundle.chains) {
    rows.insert(rows.end(), chain.steps.begin(), chain.steps.end());
  }
  std::sort(rows.begin(), rows.end(),
            [](const StepMetrics& a, const StepMetrics& b) {
              if (a.chain_id != b.chain_id) return a.chain_id < b.chain_id;
              if (a.step != b.step) return a.step < b.step;
              const std::string sa = to_string(a.strategy);
              const std::string sb = to_string(b.strategy);
              if (sa != sb) return sa < sb;
              return a.n_anchors < b.n_anchors;
            });

  {
    const std::string path = dir + "/steps.csv";
    std::ofstream out = open_for_write(path);
    out << "chain_id,step,strategy,n_anchors,mae,spearman,cost_per_model\n";
    for (const auto& r : rows) {
      out << r.chain_id << ',' << r.step << ',' << to_string(r.strategy) << ','
          << r.n_anchors << ',' << float_shortest(r.mae) << ','
          << float_shortest(r.spearman) << ',' << r.cost_per_model << '\n';
    }
    finish_write(out, path);
  }
  write_aggregate_csv(rows, dir + "/aggregate.csv");
  {
    json summary;
    summary["engine_version"] = bundle.engine_version;
    summary["config_hash"] = bundle.config_hash;
    summary["master_seed"] = bundle.master_seed;
    summary["n_chains"] = bundle.chains.size();
    json chains = json::array();
    for (const auto& c : bundle.chains) {
      json jc;
      jc["chain_id"] = c.chain_id;
      jc["seed"] = c.seed;
      jc["n_reference_models"] = c.n_reference_models;
      jc["n_test_models"] = c.n_test_models;
      jc["dimension"] = c.dimension;
      jc["n_step_rows"] = c.steps.size();
      chains.push_back(jc);
    }
    summary["chains"] = chains;
    const std::string path = dir + "/summary.json";
    std::ofstream out = open_for_write(path);
    out << summary.dump(2) << "\n";
    finish_write(out, path);
  }
}

std::vector<StepMetrics> load_steps(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  int lineno = 0;
  require(read_line(in, line), path + ": empty file, expected header");
  ++lineno;
  if (line != "chain_id,step,strategy,n_anchors,mae,spearman,cost_per_model") {
    line_error(path, lineno, "bad header '" + line + "'");
  }
  std::vector<StepMetrics> rows;
  while (read_line(in, line)) {
    ++lineno;
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 7) {
      line_error(path, lineno,
                 "expected 7 fields, got " + std::to_string(f.size()));
    }
    StepMetrics r;
    r.chain_id = f[0];
    r.step = static_cast<int>(parse_int(f[1], path, lineno, "step"));
    try {
      r.strategy = strategy_from_string(f[2]);
    } catch (const Error& e) {
      line_error(path, lineno, e.what());
    }
    r.n_anchors = static_cast<int>(parse_int(f[3], path, lineno, "n_anchors"));
    r.mae = parse_double(f[4], path, lineno, "mae");
    r.spearman = parse_double(f[5], path, lineno, "spearman");
    r.cost_per_model = parse_int(f[6], path, lineno, "cost_per_model");
    rows.push_back(std::move(r));
  }
  require(!rows.empty(), path + ": no step rows");
  return rows;
}

void emit_aggregate(const std::vector<StepMetrics>& rows,
                    const std::string& dir) {
  require(!rows.empty(), "aggregation over zero step rows");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir),
          "cannot create report directory '" + dir + "'");
  write_aggregate_csv(rows, dir + "/aggregate.csv");

  std::set<std::string> chain_ids;
  for (const auto& r : rows) chain_ids.insert(r.chain_id);
  json summary;
  summary["engine_version"] = kEngineVersion;
  summary["n_chains"] = chain_ids.size();
  summary["n_step_rows"] = rows.size();
  const std::string path = dir + "/summary.json";
  std::ofstream out = open_for_write(path);
  out << summary.dump(2) << "\n";
  finish_write(out, path);
}

void save_estimates(const std::vector<AccuracyEstimate>& rows,
                    const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "model_id,dataset_id,estimate,anchor_mean,p_irt,lambda,anchors_used\n";
  for (const auto& r : rows) {
    out << r.model_id << ',' << r.dataset_id << ','
        << float_shortest(r.estimate) << ',' << float_shortest(r.anchor_mean)
        << ',' << float_shortest(r.p_irt) << ',' << float_shortest(r.lambda)
        << ',' << r.anchors_used << '\n';
  }
  finish_write(out, path);
}

void save_abilities(const std::vector<AbilityVector>& abilities,
                    const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "model_id";
  const Eigen::Index dim = abilities.empty() ? 0 : abilities.front().theta.size();
  for (Eigen::Index k = 0; k < dim; ++k) out << ",theta_" << k;
  out << "\n";
  for (const auto& ab : abilities) {
    out << ab.model_id;
    for (Eigen::Index k = 0; k < ab.theta.size(); ++k) {
      out << ',' << float_shortest(ab.theta(k));
    }
    out << '\n';
  }
  finish_write(out, path);
}

}  // namespace irtlink
