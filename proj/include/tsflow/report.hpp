#pragma once

// Report records and their JSON / CSV serialization.  Rationals are written
// as "p/q"; key order is fixed so identical runs emit identical bytes.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tsflow/error.hpp"
#include "tsflow/interval.hpp"
#include "tsflow/rational.hpp"

namespace tsflow {

using OrderedJson = nlohmann::ordered_json;
using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct Record {
  std::string check_id;
  std::optional<int> stage;
  KeyValues params;
  std::optional<std::string> lo;
  std::optional<std::string> hi;
  std::optional<std::string> value;
  KeyValues derived;
  std::optional<bool> pass;  // empty for informational records

  Record& param(std::string k, std::string v) {
    params.emplace_back(std::move(k), std::move(v));
    return *this;
  }
  Record& param(std::string k, const Rational& v) { return param(std::move(k), to_string(v)); }
  Record& extra(std::string k, std::string v) {
    derived.emplace_back(std::move(k), std::move(v));
    return *this;
  }
  Record& extra(std::string k, const Rational& v) { return extra(std::move(k), to_string(v)); }
  Record& bounds(const CorrelationInterval& c) {
    lo = to_string(c.lo);
    hi = to_string(c.hi);
    return *this;
  }
  Record& val(std::string v) {
    value = std::move(v);
    return *this;
  }
  Record& val(const Rational& v) { return val(to_string(v)); }
  Record& verdict(bool ok) {
    pass = ok;
    return *this;
  }

  friend bool operator==(const Record&, const Record&) = default;
};

struct Report {
  KeyValues metadata;
  std::vector<Record> records;

  Record& add(std::string check_id, std::optional<int> stage = std::nullopt) {
    records.push_back(Record{});
    records.back().check_id = std::move(check_id);
    records.back().stage = stage;
    return records.back();
  }
  bool any_failure() const {
    for (const auto& r : records)
      if (r.pass && !*r.pass) return true;
    return false;
  }

  friend bool operator==(const Report&, const Report&) = default;
};

// Fixed-format double, independent of locale and thread count.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9e", x);
  return buf;
}

inline std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline OrderedJson kv_json(const KeyValues& kv) {
  OrderedJson o = OrderedJson::object();
  for (const auto& [k, v] : kv) o[k] = v;
  return o;
}

inline KeyValues kv_parse(const OrderedJson& o) {
  KeyValues kv;
  for (auto it = o.begin(); it != o.end(); ++it) kv.emplace_back(it.key(), it.value().get<std::string>());
  return kv;
}

template <typename T>
OrderedJson opt_json(const std::optional<T>& v) {
  return v ? OrderedJson(*v) : OrderedJson(nullptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string join(const KeyValues& kv, bool keys) {
  std::string out;
  for (std::size_t i = 0; i < kv.size(); ++i) {
    if (i) out += ';';
    out += keys ? kv[i].first : kv[i].second;
  }
  return out;
}

}  // namespace detail

inline std::string emit_json(const Report& r) {
  OrderedJson doc;
  doc["metadata"] = detail::kv_json(r.metadata);
  doc["records"] = OrderedJson::array();
  for (const auto& rec : r.records) {
    OrderedJson o;
    o["check_id"] = rec.check_id;
    o["stage"] = detail::opt_json(rec.stage);
    o["params"] = detail::kv_json(rec.params);
    o["lo"] = detail::opt_json(rec.lo);
    o["hi"] = detail::opt_json(rec.hi);
    o["value"] = detail::opt_json(rec.value);
    o["derived"] = detail::kv_json(rec.derived);
    o["pass"] = detail::opt_json(rec.pass);
    doc["records"].push_back(std::move(o));
  }
  return doc.dump(2) + "\n";
}

inline std::string emit_csv(const Report& r) {
  std::string out = "check_id,stage,param_key,param_value,lo,hi,value,pass\n";
  for (const auto& rec : r.records) {
    out += detail::csv_field(rec.check_id) + ',';
    out += (rec.stage ? std::to_string(*rec.stage) : "") + ',';
    out += detail::csv_field(detail::join(rec.params, true)) + ',';
    out += detail::csv_field(detail::join(rec.params, false)) + ',';
    out += rec.lo.value_or("") + ',' + rec.hi.value_or("") + ',';
    out += detail::csv_field(rec.value.value_or("")) + ',';
    out += rec.pass ? (*rec.pass ? "true" : "false") : "";
    out += '\n';
  }
  return out;
}

inline std::string emit(const Report& r, const std::string& format) {
  if (format == "json") return emit_json(r);
  if (format == "csv") return emit_csv(r);
  throw Error(ErrorCode::InvalidArgument, "unknown report format " + format);
}

inline Report parse_report(const std::string& text) {
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(text);
  } catch (const OrderedJson::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed report: ") + e.what());
  }
  Report r;
  r.metadata = detail::kv_parse(doc.at("metadata"));
  for (const auto& o : doc.at("records")) {
    Record rec;
    rec.check_id = o.at("check_id").get<std::string>();
    if (!o.at("stage").is_null()) rec.stage = o.at("stage").get<int>();
    rec.params = detail::kv_parse(o.at("params"));
    if (!o.at("lo").is_null()) rec.lo = o.at("lo").get<std::string>();
    if (!o.at("hi").is_null()) rec.hi = o.at("hi").get<std::string>();
    if (!o.at("value").is_null()) rec.value = o.at("value").get<std::string>();
    rec.derived = detail::kv_parse(o.at("derived"));
    if (!o.at("pass").is_null()) rec.pass = o.at("pass").get<bool>();
    r.records.push_back(std::move(rec));
  }
  return r;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << bytes;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

}  // namespace tsflow
