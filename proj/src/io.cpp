#include "nbratio/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nbratio/errors.hpp"

namespace nbratio {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::int64_t parse_count(std::string_view cell, std::size_t row, std::size_t col) {
  std::int64_t v = 0;
  const auto* end = cell.data() + cell.size();
  auto [p, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw ParseError("'" + std::string(cell) + "' is not an integer count", row, col);
  }
  if (v < 0) throw ParseError("negative count " + std::to_string(v), row, col);
  return v;
}

enum class Role { pre, post, id };

Role column_role(std::string_view name, std::size_t col) {
  const auto key = lower(trim(name));
  if (key.rfind("pre", 0) == 0) return Role::pre;
  if (key.rfind("post", 0) == 0) return Role::post;
  if (key == "id" || key == "subject" || key == "subject_id") return Role::id;
  throw ParseError("unrecognised column '" + std::string(name) +
                       "' (expected pre*, post* or id)",
                   1, col);
}

PairedDataset assemble(const std::vector<Counts>& pre_rows, const std::vector<Counts>& post_rows,
                       bool paired) {
  if (pre_rows.empty()) throw ParseError("no pre-treatment observations");
  if (post_rows.empty()) throw ParseError("no post-treatment observations");
  const auto pre = pool_replicates(pre_rows);
  const auto post = pool_replicates(post_rows);
  PairedDataset d{pre.sums, post.sums, paired, pre.replicates, post.replicates};
  d.validate();
  return d;
}

Counts json_subject(const Json& item, std::size_t row, const char* group) {
  auto one = [&](const Json& v, std::size_t col) -> std::int64_t {
    if (!v.is_number_integer()) {
      throw ParseError(std::string(group) + " count must be an integer", row, col);
    }
    const auto n = v.get<std::int64_t>();
    if (n < 0) throw ParseError(std::string(group) + " count is negative", row, col);
    return n;
  };
  if (item.is_array()) {
    Counts out;
    for (std::size_t i = 0; i < item.size(); ++i) out.push_back(one(item[i], i + 1));
    return out;
  }
  return {one(item, 1)};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::optional<DataFormat> parse_data_format(std::string_view name) {
  const auto key = lower(trim(name));
  if (key == "csv") return DataFormat::csv;
  if (key == "json") return DataFormat::json;
  return std::nullopt;
}

PairedDataset parse_csv(std::string_view text, bool paired) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(std::move(cur));
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(std::move(cur));
  }
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw ParseError("empty file: a header row is required");

  const auto header = split_fields(lines[first]);
  std::vector<Role> roles;
  for (std::size_t c = 0; c < header.size(); ++c) roles.push_back(column_role(header[c], c + 1));
  if (std::count(roles.begin(), roles.end(), Role::pre) == 0) {
    throw ParseError("no pre-treatment column in header", first + 1);
  }
  if (std::count(roles.begin(), roles.end(), Role::post) == 0) {
    throw ParseError("no post-treatment column in header", first + 1);
  }

  std::vector<Counts> pre_rows, post_rows;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::size_t row = li + 1;
    const auto fields = split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       row);
    }
    Counts pre, post;
    std::size_t missing_col[2] = {0, 0};  // first empty column per group
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (roles[c] == Role::id) continue;
      const bool is_pre = roles[c] == Role::pre;
      const auto cell = trim(fields[c]);
      if (cell.empty()) {
        if (!missing_col[is_pre ? 0 : 1]) missing_col[is_pre ? 0 : 1] = c + 1;
        continue;
      }
      (is_pre ? pre : post).push_back(parse_count(cell, row, c + 1));
    }
    for (int g = 0; g < 2; ++g) {
      if (!missing_col[g]) continue;
      const Counts& got = g == 0 ? pre : post;
      if (paired) throw ParseError("missing count", row, missing_col[g]);
      if (!got.empty()) {
        throw InconsistentReplicates("row " + std::to_string(row) + ": " +
                                     (g == 0 ? "pre" : "post") +
                                     "-treatment replicates are partly empty");
      }
    }
    if (!pre.empty()) pre_rows.push_back(std::move(pre));
    if (!post.empty()) post_rows.push_back(std::move(post));
  }
  if (pre_rows.empty() && post_rows.empty()) throw ParseError("no data rows after the header");
  return assemble(pre_rows, post_rows, paired);
}

PairedDataset parse_dataset_json(const Json& j, std::optional<bool> paired) {
  if (!j.is_object()) throw ParseError("dataset must be a JSON object");
  if (!j.contains("pre") || !j["pre"].is_array()) throw ParseError("'pre' must be an array");
  if (!j.contains("post") || !j["post"].is_array()) throw ParseError("'post' must be an array");
  const bool is_paired = paired.value_or(j.value("paired", true));
  std::vector<Counts> pre_rows, post_rows;
  for (std::size_t i = 0; i < j["pre"].size(); ++i) {
    pre_rows.push_back(json_subject(j["pre"][i], i + 1, "pre-treatment"));
  }
  for (std::size_t i = 0; i < j["post"].size(); ++i) {
    post_rows.push_back(json_subject(j["post"][i], i + 1, "post-treatment"));
  }
  return assemble(pre_rows, post_rows, is_paired);
}

PairedDataset ingest(const std::filesystem::path& path, std::optional<DataFormat> format,
                     std::optional<bool> paired) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const DataFormat f =
      format.value_or(lower(path.extension().string()) == ".json" ? DataFormat::json
                                                                  : DataFormat::csv);
  if (f == DataFormat::json) {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    return parse_dataset_json(j, paired);
  }
  return parse_csv(text, paired.value_or(true));
}

std::string scan_tidy_csv(const ScanResult& result) {
  std::string out = "method,r,statistic,value,replicates\n";
  for (const auto& c : result.cells) {
    const std::pair<const char*, double> stats[] = {
        {"reject_inferiority", c.reject_inferiority_rate()},
        {"reject_noninferiority", c.reject_noninferiority_rate()},
        {"reduced", c.frequency(TypologySlot::reduced)},
        {"inconclusive", c.frequency(TypologySlot::inconclusive)},
        {"borderline", c.frequency(TypologySlot::borderline)},
        {"adequate", c.frequency(TypologySlot::adequate)},
        {"degenerate", c.frequency(TypologySlot::degenerate)},
    };
    for (const auto& [name, value] : stats) {
      out += std::string(method_name(c.method)) + ',' + fmt(c.r) + ',' + name + ',' + fmt(value) +
             ',' + std::to_string(c.replicates) + '\n';
    }
  }
  return out;
}

}  // namespace nbratio
