#include "mcn/io_util.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mcn/serialize.hpp"

namespace mcn {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("io: " + what);
}

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Quotes a CSV field only when it needs quoting.
std::string csvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// One config value from a JSON scalar or scalar array.
std::string jsonValueToString(const json& v, const std::string& key,
                              const std::string& name) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string joined;
    for (const json& e : v) {
      if (e.is_structured() || e.is_null()) {
        fail(name + ": key '" + key + "': arrays must hold scalars");
      }
      if (!joined.empty()) joined += ',';
      joined += e.is_string() ? e.get<std::string>() : e.dump();
    }
    return joined;
  }
  fail(name + ": key '" + key + "': unsupported value type");
}

std::map<std::string, std::string> parseJsonConfig(const std::string& text,
                                                   const std::string& name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(name + ": " + e.what());
  }
  if (!doc.is_object()) fail(name + ": top level must be a JSON object");
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : doc.items()) {
    out[key] = jsonValueToString(value, key, name);
  }
  return out;
}

std::map<std::string, std::string> parseKvConfig(const std::string& text,
                                                 const std::string& name) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  long lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::string where = name + ":" + std::to_string(lineNo);
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    if (stripped[0] == '[') {
      fail(where + ": sections are not supported; use flat keys");
    }
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(where + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || key.find_first_of(" \t") != std::string::npos) {
      fail(where + ": bad key '" + key + "'");
    }
    if (!value.empty() && (value[0] == '"' || value[0] == '\'')) {
      const char quote = value[0];
      const std::size_t close = value.find(quote, 1);
      if (close == std::string::npos) {
        fail(where + ": unterminated quote");
      }
      value = value.substr(1, close - 1);
    } else {
      const std::size_t hash = value.find('#');
      if (hash != std::string::npos) value = trim(value.substr(0, hash));
    }
    if (out.count(key) != 0) {
      fail(where + ": duplicate key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

}  // namespace

std::string readTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail("read failed on '" + path.string() + "'");
  return buf.str();
}

void atomicWriteFile(const std::filesystem::path& path,
                     const std::string& content) {
  const std::filesystem::path dir = path.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail("cannot create directory '" + dir.string() + "'");
  }
  static std::atomic<unsigned long> counter{0};
  const std::filesystem::path tmp =
      path.string() + ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail("write failed on '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ec2;
    std::filesystem::remove(tmp, ec2);
    fail("cannot rename '" + tmp.string() + "' to '" + path.string() +
         "': " + ec.message());
  }
}

void ensureWritableDir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    fail("cannot create output directory '" + dir.string() + "'");
  }
  const std::filesystem::path probe = dir / ".mcn-write-probe";
  {
    std::ofstream out(probe, std::ios::binary | std::ios::trunc);
    if (!out) fail("output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

std::string renderCsv(const std::vector<ExperimentRow>& rows) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const ExperimentRow& row : rows) {
    out += csvField(row.experiment);
    out += ',';
    out += std::to_string(row.index);
    out += ',';
    out += std::to_string(row.restart);
    out += ',';
    out += encodeReal(row.finalLoss);
    out += ',';
    out += encodeReal(row.gradNorm);
    out += ',';
    out += encodeReal(row.wallMs);
    out += ',';
    out += csvField(row.verdict);
    out += '\n';
  }
  return out;
}

std::map<std::string, std::string> parseConfigText(const std::string& text,
                                                   const std::string& name) {
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    return parseJsonConfig(text, name);
  }
  return parseKvConfig(text, name);
}

std::map<std::string, std::string> loadConfigFile(
    const std::filesystem::path& path) {
  return parseConfigText(readTextFile(path), path.filename().string());
}

}  // namespace mcn
