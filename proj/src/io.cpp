#include "mrot/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mrot/errors.hpp"

namespace mrot {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ": line " + std::to_string(line);
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

bool blank(std::string_view s) { return trim(s).empty(); }

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable parse_csv(std::istream& in, const CsvOptions& options, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::size_t width = 0;

  if (options.has_header) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!blank(line)) break;
    }
    if (blank(line)) throw DataError(source + ": file is empty");
    for (auto cell : split(line)) header.push_back(unquote(cell));
    width = header.size();
  }

  std::optional<std::size_t> label_idx;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto cells = split(line);
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw DataError(where(source, line_no) + ": expected " + std::to_string(width) + " fields, found " +
                      std::to_string(cells.size()));
    }
    if (options.label_column && !label_idx) {
      if (options.has_header) {
        for (std::size_t c = 0; c < header.size(); ++c)
          if (header[c] == *options.label_column) label_idx = c;
        if (!label_idx) throw DataError(source + ": no column named '" + *options.label_column + "'");
      } else {
        const auto idx = parse_number(*options.label_column);
        if (!idx || *idx < 0 || *idx >= static_cast<double>(width) || *idx != std::floor(*idx)) {
          throw DataError(source + ": label column '" + *options.label_column + "' is not a valid column index");
        }
        label_idx = static_cast<std::size_t>(*idx);
      }
    }
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_number(cells[c]);
      if (!v) {
        throw DataError(where(source, line_no) + ", column " + std::to_string(c + 1) + ": '" + std::string(cells[c]) +
                        "' is not a number");
      }
      if (!std::isfinite(*v)) {
        throw DataError(where(source, line_no) + ", column " + std::to_string(c + 1) + ": non-finite value");
      }
      if (label_idx && c == *label_idx) {
        if (*v != 0.0 && *v != 1.0) {
          throw DataError(where(source, line_no) + ", column " + std::to_string(c + 1) + ": label must be 0 or 1");
        }
        labels.push_back(static_cast<int>(*v));
      } else {
        row.push_back(*v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(source + ": no data rows");
  const std::size_t d = rows.front().size();
  if (d == 0) throw DataError(source + ": no feature columns");

  CsvTable table;
  std::vector<double> flat;
  flat.reserve(rows.size() * d);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  table.features = Matrix(rows.size(), d, std::move(flat));
  for (std::size_t c = 0; c < width; ++c) {
    if (label_idx && c == *label_idx) continue;
    table.columns.push_back(options.has_header ? header[c] : "x" + std::to_string(table.columns.size()));
  }
  if (label_idx) table.labels = std::move(labels);
  return table;
}

CsvTable load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, options, path.string());
}

void write_csv(std::ostream& out, const Matrix& x, std::span<const std::string> columns,
               std::optional<std::span<const int>> labels) {
  if (columns.size() != x.cols()) throw DataError("column name count does not match matrix width");
  if (labels && labels->size() != x.rows()) throw DataError("label count does not match row count");
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  if (labels) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out << (c ? "," : "") << format_double(x(r, c));
    if (labels) out << ',' << (*labels)[r];
    out << '\n';
  }
}

void write_scores_csv(std::ostream& out, std::span<const double> scores) {
  out << "sample_index,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) out << i << ',' << format_double(scores[i]) << '\n';
}

void WindowConfig::validate() const {
  if (window_len < 2) throw DataError("window length must be >= 2");
  if (stride < 1) throw DataError("stride must be >= 1");
}

Matrix window_features(const Matrix& series, const WindowConfig& config) {
  config.validate();
  const std::size_t T = series.rows();
  const std::size_t d = series.cols();
  const std::size_t L = config.window_len;
  if (T < L) {
    throw DataError("series has " + std::to_string(T) + " rows, fewer than the window length " + std::to_string(L));
  }
  if (d == 0) throw DataError("series has no columns");
  const std::size_t windows = (T - L) / config.stride + 1;
  Matrix out(windows, 2 * d, 0.0);
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t t0 = w * config.stride;
    for (std::size_t c = 0; c < d; ++c) {
      double sum = 0.0;
      for (std::size_t t = t0; t < t0 + L; ++t) sum += series(t, c);
      const double mean = sum / static_cast<double>(L);
      double ss = 0.0;
      for (std::size_t t = t0; t < t0 + L; ++t) {
        const double e = series(t, c) - mean;
        ss += e * e;
      }
      out(w, c) = mean;
      out(w, d + c) = std::sqrt(ss / static_cast<double>(L - 1));
    }
  }
  return out;
}

std::vector<std::string> window_feature_names(std::span<const std::string> columns) {
  std::vector<std::string> names;
  for (const auto& c : columns) names.push_back("mean_" + c);
  for (const auto& c : columns) names.push_back("std_" + c);
  return names;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string serialize_model(const MrotModel& model) {
  const auto payload = model.to_document();
  nlohmann::json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["checksum"] = hex64(fnv1a64(payload.dump()));
  doc["model"] = payload;
  return doc.dump(1) + "\n";
}

MrotModel deserialize_model(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file is truncated or not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) throw DataError("model file has no format_version");
  const auto& v = doc.at("format_version");
  if (!v.is_number_integer() || v.get<long long>() != kModelFormatVersion) {
    throw VersionError("unsupported model format_version " + v.dump() + " (this build reads version " +
                       std::to_string(kModelFormatVersion) + ")");
  }
  if (!doc.contains("model") || !doc.contains("checksum") || !doc.at("checksum").is_string()) {
    throw DataError("model file is missing the model or checksum field");
  }
  const auto& payload = doc.at("model");
  if (hex64(fnv1a64(payload.dump())) != doc.at("checksum").get<std::string>()) {
    throw DataError("model file checksum mismatch (file is corrupt)");
  }
  return MrotModel::from_document(payload);
}

void save_model(const MrotModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << serialize_model(model);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

MrotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace mrot
