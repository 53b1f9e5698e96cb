#pragma once

// CSV ingestion and output, sliding-window features and model files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mrot/matrix.hpp"
#include "mrot/score_model.hpp"

namespace mrot {

struct CsvTable {
  Matrix features;
  std::vector<std::string> columns;  // feature column names
  std::optional<std::vector<int>> labels;
};

struct CsvOptions {
  bool has_header = true;
  // Header name of the label column, or its zero-based index as a decimal
  // string when the file has no header.
  std::optional<std::string> label_column;
};

/// Parses a rectangular numeric CSV. Errors name the offending line (1-based,
/// counting the header) and column. Rows with NaN or Inf are rejected.
CsvTable parse_csv(std::istream& in, const CsvOptions& options, const std::string& source = "<stream>");
CsvTable load_csv(const std::filesystem::path& path, const CsvOptions& options);

/// Header line then one row per matrix row, 17 significant digits.
void write_csv(std::ostream& out, const Matrix& x, std::span<const std::string> columns,
               std::optional<std::span<const int>> labels = std::nullopt);

/// "sample_index,score" rows.
void write_scores_csv(std::ostream& out, std::span<const double> scores);

/// 17 significant digits; round-trips through strtod.
std::string format_double(double v);

struct WindowConfig {
  std::size_t window_len = 60;
  std::size_t stride = 30;

  void validate() const;
};

/// For each window [t, t + L) with t = 0, stride, 2 stride, ... while
/// t + L <= T: the column means followed by the column sample standard
/// deviations (divisor L - 1). Output is floor((T - L) / stride) + 1 rows of
/// 2d features.
Matrix window_features(const Matrix& series, const WindowConfig& config);

/// "mean_<c>" for each column followed by "std_<c>".
std::vector<std::string> window_feature_names(std::span<const std::string> columns);

inline constexpr int kModelFormatVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// {"format_version": 1, "checksum": "<hex fnv1a of model.dump()>", "model": {...}}
std::string serialize_model(const MrotModel& model);
/// Throws VersionError on a format_version other than 1 and DataError on
/// malformed JSON, checksum mismatch or schema violations.
MrotModel deserialize_model(std::string_view text);

void save_model(const MrotModel& model, const std::filesystem::path& path);
MrotModel load_model(const std::filesystem::path& path);

}  // namespace mrot
