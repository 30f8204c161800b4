#include "smartedge/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "crypto.hpp"
#include "smartedge/error.hpp"
#include "smartedge/models.hpp"
#include "smartedge/rng.hpp"

namespace smartedge {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kHeaderNames = {
    "Pregnancies", "Glucose", "BloodPressure", "SkinThickness",
    "Insulin",     "BMI",     "DiabetesPedigreeFunction", "Age"};

constexpr std::array<std::string_view, kFeatureCount> kAliases = {
    "pregnancies", "glucose", "diastolic_bp", "skinfold",
    "insulin",     "bmi",     "pedigree",     "age"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

// Non-blank lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> content_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(text.substr(start, end - start));
    if (!line.empty()) out.emplace_back(line_no, line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<double> parse_row(std::string_view line, std::size_t line_no, std::size_t expected) {
  const auto fields = split_fields(line);
  if (fields.size() != expected) {
    throw Error(ErrorCode::MalformedRow,
                "expected " + std::to_string(expected) + " fields, found " +
                    std::to_string(fields.size()),
                line_no);
  }
  std::vector<double> values;
  values.reserve(expected);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto v = parse_number(fields[i]);
    if (!v) {
      throw Error(ErrorCode::MalformedRow,
                  "field " + std::to_string(i + 1) + " is not a number: '" +
                      std::string(fields[i]) + "'",
                  line_no);
    }
    values.push_back(*v);
  }
  return values;
}

Label parse_label(double value, std::size_t line_no) {
  if (value != 0.0 && value != 1.0) {
    throw Error(ErrorCode::MalformedRow, "outcome must be 0 or 1", line_no);
  }
  return static_cast<Label>(value);
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() { return kHeaderNames; }

std::optional<std::size_t> find_feature(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (name == kHeaderNames[i] || name == kAliases[i]) return i;
  }
  return std::nullopt;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error(ErrorCode::Io, "cannot format number");
  return std::string(buf.data(), ptr);
}

std::size_t Dataset::count_label(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [label](const auto& r) { return r.outcome == label; }));
}

FeatureMatrix Dataset::features() const {
  FeatureMatrix out(records.size(), kFeatureCount);
  for (std::size_t r = 0; r < records.size(); ++r) {
    std::copy(records[r].features.begin(), records[r].features.end(), out.row(r).begin());
  }
  return out;
}

Labels Dataset::labels() const {
  Labels out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.outcome);
  return out;
}

Dataset parse_csv(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw Error(ErrorCode::MalformedRow, "missing header row", 1);
  const auto header = split_fields(lines.front().second);
  if (header.size() != kFeatureCount + 1) {
    throw Error(ErrorCode::MalformedRow,
                "header must have 9 columns, found " + std::to_string(header.size()),
                lines.front().first);
  }

  Dataset ds;
  ds.feature_names.assign(header.begin(), header.begin() + kFeatureCount);
  ds.source_digest = detail::sha256_hex(text);
  ds.records.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line_no, line] = lines[i];
    const auto values = parse_row(line, line_no, kFeatureCount + 1);
    PatientRecord rec;
    std::copy_n(values.begin(), kFeatureCount, rec.features.begin());
    rec.outcome = parse_label(values.back(), line_no);
    ds.records.push_back(rec);
  }
  if (ds.records.empty()) throw Error(ErrorCode::EmptyDataset, "no data rows");
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

std::string to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    out += i < ds.feature_names.size() ? ds.feature_names[i] : std::string(kHeaderNames[i]);
    out += ',';
  }
  out += kOutcomeColumn;
  out += '\n';
  for (const auto& r : ds.records) {
    for (double v : r.features) {
      out += format_double(v);
      out += ',';
    }
    out += std::to_string(r.outcome);
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::WriteFailure, path.string());
  out << to_csv(ds);
  if (!out) throw Error(ErrorCode::WriteFailure, path.string());
}

FeatureTable parse_feature_csv(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw Error(ErrorCode::MalformedRow, "missing header row", 1);
  const auto width = split_fields(lines.front().second).size();
  if (width != kFeatureCount && width != kFeatureCount + 1) {
    throw Error(ErrorCode::ArityMismatch,
                "expected 8 or 9 columns, header has " + std::to_string(width),
                lines.front().first);
  }
  FeatureTable table;
  table.features = FeatureMatrix(0, kFeatureCount);
  if (width == kFeatureCount + 1) table.labels.emplace();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line_no, line] = lines[i];
    if (split_fields(line).size() != width) {
      throw Error(ErrorCode::ArityMismatch,
                  "row " + std::to_string(i) + " has " +
                      std::to_string(split_fields(line).size()) + " columns, header has " +
                      std::to_string(width),
                  line_no);
    }
    auto values = parse_row(line, line_no, width);
    if (table.labels) {
      table.labels->push_back(parse_label(values.back(), line_no));
      values.pop_back();
    }
    table.features.append_row(values);
  }
  return table;
}

std::string to_feature_csv(const FeatureMatrix& rows) {
  std::string out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (i) out += ',';
    out += kHeaderNames[i];
  }
  out += '\n';
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto row = rows.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    out += '\n';
  }
  return out;
}

std::string to_matrix_csv(const FeatureMatrix& rows, const Labels* labels) {
  if (labels && labels->size() != rows.rows()) {
    throw Error(ErrorCode::LengthMismatch, "labels and rows differ in count");
  }
  std::string out;
  for (std::size_t c = 0; c < rows.cols(); ++c) {
    if (c) out += ',';
    out += 'x' + std::to_string(c);
  }
  if (labels) out += std::string(rows.cols() ? "," : "") + std::string(kOutcomeColumn);
  out += '\n';
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto row = rows.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    if (labels) out += std::string(rows.cols() ? "," : "") + std::to_string((*labels)[r]);
    out += '\n';
  }
  return out;
}

FeatureTable parse_matrix_csv(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw Error(ErrorCode::MalformedRow, "missing header row", 1);
  const auto header = split_fields(lines.front().second);
  const bool labeled = header.back() == kOutcomeColumn;
  const std::size_t width = header.size();
  const std::size_t arity = labeled ? width - 1 : width;
  FeatureTable table;
  table.features = FeatureMatrix(0, arity);
  if (labeled) table.labels.emplace();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line_no, line] = lines[i];
    auto values = parse_row(line, line_no, width);
    if (labeled) {
      table.labels->push_back(parse_label(values.back(), line_no));
      values.pop_back();
    }
    table.features.append_row(values);
  }
  return table;
}

std::vector<std::string> default_missing_columns() {
  return {"SkinThickness", "BloodPressure", "BMI"};
}

Dataset drop_missing(const Dataset& ds, const std::vector<std::string>& columns) {
  std::vector<std::size_t> cols;
  for (const auto& name : columns) {
    const auto idx = find_feature(name);
    if (!idx) throw Error(ErrorCode::UnknownColumn, name);
    cols.push_back(*idx);
  }
  Dataset out;
  out.feature_names = ds.feature_names;
  out.source_digest = ds.source_digest;
  std::copy_if(ds.records.begin(), ds.records.end(), std::back_inserter(out.records),
               [&](const PatientRecord& r) {
                 return std::none_of(cols.begin(), cols.end(),
                                     [&](std::size_t c) { return r.features[c] == 0.0; });
               });
  return out;
}

SplitDataset split(std::size_t n, SplitRatios ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::BadRatios, "ratios must be non-negative and sum to 1");
  }
  if (n < 10) throw Error(ErrorCode::TooFewRecords, "split needs at least 10 records");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  // The epsilon keeps exact products such as 0.7 * 10 from flooring to 6.
  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(ratios.validation * n + 1e-9));

  SplitDataset out;
  out.seed = seed;
  out.train_idx.assign(order.begin(), order.begin() + n_train);
  out.val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test_idx.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

std::vector<double> Scaler::transform(std::span<const double> row) const {
  if (row.size() != arity()) {
    throw Error(ErrorCode::ArityMismatch, "scaler expects " + std::to_string(arity()) +
                                              " features, got " + std::to_string(row.size()));
  }
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = (row[i] - mean[i]) / stddev[i];
  return out;
}

Scaler fit_scaler(const FeatureMatrix& x, std::span<const std::size_t> idx) {
  if (idx.empty()) throw Error(ErrorCode::EmptyIndexSet, "cannot fit a scaler on no rows");
  const std::size_t d = x.cols();
  Scaler s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  for (auto i : idx) {
    const auto row = x.row(i);
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += row[c];
  }
  for (auto& m : s.mean) m /= static_cast<double>(idx.size());
  for (auto i : idx) {
    const auto row = x.row(i);
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = row[c] - s.mean[c];
      s.stddev[c] += dev * dev;
    }
  }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(idx.size()));
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

FeatureMatrix apply_scaler(const Scaler& scaler, const FeatureMatrix& x) {
  if (x.cols() != scaler.arity() && !(x.rows() == 0 && x.cols() == 0)) {
    throw Error(ErrorCode::ArityMismatch, "scaler expects " + std::to_string(scaler.arity()) +
                                              " features, matrix has " +
                                              std::to_string(x.cols()));
  }
  FeatureMatrix out(x.rows(), scaler.arity());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] = (src[c] - scaler.mean[c]) / scaler.stddev[c];
    }
  }
  return out;
}

FeatureMask FeatureMask::all(std::size_t arity) {
  FeatureMask m;
  m.selected.resize(arity);
  std::iota(m.selected.begin(), m.selected.end(), std::size_t{0});
  return m;
}

FeatureMatrix FeatureMask::apply(const FeatureMatrix& x) const { return x.select_cols(selected); }

std::vector<double> FeatureMask::apply(std::span<const double> row) const {
  std::vector<double> out;
  out.reserve(selected.size());
  for (auto c : selected) {
    if (c >= row.size()) throw Error(ErrorCode::ArityMismatch, "feature mask exceeds row width");
    out.push_back(row[c]);
  }
  return out;
}

FeatureMask rfe(const FeatureMatrix& x, const Labels& y, std::span<const std::size_t> train_idx,
                std::size_t target_k, std::uint64_t /*seed*/) {
  // The ranker is full-batch gradient descent from zero weights, which
  // needs no randomness; the seed is accepted for interface symmetry.
  if (target_k < 1 || target_k > x.cols()) {
    throw Error(ErrorCode::BadK, "target_k must be in [1, " + std::to_string(x.cols()) +
                                     "], got " + std::to_string(target_k));
  }
  FeatureMask mask = FeatureMask::all(x.cols());
  if (target_k == x.cols()) return mask;

  const FeatureMatrix train = x.select_rows(train_idx);
  const Labels train_y = select_labels(y, train_idx);
  std::vector<std::size_t> all_rows(train.rows());
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  const FeatureMatrix scaled = apply_scaler(fit_scaler(train, all_rows), train);

  while (mask.selected.size() > target_k) {
    const auto model = train_logreg(mask.apply(scaled), train_y, LogRegParams{});
    std::size_t weakest = 0;
    for (std::size_t i = 1; i < model.weights.size(); ++i) {
      if (std::abs(model.weights[i]) < std::abs(model.weights[weakest])) weakest = i;
    }
    mask.elimination_order.push_back(mask.selected[weakest]);
    mask.selected.erase(mask.selected.begin() + static_cast<std::ptrdiff_t>(weakest));
  }
  return mask;
}

}  // namespace smartedge
