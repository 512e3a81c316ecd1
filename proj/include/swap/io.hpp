#pragma once

// File formats: MatrixFile (binary gradient matrices), weights JSON, and the
// CSV/JSON report writers used by the CLI.
//
// MatrixFile layout, all integers little-endian:
//   bytes 0..7    "SWAPMAT1"  (the trailing digit is the format version)
//   bytes 8..15   u64 n
//   bytes 16..23  u64 p
//   then n*p IEEE-754 binary64 values, row-major, little-endian.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "swap/common.hpp"
#include "swap/compare.hpp"
#include "swap/model.hpp"

namespace swapkit::io {

inline constexpr std::string_view kMatrixMagic = "SWAPMAT";
inline constexpr char kMatrixVersion = '1';
inline constexpr std::size_t kMatrixHeader = 24;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed: " + path.string());
}

}  // namespace detail

inline std::string matrix_to_bytes(const RowMatrix& M) {
  std::string out;
  out.reserve(kMatrixHeader + 8 * static_cast<std::size_t>(M.size()));
  out.append(kMatrixMagic);
  out.push_back(kMatrixVersion);
  detail::put_u64(out, static_cast<std::uint64_t>(M.rows()));
  detail::put_u64(out, static_cast<std::uint64_t>(M.cols()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) detail::put_u64(out, std::bit_cast<std::uint64_t>(M(i, j)));
  return out;
}

inline RowMatrix matrix_from_bytes(std::string_view bytes) {
  if (bytes.size() < kMatrixHeader) throw FormatError("matrix file: truncated header");
  if (bytes.substr(0, kMatrixMagic.size()) != kMatrixMagic) throw FormatError("matrix file: bad magic");
  if (bytes[7] != kMatrixVersion) throw FormatError(std::string("matrix file: bad version '") + bytes[7] + "'");
  const std::uint64_t n = detail::get_u64(bytes, 8);
  const std::uint64_t p = detail::get_u64(bytes, 16);
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (p != 0 && n > kMax / p) throw FormatError("matrix file: n*p overflows");
  const std::uint64_t count = n * p;
  if (count > (kMax - kMatrixHeader) / 8) throw FormatError("matrix file: n*p overflows");
  const auto maxIndex = static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max());
  if (n > maxIndex || p > maxIndex) throw FormatError("matrix file: dimensions exceed index range");
  if (bytes.size() != kMatrixHeader + 8 * count)
    throw FormatError("matrix file: payload is " + std::to_string(bytes.size() - kMatrixHeader) + " bytes, expected " +
                      std::to_string(8 * count) + (bytes.size() < kMatrixHeader + 8 * count ? " (truncated)" : ""));
  RowMatrix M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::size_t at = kMatrixHeader;
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j, at += 8) M(i, j) = std::bit_cast<double>(detail::get_u64(bytes, at));
  return M;
}

inline void write_matrix(const std::filesystem::path& path, const RowMatrix& M) {
  detail::write_file(path, matrix_to_bytes(M));
}

inline RowMatrix read_matrix(const std::filesystem::path& path) { return matrix_from_bytes(detail::read_file(path)); }

// --- weights ---------------------------------------------------------------

inline nlohmann::json weights_to_json(const model::TinyMlp& mlp) {
  nlohmann::json j;
  j["dims"] = mlp.dims();
  j["activation"] = model::activation_name(mlp.activation());
  const Vector& w = mlp.weights();
  j["weights"] = std::vector<double>(w.data(), w.data() + w.size());
  return j;
}

inline model::TinyMlp weights_from_json(const nlohmann::json& j) {
  try {
    auto dims = j.at("dims").get<std::vector<std::size_t>>();
    auto act = model::parse_activation(j.value("activation", std::string("relu")));
    model::TinyMlp mlp(dims, act);
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != mlp.parameter_count())
      throw FormatError("weights file: " + std::to_string(w.size()) + " weights for dims needing " +
                        std::to_string(mlp.parameter_count()));
    mlp.set_weights(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
    return mlp;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weights file: ") + e.what());
  }
}

inline void write_weights(const std::filesystem::path& path, const model::TinyMlp& mlp) {
  detail::write_file(path, weights_to_json(mlp).dump(1) + "\n");
}

inline model::TinyMlp read_weights(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return weights_from_json(j);
}

// --- reports ---------------------------------------------------------------

// Fixed notation carrying 6 significant digits.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  int decimals = 5;
  if (v != 0.0) decimals = std::max(0, 5 - static_cast<int>(std::floor(std::log10(std::fabs(v)))));
  std::ostringstream ss;
  ss.imbue(std::locale::classic());
  ss << std::fixed << std::setprecision(decimals) << v;
  std::string s = ss.str();
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);  // no "-0.00000"
  return s;
}

// RFC-4180 field quoting.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

inline std::string epsilon_label(double eps) { return std::isinf(eps) ? "inf" : fmt(eps); }

inline std::string compare_csv(const pruner::CompareReport& r) {
  std::string out = "sparsity,lr_loss,lr_ci,ewr_loss,ewr_ci,diff_percent,lr_acc,ewr_acc,seeds\r\n";
  for (const auto& a : r.aggregate) {
    out += fmt(a.sparsity) + ',' + fmt(a.lrLoss) + ',' + fmt(a.lrCi) + ',' + fmt(a.ewrLoss) + ',' + fmt(a.ewrCi) + ',' +
           fmt(a.diffPercent) + ',' + fmt(a.lrAccuracy) + ',' + fmt(a.ewrAccuracy) + ',' + std::to_string(a.seeds) +
           "\r\n";
  }
  return out;
}

inline std::string compare_rows_csv(const pruner::CompareReport& r) {
  std::string out = "seed,stage,sparsity,lr_loss,ewr_loss,diff_percent,lr_acc,ewr_acc\r\n";
  for (const auto& x : r.rows) {
    out += std::to_string(x.seed) + ',' + std::to_string(x.stage) + ',' + fmt(x.sparsity) + ',' + fmt(x.lrLoss) + ',' +
           fmt(x.ewrLoss) + ',' + fmt(x.diffPercent) + ',' + fmt(x.lrAccuracy) + ',' + fmt(x.ewrAccuracy) + "\r\n";
  }
  return out;
}

// Numbers go through fmt() so the JSON mirror carries the same digits as the CSV.
inline nlohmann::ordered_json compare_json(const pruner::CompareReport& r) {
  nlohmann::ordered_json j;
  j["diff_formula"] = "100*(lr_loss-ewr_loss)/lr_loss";
  j["confidence"] = fmt(r.confidence);
  auto& agg = j["aggregate"] = nlohmann::ordered_json::array();
  for (const auto& a : r.aggregate) {
    agg.push_back({{"sparsity", fmt(a.sparsity)},
                   {"lr_loss", fmt(a.lrLoss)},
                   {"lr_ci", fmt(a.lrCi)},
                   {"ewr_loss", fmt(a.ewrLoss)},
                   {"ewr_ci", fmt(a.ewrCi)},
                   {"diff_percent", fmt(a.diffPercent)},
                   {"lr_acc", fmt(a.lrAccuracy)},
                   {"ewr_acc", fmt(a.ewrAccuracy)},
                   {"seeds", a.seeds}});
  }
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& x : r.rows) {
    rows.push_back({{"seed", x.seed},
                    {"stage", x.stage},
                    {"sparsity", fmt(x.sparsity)},
                    {"lr_loss", fmt(x.lrLoss)},
                    {"ewr_loss", fmt(x.ewrLoss)},
                    {"diff_percent", fmt(x.diffPercent)},
                    {"lr_acc", fmt(x.lrAccuracy)},
                    {"ewr_acc", fmt(x.ewrAccuracy)}});
  }
  return j;
}

inline std::string sweep_csv(const pruner::SweepReport& r) {
  std::string out = "epsilon,sparsity,ewr_loss,ci\r\n";
  for (const auto& x : r.rows)
    out += epsilon_label(x.epsilon) + ',' + fmt(x.sparsity) + ',' + fmt(x.ewrLoss) + ',' + fmt(x.ci) + "\r\n";
  return out;
}

inline nlohmann::ordered_json sweep_json(const pruner::SweepReport& r) {
  nlohmann::ordered_json j;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"epsilon", epsilon_label(x.epsilon)},
                    {"sparsity", fmt(x.sparsity)},
                    {"ewr_loss", fmt(x.ewrLoss)},
                    {"ci", fmt(x.ci)}});
  j["lr"] = compare_json(r.lr)["aggregate"];
  return j;
}

inline std::string failures_csv(const std::vector<pruner::SeedFailure>& failures) {
  std::string out = "seed,message\r\n";
  for (const auto& f : failures) out += std::to_string(f.seed) + ',' + csv_field(f.message) + "\r\n";
  return out;
}

inline void write_text(const std::filesystem::path& path, std::string_view text) { detail::write_file(path, text); }

}  // namespace swapkit::io
