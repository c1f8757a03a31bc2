#pragma once

// JSON-lines readers for review and product-metadata dumps, plus the
// verified-rating summary.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/iostreams/filter/gzip.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <nlohmann/json.hpp>

#include "semgap/error.hpp"
#include "semgap/textprep.hpp"

namespace semgap::ingest {

struct ReviewRecord {
  std::string text;
  int rating = 0;
  bool verified = false;
  std::string domain;

  friend bool operator==(const ReviewRecord&, const ReviewRecord&) = default;
};

struct DescriptionRecord {
  std::string text;
  std::string domain;
};

/// Record intentionally dropped (missing text, rating out of range, ...).
struct Skip {
  std::string reason;
};

/// Line that is not valid JSON. Recoverable: the caller counts it and moves on.
struct ParseError {
  std::size_t line = 0;
  std::string message;
};

template <typename T>
using LineResult = std::variant<T, Skip, ParseError>;

namespace detail {

inline std::string_view trim(std::string_view s) { return semgap::detail::trim(s); }

inline bool parse_object(std::string_view line, std::size_t line_no, nlohmann::json& out,
                         ParseError& err) {
  out = nlohmann::json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (out.is_discarded() || !out.is_object()) {
    err = ParseError{line_no, "line " + std::to_string(line_no) + ": not a JSON object"};
    return false;
  }
  return true;
}

// Strings are taken as-is; arrays contribute their string elements joined by
// newlines. Anything else is ignored.
inline std::string field_text(const nlohmann::json& v) {
  if (v.is_string()) return std::string(trim(v.get_ref<const std::string&>()));
  std::string out;
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_string()) continue;
      const auto piece = trim(e.get_ref<const std::string&>());
      if (piece.empty()) continue;
      if (!out.empty()) out.push_back('\n');
      out.append(piece);
    }
  }
  return out;
}

}  // namespace detail

/// Extracts `reviewText`, `overall` and `verified` from one review line.
inline LineResult<ReviewRecord> parse_review_line(std::string_view line, std::size_t line_no = 0,
                                                  std::string_view domain = {}) {
  nlohmann::json j;
  ParseError err;
  if (!detail::parse_object(line, line_no, j, err)) return err;

  auto text_it = j.find("reviewText");
  if (text_it == j.end() || !text_it->is_string()) return Skip{"missing reviewText"};
  const auto text = detail::trim(text_it->get_ref<const std::string&>());
  if (text.empty()) return Skip{"empty reviewText"};

  auto rating_it = j.find("overall");
  if (rating_it == j.end() || !rating_it->is_number()) return Skip{"missing overall rating"};
  const double r = rating_it->get<double>();
  if (!(r >= 1.0 && r <= 5.0) || r != std::floor(r)) return Skip{"rating outside 1..5"};

  bool verified = false;
  if (auto v = j.find("verified"); v != j.end() && v->is_boolean()) verified = v->get<bool>();

  return ReviewRecord{std::string(text), static_cast<int>(r), verified, std::string(domain)};
}

inline constexpr std::array<std::string_view, 5> kMetaFields{
    "title", "tech1", "description", "feature", "similar_item"};

/// Concatenates the description-bearing metadata fields in fixed order.
inline LineResult<DescriptionRecord> parse_meta_line(std::string_view line, std::size_t line_no = 0,
                                                     std::string_view domain = {}) {
  nlohmann::json j;
  ParseError err;
  if (!detail::parse_object(line, line_no, j, err)) return err;
  std::string text;
  for (auto field : kMetaFields) {
    auto it = j.find(std::string(field));
    if (it == j.end()) continue;
    auto piece = detail::field_text(*it);
    if (piece.empty()) continue;
    if (!text.empty()) text.push_back('\n');
    text += piece;
  }
  if (text.empty()) return Skip{"no description fields"};
  return DescriptionRecord{std::move(text), std::string(domain)};
}

struct RatingSummary {
  std::uint64_t n_verified = 0;
  double mean = 0.0;  // meaningless when n_verified == 0
  double std = 0.0;   // population standard deviation
  bool defined() const { return n_verified > 0; }
};

/// Star histogram. Integer counts keep the summary exact and independent of
/// record order; partial histograms merge by addition.
struct RatingAccumulator {
  std::array<std::uint64_t, 5> stars{};

  void add(int rating) {
    if (rating < 1 || rating > 5) throw DataError("rating outside 1..5: " + std::to_string(rating));
    ++stars[static_cast<std::size_t>(rating - 1)];
  }

  RatingAccumulator& operator+=(const RatingAccumulator& o) {
    for (std::size_t i = 0; i < stars.size(); ++i) stars[i] += o.stars[i];
    return *this;
  }

  RatingSummary summary() const {
    RatingSummary s;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < stars.size(); ++i) {
      s.n_verified += stars[i];
      total += stars[i] * (i + 1);
    }
    if (s.n_verified == 0) return s;
    const double n = static_cast<double>(s.n_verified);
    s.mean = static_cast<double>(total) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < stars.size(); ++i) {
      const double d = static_cast<double>(i + 1) - s.mean;
      ss += static_cast<double>(stars[i]) * d * d;
    }
    s.std = std::sqrt(ss / n);
    return s;
  }
};

template <typename Range>
RatingSummary summarize_ratings(const Range& records, bool verified_only) {
  RatingAccumulator acc;
  for (const ReviewRecord& r : records) {
    if (!verified_only || r.verified) acc.add(r.rating);
  }
  return acc.summary();
}

/// Bookkeeping for one input file: lines read = emitted + skipped + errors.
struct IngestCounts {
  std::uint64_t lines = 0;
  std::uint64_t emitted = 0;
  std::uint64_t skipped = 0;
  std::uint64_t parse_errors = 0;
  std::vector<std::string> first_errors;  // capped sample for the manifest

  void note_error(const ParseError& e) {
    ++parse_errors;
    if (first_errors.size() < 10) first_errors.push_back(e.message);
  }
};

inline bool is_gzip_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char magic[2] = {0, 0};
  in.read(reinterpret_cast<char*>(magic), 2);
  return in.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
}

/// Streams the lines of a plain or gzip-compressed file (detected by magic
/// bytes) into `fn(std::string_view line, std::size_t line_no)`.
template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open " + path.string());
  const bool gz = is_gzip_file(path);
  boost::iostreams::filtering_istream in;
  if (gz) in.push(boost::iostreams::gzip_decompressor());
  in.push(file);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    fn(std::string_view(line), line_no);
  }
  if (in.bad()) throw DataError("read error in " + path.string());
}

}  // namespace semgap::ingest
