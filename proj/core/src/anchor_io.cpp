#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mantra/errors.hpp"
#include "mantra/text_encoder.hpp"

namespace mantra {
namespace {

constexpr std::string_view kTextMagic = "mantra-anchors";
constexpr std::string_view kBinaryMagic = "MANTRAB1";

static_assert(std::endian::native == std::endian::little, "anchor binary I/O assumes a little-endian host");

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Parses a quoted label at the start of `line`; returns the index past it.
std::size_t unquote(std::string_view line, std::string& out) {
  if (line.empty() || line[0] != '"') fail(ErrorCode::ParseError, "anchor row must start with a quoted label");
  for (std::size_t i = 1; i < line.size(); ++i) {
    if (line[i] == '\\' && i + 1 < line.size()) {
      out.push_back(line[++i]);
    } else if (line[i] == '"') {
      return i + 1;
    } else {
      out.push_back(line[i]);
    }
  }
  fail(ErrorCode::ParseError, "unterminated label quote");
}

AnchorMatrix parse_text(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) fail(ErrorCode::ParseError, "empty anchor file");
  std::istringstream hs(header);
  std::string magic, version;
  long rows = -1, dims = -1;
  hs >> magic >> version >> rows >> dims;
  if (!hs || magic != kTextMagic || version != "v1" || rows < 0 || dims <= 0)
    fail(ErrorCode::ParseError, "bad anchor header '" + header + "'");

  AnchorMatrix out;
  out.fixed = true;
  out.vectors.resize(rows, dims);
  std::string line;
  long r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (r >= rows) fail(ErrorCode::ParseError, "more anchor rows than the header declares");
    std::string label;
    std::size_t pos = unquote(line, label);
    std::vector<double> values;
    const char* p = line.data() + pos;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
      if (p == end) break;
      double v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) fail(ErrorCode::ParseError, "bad number in anchor row " + std::to_string(r));
      values.push_back(v);
      p = next;
    }
    if (static_cast<long>(values.size()) != dims)
      fail(ErrorCode::DimensionMismatch, "anchor row " + std::to_string(r) + " has " +
                                             std::to_string(values.size()) + " values, expected " +
                                             std::to_string(dims));
    for (long j = 0; j < dims; ++j) out.vectors(r, j) = values[static_cast<std::size_t>(j)];
    out.labels.emplace_back(label);
    ++r;
  }
  if (r != rows) fail(ErrorCode::ParseError, "anchor file declares " + std::to_string(rows) + " rows, found " +
                                                 std::to_string(r));
  return out;
}

template <typename T>
T read_le(const std::string& bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) fail(ErrorCode::ParseError, "truncated binary anchor file");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return v;
}

AnchorMatrix parse_binary(const std::string& bytes) {
  std::size_t offset = kBinaryMagic.size();
  const auto rows = read_le<std::uint32_t>(bytes, offset);
  const auto dims = read_le<std::uint32_t>(bytes, offset);
  if (dims == 0) fail(ErrorCode::ParseError, "binary anchor file with zero dimension");
  AnchorMatrix out;
  out.fixed = true;
  out.vectors.resize(rows, dims);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t j = 0; j < dims; ++j) out.vectors(r, j) = read_le<float>(bytes, offset);
  for (std::uint32_t r = 0; r < rows; ++r) {
    const auto len = read_le<std::uint32_t>(bytes, offset);
    if (offset + len > bytes.size()) fail(ErrorCode::ParseError, "truncated label in binary anchor file");
    out.labels.emplace_back(std::string_view(bytes.data() + offset, len));
    offset += len;
  }
  if (offset != bytes.size()) fail(ErrorCode::ParseError, "trailing bytes in binary anchor file");
  return out;
}

}  // namespace

AnchorMatrix load_precomputed_anchors(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.empty()) fail(ErrorCode::ParseError, "empty anchor file " + path.string());
  AnchorMatrix out = bytes.compare(0, kBinaryMagic.size(), kBinaryMagic) == 0 ? parse_binary(bytes) : parse_text(bytes);
  if (!out.vectors.allFinite()) fail(ErrorCode::ParseError, "non-finite anchor values");
  for (Eigen::Index r = 0; r < out.vectors.rows(); ++r)
    if (out.vectors.row(r).norm() < 1e-12) fail(ErrorCode::ZeroVector, "anchor row " + std::to_string(r) + " is zero");
  return out;
}

void save_anchors_text(const AnchorMatrix& anchors, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << kTextMagic << " v1 " << anchors.vectors.rows() << ' ' << anchors.vectors.cols() << '\n';
  std::array<char, 32> buf{};
  for (Eigen::Index r = 0; r < anchors.vectors.rows(); ++r) {
    out << quote(anchors.labels[static_cast<std::size_t>(r)].text());
    for (Eigen::Index j = 0; j < anchors.vectors.cols(); ++j) {
      // Shortest representation that parses back to the same double.
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), anchors.vectors(r, j));
      (void)ec;
      out << ' ' << std::string_view(buf.data(), static_cast<std::size_t>(end - buf.data()));
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

void save_anchors_binary(const AnchorMatrix& anchors, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  out.write(kBinaryMagic.data(), static_cast<std::streamsize>(kBinaryMagic.size()));
  put(static_cast<std::uint32_t>(anchors.vectors.rows()));
  put(static_cast<std::uint32_t>(anchors.vectors.cols()));
  for (Eigen::Index r = 0; r < anchors.vectors.rows(); ++r)
    for (Eigen::Index j = 0; j < anchors.vectors.cols(); ++j) put(static_cast<float>(anchors.vectors(r, j)));
  for (const auto& label : anchors.labels) {
    put(static_cast<std::uint32_t>(label.text().size()));
    out.write(label.text().data(), static_cast<std::streamsize>(label.text().size()));
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace mantra
