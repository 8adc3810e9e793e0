#include "mobtcast/diff/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace mobtcast::diff {
namespace {

constexpr std::size_t kBlock = 512;
constexpr const char* kManifest = "manifest.txt";
constexpr const char* kParamDir = "params/";
constexpr const char* kDtype = "f64";

void put_octal(char* field, std::size_t width, std::uint64_t value) {
  // width-1 digits followed by NUL
  std::string digits(width - 1, '0');
  for (std::size_t i = width - 1; i-- > 0 && value > 0; value >>= 3) digits[i] = static_cast<char>('0' + (value & 7));
  if (value != 0) throw Error("tar field overflow");
  std::memcpy(field, digits.data(), width - 1);
  field[width - 1] = '\0';
}

std::uint64_t get_octal(const char* field, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width && field[i] != '\0' && field[i] != ' '; ++i) {
    if (field[i] < '0' || field[i] > '7') throw Error("corrupt tar header: bad octal field");
    v = (v << 3) | static_cast<std::uint64_t>(field[i] - '0');
  }
  return v;
}

void write_member(std::ostream& out, const std::string& name, const std::string& body) {
  if (name.size() >= 100) throw Error("checkpoint member name too long: " + name);
  std::array<char, kBlock> h{};
  std::memcpy(h.data(), name.data(), name.size());
  put_octal(h.data() + 100, 8, 0644);
  put_octal(h.data() + 108, 8, 0);
  put_octal(h.data() + 116, 8, 0);
  put_octal(h.data() + 124, 12, body.size());
  put_octal(h.data() + 136, 12, 0);
  std::memset(h.data() + 148, ' ', 8);
  h[156] = '0';
  std::memcpy(h.data() + 257, "ustar", 6);
  std::memcpy(h.data() + 263, "00", 2);
  unsigned sum = 0;
  for (char c : h) sum += static_cast<unsigned char>(c);
  put_octal(h.data() + 148, 7, sum);
  h[155] = ' ';
  out.write(h.data(), kBlock);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  const std::size_t pad = (kBlock - body.size() % kBlock) % kBlock;
  static const std::array<char, kBlock> zeros{};
  out.write(zeros.data(), static_cast<std::streamsize>(pad));
}

std::string encode(const Tensor& t) {
  std::string bytes(t.size() * 8, '\0');
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(t[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return bytes;
}

Tensor decode(const std::string& bytes, const Shape& shape, const std::string& name) {
  const std::size_t n = shape_size(shape);
  if (bytes.size() != n * 8) {
    throw Error("checkpoint blob for '" + name + "' has " + std::to_string(bytes.size()) + " bytes, expected " +
                std::to_string(n * 8));
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    values[i] = std::bit_cast<double>(bits);
  }
  return Tensor(shape, std::move(values));
}

Shape parse_shape(const std::string& text) {
  Shape shape;
  std::stringstream ss(text);
  std::string dim;
  while (std::getline(ss, dim, ',')) shape.push_back(std::stoull(dim));
  return shape;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params, const TextEntries& text) {
  std::ostringstream manifest;
  for (const auto& [name, t] : params) {
    if (name.find_first_of("\t\n/") != std::string::npos) throw Error("parameter name not storable: " + name);
    manifest << name << '\t' << kDtype << '\t';
    for (std::size_t d = 0; d < t.rank(); ++d) manifest << (d ? "," : "") << t.dim(d);
    manifest << '\n';
  }
  for (const auto& [name, _] : text) {
    if (name == kManifest || name.starts_with(kParamDir)) throw Error("reserved checkpoint entry name: " + name);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  write_member(out, kManifest, manifest.str());
  for (const auto& [name, t] : params) write_member(out, kParamDir + name + ".bin", encode(t));
  for (const auto& [name, body] : text) write_member(out, name, body);
  static const std::array<char, 2 * kBlock> end{};
  out.write(end.data(), end.size());
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());

  std::map<std::string, std::string> members;
  std::vector<std::string> order;
  std::array<char, kBlock> h{};
  while (in.read(h.data(), kBlock)) {
    if (std::all_of(h.begin(), h.end(), [](char c) { return c == '\0'; })) break;
    unsigned sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(h[i]);
    if (sum != get_octal(h.data() + 148, 8)) throw Error("corrupt checkpoint " + path.string() + ": header checksum");
    std::string name(h.data(), strnlen(h.data(), 100));
    const std::uint64_t size = get_octal(h.data() + 124, 12);
    std::string body(size, '\0');
    in.read(body.data(), static_cast<std::streamsize>(size));
    const std::size_t pad = (kBlock - size % kBlock) % kBlock;
    in.ignore(static_cast<std::streamsize>(pad));
    if (!in) throw Error("truncated checkpoint " + path.string());
    order.push_back(name);
    members[name] = std::move(body);
  }

  auto manifest_it = members.find(kManifest);
  if (manifest_it == members.end()) throw Error("checkpoint " + path.string() + " has no manifest");

  Checkpoint ck;
  std::stringstream manifest(manifest_it->second);
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) throw Error("bad manifest line: " + line);
    const std::string name = line.substr(0, t1);
    const std::string dtype = line.substr(t1 + 1, t2 - t1 - 1);
    if (dtype != kDtype) throw Error("unsupported element type '" + dtype + "' for " + name);
    auto blob = members.find(kParamDir + name + ".bin");
    if (blob == members.end()) throw Error("checkpoint missing blob for '" + name + "'");
    ck.params.add(name, decode(blob->second, parse_shape(line.substr(t2 + 1)), name));
  }
  for (const auto& name : order) {
    if (name != kManifest && !name.starts_with(kParamDir)) ck.text[name] = members[name];
  }
  return ck;
}

}  // namespace mobtcast::diff
