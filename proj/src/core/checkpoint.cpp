#include "core/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace sitcom {

namespace {

constexpr const char* kMagic = "SITCOM-CHECKPOINT v1";

void put_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
  return std::bit_cast<double>(bits);
}

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') return false;
  return true;
}

}  // namespace

const Tensor& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return t;
  fail(ErrorCode::kIo, "checkpoint: missing array '" + name + "'");
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) fail(ErrorCode::kIo, "checkpoint: missing meta key '" + key + "'");
  return it->second;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream head;
  head << kMagic << "\n" << "dtype float64-le\n";
  for (const auto& [k, v] : ckpt.meta) {
    require(valid_token(k) && v.find('\n') == std::string::npos, "checkpoint: bad meta entry '" + k + "'");
    head << "meta " << k << ' ' << v << "\n";
  }
  std::size_t total = 0;
  for (const auto& [name, t] : ckpt.arrays) {
    require(valid_token(name), "checkpoint: bad array name '" + name + "'");
    head << "array " << name << ' ' << t.rank();
    for (auto d : t.shape()) head << ' ' << d;
    head << "\n";
    total += t.size();
  }
  head << "end\n";
  std::string out = head.str();
  out.reserve(out.size() + 8 * total);
  for (const auto& entry : ckpt.arrays)
    for (double v : entry.second.values()) put_le(out, v);
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) fail(ErrorCode::kIo, "checkpoint: truncated header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) fail(ErrorCode::kIo, "checkpoint: bad magic");
  if (next_line() != "dtype float64-le") fail(ErrorCode::kIo, "checkpoint: unsupported dtype");

  Checkpoint ckpt;
  std::vector<std::pair<std::string, Shape>> layout;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "array") {
      std::string name;
      std::size_t rank = 0;
      if (!(ls >> name >> rank) || rank == 0) fail(ErrorCode::kIo, "checkpoint: bad array line '" + line + "'");
      Shape shape(rank);
      for (auto& d : shape)
        if (!(ls >> d) || d == 0) fail(ErrorCode::kIo, "checkpoint: bad dims for '" + name + "'");
      layout.emplace_back(name, std::move(shape));
    } else {
      fail(ErrorCode::kIo, "checkpoint: unknown header line '" + line + "'");
    }
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
  std::size_t remaining = bytes.size() - pos;
  for (auto& [name, shape] : layout) {
    const std::size_t n = shape_numel(shape);
    if (remaining < 8 * n) fail(ErrorCode::kIo, "checkpoint: truncated data for '" + name + "'");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = get_le(p + 8 * i);
    p += 8 * n;
    remaining -= 8 * n;
    ckpt.arrays.emplace_back(name, Tensor(shape, std::move(data)));
  }
  if (remaining != 0) fail(ErrorCode::kIo, "checkpoint: trailing bytes after data");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace sitcom
