#include "dctstab/flo_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dctstab/error.hpp"

namespace fs = std::filesystem;

namespace dctstab {

namespace {

constexpr float kUnknown = 1e10f;

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const fs::path& path) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw InputError("truncated .flo file " + path.string());
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T value;
  std::memcpy(&value, b, sizeof(T));
  return value;
}

}  // namespace

FlowField read_flo(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PIEH", 4) != 0)
    throw InputError("bad .flo magic in " + path.string());
  const auto w = get_le<int32_t>(in, path);
  const auto h = get_le<int32_t>(in, path);
  if (w <= 0 || h <= 0 || static_cast<int64_t>(w) * h > (int64_t{1} << 28))
    throw InputError("bad .flo dimensions in " + path.string());
  FlowField flow(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float u = get_le<float>(in, path);
      const float v = get_le<float>(in, path);
      if (!std::isfinite(u) || !std::isfinite(v) || std::abs(u) > 1e9f || std::abs(v) > 1e9f) {
        flow.valid(y, x) = 0;
        continue;
      }
      flow.u(y, x) = u;
      flow.v(y, x) = v;
    }
  return flow;
}

void write_flo(const fs::path& path, const FlowField& flow) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ProcessingError("cannot write " + path.string());
  out.write("PIEH", 4);
  put_le<int32_t>(out, flow.width());
  put_le<int32_t>(out, flow.height());
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x) {
      const bool ok = flow.valid(y, x);
      put_le<float>(out, ok ? static_cast<float>(flow.u(y, x)) : kUnknown);
      put_le<float>(out, ok ? static_cast<float>(flow.v(y, x)) : kUnknown);
    }
  if (!out) throw ProcessingError("cannot write " + path.string());
}

}  // namespace dctstab
