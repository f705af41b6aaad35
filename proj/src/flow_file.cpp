#include <algorithm>
#include <cmath>

#include "percs/file_util.hpp"
#include "percs/flows.hpp"

namespace percs {
namespace {
constexpr std::uint8_t kMagic[4] = {'P', 'C', 'S', 'F'};
}

std::vector<std::uint8_t> encode_flow_file(const FlowField& flow) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(12 + flow.dy.size() * 8);
  put_u32le(out, static_cast<std::uint32_t>(flow.height()));
  put_u32le(out, static_cast<std::uint32_t>(flow.width()));
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      put_f32le(out, static_cast<float>(flow.dy(y, x)));
      put_f32le(out, static_cast<float>(flow.dx(y, x)));
    }
  }
  return out;
}

FlowField decode_flow_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw IoError("not a PCSF flow file");
  }
  const std::uint32_t h = get_u32le(bytes, 4);
  const std::uint32_t w = get_u32le(bytes, 8);
  const std::uint64_t expected = 12 + static_cast<std::uint64_t>(h) * w * 8;
  if (bytes.size() != expected) throw IoError("PCSF payload size does not match its header");
  FlowField flow(static_cast<int>(h), static_cast<int>(w));
  std::size_t off = 12;
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const float dy = get_f32le(bytes, off);
      const float dx = get_f32le(bytes, off + 4);
      if (!std::isfinite(dy) || !std::isfinite(dx)) throw MalformedInputError("non-finite value in PCSF file");
      flow.dy(y, x) = dy;
      flow.dx(y, x) = dx;
      off += 8;
    }
  }
  return flow;
}

void write_flow_file(const std::filesystem::path& path, const FlowField& flow) {
  write_atomic(path, encode_flow_file(flow));
}

FlowField read_flow_file(const std::filesystem::path& path) { return decode_flow_file(read_bytes(path)); }

}  // namespace percs
