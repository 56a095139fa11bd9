#include "slateflow/codec.hpp"

#include <zlib.h>

#include <limits>

namespace slateflow {

Bytes compress_slate(const Bytes& body) {
  uLong bound = compressBound(static_cast<uLong>(body.size()));
  Bytes out;
  out.resize(bound);
  uLongf out_len = bound;
  int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &out_len,
                     reinterpret_cast<const Bytef*>(body.data()),
                     static_cast<uLong>(body.size()), Z_BEST_SPEED);
  if (rc != Z_OK) throw CorruptSlateError("deflate failed");
  out.resize(out_len);
  return out;
}

Bytes decompress_slate(const Bytes& compressed) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK)
    throw CorruptSlateError("inflate init failed");
  Bytes out;
  out.resize(compressed.size() * 4 + 64);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::size_t written = 0;
  int rc = Z_OK;
  do {
    if (written == out.size()) out.resize(out.size() * 2);
    zs.next_out = reinterpret_cast<Bytef*>(out.data() + written);
    zs.avail_out = static_cast<uInt>(out.size() - written);
    rc = inflate(&zs, Z_NO_FLUSH);
    written = out.size() - zs.avail_out;
    if (rc == Z_STREAM_END) break;
    if (rc != Z_OK) {
      inflateEnd(&zs);
      throw CorruptSlateError("corrupt compressed slate");
    }
  } while (zs.avail_in > 0 || zs.avail_out == 0);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw CorruptSlateError("truncated compressed slate");
  out.resize(written);
  return out;
}

}  // namespace slateflow
