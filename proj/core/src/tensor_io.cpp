#include "vitsa/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace vitsa::io {

namespace {

constexpr char kMagic[4] = {'Q', 'T', '0', '1'};

void put_u32_le(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32_le(std::istream& in, const char* field) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw IoError(std::string("tensor file truncated in field '") + field +
                  "'");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string format_step(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

}  // namespace

void write_tensor(std::ostream& out, const model::QuantTensor& t) {
  t.validate();
  out.write(kMagic, 4);
  out.put(static_cast<char>(t.bits));
  out.put(t.sign == quant::Sign::Unsigned ? 1 : 0);
  put_u32_le(out, static_cast<std::uint32_t>(t.codes.rows));
  put_u32_le(out, static_cast<std::uint32_t>(t.codes.cols));
  out.put(t.per_channel() ? 1 : 0);
  if (t.per_channel()) {
    for (std::size_t i = 0; i < t.step_channels.size(); ++i) {
      if (i) out.put(' ');
      const std::string s = format_step(t.step_channels[i]);
      out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
  } else {
    const std::string s = format_step(t.step_global);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  out.put('\n');
  for (std::int64_t c : t.codes.v) out.put(static_cast<char>(c));
  if (!out) throw IoError("tensor write failed");
}

void write_tensor_file(const std::string& path, const model::QuantTensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  write_tensor(f, t);
}

model::QuantTensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("tensor file field 'magic': expected QT01");
  model::QuantTensor t;
  const int bits = in.get();
  const int sign = in.get();
  if (bits == EOF || sign == EOF)
    throw IoError("tensor file truncated in field 'bits/signedness'");
  if (bits < 2 || bits > 8)
    throw IoError("tensor file field 'bits': out of range [2, 8]");
  if (sign != 0 && sign != 1)
    throw IoError("tensor file field 'signedness': expected 0 or 1");
  t.bits = bits;
  t.sign = sign ? quant::Sign::Unsigned : quant::Sign::Signed;
  const std::uint32_t rows = get_u32_le(in, "rows");
  const std::uint32_t cols = get_u32_le(in, "cols");
  if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24))
    throw IoError("tensor file field 'rows/cols': implausible shape");
  const int kind = in.get();
  if (kind != 0 && kind != 1)
    throw IoError("tensor file field 'step kind': expected 0 or 1");
  std::string line;
  if (!std::getline(in, line))
    throw IoError("tensor file truncated in field 'step values'");
  std::istringstream ls(line);
  if (kind == 0) {
    if (!(ls >> t.step_global) || !(t.step_global > 0))
      throw IoError("tensor file field 'step values': bad global step");
  } else {
    double v;
    while (ls >> v) {
      if (!(v > 0))
        throw IoError("tensor file field 'step values': bad channel step");
      t.step_channels.push_back(v);
    }
    if (t.step_channels.size() != cols)
      throw IoError("tensor file field 'step values': channel count mismatch");
  }
  t.codes = model::IntMat(static_cast<int>(rows), static_cast<int>(cols));
  std::vector<char> buf(t.codes.v.size());
  if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
    throw IoError("tensor file truncated in field 'payload'");
  for (std::size_t i = 0; i < buf.size(); ++i)
    t.codes.v[i] = static_cast<std::int8_t>(buf[i]);
  try {
    t.validate();
  } catch (const Error& e) {
    throw IoError(std::string("tensor file field 'payload': ") + e.what());
  }
  return t;
}

model::QuantTensor read_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return read_tensor(f);
}

}  // namespace vitsa::io
