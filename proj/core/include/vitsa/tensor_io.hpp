#pragma once

#include <iosfwd>
#include <string>

#include "vitsa/tensor.hpp"

namespace vitsa::io {

// Binary tensor container ("QT01"):
//   magic "QT01" | bits u8 | signedness u8 (0 signed, 1 unsigned)
//   rows u32 LE | cols u32 LE | step kind u8 (0 global, 1 per-channel)
//   step values as decimal text, space-separated, newline-terminated
//   payload: rows*cols codes, one signed byte each, row-major
void write_tensor(std::ostream& out, const model::QuantTensor& t);
void write_tensor_file(const std::string& path, const model::QuantTensor& t);

model::QuantTensor read_tensor(std::istream& in);
model::QuantTensor read_tensor_file(const std::string& path);

}  // namespace vitsa::io
