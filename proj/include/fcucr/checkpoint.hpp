#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fcucr/distill.hpp"
#include "fcucr/seqrec.hpp"

namespace fcucr {

// Binary dump of named arrays:
//   "FCUCRCK1" | u32 kind length | kind | i32 step | u32 count |
//   count x (u32 name length | name | u64 rows | u64 cols | rows*cols f64)
// Integers and doubles are little-endian; arrays are column-major.
struct NamedArray {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> values;
};

struct ArrayDump {
  std::string kind;  // "shared", "head", "prototype", ...
  std::int32_t step = 0;
  std::vector<NamedArray> arrays;
};

std::string encode_dump(const ArrayDump& dump);
ArrayDump decode_dump(std::string_view bytes);

std::string serialize(const SharedParams& phi, int step = 0);
std::string serialize(const PrivateParams& psi, int step = 0);
std::string serialize(const EncoderSnapshot& snap);
std::string serialize_prototype(const Vector& h, int round);

SharedParams deserialize_shared(std::string_view bytes);
PrivateParams deserialize_head(std::string_view bytes);
EncoderSnapshot deserialize_snapshot(std::string_view bytes);
Vector deserialize_prototype(std::string_view bytes);

void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace fcucr
