#include "fcucr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "fcucr/errors.hpp"

namespace fcucr {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

namespace {

constexpr std::string_view kMagic = "FCUCRCK1";

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <class Params>
ArrayDump to_dump(const Params& p, std::string kind, int step) {
  ArrayDump dump{std::move(kind), step, {}};
  Params::visit(p, [&](std::string_view name, const auto& a) {
    NamedArray na{std::string(name), static_cast<std::uint64_t>(a.rows()),
                  static_cast<std::uint64_t>(a.cols()), {}};
    na.values.assign(a.data(), a.data() + a.size());
    dump.arrays.push_back(std::move(na));
  });
  return dump;
}

template <class Params>
Params from_dump(const ArrayDump& dump, std::string_view kind) {
  if (dump.kind != kind) {
    throw DataError("checkpoint kind '" + dump.kind + "', expected '" + std::string(kind) + "'");
  }
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : dump.arrays) by_name[a.name] = &a;
  Params p;
  Params::visit(p, [&](std::string_view name, auto& a) {
    auto it = by_name.find(std::string(name));
    if (it == by_name.end()) throw DataError("checkpoint missing array " + std::string(name));
    const NamedArray& src = *it->second;
    a.resize(static_cast<Eigen::Index>(src.rows), static_cast<Eigen::Index>(src.cols));
    std::copy(src.values.begin(), src.values.end(), a.data());
  });
  return p;
}

}  // namespace

std::string encode_dump(const ArrayDump& dump) {
  std::string out(kMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dump.kind.size()));
  out += dump.kind;
  put<std::int32_t>(out, dump.step);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dump.arrays.size()));
  for (const auto& a : dump.arrays) {
    if (a.values.size() != a.rows * a.cols) throw ShapeError("encode_dump: size mismatch for " + a.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put<std::uint64_t>(out, a.rows);
    put<std::uint64_t>(out, a.cols);
    out.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(double));
  }
  return out;
}

ArrayDump decode_dump(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kMagic.size()) != kMagic) throw DataError("not a checkpoint (bad magic)");
  ArrayDump dump;
  dump.kind = std::string(r.take(r.get<std::uint32_t>()));
  dump.step = r.get<std::int32_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = std::string(r.take(r.get<std::uint32_t>()));
    a.rows = r.get<std::uint64_t>();
    a.cols = r.get<std::uint64_t>();
    if (a.cols != 0 && a.rows > (bytes.size() / sizeof(double)) / a.cols) {
      throw DataError("checkpoint array " + a.name + " larger than file");
    }
    auto raw = r.take(a.rows * a.cols * sizeof(double));
    a.values.resize(a.rows * a.cols);
    std::memcpy(a.values.data(), raw.data(), raw.size());
    dump.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint");
  return dump;
}

std::string serialize(const SharedParams& phi, int step) {
  return encode_dump(to_dump(phi, "shared", step));
}
std::string serialize(const PrivateParams& psi, int step) {
  return encode_dump(to_dump(psi, "head", step));
}
std::string serialize(const EncoderSnapshot& snap) {
  return encode_dump(to_dump(snap.params(), "snapshot", snap.step()));
}
std::string serialize_prototype(const Vector& h, int round) {
  ArrayDump dump{"prototype", round, {NamedArray{"h", static_cast<std::uint64_t>(h.size()), 1, {}}}};
  dump.arrays[0].values.assign(h.data(), h.data() + h.size());
  return encode_dump(dump);
}

SharedParams deserialize_shared(std::string_view bytes) {
  return from_dump<SharedParams>(decode_dump(bytes), "shared");
}
PrivateParams deserialize_head(std::string_view bytes) {
  return from_dump<PrivateParams>(decode_dump(bytes), "head");
}
EncoderSnapshot deserialize_snapshot(std::string_view bytes) {
  ArrayDump dump = decode_dump(bytes);
  const int step = dump.step;
  return EncoderSnapshot(from_dump<SharedParams>(dump, "snapshot"), step);
}
Vector deserialize_prototype(std::string_view bytes) {
  ArrayDump dump = decode_dump(bytes);
  if (dump.kind != "prototype" || dump.arrays.size() != 1) throw DataError("not a prototype payload");
  const auto& a = dump.arrays[0];
  return Eigen::Map<const Vector>(a.values.data(), static_cast<Eigen::Index>(a.values.size()));
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace fcucr
