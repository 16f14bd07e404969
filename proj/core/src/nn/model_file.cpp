#include "hipt/nn/model_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hipt/util/digest.hpp"

namespace hipt::nn {
namespace {

constexpr char kMagic[8] = {'H', 'I', 'P', 'T', 'M', 'O', 'D', 'L'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

  std::uint64_t get(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > limit_) throw ChecksumError("model file truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const ParamStore& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kModelFormatVersion);
  const std::string desc = params.spec.descriptor();
  put_u32(out, static_cast<std::uint32_t>(desc.size()));
  out.insert(out.end(), desc.begin(), desc.end());
  put_u64(out, params.values.size());
  for (double v : params.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  put_u64(out, fnv1a(out));
  return out;
}

ParamStore decode_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    if (bytes.size() >= sizeof(kMagic) && std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0) {
      throw ChecksumError("model file truncated");
    }
    throw ChecksumError("not a model file (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  const std::uint64_t actual = fnv1a(std::span(bytes.data(), body));
  if (stored != actual) throw ChecksumError("model file checksum mismatch");

  Reader r(bytes, body);
  r.get_string(sizeof(kMagic));
  const auto version = static_cast<std::uint32_t>(r.get(4));
  if (version != kModelFormatVersion) throw Error("unsupported model format version " + std::to_string(version));
  const auto desc_len = static_cast<std::size_t>(r.get(4));
  ParamStore p;
  p.spec = NetworkSpec::from_descriptor(r.get_string(desc_len));
  const auto count = r.get(8);
  if (count != parameter_count(p.spec)) throw ChecksumError("parameter count disagrees with network descriptor");
  p.values.resize(count);
  for (auto& v : p.values) v = std::bit_cast<double>(r.get(8));
  if (r.pos() != body) throw ChecksumError("trailing bytes before checksum");
  return p;
}

void save_model(const std::string& path, const ParamStore& params) {
  const auto bytes = encode_model(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing model file '" + path + "'");
}

ParamStore load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

std::string params_digest(const ParamStore& params) { return to_hex(fnv1a(encode_model(params))); }

}  // namespace hipt::nn
