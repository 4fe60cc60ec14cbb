#ifndef JSAFE_NN_CHECKPOINT_HPP
#define JSAFE_NN_CHECKPOINT_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "jsafe/nn/adam.hpp"
#include "jsafe/nn/tensor.hpp"

namespace jsafe::nn {

inline constexpr std::array<char, 8> kCheckpointMagic = {'J', 'S', 'A', 'F', 'E', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;
  bool operator==(const NamedTensor&) const = default;
};

struct OptimizerSnapshot {
  std::int64_t step = 0;
  double learning_rate = 0.0, beta1 = 0.0, beta2 = 0.0, epsilon = 0.0;
  std::vector<NamedTensor> first_moment;
  std::vector<NamedTensor> second_moment;
  bool operator==(const OptimizerSnapshot&) const = default;
};

/// File layout, all integers and floats little-endian:
///   magic[8] "JSAFECKP", u32 version, u32 header bytes, header JSON,
///   tensor list (parameters), u8 has_optimizer, then optionally
///   i64 step, f64 lr, f64 beta1, f64 beta2, f64 eps and two tensor lists.
/// A tensor list is u32 count followed by (u32 name bytes, name, u32 rows,
/// u32 cols, rows*cols f32) per tensor.
struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> parameters;
  std::optional<OptimizerSnapshot> optimizer;
};

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>(bits & 0xFFu));
    if constexpr (sizeof(U) > 1) bits >>= 8;
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline void put_tensors(std::string& out, const std::vector<NamedTensor>& ts) {
  put_le(out, static_cast<std::uint32_t>(ts.size()));
  for (const NamedTensor& t : ts) {
    put_le(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_le(out, t.rows);
    put_le(out, t.cols);
    for (float f : t.values) put_le(out, f);
  }
}

inline std::vector<NamedTensor> get_tensors(Reader& in) {
  const auto count = in.get<std::uint32_t>();
  std::vector<NamedTensor> ts(count);
  for (NamedTensor& t : ts) {
    t.name = in.take(in.get<std::uint32_t>());
    t.rows = in.get<std::uint32_t>();
    t.cols = in.get<std::uint32_t>();
    t.values.resize(static_cast<std::size_t>(t.rows) * t.cols);
    for (float& f : t.values) f = in.get<float>();
  }
  return ts;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le(out, kCheckpointVersion);
  const std::string header = ck.header.dump();
  detail::put_le(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  detail::put_tensors(out, ck.parameters);
  detail::put_le(out, static_cast<std::uint8_t>(ck.optimizer ? 1 : 0));
  if (ck.optimizer) {
    const OptimizerSnapshot& o = *ck.optimizer;
    detail::put_le(out, o.step);
    detail::put_le(out, o.learning_rate);
    detail::put_le(out, o.beta1);
    detail::put_le(out, o.beta2);
    detail::put_le(out, o.epsilon);
    detail::put_tensors(out, o.first_moment);
    detail::put_tensors(out, o.second_moment);
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  detail::Reader in(bytes);
  const std::string magic = in.take(kCheckpointMagic.size());
  if (std::memcmp(magic.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0)
    throw CheckpointError("not a checkpoint file");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(in.take(in.get<std::uint32_t>()));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  ck.parameters = detail::get_tensors(in);
  if (in.get<std::uint8_t>() != 0) {
    OptimizerSnapshot o;
    o.step = in.get<std::int64_t>();
    o.learning_rate = in.get<double>();
    o.beta1 = in.get<double>();
    o.beta2 = in.get<double>();
    o.epsilon = in.get<double>();
    o.first_moment = detail::get_tensors(in);
    o.second_moment = detail::get_tensors(in);
    ck.optimizer = std::move(o);
  }
  if (!in.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(ck);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

template <class S>
NamedTensor to_named(const std::string& name, const Tensor<S>& t) {
  NamedTensor n;
  n.name = name;
  n.rows = static_cast<std::uint32_t>(t.rows());
  n.cols = static_cast<std::uint32_t>(t.cols());
  n.values.resize(static_cast<std::size_t>(t.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) n.values[static_cast<std::size_t>(i)] = static_cast<float>(t.data()[i]);
  return n;
}

template <class S>
std::vector<NamedTensor> export_parameters(const ParamList<S>& params) {
  std::vector<NamedTensor> out;
  for (const Param<S>* p : params) out.push_back(to_named(p->name, p->value));
  return out;
}

template <class S>
void assign_named(Tensor<S>& dst, const std::string& expected_name, const NamedTensor& src) {
  if (src.name != expected_name)
    throw CheckpointError("checkpoint tensor '" + src.name + "' where '" + expected_name + "' was expected");
  if (src.rows != dst.rows() || src.cols != dst.cols())
    throw CheckpointError("checkpoint tensor '" + src.name + "' has shape " + std::to_string(src.rows) + "x" +
                          std::to_string(src.cols) + ", expected " + std::to_string(dst.rows()) + "x" +
                          std::to_string(dst.cols()));
  for (Eigen::Index i = 0; i < dst.size(); ++i) dst.data()[i] = static_cast<S>(src.values[static_cast<std::size_t>(i)]);
}

template <class S>
void import_parameters(const ParamList<S>& params, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != params.size())
    throw CheckpointError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                          std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) assign_named(params[i]->value, params[i]->name, tensors[i]);
}

template <class S>
OptimizerSnapshot export_optimizer(const AdamState<S>& st, const ParamList<S>& params) {
  OptimizerSnapshot o;
  o.step = st.step;
  o.learning_rate = st.learning_rate;
  o.beta1 = st.beta1;
  o.beta2 = st.beta2;
  o.epsilon = st.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    o.first_moment.push_back(to_named(params[i]->name, st.first_moment[i]));
    o.second_moment.push_back(to_named(params[i]->name, st.second_moment[i]));
  }
  return o;
}

template <class S>
void import_optimizer(AdamState<S>& st, const ParamList<S>& params, const OptimizerSnapshot& o) {
  st.reset(params);
  if (o.first_moment.size() != params.size() || o.second_moment.size() != params.size())
    throw CheckpointError("optimizer state does not match the model");
  st.step = o.step;
  st.learning_rate = o.learning_rate;
  st.beta1 = o.beta1;
  st.beta2 = o.beta2;
  st.epsilon = o.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    assign_named(st.first_moment[i], params[i]->name, o.first_moment[i]);
    assign_named(st.second_moment[i], params[i]->name, o.second_moment[i]);
  }
}

}  // namespace jsafe::nn

#endif  // JSAFE_NN_CHECKPOINT_HPP
