#pragma once
// HNET1 checkpoint format:
//   magic "HNET1" | u64 json_len | json header | raw little-endian arrays in
//   declaration order: params, norm running state, adam m, adam v.
// Headers carry the network config, step count and run seed, so a checkpoint
// is enough to resume or replay deterministically.

#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucigrid/net.hpp"
#include "hallucigrid/optim.hpp"

namespace hg {

template <typename T>
struct Checkpoint {
  NetConfig config;
  uint64_t seed = 0;
  int64_t step = 0;
  std::vector<T> params;
  std::vector<T> state;  // norm running statistics
  AdamState<T> adam;
};

namespace detail {

template <typename T>
void append_array(std::string& out, const std::vector<T>& v) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  // this codebase targets little-endian hosts; serialize raw
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
}

template <typename T>
void read_array(const std::vector<uint8_t>& bytes, size_t& off, std::vector<T>& v, size_t n,
                const std::string& origin) {
  if (off + n * sizeof(T) > bytes.size()) throw DataError(origin + ": truncated checkpoint");
  v.resize(n);
  std::memcpy(v.data(), bytes.data() + off, n * sizeof(T));
  off += n * sizeof(T);
}

}  // namespace detail

template <typename T>
void save_checkpoint(const Checkpoint<T>& ck, const std::string& path) {
  nlohmann::json header;
  header["config"] = ck.config;
  header["seed"] = ck.seed;
  header["step"] = ck.step;
  header["adam_step"] = ck.adam.step;
  header["precision"] = sizeof(T) == 4 ? "f32" : "f64";
  header["param_count"] = ck.params.size();
  header["state_count"] = ck.state.size();
  const std::string h = header.dump();

  std::string out;
  out.append("HNET1", 5);
  detail::put_u64le(out, h.size());
  out += h;
  detail::append_array(out, ck.params);
  detail::append_array(out, ck.state);
  detail::append_array(out, ck.adam.m);
  detail::append_array(out, ck.adam.v);
  detail::write_file_bytes(path, out);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() < 13 || std::memcmp(bytes.data(), "HNET1", 5) != 0)
    throw DataError(path + ": not an HNET1 checkpoint");
  const uint64_t hlen = detail::get_u64le(bytes.data() + 5);
  if (bytes.size() < 13 + hlen) throw DataError(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 13, bytes.begin() + 13 + hlen);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  const std::string want = sizeof(T) == 4 ? "f32" : "f64";
  if (header.value("precision", "") != want)
    throw DataError(path + ": precision mismatch (checkpoint is " +
                    header.value("precision", "?") + ", expected " + want + ")");

  Checkpoint<T> ck;
  ck.config = header.at("config").get<NetConfig>();
  ck.seed = header.value("seed", uint64_t(0));
  ck.step = header.value("step", int64_t(0));
  ck.adam.step = header.value("adam_step", int64_t(0));
  const size_t pn = header.at("param_count").get<size_t>();
  const size_t sn = header.at("state_count").get<size_t>();

  Network<T> net(ck.config);
  if (pn != net.param_count() || sn != net.state_count())
    throw DataError(path + ": array sizes do not match the stored config");

  size_t off = 13 + hlen;
  detail::read_array(bytes, off, ck.params, pn, path);
  detail::read_array(bytes, off, ck.state, sn, path);
  detail::read_array(bytes, off, ck.adam.m, pn, path);
  detail::read_array(bytes, off, ck.adam.v, pn, path);
  if (off != bytes.size()) throw DataError(path + ": trailing bytes");
  return ck;
}

}  // namespace hg
