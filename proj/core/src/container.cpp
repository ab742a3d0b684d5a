#include "pshape/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "container payload assumes a little-endian host");

namespace pshape {

const Tensor& Container::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a.tensor;
  fail("container has no array named \"", name, "\"");
}

bool Container::has_array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  Json header;
  header["meta"] = c.meta;
  Json arr = Json::array();
  uint64_t offset = 0;
  for (const auto& a : c.arrays) {
    Json e;
    e["name"] = a.name;
    e["shape"] = a.tensor.shape;
    e["offset"] = offset;
    arr.push_back(std::move(e));
    offset += static_cast<uint64_t>(a.tensor.size()) * sizeof(double);
  }
  header["arrays"] = std::move(arr);
  const std::string hbytes = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(out.good(), "cannot open for writing: ", path.string());
  out.write(kContainerMagic, sizeof(kContainerMagic));
  uint64_t hlen = hbytes.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hbytes.data(), static_cast<std::streamsize>(hbytes.size()));
  for (const auto& a : c.arrays)
    out.write(reinterpret_cast<const char*>(a.tensor.data.data()),
              static_cast<std::streamsize>(a.tensor.data.size() * sizeof(double)));
  out.flush();
  check(out.good(), "short write to ", path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open container: ", path.string());

  char magic[8];
  in.read(magic, sizeof(magic));
  check(in.gcount() == sizeof(magic) && std::memcmp(magic, kContainerMagic, 8) == 0,
        path.string(), ": not a PSHAPE01 container");

  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  check(in.good() && hlen > 0 && hlen < (1ULL << 31), path.string(), ": bad header length");

  std::string hbytes(hlen, '\0');
  in.read(hbytes.data(), static_cast<std::streamsize>(hlen));
  check(in.good(), path.string(), ": truncated header");

  Json header;
  try {
    header = Json::parse(hbytes);
  } catch (const nlohmann::json::exception& e) {
    fail(path.string(), ": corrupt header JSON: ", e.what());
  }

  Container c;
  c.meta = header.value("meta", Json::object());
  uint64_t expect_offset = 0;
  for (const auto& e : header.at("arrays")) {
    NamedArray a;
    a.name = e.at("name").get<std::string>();
    std::vector<int64_t> shape = e.at("shape").get<std::vector<int64_t>>();
    uint64_t offset = e.at("offset").get<uint64_t>();
    check(offset == expect_offset, path.string(), ": array \"", a.name,
          "\" has offset ", offset, ", expected ", expect_offset);
    int64_t n = shape_size(shape);
    std::vector<double> data(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * 8));
    check(in.gcount() == static_cast<std::streamsize>(n * 8), path.string(),
          ": truncated payload at array \"", a.name, "\"");
    a.tensor = Tensor::from(std::move(shape), std::move(data));
    expect_offset += static_cast<uint64_t>(n) * sizeof(double);
    c.arrays.push_back(std::move(a));
  }
  return c;
}

Container read_container(const std::filesystem::path& path, const std::string& expected_kind) {
  Container c = read_container(path);
  std::string kind = c.meta.value("kind", std::string{});
  check(kind == expected_kind, path.string(), ": expected kind \"", expected_kind,
        "\", found \"", kind, "\"");
  return c;
}

}  // namespace pshape
