#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pshape/container.hpp"
#include "pshape/params.hpp"

using namespace pshape;

namespace {

std::filesystem::path tmp_dir() {
  auto p = std::filesystem::temp_directory_path() / "pshape_test_container";
  std::filesystem::create_directories(p);
  return p;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("container round-trips tensors and metadata") {
  Container c;
  c.meta["kind"] = "test";
  c.meta["note"] = "fixture";
  c.arrays.push_back({"a", Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6})});
  c.arrays.push_back({"b", Tensor::vector({-0.5, 0.25})});

  auto path = tmp_dir() / "roundtrip.pshape";
  write_container(path, c);
  Container r = read_container(path, "test");
  CHECK(r.meta.at("note") == "fixture");
  CHECK(r.array("a").shape == std::vector<int64_t>{2, 3});
  CHECK(r.array("a").data == c.arrays[0].tensor.data);
  CHECK(r.array("b").data == c.arrays[1].tensor.data);
  CHECK(r.has_array("b"));
  CHECK(!r.has_array("zz"));
}

TEST_CASE("container magic is validated") {
  auto path = tmp_dir() / "bad.pshape";
  std::ofstream out(path, std::ios::binary);
  out << "NOTMAGIC________garbage";
  out.close();
  CHECK_THROWS_AS(read_container(path), Error);
}

TEST_CASE("container kind mismatch is an error") {
  Container c;
  c.meta["kind"] = "alpha";
  c.arrays.push_back({"x", Tensor::scalar(1.0)});
  auto path = tmp_dir() / "kind.pshape";
  write_container(path, c);
  CHECK_THROWS_AS(read_container(path, "beta"), Error);
}

TEST_CASE("parameter save -> load -> save is byte-identical") {
  Rng rng(7);
  ParameterSet ps;
  ps.add("w1", glorot_uniform({5, 4}, 5, 4, rng));
  ps.add("b1", Tensor::zeros({4}));
  ps.add("w2", glorot_uniform({4, 2}, 4, 2, rng));
  ps.layout = Json{{"layers", {5, 4, 2}}};

  auto p1 = tmp_dir() / "params1.pshape";
  auto p2 = tmp_dir() / "params2.pshape";
  save_parameters(p1, ps, "test-params");
  LoadedParameters lp = load_parameters(p1, "test-params");
  save_parameters(p2, lp.params, "test-params");
  CHECK(read_bytes(p1) == read_bytes(p2));
  CHECK(lp.params.at("w1").data == ps.at("w1").data);
  CHECK(lp.params.layout.at("layers") == ps.layout.at("layers"));
}

TEST_CASE("parameter names are unique") {
  ParameterSet ps;
  ps.add("w", Tensor::scalar(1.0));
  CHECK_THROWS_AS(ps.add("w", Tensor::scalar(2.0)), Error);
}
