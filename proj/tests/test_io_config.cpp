#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "fdst/config.hpp"
#include "fdst/io.hpp"
#include "fdst/rng.hpp"

using namespace fdst;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fdst_io_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("FDST1 byte layout") {
  std::ostringstream os;
  write_fdst1(os, RealTensor({1}, 1.5));
  const std::string b = os.str();
  const unsigned char want[] = {'F', 'D', 'S', 'T', '1',     // magic
                                1, 0,                        // version
                                1, 0, 0, 0,                  // rank
                                1, 0, 0, 0, 0, 0, 0, 0,      // dims
                                0,                           // dtype
                                0, 0, 0, 0, 0, 0, 0xF8, 0x3F};  // 1.5
  REQUIRE(b.size() == sizeof(want));
  CHECK(std::memcmp(b.data(), want, sizeof(want)) == 0);
}

TEST_CASE("FDST1 round trips real and complex tensors") {
  CounterRng rng(3);
  RealTensor r({3, 5, 2});
  for (auto& x : r.storage()) x = rng.normal();
  ComplexTensor c({4, 3});
  for (auto& z : c.storage()) z = {rng.normal(), rng.normal()};
  std::stringstream ss;
  write_fdst1(ss, r);
  write_fdst1(ss, c);
  CHECK(read_fdst1_real(ss) == r);
  const auto any = read_fdst1(ss);
  REQUIRE(std::holds_alternative<ComplexTensor>(any));
  CHECK(std::get<ComplexTensor>(any) == c);

  std::stringstream again;
  write_fdst1(again, r);
  std::stringstream copy(again.str());
  std::stringstream rewritten;
  write_fdst1(rewritten, read_fdst1_real(copy));
  CHECK(rewritten.str() == again.str());
}

TEST_CASE("FDST1 reader rejects damaged streams") {
  std::ostringstream os;
  write_fdst1(os, RealTensor({2, 2}, 1.0));
  const std::string good = os.str();

  std::string magic = good;
  magic[2] = 'X';
  std::istringstream a(magic);
  CHECK_THROWS_AS(read_fdst1(a), IoError);

  std::string version = good;
  version[5] = 2;
  std::istringstream b(version);
  CHECK_THROWS_AS(read_fdst1(b), IoError);

  std::istringstream c(good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(read_fdst1(c), IoError);

  std::istringstream d(good);
  CHECK_THROWS_AS(read_fdst1_complex(d), IoError);
  CHECK_THROWS_AS(load_tensor("/nonexistent/fdst/file.fdst"), IoError);
}

TEST_CASE("datasets round trip through a directory") {
  BurgersConfig cfg;
  cfg.n = 16;
  cfg.T_model = 3;
  const auto ds = generate_dataset(cfg, 4, 8, 1);
  const auto dir = scratch_dir("dataset");
  write_dataset(dir, ds);
  CHECK(std::filesystem::exists(dir / instance_filename(3)));
  const auto back = read_dataset(dir);
  CHECK(back.T == ds.T);
  CHECK(back.n == ds.n);
  CHECK(back.train_ids == ds.train_ids);
  CHECK(back.test_ids == ds.test_ids);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.instances[i].values == ds.instances[i].values);
    CHECK(back.instances[i].gamma == ds.instances[i].gamma);
  }
  CHECK_THROWS_AS(read_dataset(scratch_dir("empty")), IoError);
}

TEST_CASE("run configuration parsing") {
  const std::string text =
      "# desk study\n"
      "grid.n = 64\n"
      "data.instances = 12\n"
      "data.test_instances = 2\n"
      "data.T = 10\n"
      "data.gamma_mode = fixed   # fixed gamma\n"
      "data.gamma_fixed = 0.4\n"
      "model.dv = 8\n"
      "model.modes_space = 8\n"
      "train.lr = 2e-3\n"
      "seed = 17\n";
  const auto c = parse_run_config(text, "desk.ini");
  CHECK(c.data.n == 64);
  CHECK(c.model.n == 64);
  CHECK(c.instances == 12);
  CHECK(c.data.gamma_mode == GammaMode::kFixed);
  CHECK(c.model.dv == 8);
  CHECK(c.train.lr == 2e-3);
  CHECK(c.seed == 17);
  CHECK(c.train.seed == 17);

  const auto round = parse_run_config(c.to_text());
  CHECK(round.to_text() == c.to_text());
  CHECK(round.model == c.model);
  CHECK(round.train == c.train);
}

TEST_CASE("run configuration errors name the key and line") {
  auto error_of = [](const std::string& text) -> std::string {
    try {
      parse_run_config(text, "bad.ini");
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(error_of("grid.n = 64\nmodel.dv = 0\n").find("bad.ini:2: key 'model.dv'") == 0);
  CHECK(error_of("grid.n = 100\n").find("key 'grid.n'") != std::string::npos);
  CHECK(error_of("model.colour = red\n").find("unknown key") != std::string::npos);
  CHECK(error_of("seed = 1\nseed = 2\n").find("bad.ini:2: key 'seed': duplicate key") == 0);
  CHECK(error_of("train.lr = fast\n").find("key 'train.lr'") != std::string::npos);
  CHECK(error_of("data.gamma_mode = sometimes\n").find("data.gamma_mode") != std::string::npos);
  CHECK(error_of("just words\n").find("bad.ini:1") == 0);
  CHECK(error_of("data.T = 6\nmodel.tau = 4\nmodel.h = 5\n").find("model.h") != std::string::npos);
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.ini"), IoError);
}
