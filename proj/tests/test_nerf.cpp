#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dronerf/errors.hpp"
#include "dronerf/nerf.hpp"
#include "nerf_fixtures.hpp"

using namespace dronerf;
using namespace dronerf::nerf;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::path(DRONERF_TEST_WORK) / "nerf";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<double> random_theta(const HashGridConfig& cfg, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> theta(static_cast<size_t>(cfg.levels) * cfg.table_size() * cfg.features);
  for (auto& t : theta) t = u(rng);
  return theta;
}

// Two views of one uniform color from opposite sides of the unit scene
// cube; every pixel ray crosses the cube through two opposite faces.
std::vector<TrainingView> uniform_views(const Vec3& color) {
  Intrinsics k;
  k.width = k.height = 24;
  k.fx = k.fy = 100.0;
  k.cx = k.cy = 12.0;
  std::vector<TrainingView> views;
  for (const Vec3& eye : {Vec3(2.5, 0.2, 0.3), Vec3(-2.5, -0.1, -0.2)}) {
    TrainingView v{RgbImage(24, 24), CameraRig::look_at(k, eye, Vec3::Zero())};
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        for (int c = 0; c < 3; ++c) v.image(x, y, c) = static_cast<float>(color[c]);
      }
    }
    views.push_back(std::move(v));
  }
  return views;
}

FieldConfig small_field() {
  FieldConfig cfg;
  cfg.grid.levels = 4;
  cfg.grid.log2_table_size = 12;
  cfg.grid.min_resolution = 8;
  cfg.grid.max_resolution = 64;
  cfg.mlp.hidden = 32;
  return cfg;
}

}  // namespace

TEST_CASE("level resolutions") {
  HashGridConfig cfg;
  cfg.levels = 2;
  cfg.min_resolution = 16;
  cfg.max_resolution = 512;
  CHECK(level_resolutions(cfg) == std::vector<int>{16, 512});
  cfg.levels = 4;
  cfg.max_resolution = 128;
  CHECK(level_resolutions(cfg) == std::vector<int>{16, 32, 64, 128});
  for (int levels = 2; levels <= 16; ++levels) {
    for (auto [lo, hi] : {std::pair{2, 64}, {16, 256}, {16, 2048}}) {
      cfg.levels = levels;
      cfg.min_resolution = lo;
      cfg.max_resolution = hi;
      bool valid = true;
      try {
        cfg.validate();
      } catch (const ConfigError&) {
        valid = false;
      }
      if (!valid) continue;
      const auto r = level_resolutions(cfg);
      CHECK(r.front() == lo);
      CHECK(r.back() == hi);
      for (size_t l = 1; l < r.size(); ++l) CHECK(r[l] > r[l - 1]);
    }
  }
  cfg.levels = 16;
  cfg.min_resolution = 2;
  cfg.max_resolution = 64;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.levels = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("hash index") {
  HashGridConfig cfg;  // 16..256, T = 2^14
  const auto res = level_resolutions(cfg);
  const HashGrid grid(cfg);
  CHECK(grid.dense(0));
  CHECK_FALSE(grid.dense(cfg.levels - 1));
  CHECK(hash_index({0, 0, 0}, 0, cfg) == 0);
  // Dense levels index linearly and without collisions.
  const uint32_t side = res[0] + 1;
  CHECK(hash_index({1, 0, 0}, 0, cfg) == 1);
  CHECK(hash_index({0, 1, 0}, 0, cfg) == side);
  CHECK(hash_index({0, 0, 1}, 0, cfg) == side * side);
  CHECK(hash_index({side - 1, side - 1, side - 1}, 0, cfg) == side * side * side - 1);

  const int top = cfg.levels - 1;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<uint32_t> coord(0, res[top]);
  std::vector<int> load(cfg.table_size(), 0);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const uint32_t h = hash_index({coord(rng), coord(rng), coord(rng)}, top, cfg);
    REQUIRE(h < cfg.table_size());
    ++load[h];
  }
  const double mean = static_cast<double>(n) / cfg.table_size();
  CHECK(*std::max_element(load.begin(), load.end()) < 3.0 * mean);
  CHECK(grid.index({5, 6, 7}, top) == hash_index({5, 6, 7}, top, cfg));
  CHECK_THROWS(hash_index({0, 0, 0}, cfg.levels, cfg));
}

TEST_CASE("encoding") {
  HashGridConfig cfg;
  const auto theta = random_theta(cfg, 3);
  const std::vector<double> aux = {0.1, -0.2, 0.3};
  const HashGrid grid(cfg);

  SUBCASE("length") {
    CHECK(encode<double>(Vec3(0.3, 0.4, 0.5), theta, cfg, aux).size() == static_cast<size_t>(cfg.levels * cfg.features + 3));
    CHECK(encode<double>(Vec3(0.3, 0.4, 0.5), theta, cfg, aux)[cfg.encoded_dims() + 1] == -0.2);
  }
  SUBCASE("voxel corner and voxel center") {
    const Vec3 corner(3.0 / 16, 5.0 / 16, 7.0 / 16);
    const auto y = encode<double>(corner, theta, cfg, aux);
    const uint32_t slot = grid.index({3, 5, 7}, 0);
    for (int f = 0; f < cfg.features; ++f) CHECK(y[f] == theta[slot * cfg.features + f]);

    const Vec3 center(3.5 / 16, 5.5 / 16, 7.5 / 16);
    const auto yc = encode<double>(center, theta, cfg, aux);
    for (int f = 0; f < cfg.features; ++f) {
      double mean = 0.0;
      for (uint32_t dz = 0; dz < 2; ++dz) {
        for (uint32_t dy = 0; dy < 2; ++dy) {
          for (uint32_t dx = 0; dx < 2; ++dx) mean += theta[grid.index({3 + dx, 5 + dy, 7 + dz}, 0) * cfg.features + f];
        }
      }
      CHECK(yc[f] == doctest::Approx(mean / 8.0).epsilon(1e-12));
    }
  }
  SUBCASE("continuous across voxel boundaries") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> cell(1, 255);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double delta = 1e-6;
    for (int trial = 0; trial < 200; ++trial) {
      Vec3 x(u(rng), u(rng), u(rng));
      x[trial % 3] = cell(rng) / 256.0 - 0.5 * delta;  // straddles a finest-level boundary
      const auto a = encode<double>(x, theta, cfg, aux);
      const auto b = encode<double>(x + Vec3::Constant(delta), theta, cfg, aux);
      double worst = 0.0;
      for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
      CHECK(worst < 1e-3);
    }
  }
  SUBCASE("dense levels interpolate stored grids exactly") {
    HashGridConfig dense;
    dense.levels = 2;
    dense.min_resolution = 4;
    dense.max_resolution = 8;
    dense.features = 1;
    const HashGrid g(dense);
    REQUIRE(g.dense(0));
    REQUIRE(g.dense(1));
    std::vector<double> th(2 * static_cast<size_t>(dense.table_size()), 0.0);
    auto f = [](double x, double y, double z) { return 0.3 + 1.5 * x - 2.0 * y + 0.7 * z; };
    for (int l = 0; l < 2; ++l) {
      const int n = g.resolution(l);
      for (int k = 0; k <= n; ++k) {
        for (int j = 0; j <= n; ++j) {
          for (int i = 0; i <= n; ++i) {
            th[l * dense.table_size() + g.index({uint32_t(i), uint32_t(j), uint32_t(k)}, l)] =
                f(double(i) / n, double(j) / n, double(k) / n);
          }
        }
      }
    }
    const std::vector<double> none(3, 0.0);
    CHECK(encode<double>(Vec3(0.25, 0.5, 0.75), th, dense, none)[0] == f(0.25, 0.5, 0.75));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      const Vec3 x(u(rng), u(rng), u(rng));
      const auto y = encode<double>(x, th, dense, none);
      CHECK(y[0] == doctest::Approx(f(x.x(), x.y(), x.z())).epsilon(1e-12));
      CHECK(y[1] == doctest::Approx(f(x.x(), x.y(), x.z())).epsilon(1e-12));
    }
  }
  SUBCASE("outside the unit cube") {
    bool clamped = false;
    const auto y = encode<double>(Vec3(1.2, 0.5, -0.1), theta, cfg, aux, OutOfCube::kClamp, &clamped);
    CHECK(clamped);
    CHECK(y == encode<double>(Vec3(1.0, 0.5, 0.0), theta, cfg, aux));
    CHECK_THROWS(encode<double>(Vec3(1.2, 0.5, -0.1), theta, cfg, aux, OutOfCube::kThrow));
    encode<double>(Vec3(0.2, 0.5, 0.1), theta, cfg, aux, OutOfCube::kThrow, &clamped);
    CHECK_FALSE(clamped);
  }
}

TEST_CASE("field outputs at initialization") {
  const RadianceField<float> field(small_field(), 17);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 x(u(rng), u(rng), u(rng));
    const Vec3 d = Vec3(g(rng), g(rng), g(rng)).normalized();
    const auto s = field.eval(x, d);
    CHECK(s.density >= 0.0f);
    for (float c : s.color) CHECK(c == 0.5f);
    if (i % 100 == 0) CHECK(field.eval(x, -d).density == s.density);
  }
}

TEST_CASE("volume rendering") {
  const Ray ray{Vec3::Zero(), Vec3::UnitX()};
  const Vec3 bg(0.1, 0.2, 0.3);
  SUBCASE("empty space shows the background") {
    const auto r = volume_render(ray, 0.0, 1.0, 64, [](const Vec3&, const Vec3&) { return std::pair{Vec3(1, 1, 1), 0.0}; }, bg);
    CHECK(r.opacity == 0.0);
    CHECK((r.color - bg).norm() == 0.0);
  }
  SUBCASE("a saturated sample shows its own color") {
    const std::vector<double> sigma = {0.0, 1e9, 0.0};
    const std::vector<Vec3> color = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    const std::vector<double> delta = {0.1, 0.1, 0.1};
    const auto r = composite(sigma, color, delta, bg);
    CHECK(r.opacity == doctest::Approx(1.0));
    CHECK((r.color - Vec3(0, 1, 0)).norm() < 1e-9);
  }
  SUBCASE("constant density matches the closed form") {
    const Vec3 c(0.7, 0.4, 0.1);
    const auto r = volume_render(ray, 0.0, 1.0, 256, [&](const Vec3&, const Vec3&) { return std::pair{c, 2.0}; }, bg);
    const double expect = 1.0 - std::exp(-2.0);
    CHECK(std::abs(r.opacity - expect) < 1e-3);
    CHECK((r.color - (expect * c + (1.0 - expect) * bg)).norm() < 2e-3);
    std::mt19937_64 rng(3);
    const auto jittered =
        volume_render(ray, 0.0, 1.0, 256, [&](const Vec3&, const Vec3&) { return std::pair{c, 2.0}; }, bg, &rng);
    CHECK(std::abs(jittered.opacity - expect) < 1e-2);
  }
  SUBCASE("weights stay in [0, 1] for random rays") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    // Random Gaussian blobs of density.
    std::vector<std::pair<Vec3, double>> blobs;
    for (int i = 0; i < 6; ++i) blobs.push_back({Vec3(u(rng), u(rng), u(rng)), 50.0 * u(rng)});
    const FieldFn field = [&](const Vec3& p, const Vec3&) {
      double s = 0.0;
      for (const auto& [c, a] : blobs) s += a * std::exp(-(p - c).squaredNorm() / 0.02);
      return std::pair{Vec3(0.5, 0.5, 0.5), s};
    };
    int bad = 0;
    for (int i = 0; i < 100000; ++i) {
      const Ray r{Vec3(u(rng), u(rng), u(rng)), Vec3(g(rng), g(rng), g(rng)).normalized()};
      const auto out = volume_render(r, 0.0, 0.2 + u(rng), 8, field, bg, &rng);
      double sum = 0.0;
      for (double w : out.weights) {
        bad += w < 0.0;
        sum += w;
      }
      bad += sum < 0.0 || sum > 1.0 + 1e-12;
    }
    CHECK(bad == 0);
  }
  SUBCASE("sample depths") {
    std::vector<double> t, d;
    sample_depths(1.0, 2.0, 4, nullptr, t, d);
    CHECK(t == std::vector<double>{1.125, 1.375, 1.625, 1.875});
    CHECK(d == std::vector<double>{0.25, 0.25, 0.25, 0.125});
    std::mt19937_64 rng(1);
    sample_depths(1.0, 2.0, 4, &rng, t, d);
    for (int i = 0; i < 4; ++i) {
      CHECK(t[i] >= 1.0 + 0.25 * i);
      CHECK(t[i] < 1.0 + 0.25 * (i + 1));
    }
  }
}

TEST_CASE("analytic gradient matches central differences") {
  auto inst = testsupport::tiny_instance();
  REQUIRE(inst.rays.size() > 40);
  const auto r = testsupport::gradient_check(inst);
  CHECK(r.checked == 9 * 12);
  CHECK(r.relative_error < 1e-3);
}

TEST_CASE("batched loss matches the serial per-ray loss") {
  const auto inst = testsupport::tiny_instance();
  const double batched = testsupport::tiny_loss(inst);
  const double serial = nerf::reference::photometric_loss<double>(inst.field, inst.rays, inst.ids, inst.samples,
                                                                  inst.background);
  CHECK(batched == doctest::Approx(serial).epsilon(1e-12));

  const auto views = uniform_views(Vec3(0.3, 0.6, 0.2));
  RadianceField<float> field(small_field(), 8);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  for (auto& p : field.params()) p = u(rng);
  const SceneBox box{Vec3::Zero(), 1.0};
  const auto rays = collect_rays<float>(views, box);
  std::vector<uint32_t> ids;
  for (uint32_t i = 0; i < rays.size(); i += 7) ids.push_back(i);
  std::vector<float> grad(field.layout().total, 0.0f);
  const double f_batched = loss_and_gradient<float>(field, rays, ids, 24, Vec3::Constant(0.1), {}, grad, 64);
  const double f_serial = nerf::reference::photometric_loss<float>(field, rays, ids, 24, Vec3::Constant(0.1));
  CHECK(f_batched == doctest::Approx(f_serial).epsilon(1e-4));
}

TEST_CASE("training") {
  SUBCASE("uniform color is fitted") {
    const auto views = uniform_views(Vec3(0.8, 0.3, 0.2));
    RadianceField<float> field(small_field(), 2);
    TrainConfig tc;
    tc.iterations = 500;
    tc.batch_rays = 128;
    tc.samples = 24;
    const auto r = train(field, views, SceneBox{Vec3::Zero(), 1.0}, tc, 4);
    REQUIRE(r.loss_history.size() == 500);
    CHECK(r.loss_history.back() < 1e-3);
  }
  SUBCASE("initial loss is the constant-gray error") {
    std::vector<TrainingView> views = uniform_views(Vec3(0.9, 0.1, 0.6));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : views) {
      for (auto& p : v.image.data()) p = static_cast<float>(u(rng));
    }
    const SceneBox box{Vec3::Zero(), 1.0};
    const RadianceField<float> field(small_field(), 3);
    const auto rays = collect_rays<float>(views, box);
    double mse = 0.0;
    for (const auto& t : rays.target) {
      for (float c : t) mse += (c - 0.5) * (c - 0.5);
    }
    mse /= 3.0 * rays.size();
    std::vector<uint32_t> ids(rays.size());
    for (uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    std::vector<float> grad(field.layout().total, 0.0f);
    const double full = loss_and_gradient<float>(field, rays, ids, 16, Vec3::Constant(0.5), {}, grad, 64);
    CHECK(full == doctest::Approx(mse).epsilon(1e-5));

    RadianceField<float> trained(small_field(), 3);
    TrainConfig tc;
    tc.iterations = 1;
    tc.batch_rays = 1024;
    tc.samples = 16;
    tc.background = Vec3::Constant(0.5);
    const auto r = train(trained, views, box, tc, 1);
    // Batch of 3 * 1024 squared errors: standard error about 0.0013.
    CHECK(std::abs(r.loss_history[0] - mse) < 0.006);
  }
  SUBCASE("deterministic for a seed") {
    const auto views = uniform_views(Vec3(0.2, 0.5, 0.9));
    TrainConfig tc;
    tc.iterations = 20;
    tc.batch_rays = 64;
    tc.samples = 16;
    RadianceField<float> a(small_field(), 9), b(small_field(), 9), c(small_field(), 9);
    const auto ra = train(a, views, SceneBox{}, tc, 21);
    const auto rb = train(b, views, SceneBox{}, tc, 21);
    const auto rc = train(c, views, SceneBox{}, tc, 22);
    CHECK(ra.loss_history == rb.loss_history);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    CHECK(ra.loss_history != rc.loss_history);
  }
  SUBCASE("warmup scales the first Adam step") {
    // The first bias-corrected Adam step moves every parameter with a
    // nonzero gradient by the learning rate times the ramp factor.
    const auto views = uniform_views(Vec3(0.2, 0.5, 0.9));
    for (int warmup : {0, 1, 10}) {
      RadianceField<float> f(small_field(), 5);
      const std::vector<float> before(f.params().begin(), f.params().end());
      TrainConfig tc;
      tc.iterations = 1;
      tc.batch_rays = 64;
      tc.samples = 16;
      tc.warmup_iterations = warmup;
      train(f, views, SceneBox{}, tc, 3);
      double largest = 0.0;
      for (size_t i = 0; i < before.size(); ++i) largest = std::max(largest, std::abs(double(f.params()[i]) - before[i]));
      CHECK(largest == doctest::Approx(tc.learning_rate / std::max(1, warmup)).epsilon(1e-3));
    }
  }
  SUBCASE("input checks") {
    const auto views = uniform_views(Vec3(0.2, 0.5, 0.9));
    RadianceField<float> f(small_field(), 1);
    TrainConfig negative;
    negative.warmup_iterations = -1;
    CHECK_THROWS_AS(train(f, views, SceneBox{}, negative, 1), ConfigError);
    CHECK_THROWS(train(f, std::span(views).first(1), SceneBox{}, TrainConfig{}, 1));
    TrainConfig bad;
    bad.batch_rays = 0;
    CHECK_THROWS_AS(train(f, views, SceneBox{}, bad, 1), ConfigError);
  }
}

TEST_CASE("novel view rendering") {
  Intrinsics k;
  k.width = k.height = 20;
  k.fx = k.fy = 25.0;
  k.cx = k.cy = 10.0;
  const auto rig = CameraRig::look_at(k, Vec3(1.8, 0.6, 0.4), Vec3::Zero());
  const SceneBox box{Vec3::Zero(), 1.0};
  RenderConfig rc;
  rc.samples = 32;
  rc.background = Vec3::Constant(0.5);
  SUBCASE("untrained field renders flat gray") {
    const RadianceField<float> field(small_field(), 5);
    const auto img = render_novel_view(field, box, rig, rc);
    for (float v : img.data()) CHECK(v == doctest::Approx(0.5f).epsilon(1e-6));
  }
  SUBCASE("batched and per-sample renderers agree") {
    RadianceField<float> field(small_field(), 5);
    const auto views = uniform_views(Vec3(0.9, 0.2, 0.4));
    TrainConfig tc;
    tc.iterations = 60;
    tc.batch_rays = 128;
    tc.samples = 16;
    train(field, views, box, tc, 2);
    rc.background = Vec3(0.1, 0.0, 0.2);
    const auto fast = render_novel_view(field, box, rig, rc);
    const auto slow = nerf::reference::render_novel_view(field, box, rig, rc);
    double worst = 0.0;
    for (size_t i = 0; i < fast.data().size(); ++i) worst = std::max(worst, double(std::abs(fast.data()[i] - slow.data()[i])));
    CHECK(worst < 1e-4);
    const auto again = render_novel_view(field, box, rig, rc);
    CHECK(std::equal(fast.data().begin(), fast.data().end(), again.data().begin()));
  }
}

TEST_CASE("checkpoint round trip") {
  const RadianceField<float> field(small_field(), 31);
  Checkpoint ck{small_field(), SceneBox{Vec3(0.1, -0.2, 0.9), 2.5}, {{"scene", "cube"}, {"iterations", 7}},
                std::vector<float>(field.params().begin(), field.params().end())};
  const auto path = scratch("field.ckpt");
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  CHECK(back.params == ck.params);
  CHECK(back.box.center == ck.box.center);
  CHECK(back.box.size == ck.box.size);
  CHECK(back.extra == ck.extra);
  CHECK(nlohmann::json(back.field) == nlohmann::json(ck.field));

  const auto junk = scratch("junk.ckpt");
  std::ofstream(junk) << "not a checkpoint at all";
  CHECK_THROWS(load_checkpoint(junk));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
  CHECK_THROWS(load_checkpoint(path));
}
