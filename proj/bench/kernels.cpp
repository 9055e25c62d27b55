// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "dronerf/blob.hpp"
#include "dronerf/geometry.hpp"
#include "dronerf/nerf.hpp"

using namespace dronerf;

namespace {

const TriangleMesh& figure() {
  static const TriangleMesh mesh = load_mesh(std::filesystem::path(DRONERF_ASSET_DIR) / "tall_figure.mesh");
  return mesh;
}

CameraRig front_view(int size) {
  Intrinsics k;
  k.width = k.height = size;
  k.fx = k.fy = 0.86 * size;
  k.cx = k.cy = 0.5 * size;
  const Vec3 c = figure().bounds().center();
  return CameraRig::look_at(k, c + Vec3(0, -3.2, 0.4), c);
}

GrayImage test_image(int size) { return render_shaded(figure(), front_view(size)); }

const nerf::RadianceField<float>& field() {
  static const nerf::RadianceField<float> f = [] {
    nerf::FieldConfig cfg;
    cfg.grid.levels = 8;
    cfg.grid.log2_table_size = 14;
    cfg.grid.min_resolution = 16;
    cfg.grid.max_resolution = 256;
    cfg.mlp.hidden = 64;
    cfg.mlp.geo_features = 15;
    nerf::RadianceField<float> out(cfg, 3);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(-0.5f, 0.5f);
    for (auto& p : out.params()) p = u(rng);
    return out;
  }();
  return f;
}

const nerf::SceneBox& box() {
  static const nerf::SceneBox b = nerf::SceneBox::around(figure().bounds(), 0.1);
  return b;
}

void BM_log_response(benchmark::State& state) {
  const GrayImage img = test_image(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(norm_log_response(img, 4.0));
}

void BM_log_response_serial(benchmark::State& state) {
  const GrayImage img = test_image(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::norm_log_response(img, 4.0));
}

void BM_render_shaded(benchmark::State& state) {
  const CameraRig rig = front_view(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_shaded(figure(), rig));
}

void BM_render_shaded_serial(benchmark::State& state) {
  const CameraRig rig = front_view(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::render_shaded(figure(), rig));
}

void BM_render_rgb(benchmark::State& state) {
  const CameraRig rig = front_view(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_rgb(figure(), rig));
}

void BM_render_rgb_serial(benchmark::State& state) {
  const CameraRig rig = front_view(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::render_rgb(figure(), rig));
}

void BM_novel_view(benchmark::State& state) {
  const CameraRig rig = front_view(static_cast<int>(state.range(0)));
  nerf::RenderConfig cfg;
  cfg.samples = 32;
  for (auto _ : state) benchmark::DoNotOptimize(nerf::render_novel_view(field(), box(), rig, cfg));
}

void BM_novel_view_serial(benchmark::State& state) {
  const CameraRig rig = front_view(static_cast<int>(state.range(0)));
  nerf::RenderConfig cfg;
  cfg.samples = 32;
  for (auto _ : state) benchmark::DoNotOptimize(nerf::reference::render_novel_view(field(), box(), rig, cfg));
}

}  // namespace

BENCHMARK(BM_log_response)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_log_response_serial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_shaded)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_shaded_serial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_rgb)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_rgb_serial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_novel_view)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_novel_view_serial)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
