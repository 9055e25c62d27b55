#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dronerf/geometry.hpp"
#include "dronerf/metrics.hpp"
#include "support.hpp"

using namespace dronerf;
using namespace dronerf::metrics;

namespace {

RgbImage constant(int w, int h, float v) { return RgbImage(w, h, v); }

RgbImage noise_image(int w, int h, uint64_t seed) {
  RgbImage img(w, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

// The bundled structured test image: the tall figure from the front.
RgbImage structured_image() {
  static const RgbImage img = [] {
    const auto mesh = load_mesh(testsupport::asset("tall_figure.mesh"));
    const Aabb b = mesh.bounds();
    const Vec3 c = b.center();
    return render_rgb(mesh, CameraRig::look_at(Intrinsics{}, c + Vec3(0, -3.2, 0.4), c));
  }();
  return img;
}

// Direct 2D Gaussian-window SSIM, one window position at a time.
double oracle_ssim(const RgbImage& a, const RgbImage& b) {
  const int win = 11, r = 5;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> w(win * win);
  double norm = 0.0;
  for (int j = 0; j < win; ++j) {
    for (int i = 0; i < win; ++i) {
      w[j * win + i] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * sigma * sigma));
      norm += w[j * win + i];
    }
  }
  for (double& x : w) x /= norm;
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y0 = 0; y0 + win <= a.height(); ++y0) {
      for (int x0 = 0; x0 + win <= a.width(); ++x0) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int j = 0; j < win; ++j) {
          for (int i = 0; i < win; ++i) {
            const double wt = w[j * win + i];
            const double pa = a(x0 + i, y0 + j, c), pb = b(x0 + i, y0 + j, c);
            ma += wt * pa;
            mb += wt * pb;
            saa += wt * pa * pa;
            sbb += wt * pb * pb;
            sab += wt * pa * pb;
          }
        }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return total / count;
}

// Oracle value for the structured image against its negative.
constexpr double kNegativeSsim = -0.045935396915354122;

}  // namespace

TEST_CASE("PSNR") {
  SUBCASE("constant 0 against constant 0.5") {
    const auto r = psnr(constant(16, 16, 0.0f), constant(16, 16, 0.5f));
    CHECK(std::abs(r.db - 6.0206) < 1e-3);
    CHECK_FALSE(r.identical);
  }
  SUBCASE("identical images hit the cap") {
    const auto a = noise_image(20, 10, 1);
    const auto r = psnr(a, a);
    CHECK(r.identical);
    CHECK(r.db == kPsnrCap);
  }
  SUBCASE("symmetric") {
    const auto a = noise_image(20, 10, 1), b = noise_image(20, 10, 2);
    CHECK(psnr(a, b).db == psnr(b, a).db);
  }
  SUBCASE("strictly decreasing in noise amplitude") {
    const auto a = structured_image();
    std::mt19937_64 rng(5);
    std::normal_distribution<float> g;
    std::vector<float> n(a.data().size());
    for (auto& v : n) v = g(rng);
    double prev = kPsnrCap + 1.0;
    for (float amp : {0.01f, 0.02f, 0.05f, 0.1f, 0.2f}) {
      auto b = a;
      for (size_t i = 0; i < n.size(); ++i) b.data()[i] += amp * n[i];
      const double p = psnr(a, b).db;
      CHECK(p < prev);
      prev = p;
    }
  }
  SUBCASE("size mismatch") { CHECK_THROWS(psnr(constant(4, 4, 0), constant(4, 5, 0))); }
}

TEST_CASE("SSIM") {
  SUBCASE("identical images score exactly 1") {
    for (uint64_t s : {1, 2, 3}) {
      const auto a = noise_image(32, 24, s);
      CHECK(ssim(a, a) == 1.0);
    }
    CHECK(ssim(structured_image(), structured_image()) == 1.0);
    CHECK(ssim(constant(16, 16, 0.3f), constant(16, 16, 0.3f)) == 1.0);
  }
  SUBCASE("matches the direct windowed oracle") {
    const auto a = noise_image(30, 26, 4);
    auto b = a;
    for (size_t i = 0; i < b.data().size(); ++i) b.data()[i] = 0.7f * b.data()[i] + 0.1f * float(i % 7) / 7.0f;
    CHECK(ssim(a, b) == doctest::Approx(oracle_ssim(a, b)).epsilon(1e-9));
  }
  SUBCASE("photographic negative scores below zero") {
    const auto a = structured_image();
    auto neg = a;
    for (auto& v : neg.data()) v = 1.0f - v;
    const double s = ssim(a, neg);
    CHECK(s < 0.0);
    CHECK(s == doctest::Approx(oracle_ssim(a, neg)).epsilon(1e-9));
    CHECK(s == doctest::Approx(kNegativeSsim).epsilon(1e-9));
  }
  SUBCASE("symmetric and invariant to channel reordering") {
    const auto a = structured_image();
    const auto b = noise_image(a.width(), a.height(), 8);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    auto ra = a, rb = b;
    for (size_t p = 0; p < a.pixel_count(); ++p) {
      for (int c = 0; c < 3; ++c) {
        ra.data()[p * 3 + c] = a.data()[p * 3 + (c + 1) % 3];
        rb.data()[p * 3 + c] = b.data()[p * 3 + (c + 1) % 3];
      }
    }
    CHECK(ssim(ra, rb) == doctest::Approx(ssim(a, b)).epsilon(1e-12));
  }
  SUBCASE("range") {
    for (uint64_t s = 0; s < 5; ++s) {
      const double v = ssim(noise_image(24, 24, s), noise_image(24, 24, s + 100));
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  SUBCASE("grayscale option") {
    const auto a = structured_image();
    SsimOptions o;
    o.grayscale = true;
    CHECK(ssim(a, a, o) == 1.0);
    CHECK(ssim(a, noise_image(a.width(), a.height(), 1), o) < 0.5);
  }
  SUBCASE("errors") {
    CHECK_THROWS(ssim(constant(8, 8, 0), constant(8, 8, 0)));
    CHECK_THROWS(ssim(constant(16, 16, 0), constant(16, 17, 0)));
  }
}

TEST_CASE("comparison reports") {
  SUBCASE("percent change") {
    CHECK(std::lround(percent_change(10.18, 22.72)) == 123);
    CHECK(percent_change(0.43, 0.66) == doctest::Approx(53.488).epsilon(1e-4));
    CHECK(percent_change(5.0, 5.0) == 0.0);
    CHECK(percent_change(-2.0, -1.0) == doctest::Approx(50.0));
  }
  SUBCASE("identical arms give zero change") {
    MetricReport r{"cube", "standard", "novel_views", {}, 0, 0};
    r.add("v0", structured_image(), noise_image(128, 128, 1));
    MetricReport o = r;
    o.configuration = "optimized";
    const auto row = compare_reports(r, o);
    CHECK(row.psnr_change_pct() == 0.0);
    CHECK(row.ssim_change_pct() == 0.0);
  }
  SUBCASE("mismatched scenes or protocols") {
    MetricReport a{"cube", "standard", "novel_views", {}, 1, 1};
    MetricReport b{"guitar", "optimized", "novel_views", {}, 1, 1};
    CHECK_THROWS(compare_reports(a, b));
    b.scene = "cube";
    b.protocol = "holdout_split";
    CHECK_THROWS(compare_reports(a, b));
  }
  SUBCASE("CSV matches the golden file") {
    const std::vector<ComparisonRow> rows = {{"robot_dog", "novel_views", 10.18, 22.72, 0.43, 0.66},
                                             {"guitar", "holdout_split", 25.0, 25.0, 0.9, 0.9}};
    std::ifstream in(std::filesystem::path(DRONERF_TEST_SOURCE) / "golden" / "comparison.csv");
    REQUIRE(in);
    std::stringstream golden;
    golden << in.rdbuf();
    CHECK(format_csv(rows) == golden.str());
    const auto table = format_table(rows);
    CHECK(table.find("+123%") != std::string::npos);
    const auto j = comparison_json(rows);
    CHECK(j.size() == 2);
  }
  SUBCASE("report JSON round trip") {
    MetricReport r{"cube", "optimized", "holdout_split", {}, 0, 0};
    r.add("a", structured_image(), structured_image());
    r.add("b", structured_image(), noise_image(128, 128, 3));
    CHECK(r.views.size() == 2);
    CHECK(r.mean_psnr == doctest::Approx((kPsnrCap + r.views[1].psnr_db) / 2));
    const MetricReport back = nlohmann::json(r).get<MetricReport>();
    CHECK(nlohmann::json(back) == nlohmann::json(r));
  }
}
