#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "vitts/acoustic.hpp"
#include "vitts/png_io.hpp"
#include "vitts/scenes.hpp"

using namespace vitts;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("vitts_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("room mapping endpoints and tau inverse") {
  CHECK(room_from_rt60(1.0).cue == doctest::Approx(0.0));
  CHECK(room_from_rt60(0.2).cue == doctest::Approx(1.0));
  CHECK(room_from_rt60(0.690775527898).tau == doctest::Approx(0.1).epsilon(1e-9));
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    auto r = make_room(rng);
    CHECK(r.rt60 >= 0.2);
    CHECK(r.rt60 <= 1.0);
    CHECK(r.tau == doctest::Approx(r.rt60 / (3.0 * std::log(10.0))).epsilon(1e-12));
    CHECK(r.cue == doctest::Approx((1.0 - r.rt60) / 0.8).epsilon(1e-12));
  }
}

TEST_CASE("room image statistics carry the cue") {
  auto spec = room_from_rt60(0.6);  // cue = 0.5
  double mean_acc = 0.0;
  Tensor first;
  for (int d = 0; d < 100; ++d) {
    Rng rng(1000 + uint64_t(d));
    auto img = render_room_image(spec, rng);
    double m = 0.0;
    for (int i = 0; i < img.pixels.rows(); ++i)
      for (int c = 0; c < 3; ++c) m += img.pixels(i, c);
    m /= double(img.pixels.rows() * 3);
    mean_acc += m;
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(img.pixels.at(i) >= 0.0);
      CHECK(img.pixels.at(i) <= 1.0);
    }
    if (d == 0) first = img.pixels;
    if (d == 1) CHECK(first.vec() != img.pixels.vec());  // texture noise differs
  }
  CHECK(std::fabs(mean_acc / 100.0 - 0.5) < 0.02);
}

TEST_CASE("rendered sample closes the loop through the rt60 estimator") {
  SceneGenConfig cfg;
  for (double rt60 : {0.25, 0.6, 0.95}) {
    auto spec = room_from_rt60(rt60);
    auto s = render_sample(42, spec, cfg);

    // durations account for every mel frame
    int total = 0;
    for (int d : s.durations) total += d;
    CHECK(total == s.reverb_mel.rows());
    CHECK(s.reverb_mel.cols() == 80);
    CHECK(s.dry_mel.rows() == total);
    CHECK(int(s.pitch_hz.size()) == total);

    // decay tail of the reverberant wave matches the room's rt60
    std::vector<double> tail(s.reverb_wave.begin() + s.content_frames * kHopSize,
                             s.reverb_wave.end());
    const double est = rt60_of_wave(tail).seconds;
    CHECK(std::fabs(est - rt60) / rt60 < 0.10);

    // dry tail is silence: the fit must fail (or find nearly no reverb)
    std::vector<double> dry_tail(s.dry_wave.begin() + s.content_frames * kHopSize,
                                 s.dry_wave.end());
    bool fit_failed = false;
    double dry_rt60 = 0.0;
    try {
      dry_rt60 = rt60_of_wave(dry_tail).seconds;
    } catch (const std::exception&) {
      fit_failed = true;
    }
    CHECK((fit_failed || dry_rt60 < 0.1));
  }
}

TEST_CASE("sample generation is deterministic in the seed") {
  SceneGenConfig cfg;
  auto spec = room_from_rt60(0.5);
  auto a = render_sample(7, spec, cfg);
  auto b = render_sample(7, spec, cfg);
  CHECK(a.phonemes == b.phonemes);
  CHECK(a.reverb_wave == b.reverb_wave);
  CHECK(a.image.pixels.vec() == b.image.pixels.vec());
  auto c = render_sample(8, spec, cfg);
  CHECK(a.reverb_wave != c.reverb_wave);
}

TEST_CASE("png round trip preserves quantized pixels") {
  Rng rng(9);
  Tensor px(16 * 16, 4);
  for (size_t i = 0; i < px.size(); ++i) px.at(i) = rng.uniform();
  auto dir = temp_dir("png");
  write_png_rgba((dir / "x.png").string(), px, 16, 16);
  int h = 0, w = 0;
  Tensor back = read_png_rgba((dir / "x.png").string(), h, w);
  CHECK(h == 16);
  CHECK(w == 16);
  for (size_t i = 0; i < px.size(); ++i)
    CHECK(std::fabs(back.at(i) - px.at(i)) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("dataset generation, splits, manifest round trip") {
  SceneGenConfig cfg;
  cfg.n_samples = 32;
  cfg.n_rooms = 6;
  cfg.holdout_rooms = 2;
  cfg.seed = 77;
  auto dir = temp_dir("dataset");
  auto manifest = generate_dataset(cfg, dir.string());
  CHECK(manifest.records.size() == 32);
  CHECK(manifest.split("train").size() == 24);
  CHECK(manifest.split("valid").size() == 4);
  CHECK(manifest.split("test-seen").size() == 2);
  CHECK(manifest.split("test-unseen").size() == 2);

  // unseen rooms are disjoint from every other split
  std::set<int> unseen_rooms, other_rooms;
  for (const auto& r : manifest.records)
    (r.split == "test-unseen" ? unseen_rooms : other_rooms).insert(r.room.room_id);
  for (int u : unseen_rooms) CHECK(other_rooms.count(u) == 0);

  auto loaded = load_manifest((dir / "manifest.jsonl").string());
  CHECK(loaded.records.size() == manifest.records.size());
  for (size_t i = 0; i < loaded.records.size(); ++i)
    CHECK(loaded.records[i] == manifest.records[i]);

  // write(load(write)) is byte-identical
  write_manifest(loaded, (dir / "roundtrip.jsonl").string());
  CHECK(slurp(dir / "manifest.jsonl") == slurp(dir / "roundtrip.jsonl"));

  // loading with a missing asset names the path
  fs::remove(dir / loaded.records[3].reverb_mel);
  try {
    load_manifest((dir / "manifest.jsonl").string());
    FAIL("expected missing-asset error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(loaded.records[3].reverb_mel) != std::string::npos);
  }
}

TEST_CASE("same master seed reproduces the dataset byte for byte") {
  SceneGenConfig cfg;
  cfg.n_samples = 16;
  cfg.n_rooms = 4;
  cfg.holdout_rooms = 1;
  cfg.seed = 31;
  auto d1 = temp_dir("repro1");
  auto d2 = temp_dir("repro2");
  generate_dataset(cfg, d1.string());
  generate_dataset(cfg, d2.string());
  CHECK(slurp(d1 / "manifest.jsonl") == slurp(d2 / "manifest.jsonl"));
  for (const auto& rec : load_manifest((d1 / "manifest.jsonl").string()).records) {
    CHECK(slurp(d1 / rec.reverb_wav) == slurp(d2 / rec.reverb_wav));
    CHECK(slurp(d1 / rec.image) == slurp(d2 / rec.image));
  }
}

TEST_CASE("image mean intensity predicts rt60 with R^2 > 0.95") {
  SceneGenConfig cfg;
  std::vector<double> xs, ys;
  Rng room_rng(55);
  for (int i = 0; i < 60; ++i) {
    auto spec = make_room(room_rng);
    Rng rng(derive_seed(55, "img", uint64_t(i)));
    auto img = render_room_image(spec, rng);
    double m = 0.0;
    for (int p = 0; p < img.pixels.rows(); ++p)
      for (int c = 0; c < 3; ++c) m += img.pixels(p, c);
    xs.push_back(m / double(img.pixels.rows() * 3));
    ys.push_back(spec.rt60);
  }
  const size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / double(n);
  double ss_res = 0, ss_tot = 0;
  for (size_t i = 0; i < n; ++i) {
    const double pred = slope * xs[i] + intercept;
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - sy / double(n)) * (ys[i] - sy / double(n));
  }
  CHECK(1.0 - ss_res / ss_tot > 0.95);
}

TEST_CASE("textured mode keeps the mean flat but varies the pattern") {
  auto lo = room_from_rt60(0.95);  // cue ~ 0.06
  auto hi = room_from_rt60(0.25);  // cue ~ 0.94
  Rng r1(3), r2(3);
  auto img_lo = render_room_image(lo, r1, true);
  auto img_hi = render_room_image(hi, r2, true);
  auto mean_rgb = [](const RoomImage& im) {
    double m = 0;
    for (int p = 0; p < im.pixels.rows(); ++p)
      for (int c = 0; c < 3; ++c) m += im.pixels(p, c);
    return m / double(im.pixels.rows() * 3);
  };
  CHECK(std::fabs(mean_rgb(img_lo) - mean_rgb(img_hi)) < 0.05);
  CHECK(img_lo.pixels.vec() != img_hi.pixels.vec());
}

TEST_CASE("generator rejects invalid configurations") {
  SceneGenConfig cfg;
  cfg.n_rooms = 4;
  cfg.holdout_rooms = 4;
  CHECK_THROWS(generate_dataset(cfg, temp_dir("bad").string()));
}
