#include "vitts/scenes.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "vitts/acoustic.hpp"
#include "vitts/fft.hpp"
#include "vitts/png_io.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace vitts {

RoomSpec room_from_rt60(double rt60) {
  RoomSpec r;
  r.rt60 = rt60;
  r.tau = rt60 / (3.0 * std::log(10.0));
  r.cue = (1.0 - rt60) / 0.8;
  return r;
}

RoomSpec make_room(Rng& rng) { return room_from_rt60(rng.uniform(0.2, 1.0)); }

RoomImage render_room_image(const RoomSpec& spec, Rng& rng, bool textured) {
  RoomImage img;
  img.pixels = Tensor(img.height * img.width, 4);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int i = y * img.width + x;
      double base = spec.cue;
      if (textured) {
        // cue carried by stripe frequency, not mean intensity; whole cycles
        // keep the row mean flat
        const double freq = 1.0 + std::round(7.0 * spec.cue);
        base = 0.5 + 0.4 * std::sin(2.0 * M_PI * freq * double(x) / img.width);
      }
      for (int c = 0; c < 3; ++c)
        img.pixels(i, c) = std::clamp(base + 0.05 * rng.gaussian(), 0.0, 1.0);
      const double depth = textured ? 0.5 : 1.0 - spec.cue;
      img.pixels(i, 3) = std::clamp(depth + 0.05 * rng.gaussian(), 0.0, 1.0);
    }
  return img;
}

namespace {

void normalize_peak(std::vector<double>& w, double peak) {
  double mx = 0.0;
  for (double s : w) mx = std::max(mx, std::fabs(s));
  if (mx > 0.0)
    for (double& s : w) s *= peak / mx;
}

// linear convolution via FFT, truncated to the dry length
std::vector<double> convolve_trunc(const std::vector<double>& x,
                                   const std::vector<double>& h) {
  size_t n = 1;
  while (n < x.size() + h.size()) n <<= 1;
  std::vector<std::complex<double>> X(n, 0.0), H(n, 0.0);
  for (size_t i = 0; i < x.size(); ++i) X[i] = x[i];
  for (size_t i = 0; i < h.size(); ++i) H[i] = h[i];
  fft_inplace(X, false);
  fft_inplace(H, false);
  for (size_t i = 0; i < n; ++i) X[i] *= H[i];
  fft_inplace(X, true);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = X[i].real();
  return out;
}

Tensor trimmed_mel(const std::vector<double>& wave, int frames) {
  Tensor full = mel_spectrogram(wave);
  if (full.rows() < frames)
    throw std::logic_error("trimmed_mel: fewer frames than durations");
  Tensor out(frames, full.cols());
  out.m() = full.m().topRows(frames);
  return out;
}

}  // namespace

SceneSample render_sample(uint64_t text_seed, const RoomSpec& spec,
                          const SceneGenConfig& cfg) {
  Rng rng(text_seed);
  SceneSample s;
  s.room = spec;

  const int n_content =
      cfg.min_phonemes + int(rng.uniform_int(uint64_t(cfg.max_phonemes - cfg.min_phonemes + 1)));
  for (int i = 0; i < n_content; ++i) {
    s.phonemes.push_back(kBurstId + 1 +
                         int(rng.uniform_int(uint64_t(kVocabSize - kBurstId - 1))));
    s.durations.push_back(cfg.min_dur +
                          int(rng.uniform_int(uint64_t(cfg.max_dur - cfg.min_dur + 1))));
  }
  // every utterance closes with gap + broadband burst so the measurable room
  // decay is excited white and free of lingering tone energy, then the fixed
  // silent tail
  s.phonemes.push_back(kSilId);
  s.durations.push_back(cfg.gap_frames);
  s.phonemes.push_back(kBurstId);
  s.durations.push_back(cfg.burst_frames);
  s.phonemes.push_back(kSilId);
  s.durations.push_back(cfg.tail_frames);

  int total_frames = 0;
  for (int d : s.durations) total_frames += d;
  s.content_frames = total_frames - cfg.tail_frames;

  // harmonic content with a short attack/release ramp per phoneme
  s.dry_wave.assign(size_t(total_frames) * kHopSize, 0.0);
  s.pitch_hz.assign(size_t(total_frames), 0.0);
  const int ramp = kSampleRate / 500;
  size_t cursor = 0;
  int frame_cursor = 0;
  for (size_t k = 0; k < s.phonemes.size(); ++k) {
    const int n = s.durations[k] * kHopSize;
    const bool voiced = s.phonemes[k] != kSilId && s.phonemes[k] != kBurstId;
    const double f0 =
        voiced ? cfg.f0_min * std::pow(cfg.f0_max / cfg.f0_min, rng.uniform()) : 0.0;
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int i = 0; i < n && s.phonemes[k] != kSilId; ++i) {
      double v = 0.0;
      if (voiced) {
        const double t = double(i) / kSampleRate;
        for (int h = 1; h <= 4; ++h)
          v += 0.26 * std::sin(2.0 * M_PI * f0 * h * t + phase * h) / double(h);
      } else {
        v = 0.4 * rng.gaussian();
      }
      double env = 1.0;
      if (i < ramp) env = double(i) / ramp;
      if (n - 1 - i < ramp) env = std::min(env, double(n - 1 - i) / ramp);
      s.dry_wave[cursor + size_t(i)] = env * v;
    }
    for (int f = 0; f < s.durations[k]; ++f)
      s.pitch_hz[size_t(frame_cursor + f)] = f0;
    cursor += size_t(n);
    frame_cursor += s.durations[k];
  }

  // RIR: unit direct path plus exponentially decaying white noise tail
  std::vector<double> rir(size_t(cfg.tail_frames) * kHopSize);
  rir[0] = 1.0;
  for (size_t i = 1; i < rir.size(); ++i)
    rir[i] = std::exp(-double(i) / (spec.tau * kSampleRate)) * rng.gaussian();
  s.reverb_wave = convolve_trunc(s.dry_wave, rir);

  normalize_peak(s.dry_wave, 0.5);
  normalize_peak(s.reverb_wave, 0.5);

  s.dry_mel = trimmed_mel(s.dry_wave, total_frames);
  s.reverb_mel = trimmed_mel(s.reverb_wave, total_frames);

  Rng img_rng(mix_seed(text_seed ^ 0xa11ce));
  s.image = render_room_image(spec, img_rng, cfg.textured_images);
  return s;
}

std::vector<const ManifestRecord*> DatasetManifest::split(const std::string& name) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == name) out.push_back(&r);
  return out;
}

namespace {

ordered_json record_to_json(const ManifestRecord& r) {
  return ordered_json{{"id", r.id},
                      {"split", r.split},
                      {"room_id", r.room.room_id},
                      {"rt60", r.room.rt60},
                      {"tau", r.room.tau},
                      {"cue", r.room.cue},
                      {"phonemes", r.phonemes},
                      {"durations", r.durations},
                      {"pitch_hz", r.pitch_hz},
                      {"content_frames", r.content_frames},
                      {"dry_wav", r.dry_wav},
                      {"reverb_wav", r.reverb_wav},
                      {"dry_mel", r.dry_mel},
                      {"reverb_mel", r.reverb_mel},
                      {"image", r.image}};
}

ManifestRecord record_from_json(const ordered_json& j) {
  ManifestRecord r;
  r.id = j.at("id").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.room.room_id = j.at("room_id").get<int>();
  r.room.rt60 = j.at("rt60").get<double>();
  r.room.tau = j.at("tau").get<double>();
  r.room.cue = j.at("cue").get<double>();
  r.phonemes = j.at("phonemes").get<std::vector<int>>();
  r.durations = j.at("durations").get<std::vector<int>>();
  r.pitch_hz = j.at("pitch_hz").get<std::vector<double>>();
  r.content_frames = j.at("content_frames").get<int>();
  r.dry_wav = j.at("dry_wav").get<std::string>();
  r.reverb_wav = j.at("reverb_wav").get<std::string>();
  r.dry_mel = j.at("dry_mel").get<std::string>();
  r.reverb_mel = j.at("reverb_mel").get<std::string>();
  r.image = j.at("image").get<std::string>();
  return r;
}

}  // namespace

void write_mel_bin(const std::string& path, const Tensor& mel) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_mel_bin: cannot open " + path);
  f.write(reinterpret_cast<const char*>(mel.data()),
          std::streamsize(mel.size() * sizeof(double)));
  ordered_json sidecar{{"frames", mel.rows()}, {"bins", mel.cols()}, {"dtype", "float64"}};
  std::ofstream sj(path + ".json");
  sj << sidecar.dump() << "\n";
}

Tensor read_mel_bin(const std::string& path) {
  std::ifstream sj(path + ".json");
  if (!sj) throw std::runtime_error("read_mel_bin: missing sidecar " + path + ".json");
  ordered_json sidecar;
  sj >> sidecar;
  const int frames = sidecar.at("frames").get<int>();
  const int bins = sidecar.at("bins").get<int>();
  if (sidecar.at("dtype").get<std::string>() != "float64")
    throw std::runtime_error("read_mel_bin: unsupported dtype");
  Tensor mel(frames, bins);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_mel_bin: cannot open " + path);
  f.read(reinterpret_cast<char*>(mel.data()),
         std::streamsize(mel.size() * sizeof(double)));
  if (f.gcount() != std::streamsize(mel.size() * sizeof(double)))
    throw std::runtime_error("read_mel_bin: truncated file " + path);
  return mel;
}

DatasetManifest generate_dataset(const SceneGenConfig& cfg, const std::string& out_dir) {
  if (cfg.holdout_rooms >= cfg.n_rooms)
    throw std::invalid_argument("generate_dataset: holdout must be < rooms");
  if (cfg.n_samples < 4) throw std::invalid_argument("generate_dataset: too few samples");

  fs::create_directories(fs::path(out_dir) / "assets");

  std::vector<RoomSpec> rooms(size_t(cfg.n_rooms));
  for (int i = 0; i < cfg.n_rooms; ++i) {
    Rng rng(derive_seed(cfg.seed, "room", uint64_t(i)));
    rooms[size_t(i)] = make_room(rng);
    rooms[size_t(i)].room_id = i;
  }
  const int visible = cfg.n_rooms - cfg.holdout_rooms;

  const int n_train = int(std::lround(cfg.train_ratio * cfg.n_samples));
  const int n_valid = int(std::lround(cfg.valid_ratio * cfg.n_samples));
  const int n_seen = int(std::lround(cfg.test_seen_ratio * cfg.n_samples));
  const int n_unseen = cfg.n_samples - n_train - n_valid - n_seen;
  if (n_unseen < 1)
    throw std::invalid_argument("generate_dataset: split ratios leave no unseen split");

  DatasetManifest manifest;
  manifest.records.resize(size_t(cfg.n_samples));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < cfg.n_samples; ++i) {
    const bool unseen = i >= cfg.n_samples - n_unseen;
    const RoomSpec& room = unseen
                               ? rooms[size_t(visible + (i % cfg.holdout_rooms))]
                               : rooms[size_t(i % visible)];
    SceneSample s = render_sample(derive_seed(cfg.seed, "sample", uint64_t(i)), room, cfg);

    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "s%04d", i);
    s.id = idbuf;

    ManifestRecord r;
    r.id = s.id;
    if (i < n_train)
      r.split = "train";
    else if (i < n_train + n_valid)
      r.split = "valid";
    else if (i < n_train + n_valid + n_seen)
      r.split = "test-seen";
    else
      r.split = "test-unseen";
    r.room = s.room;
    r.phonemes = s.phonemes;
    r.durations = s.durations;
    r.pitch_hz = s.pitch_hz;
    r.content_frames = s.content_frames;
    r.dry_wav = "assets/" + s.id + "_dry.wav";
    r.reverb_wav = "assets/" + s.id + "_reverb.wav";
    r.dry_mel = "assets/" + s.id + "_dry.mel";
    r.reverb_mel = "assets/" + s.id + "_reverb.mel";
    r.image = "assets/" + s.id + ".png";

    const fs::path root(out_dir);
    write_wav((root / r.dry_wav).string(), s.dry_wave);
    write_wav((root / r.reverb_wav).string(), s.reverb_wave);
    write_mel_bin((root / r.dry_mel).string(), s.dry_mel);
    write_mel_bin((root / r.reverb_mel).string(), s.reverb_mel);
    write_png_rgba((root / r.image).string(), s.image.pixels, s.image.height,
                   s.image.width);
    manifest.records[size_t(i)] = std::move(r);
  }

  write_manifest(manifest, (fs::path(out_dir) / "manifest.jsonl").string());
  return manifest;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_manifest: cannot open " + path);
  for (const auto& r : m.records) f << record_to_json(r).dump() << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_manifest: cannot open " + path);
  const fs::path root = fs::path(path).parent_path();
  DatasetManifest m;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("load_manifest: malformed line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    ManifestRecord r = record_from_json(j);
    for (const std::string& rel :
         {r.dry_wav, r.reverb_wav, r.dry_mel, r.reverb_mel, r.image}) {
      const fs::path p = root / rel;
      if (!fs::exists(p))
        throw std::runtime_error("load_manifest: missing asset " + p.string());
    }
    m.records.push_back(std::move(r));
  }

  // structural check: unseen rooms must not appear in any other split
  std::vector<int> unseen_rooms, other_rooms;
  for (const auto& r : m.records)
    (r.split == "test-unseen" ? unseen_rooms : other_rooms).push_back(r.room.room_id);
  for (int u : unseen_rooms)
    for (int o : other_rooms)
      if (u == o)
        throw std::runtime_error("load_manifest: room " + std::to_string(u) +
                                 " appears in both test-unseen and another split");
  return m;
}

LoadedSample load_sample(const ManifestRecord& rec, const std::string& data_dir) {
  LoadedSample s;
  s.rec = rec;
  s.reverb_mel = read_mel_bin((fs::path(data_dir) / rec.reverb_mel).string());
  s.image = read_png_rgba((fs::path(data_dir) / rec.image).string(), s.image_height,
                          s.image_width);
  return s;
}

}  // namespace vitts
