#pragma once

#include <string>
#include <vector>

#include "vitts/rng.hpp"
#include "vitts/tensor.hpp"

namespace vitts {

// Phoneme vocabulary conventions shared by the generator and the models.
inline constexpr int kVocabSize = 73;
inline constexpr int kPadId = 0;
inline constexpr int kMaskId = 1;
inline constexpr int kSilId = 2;    // generator's silence/tail token
inline constexpr int kBurstId = 3;  // unvoiced noise burst closing each utterance

// Ground-truth acoustics of a parametric room: amplitude decay constant
// tau = rt60 / (3 ln 10), visual cue = (1 - rt60) / 0.8.
struct RoomSpec {
  int room_id = 0;
  double rt60 = 0.0;
  double tau = 0.0;
  double cue = 0.0;

  bool operator==(const RoomSpec&) const = default;
};

RoomSpec make_room(Rng& rng);
RoomSpec room_from_rt60(double rt60);

struct RoomImage {
  int height = 64;
  int width = 64;
  Tensor pixels;  // (H*W) x 4, values in [0, 1]; depth in channel 3
};

// Mean intensity carries the cue (plus clipped texture noise, sigma 0.05);
// the depth channel carries 1 - cue. In textured mode the cue moves into the
// spatial frequency of a stripe pattern instead of the mean.
RoomImage render_room_image(const RoomSpec& spec, Rng& rng, bool textured = false);

struct SceneGenConfig {
  int n_samples = 128;
  int n_rooms = 12;
  int holdout_rooms = 2;
  double train_ratio = 0.75;
  double valid_ratio = 0.125;
  double test_seen_ratio = 0.0625;  // remainder goes to test-unseen
  int min_phonemes = 3;
  int max_phonemes = 6;
  int min_dur = 2;  // frames per content phoneme
  int max_dur = 5;
  int gap_frames = 6;    // silence ahead of the burst, lets tone energy decay
  int burst_frames = 3;  // closing unvoiced burst, broadband decay excitation
  int tail_frames = 64;  // fixed so tail length cannot leak room acoustics
  double f0_min = 100.0;
  double f0_max = 360.0;
  bool textured_images = false;
  uint64_t seed = 1234;
};

struct SceneSample {
  std::string id;
  RoomSpec room;
  std::vector<int> phonemes;   // content tokens + trailing SIL
  std::vector<int> durations;  // frames, sums to mel frame count
  std::vector<double> pitch_hz;  // per frame, 0 = unvoiced
  std::vector<double> dry_wave;
  std::vector<double> reverb_wave;
  Tensor dry_mel;
  Tensor reverb_mel;
  RoomImage image;
  int content_frames = 0;  // frames before the decay tail begins
};

// Deterministic in (text_seed, spec, cfg); the tail segment of the dry
// signal is silence so the room decay is observable after content offset.
SceneSample render_sample(uint64_t text_seed, const RoomSpec& spec,
                          const SceneGenConfig& cfg);

struct ManifestRecord {
  std::string id;
  std::string split;  // train | valid | test-seen | test-unseen
  RoomSpec room;
  std::vector<int> phonemes;
  std::vector<int> durations;
  std::vector<double> pitch_hz;
  int content_frames = 0;
  std::string dry_wav, reverb_wav, dry_mel, reverb_mel, image;  // relative paths

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::vector<const ManifestRecord*> split(const std::string& name) const;
};

// Generates every sample (parallel over ids, per-sample derived seeds),
// writes assets plus manifest.jsonl under out_dir, and returns the manifest.
DatasetManifest generate_dataset(const SceneGenConfig& cfg, const std::string& out_dir);

void write_manifest(const DatasetManifest& m, const std::string& path);
// Throws with the missing path if a referenced asset does not exist.
DatasetManifest load_manifest(const std::string& path);

// Flat binary matrix with a JSON sidecar {frames, bins, dtype}.
void write_mel_bin(const std::string& path, const Tensor& mel);
Tensor read_mel_bin(const std::string& path);

// Assets for one record, resolved against the manifest's directory.
struct LoadedSample {
  ManifestRecord rec;
  Tensor reverb_mel;
  Tensor image;  // (H*W) x 4
  int image_height = 0, image_width = 0;
};
LoadedSample load_sample(const ManifestRecord& rec, const std::string& data_dir);

}  // namespace vitts
