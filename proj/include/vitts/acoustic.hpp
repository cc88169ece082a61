#pragma once

#include <string>
#include <vector>

#include "vitts/tensor.hpp"
#include "vitts/wav.hpp"

namespace vitts {

// Fixed feature provenance shared by every mel in the project.
inline constexpr int kFftSize = 1024;
inline constexpr int kHopSize = 256;
inline constexpr int kWinSize = 1024;
inline constexpr int kMelBins = 80;
inline constexpr double kLogFloor = 1e-5;

// frames x 80 natural-log mel magnitudes; frames = floor(N / hop) + 1
// (centered STFT with reflection padding).
Tensor mel_spectrogram(const std::vector<double>& wave);

int mel_frame_count(size_t wave_samples);

// Center frequencies / triangle supports of the mel filterbank, exposed for
// the spectral-placement tests.
struct MelBand {
  double lo_hz, center_hz, hi_hz;
};
std::vector<MelBand> mel_bands();

// Iterative phase-recovery inversion of a log-mel matrix. Output length is
// (frames - 1) * hop samples.
std::vector<double> griffin_lim(const Tensor& mel, int iterations = 60);

struct EnergyDecayCurve {
  std::vector<double> db;  // per-sample, db[0] == 0, nonincreasing
  int sample_rate = kSampleRate;
};

// Schroeder backward integration of signal energy.
EnergyDecayCurve schroeder_decay(const std::vector<double>& signal,
                                 int sample_rate = kSampleRate);

struct RT60Estimate {
  double seconds = 0.0;
  double fit_db_hi = -5.0;
  double fit_db_lo = -25.0;
};

// T20-style estimate: least-squares line on the -5..-25 dB segment of the
// EDC, extrapolated to 60 dB. Throws if the curve never reaches -25 dB.
RT60Estimate rt60_from_edc(const EnergyDecayCurve& edc);

RT60Estimate rt60_of_wave(const std::vector<double>& wave,
                          int sample_rate = kSampleRate);

// |RT60(gen) - RT60(ref)|, in seconds.
double rte(const std::vector<double>& generated, const std::vector<double>& reference);

// Mel cepstral distortion in dB between frame-aligned log-mel matrices:
// DCT-II cepstra, coefficients 1..12, (10/ln 10) * sqrt(2 * sum d^2),
// averaged over frames.
double mcd(const Tensor& mel_a, const Tensor& mel_b);

}  // namespace vitts
