#include "vitts/acoustic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "vitts/fft.hpp"

namespace vitts {

namespace {

constexpr int kSpecBins = kFftSize / 2 + 1;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

const std::vector<double>& hann_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kWinSize);
    for (int i = 0; i < kWinSize; ++i)
      v[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / kWinSize);
    return v;
  }();
  return w;
}

// 80 x 513 triangular filterbank over the mel scale, unit peak.
const EMat& mel_filterbank() {
  static const EMat fb = [] {
    EMat m = EMat::Zero(kMelBins, kSpecBins);
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(kSampleRate / 2.0);
    std::vector<double> edges(kMelBins + 2);
    for (int i = 0; i < kMelBins + 2; ++i)
      edges[size_t(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (kMelBins + 1));
    for (int b = 0; b < kMelBins; ++b) {
      const double lo = edges[size_t(b)], c = edges[size_t(b) + 1],
                   hi = edges[size_t(b) + 2];
      for (int k = 0; k < kSpecBins; ++k) {
        const double f = double(k) * kSampleRate / kFftSize;
        if (f > lo && f < c)
          m(b, k) = (f - lo) / (c - lo);
        else if (f >= c && f < hi)
          m(b, k) = (hi - f) / (hi - c);
      }
    }
    return m;
  }();
  return fb;
}

// Pseudo-inverse of the filterbank, cached for Griffin-Lim.
const EMat& mel_filterbank_pinv() {
  static const EMat pinv = [] {
    const EMat& fb = mel_filterbank();
    Eigen::CompleteOrthogonalDecomposition<EMat> cod(fb);
    return EMat(cod.pseudoInverse());
  }();
  return pinv;
}

std::vector<double> reflect_pad(const std::vector<double>& x, int pad) {
  const int n = int(x.size());
  if (n < pad + 1) throw std::invalid_argument("mel_spectrogram: input too short");
  std::vector<double> out(size_t(n + 2 * pad));
  for (int i = 0; i < n + 2 * pad; ++i) {
    int src = i - pad;
    if (src < 0) src = -src;
    if (src >= n) src = 2 * (n - 1) - src;
    out[size_t(i)] = x[size_t(src)];
  }
  return out;
}

// Magnitude STFT, centered. Returns frames x 513.
EMat stft_magnitude(const std::vector<double>& wave,
                    std::vector<std::vector<std::complex<double>>>* phases = nullptr) {
  const int frames = mel_frame_count(wave.size());
  const auto padded = reflect_pad(wave, kFftSize / 2);
  const auto& win = hann_window();
  EMat mag(frames, kSpecBins);
  if (phases) phases->assign(size_t(frames), {});
  std::vector<std::complex<double>> buf(kFftSize);
  for (int f = 0; f < frames; ++f) {
    for (int i = 0; i < kFftSize; ++i)
      buf[size_t(i)] = padded[size_t(f) * kHopSize + size_t(i)] * win[size_t(i)];
    fft_inplace(buf, false);
    for (int k = 0; k < kSpecBins; ++k) mag(f, k) = std::abs(buf[size_t(k)]);
    if (phases) (*phases)[size_t(f)] = {buf.begin(), buf.begin() + kSpecBins};
  }
  return mag;
}

// Inverse STFT from a full complex half-spectrum, overlap-add with
// window-square normalization. Output length (frames - 1) * hop.
std::vector<double> istft(const std::vector<std::vector<std::complex<double>>>& spec) {
  const int frames = int(spec.size());
  const auto& win = hann_window();
  const int out_len = (frames - 1) * kHopSize;
  const int padded_len = out_len + kFftSize;
  std::vector<double> acc(size_t(padded_len), 0.0);
  std::vector<double> norm(size_t(padded_len), 0.0);
  std::vector<std::complex<double>> buf(kFftSize);
  for (int f = 0; f < frames; ++f) {
    for (int k = 0; k < kSpecBins; ++k) buf[size_t(k)] = spec[size_t(f)][size_t(k)];
    for (int k = kSpecBins; k < kFftSize; ++k)
      buf[size_t(k)] = std::conj(buf[size_t(kFftSize - k)]);
    fft_inplace(buf, true);
    for (int i = 0; i < kFftSize; ++i) {
      acc[size_t(f) * kHopSize + size_t(i)] += buf[size_t(i)].real() * win[size_t(i)];
      norm[size_t(f) * kHopSize + size_t(i)] += win[size_t(i)] * win[size_t(i)];
    }
  }
  std::vector<double> out(static_cast<size_t>(out_len));
  const int off = kFftSize / 2;  // undo centering
  for (int i = 0; i < out_len; ++i)
    out[size_t(i)] = acc[size_t(i + off)] / std::max(norm[size_t(i + off)], 1e-10);
  return out;
}

}  // namespace

int mel_frame_count(size_t wave_samples) {
  return int(wave_samples / size_t(kHopSize)) + 1;
}

std::vector<MelBand> mel_bands() {
  std::vector<MelBand> bands(kMelBins);
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(kSampleRate / 2.0);
  for (int b = 0; b < kMelBins; ++b) {
    bands[size_t(b)].lo_hz = mel_to_hz(mel_lo + (mel_hi - mel_lo) * b / (kMelBins + 1));
    bands[size_t(b)].center_hz =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * (b + 1) / (kMelBins + 1));
    bands[size_t(b)].hi_hz =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * (b + 2) / (kMelBins + 1));
  }
  return bands;
}

Tensor mel_spectrogram(const std::vector<double>& wave) {
  if (int(wave.size()) < kWinSize)
    throw std::invalid_argument("mel_spectrogram: wave shorter than window");
  const EMat mag = stft_magnitude(wave);
  Tensor out(int(mag.rows()), kMelBins);
  out.m().noalias() = mag * mel_filterbank().transpose();
  for (size_t i = 0; i < out.size(); ++i)
    out.at(i) = std::log(std::max(out.at(i), kLogFloor));
  return out;
}

std::vector<double> griffin_lim(const Tensor& mel, int iterations) {
  if (mel.cols() != kMelBins)
    throw std::invalid_argument("griffin_lim: expected 80 mel bins");
  const int frames = mel.rows();
  EMat linear(frames, kSpecBins);
  {
    EMat expd(frames, kMelBins);
    for (int f = 0; f < frames; ++f)
      for (int b = 0; b < kMelBins; ++b) expd(f, b) = std::exp(mel(f, b));
    linear.noalias() = expd * mel_filterbank_pinv().transpose();
    linear = linear.cwiseMax(0.0);
  }
  // zero-phase start keeps the inversion deterministic
  std::vector<std::vector<std::complex<double>>> spec(static_cast<size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    spec[size_t(f)].resize(kSpecBins);
    for (int k = 0; k < kSpecBins; ++k) spec[size_t(f)][size_t(k)] = linear(f, k);
  }
  std::vector<double> wave = istft(spec);
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::vector<std::complex<double>>> est;
    stft_magnitude(wave, &est);
    for (int f = 0; f < frames && f < int(est.size()); ++f)
      for (int k = 0; k < kSpecBins; ++k) {
        const std::complex<double> c = est[size_t(f)][size_t(k)];
        const double a = std::abs(c);
        spec[size_t(f)][size_t(k)] = a > 1e-12 ? linear(f, k) * c / a
                                               : std::complex<double>(linear(f, k), 0.0);
      }
    wave = istft(spec);
  }
  return wave;
}

EnergyDecayCurve schroeder_decay(const std::vector<double>& signal, int sample_rate) {
  double total = 0.0;
  for (double s : signal) total += s * s;
  if (total <= 0.0)
    throw std::invalid_argument("schroeder_decay: signal has no energy");
  EnergyDecayCurve edc;
  edc.sample_rate = sample_rate;
  edc.db.resize(signal.size());
  double tail = total;
  for (size_t i = 0; i < signal.size(); ++i) {
    edc.db[i] = 10.0 * std::log10(std::max(tail / total, 1e-300));
    tail -= signal[i] * signal[i];
  }
  return edc;
}

RT60Estimate rt60_from_edc(const EnergyDecayCurve& edc) {
  RT60Estimate est;
  size_t i5 = edc.db.size(), i25 = edc.db.size();
  for (size_t i = 0; i < edc.db.size(); ++i) {
    if (i5 == edc.db.size() && edc.db[i] <= est.fit_db_hi) i5 = i;
    if (edc.db[i] <= est.fit_db_lo) {
      i25 = i;
      break;
    }
  }
  if (i25 == edc.db.size())
    throw std::runtime_error("rt60: decay curve never reaches -25 dB");
  if (i25 <= i5 + 1) throw std::runtime_error("rt60: fit segment too short");

  // least squares of dB against time over [i5, i25]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(i25 - i5 + 1);
  for (size_t i = i5; i <= i25; ++i) {
    const double x = double(i) / edc.sample_rate;
    const double y = edc.db[i];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (!(slope < 0.0)) throw std::runtime_error("rt60: non-negative decay slope");
  est.seconds = -60.0 / slope;
  return est;
}

RT60Estimate rt60_of_wave(const std::vector<double>& wave, int sample_rate) {
  return rt60_from_edc(schroeder_decay(wave, sample_rate));
}

double rte(const std::vector<double>& generated, const std::vector<double>& reference) {
  return std::fabs(rt60_of_wave(generated).seconds - rt60_of_wave(reference).seconds);
}

namespace {

// Orthonormal DCT-II of an 80-vector, first 13 coefficients.
void dct13(const double* x, double* c) {
  constexpr int N = kMelBins;
  for (int k = 0; k < 13; ++k) {
    double acc = 0.0;
    for (int n = 0; n < N; ++n)
      acc += x[n] * std::cos(M_PI * k * (2.0 * n + 1.0) / (2.0 * N));
    const double scale = k == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
    c[k] = scale * acc;
  }
}

}  // namespace

double mcd(const Tensor& mel_a, const Tensor& mel_b) {
  if (mel_a.rows() != mel_b.rows() || mel_a.cols() != mel_b.cols())
    throw std::invalid_argument("mcd: frame count mismatch " + mel_a.shape_str() +
                                " vs " + mel_b.shape_str());
  if (mel_a.cols() != kMelBins) throw std::invalid_argument("mcd: expected 80 bins");
  const double k = 10.0 / std::log(10.0);
  double acc = 0.0;
  double ca[13], cb[13];
  for (int f = 0; f < mel_a.rows(); ++f) {
    dct13(&mel_a.vec()[size_t(f) * kMelBins], ca);
    dct13(&mel_b.vec()[size_t(f) * kMelBins], cb);
    double d2 = 0.0;
    for (int d = 1; d < 13; ++d) d2 += (ca[d] - cb[d]) * (ca[d] - cb[d]);
    acc += k * std::sqrt(2.0 * d2);
  }
  return acc / double(mel_a.rows());
}

}  // namespace vitts
