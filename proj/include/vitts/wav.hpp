#pragma once

#include <string>
#include <vector>

namespace vitts {

inline constexpr int kSampleRate = 22050;

// 16-bit PCM mono WAV. Samples are clamped to [-1, 1] on write.
void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate = kSampleRate);
std::vector<double> read_wav(const std::string& path, int expect_rate = kSampleRate);

}  // namespace vitts
